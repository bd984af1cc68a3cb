"""Per-charge implicit equation of motion and its 3x3 solve.

The momentum-force balance for charge j reads

    d/dt [m0 gamma v_j] = q_j sum_{k != j} (E_jk + (1/c) v_j x (e_jk x E_jk))

The left side equals m0 gamma Gamma(v_j)(a_j) with Gamma(v)(h) = h +
gamma^2 (u, h) u, u = v/c. Substituting the affine field split
E_jk = E_hist + C_jk(a_j) and dividing by the relativistic mass m = gamma m0
turns the balance into one 3x3 linear system per charge,

    phi(a_j) = rhs,
    phi = Gamma(v_j) - sum_k (q_j / m) H_jk @ C_jk,
    rhs = (q_j / m) sum_k H_jk(E_hist_jk),

where H_jk is the Lorentz-force bracket as a matrix. A vanishing determinant
of phi is a singular point of the dynamics and bounds the maximal solution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constants import Constants
from .errors import SingularPhi
from .fields import FieldSplit, lorentz_force_bracket, lorentz_map
from .retardation import RetardedGeometry
from .trajectory import ChargeSpec, Vec3

DEFAULT_DET_FLOOR = 1e-8


@dataclass
class KinematicState:
    """Velocity-derived relativistic quantities of one charge."""

    v: Vec3
    u: Vec3
    gamma: float
    m_rel: float
    p: Vec3

    @classmethod
    def from_velocity(cls, v: Vec3, m0: float, c: float) -> "KinematicState":
        u = np.asarray(v, dtype=float) / c
        u2 = float(np.dot(u, u))
        if u2 >= 1.0:
            raise ValueError(f"superluminal velocity |v| = {np.sqrt(u2):.6f} c")
        gamma = 1.0 / np.sqrt(1.0 - u2)
        return cls(v=np.asarray(v, dtype=float), u=u, gamma=gamma,
                   m_rel=gamma * m0, p=m0 * gamma * np.asarray(v, dtype=float))


@dataclass
class PhiAssembly:
    """Assembled acceleration operator, its determinant, and the right side."""

    phi: np.ndarray  # 3x3
    det: float
    rhs: Vec3


def gamma_map(v: Vec3, c: float) -> np.ndarray:
    """Matrix of h -> h + gamma^2 (u, h) u; maps acceleration to (1/(m0 gamma)) dp/dt."""
    u = np.asarray(v, dtype=float) / c
    u2 = float(np.dot(u, u))
    gamma2 = 1.0 / (1.0 - u2)
    return np.eye(3) + gamma2 * np.outer(u, u)


def gamma_map_inverse(v: Vec3, c: float) -> np.ndarray:
    """Closed-form inverse h -> h - (u, h) u, valid because gamma^2 (1 - |u|^2) = 1."""
    u = np.asarray(v, dtype=float) / c
    return np.eye(3) - np.outer(u, u)


def det3(m: np.ndarray) -> float:
    """Cofactor-expansion determinant of a 3x3 matrix."""
    return float(
        m[0, 0] * (m[1, 1] * m[2, 2] - m[1, 2] * m[2, 1])
        - m[0, 1] * (m[1, 0] * m[2, 2] - m[1, 2] * m[2, 0])
        + m[0, 2] * (m[1, 0] * m[2, 1] - m[1, 1] * m[2, 0])
    )


def assemble(j: int, geoms: list[RetardedGeometry], kin: KinematicState,
             splits: list[FieldSplit], charge: ChargeSpec,
             constants: Constants) -> PhiAssembly:
    """Build phi and rhs for charge j from its resolved pair data.

    ``geoms`` and ``splits`` are aligned lists over the partners k != j in
    ascending k order (the deterministic reduction order).
    """
    c = constants.c
    phi = gamma_map(kin.v, c)
    rhs = np.zeros(3)
    q_over_m = charge.q / kin.m_rel
    for g, split in zip(geoms, splits):
        h_map = lorentz_map(kin.v, g.e, c)
        phi = phi - q_over_m * (h_map @ split.couple)
        rhs = rhs + q_over_m * (h_map @ split.e_hist)
    return PhiAssembly(phi=phi, det=det3(phi), rhs=rhs)


def _phi_scale(phi: np.ndarray) -> float:
    """Determinant scale of phi: its infinity norm cubed."""
    return float(np.max(np.sum(np.abs(phi), axis=1)) ** 3)


def solve_accel(asm: PhiAssembly, det_floor: float = DEFAULT_DET_FLOOR,
                t: float = 0.0, j: int = -1) -> Vec3:
    """Solve phi(a) = rhs by a pivoted 3x3 solve.

    Raises SingularPhi when |det phi| < det_floor * max(1, scale of phi),
    which is the singular point bounding the maximal solution.
    """
    if abs(asm.det) < det_floor * max(1.0, _phi_scale(asm.phi)):
        raise SingularPhi(t, j, asm.det)
    return np.linalg.solve(asm.phi, asm.rhs)


def det_phi(asm: PhiAssembly) -> float:
    return asm.det


def momentum_residual(charge: ChargeSpec, kin: KinematicState, a: Vec3,
                      pair_fields: list[tuple[Vec3, Vec3]],
                      constants: Constants) -> float:
    """|dp/dt - force| with the force evaluated through the field route.

    ``pair_fields`` holds (e_jk, E_jk(a)) per partner; the force applies the
    Lorentz bracket with explicit cross products, independent of the matrix
    assembly that produced ``a``. A small residual closes the loop between
    the field split and the operator formulation.
    """
    c = constants.c
    dp = charge.m0 * kin.gamma * (a + kin.gamma**2 * float(np.dot(kin.u, a)) * kin.u)
    force = np.zeros(3)
    for e, E in pair_fields:
        force = force + lorentz_force_bracket(e, E, kin.v, c)
    force = charge.q * force
    return float(np.linalg.norm(dp - force))
