"""Pairwise electric field of a moving point charge, split for the implicit solve.

The field on charge j from charge k is the retarded Coulomb term plus its
linear light-travel extrapolation plus a wave term proportional to the second
total time derivative of the line-of-sight unit vector:

    E = K q_k [ e/rho^2 + (1/c)(edot/rho - 2 rhodot e/rho^2) + (1/c^2) eddot ]

with K = 1/(4 pi eps0). Because eddot is evaluated along both trajectories,
it contains the observer's *current* acceleration, which is the unknown of
the equation of motion. This module therefore evaluates the field as an
affine map of that acceleration:

    E(a) = E_hist + C(a),        C = (K q_k / c^2) G

where E_hist collects every history-determined term and G is the 3x3
coupling map. Differentiating e twice and discarding the a-dependent part
gives, with kappa = c - (e, w), tprime = ds/dt, and w, b the retarded source
velocity and acceleration:

    kappadot   = -(edot, w) - (e, b) tprime
    tpp_hist   = -(edot, v_j)/kappa - (c - (e, v_j)) kappadot / kappa^2
    Rdd_hist   = -b tprime^2 - w tpp_hist
    rhodd_hist = (edot, Rdot) + (e, Rdd_hist)
    eddot_hist = (Rdd_hist - rhodd_hist e)/rho - (2 rhodot/rho) edot

and the coefficient of the observer acceleration is

    G(h) = (1/rho) [ h + kappa^{-1} (e, h) (w - c e) ]      ("derived")

An alternative bracket with (c e + w) in place of (w - c e) is selectable as
"paper_literal"; the finite-difference oracle in the validation module
discriminates between the two, and the derived form is the one that matches.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constants import Constants
from .retardation import RetardedGeometry
from .trajectory import Vec3

COUPLING_FORMS = ("derived", "paper_literal")


@dataclass
class FieldSplit:
    """Affine decomposition E(a_j) = e_hist + couple @ a_j for one pair."""

    e_hist: Vec3
    couple: np.ndarray  # 3x3


def second_derivative_history(g: RetardedGeometry, v_obs: Vec3, c: float) -> Vec3:
    """History-determined part of the second derivative of the unit vector e."""
    kappadot = -float(np.dot(g.edot, g.w)) - float(np.dot(g.e, g.b)) * g.tprime
    tpp_hist = (
        -float(np.dot(g.edot, v_obs)) / g.kappa
        - (c - float(np.dot(g.e, v_obs))) * kappadot / g.kappa**2
    )
    rdd_hist = -g.b * g.tprime**2 - g.w * tpp_hist
    rhodd_hist = float(np.dot(g.edot, g.rdot)) + float(np.dot(g.e, rdd_hist))
    return (rdd_hist - rhodd_hist * g.e) / g.rho - (2.0 * g.rhodot / g.rho) * g.edot


def accel_coupling(g: RetardedGeometry, form: str, c: float) -> np.ndarray:
    """3x3 coefficient of the observer acceleration inside the eddot term."""
    if form == "derived":
        bracket = g.w - c * g.e
    elif form == "paper_literal":
        bracket = c * g.e + g.w
    else:
        raise ValueError(f"unknown coupling form {form!r} (expected one of {COUPLING_FORMS})")
    return (np.eye(3) + np.outer(bracket, g.e) / g.kappa) / g.rho


def field_history_part(g: RetardedGeometry, v_obs: Vec3, q_k: float,
                       constants: Constants) -> Vec3:
    """All terms of the pair field that do not involve the observer acceleration."""
    c = constants.c
    eddot_hist = second_derivative_history(g, v_obs, c)
    coulomb = g.e / g.rho**2
    extrap = (g.edot / g.rho - 2.0 * g.rhodot * g.e / g.rho**2) / c
    return constants.coulomb * q_k * (coulomb + extrap + eddot_hist / c**2)


def pair_field_split(g: RetardedGeometry, v_obs: Vec3, q_k: float,
                     constants: Constants, form: str = "derived") -> FieldSplit:
    """Full affine field decomposition for one pair."""
    couple = (constants.coulomb * q_k / constants.c**2) * accel_coupling(g, form, constants.c)
    return FieldSplit(
        e_hist=field_history_part(g, v_obs, q_k, constants),
        couple=couple,
    )


def lorentz_map(v_obs: Vec3, e: Vec3, c: float) -> np.ndarray:
    """Map h -> h + (1/c) v x (e x h), the Lorentz-force bracket as a matrix.

    By the triple-product identity, v x (e x h) = e (v, h) - h (v, e), so the
    matrix is (1 - (v, e)/c) I + (1/c) e v^T.
    """
    return (1.0 - float(np.dot(v_obs, e)) / c) * np.eye(3) + np.outer(e, v_obs) / c


def lorentz_force_bracket(e: Vec3, E: Vec3, v_obs: Vec3, c: float) -> Vec3:
    """E + (1/c) v x (e x E), evaluated with explicit cross products.

    Kept as a separate route from lorentz_map so momentum-residual checks do
    not share code with the matrix assembly they verify.
    """
    return E + np.cross(v_obs, np.cross(e, E)) / c
