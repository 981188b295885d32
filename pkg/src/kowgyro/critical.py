"""Critical set of the momentum map G x K x H.

Three families cover the critical set:

* ``L``: ``w1 = w2 = z1 = z2 = 0`` (equilibria and axial pendulums),
* ``N``: ``F1 = F2 = 0``, closed by solving for ``y1, y2``,
* ``O``: ``R1 = R2 = 0`` (equivalently ``U1 = U2 = 0``), closed the same way.

On ``N`` and ``O`` a partial integral ``S`` exists whose value is the curve
parameter of the corresponding bifurcation surface.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .dynamics import field_complex
from .errors import DegenerateDenominator, SamplingFailure, SingularDelta
from .special import pendulum_state
from .phase import (
    ComplexState,
    Params,
    complexify,
    integral_gradients,
    integrals_complex,
    orbit_residuals,
    realness_defect,
)

STRATA = ("L", "N", "O")
SVD_TOL = 1e-7
DENOM_TOL = 1e-12


class PartialState(NamedTuple):
    """Complex coordinates with ``y1, y2`` left open for a closure formula."""

    w1: complex
    w2: complex
    w3: complex
    x1: complex
    x2: complex
    z1: complex
    z2: complex

    @classmethod
    def of(cls, c: ComplexState) -> "PartialState":
        return cls(c.w1, c.w2, c.w3, c.x1, c.x2, c.z1, c.z2)


def _with_y(part: PartialState, y1, y2) -> ComplexState:
    w1, w2, w3, x1, x2, z1, z2 = part
    return ComplexState(w1, w2, w3, x1, x2, y1, y2, z1, z2)


def _check(value, what: str, scale: float = 1.0):
    if abs(value) <= DENOM_TOL * scale:
        raise DegenerateDenominator(f"{what} vanishes ({abs(value):.3e})")


# --- family L ----------------------------------------------------------------


def residual_L(c: ComplexState) -> np.ndarray:
    return np.abs([c.w1, c.w2, c.z1, c.z2])


# --- family N ----------------------------------------------------------------


def F_polys(c: ComplexState, params: Params) -> tuple[complex, complex]:
    w1, w2, w3, x1, x2, y1, y2, z1, z2 = c
    lam = params.lam
    P = x2 * z1 * w1 + x1 * z2 * w2 - x1 * x2 * w3 + 2 * z1 * z2 * lam
    F1 = (
        (w1 * w2 + lam * w3) * (w2 * x1 + lam * z1) * lam * y1
        - w2 * (w1**2 + x1) * P
        - x2 * (w1 * w3 + z1) * (w1 * z1 - x1 * w3) * lam
        + (x1 * w3**2 - 2 * z1 * w1 * w3 - z1**2) * z2 * lam**2
    )
    F2 = (
        (w1 * w2 + lam * w3) * (w1 * x2 + lam * z2) * lam * y2
        - w1 * (w2**2 + x2) * P
        - x1 * (w2 * w3 + z2) * (w2 * z2 - x2 * w3) * lam
        + (x2 * w3**2 - 2 * z2 * w2 * w3 - z2**2) * z1 * lam**2
    )
    return F1, F2


def residual_N(c: ComplexState, params: Params) -> np.ndarray:
    if params.lam == 0:
        raise ValueError("the N family is defined for nonzero gyrostatic momentum")
    return np.abs(F_polys(c, params))


def close_N(part: PartialState, params: Params) -> ComplexState:
    """Solve ``F1 = F2 = 0`` for ``y1, y2``.

    Vanishing of ``w1 w2 + lam w3`` or of ``w2 x1 + lam z1``, ``w1 x2 + lam z2``
    marks the lower strata and raises :class:`DegenerateDenominator`.
    """
    w1, w2, w3, x1, x2, z1, z2 = part
    lam = params.lam
    if lam == 0:
        raise ValueError("the N family is defined for nonzero gyrostatic momentum")
    e = w1 * w2 + lam * w3
    d1 = w2 * x1 + lam * z1
    d2 = w1 * x2 + lam * z2
    _check(e, "w1 w2 + lam w3")
    _check(d1, "w2 x1 + lam z1")
    _check(d2, "w1 x2 + lam z2")
    P = x2 * z1 * w1 + x1 * z2 * w2 - x1 * x2 * w3 + 2 * z1 * z2 * lam
    y1 = (
        w2 * (w1**2 + x1) * P
        + x2 * (w1 * w3 + z1) * (w1 * z1 - x1 * w3) * lam
        - (x1 * w3**2 - 2 * z1 * w1 * w3 - z1**2) * z2 * lam**2
    ) / (e * d1 * lam)
    y2 = (
        w1 * (w2**2 + x2) * P
        + x1 * (w2 * w3 + z2) * (w2 * z2 - x2 * w3) * lam
        - (x2 * w3**2 - 2 * z2 * w2 * w3 - z2**2) * z1 * lam**2
    ) / (e * d2 * lam)
    return _with_y(part, y1, y2)


def S_N(c: ComplexState, params: Params) -> complex:
    """Partial integral on N."""
    w1, w2, w3, x1, x2, y1, y2, z1, z2 = c
    lam = params.lam
    den = 2 * lam * (w1 * w2 + lam * w3)
    _check(den, "lam (w1 w2 + lam w3)")
    return (x1 * x2 * w3 - x2 * z1 * w1 - x1 * z2 * w2 - lam * z1 * z2) / den


# --- family O ----------------------------------------------------------------


def R_polys(c: ComplexState, params: Params) -> tuple[complex, complex]:
    w1, w2, w3, x1, x2, y1, y2, z1, z2 = c
    lam = params.lam
    common = x2 * z1 * w1 + x1 * z2 * w2 + z1 * z2 * (w3 + lam)
    R1 = (y1 * w2 + x2 * w1 + z2 * (w3 + lam)) * w1 * (w3 - lam) + common
    R2 = (y2 * w1 + x1 * w2 + z1 * (w3 + lam)) * w2 * (w3 - lam) + common
    return R1, R2


def residual_O(c: ComplexState, params: Params) -> np.ndarray:
    return np.abs(R_polys(c, params))


def close_O(part: PartialState, params: Params) -> ComplexState:
    """Solve ``U1 = U2 = 0`` for ``y1, y2``; needs ``w1 w2 (w3 - lam) != 0``."""
    w1, w2, w3, x1, x2, z1, z2 = part
    lam = params.lam
    den = 2 * w1 * w2 * (w3 - lam)
    _check(den, "w1 w2 (w3 - lam)")
    shared = x2 * z1 * w1 + x1 * z2 * w2 + 2 * lam * z1 * z2
    y1 = -2 * (w1 * z2 * (w3 - lam) ** 2 + (x2 * w1**2 + z1 * z2 + 2 * lam * w1 * z2) * (w3 - lam) + shared) / den
    y2 = -2 * (w2 * z1 * (w3 - lam) ** 2 + (x1 * w2**2 + z1 * z2 + 2 * lam * w2 * z1) * (w3 - lam) + shared) / den
    return _with_y(part, y1, y2)


def S_O(c: ComplexState, params: Params) -> complex:
    """Partial integral on O."""
    w1, w2, w3, x1, x2, y1, y2, z1, z2 = c
    lam = params.lam
    den = 2 * w1 * w2 * (w3 - lam)
    _check(den, "w1 w2 (w3 - lam)")
    return (x2 * z1 * w1 + x1 * z2 * w2 + z1 * z2 * (w3 + lam)) / den


def T_O(c: ComplexState, s_value: complex) -> complex:
    return c.x1 * c.x2 + c.z1 * c.z2 - 2 * c.w1 * c.w2 * s_value


def _U_parts(c: ComplexState, lam: float):
    w1, w2, w3, x1, x2, y1, y2, z1, z2 = c
    A1 = y2 * w1 + x1 * w2 + z1 * (w3 + lam)
    A2 = x2 * w1 + y1 * w2 + z2 * (w3 + lam)
    return A1, A2


def U1(c: ComplexState, params: Params) -> complex:
    A1, A2 = _U_parts(c, params.lam)
    return A1 / c.w1 - A2 / c.w2


def U2(c: ComplexState, params: Params) -> complex:
    """``w1 w2 U1'`` with the prime the derivative along the flow in ``i t``."""
    lam = params.lam
    w1, w2, w3, x1, x2, y1, y2, z1, z2 = c
    dw1, dw2, dw3, dx1, dx2, dy1, dy2, dz1, dz2 = field_complex(c, params)
    A1, A2 = _U_parts(c, lam)
    dA1 = dy2 * w1 + y2 * dw1 + dx1 * w2 + x1 * dw2 + dz1 * (w3 + lam) + z1 * dw3
    dA2 = dx2 * w1 + x2 * dw1 + dy1 * w2 + y1 * dw2 + dz2 * (w3 + lam) + z2 * dw3
    dU1 = (dA1 * w1 - A1 * dw1) / w1**2 - (dA2 * w2 - A2 * dw2) / w2**2
    return w1 * w2 * dU1


# --- Lagrange multipliers on the rank-two stratum -----------------------------


def _lagrange_rows(c: ComplexState, params: Params):
    """Coefficients of the linear system ``a_S S + a_T T + r = 0`` (two rows)."""
    w1, w2, w3, x1, x2, y1, y2, z1, z2 = c
    lam = params.lam
    e = w1 * w2 + lam * w3
    row1 = (
        2 * x2 * w1 + 2 * e * w2 - 2 * lam**2 * w2 + 2 * z2 * lam,
        w2,
        x2 * y2 * w1 - z1 * z2 * w2 + x2 * z1 * w3 + y2 * z2 * lam,
    )
    row2 = (
        2 * x1 * w2 + 2 * e * w1 - 2 * lam**2 * w1 + 2 * z1 * lam,
        w1,
        x1 * y1 * w2 - z1 * z2 * w1 + x1 * z2 * w3 + y1 * z1 * lam,
    )
    return row1, row2


def lagrange_residual(c: ComplexState, params: Params, S: complex, T: complex) -> np.ndarray:
    return np.abs([aS * S + aT * T + r for aS, aT, r in _lagrange_rows(c, params)])


def lagrange_delta(c: ComplexState, params: Params) -> complex:
    w1, w2, w3, x1, x2, y1, y2, z1, z2 = c
    return x1 * w2**2 - x2 * w1**2 - (z2 * w1 - z1 * w2) * params.lam


def lagrange_ST(c: ComplexState, params: Params) -> tuple[complex, complex]:
    """Multipliers ``(S, T)`` with ``2 dG + S dK + (T - p^2) dH = 0`` along the X-fields.

    Solved from the two ``w``-equations; their determinant is ``-2 Delta``.
    """
    (a1, b1, r1), (a2, b2, r2) = _lagrange_rows(c, params)
    delta = lagrange_delta(c, params)
    scale = max(1.0, abs(a1 * b2), abs(a2 * b1))
    if abs(delta) <= DENOM_TOL * scale:
        raise SingularDelta(f"Delta vanishes ({abs(delta):.3e})")
    det = a1 * b2 - a2 * b1
    S = (-r1 * b2 + r2 * b1) / det
    T = (-a1 * r2 + a2 * r1) / det
    return S, T


def lagrange_ST_closed(c: ComplexState, params: Params) -> tuple[complex, complex]:
    """Closed-form ``(S, T)``; second coding of :func:`lagrange_ST`."""
    w1, w2, w3, x1, x2, y1, y2, z1, z2 = c
    lam = params.lam
    delta = lagrange_delta(c, params)
    if delta == 0:
        raise SingularDelta("Delta vanishes")
    two_s = (
        x2 * y2 * w1**2
        - x1 * y1 * w2**2
        + (x2 * z1 * w1 - x1 * z2 * w2) * w3
        + (y2 * z2 * w1 - y1 * z1 * w2) * lam
    ) / delta
    A1 = (x1 * w2 + lam * z1) * y1 + (x1 * w3 - z1 * w1) * z2
    B1 = (w2**2 + x2) * w1 + lam * w2 * (w3 - lam) + lam * z2
    A2 = (x2 * w1 + lam * z2) * y2 + (x2 * w3 - z2 * w2) * z1
    B2 = (w1**2 + x1) * w2 + lam * w1 * (w3 - lam) + lam * z1
    return two_s / 2, (A1 * B1 - A2 * B2) / delta


# --- closed-form Poisson brackets ---------------------------------------------


def bracket_U_closed(s_value: float, h: float, params: Params) -> float:
    """Closed form of ``{U1, U2}`` on O in terms of ``S`` and the energy."""
    ht = h - params.lam**2 / 2
    c = params.p2**2 - params.r2**2
    return -4.0 / s_value * (3 * s_value**4 - 2 * s_value**3 * ht + c / 4)


def bracket_F_factor(s_value: float, h: float, params: Params) -> complex:
    """The factor ``C(s, h)`` of the closed-form ``{F1, F2}``."""
    lam = params.lam
    rad = 2 * s_value**2 - (2 * h + lam**2) * s_value + params.p2
    return (8 * s_value**3 * lam**2 - params.r2**2) / s_value * np.sqrt(complex(rad))


def bracket_F_closed(c: ComplexState, params: Params, h: float | None = None, s_value=None) -> complex:
    """Closed form of ``{F1, F2}`` on N, principal branches of the radicals."""
    w1, w2, w3, x1, x2, y1, y2, z1, z2 = c
    lam = params.lam
    if h is None:
        h = integrals_complex(c, params)[2].real
    if s_value is None:
        s_value = S_N(c, params).real
    e = complex(w1 * w2 + lam * w3)
    prod = complex((w2 * x1 + lam * z1) * (w1 * x2 + lam * z2))
    return math.sqrt(2) * lam * e**1.5 * np.sqrt(prod) * bracket_F_factor(s_value, h, params)


def bracket_F_closed_sq(c: ComplexState, params: Params, h: float, s_value: float) -> complex:
    """Square of :func:`bracket_F_closed`, free of branch choices."""
    w1, w2, w3, x1, x2, y1, y2, z1, z2 = c
    lam = params.lam
    e = w1 * w2 + lam * w3
    prod = (w2 * x1 + lam * z1) * (w1 * x2 + lam * z2)
    rad = 2 * s_value**2 - (2 * h + lam**2) * s_value + params.p2
    factor = (8 * s_value**3 * lam**2 - params.r2**2) / s_value
    return 2 * lam**2 * e**3 * prod * factor**2 * rad


# --- momentum map rank -------------------------------------------------------


def tangent_fields(c: ComplexState) -> np.ndarray:
    """Six fields tangent to the orbit, as rows over the chart coordinates."""
    w1, w2, w3, x1, x2, y1, y2, z1, z2 = c
    X = np.zeros((6, 9), dtype=complex)
    X[0, 0] = X[1, 1] = X[2, 2] = 1.0
    X[3, 4], X[3, 6], X[3, 7], X[3, 8] = z2, z1, -x1 / 2, -y1 / 2
    X[4, 3], X[4, 5], X[4, 7], X[4, 8] = z1, z2, -y2 / 2, -x2 / 2
    X[5, 3], X[5, 4], X[5, 5], X[5, 6] = x1, -x2, y1, -y2
    return X


def momentum_matrix(c: ComplexState, params: Params) -> np.ndarray:
    """6x3 matrix of the tangent fields applied to (G, K, H)."""
    return tangent_fields(c) @ integral_gradients(c, params).T


def momentum_singular_values(c: ComplexState, params: Params) -> np.ndarray:
    return np.linalg.svd(momentum_matrix(c, params), compute_uv=False)


def _rank_floor(c: ComplexState, params: Params) -> float:
    # size of the product before cancellation; keeps rounding-level values at
    # an equilibrium from counting as rank
    return float(np.linalg.norm(tangent_fields(c)) * np.linalg.norm(integral_gradients(c, params)))


def momentum_rank(c: ComplexState, params: Params, tol_svd: float = SVD_TOL) -> int:
    """Singular values above ``tol_svd`` times the larger of the top value and the product scale."""
    sv = momentum_singular_values(c, params)
    cut = tol_svd * max(float(sv[0]), _rank_floor(c, params))
    return int(np.sum(sv > cut))


class RankReport(NamedTuple):
    rank: int
    singular_values: tuple[float, ...]
    gap: float  # ratio between the last kept and first dropped singular value


def rank_report(c: ComplexState, params: Params, tol_svd: float = SVD_TOL) -> RankReport:
    sv = momentum_singular_values(c, params)
    rank = momentum_rank(c, params, tol_svd)
    if 0 < rank < len(sv):
        gap = float(sv[rank - 1] / max(sv[rank], np.finfo(float).tiny))
    else:
        gap = math.inf
    return RankReport(rank, tuple(float(v) for v in sv), gap)


# --- stratum membership and sampling ----------------------------------------


@dataclass(frozen=True)
class StratumResidual:
    which: str
    values: tuple[float, ...]
    s_value: float | None = None


def stratum_residual(c: ComplexState, params: Params, which: str) -> StratumResidual:
    if which == "L":
        return StratumResidual("L", tuple(residual_L(c)))
    if which == "N":
        return StratumResidual("N", tuple(residual_N(c, params)), float(S_N(c, params).real))
    if which == "O":
        return StratumResidual("O", tuple(residual_O(c, params)), float(S_O(c, params).real))
    raise ValueError(f"unknown stratum {which!r}")


def _partial_from_params(v: np.ndarray) -> PartialState:
    w1 = complex(v[0], v[1])
    x1 = complex(v[3], v[4])
    z1 = complex(v[5], v[6])
    return PartialState(w1, w1.conjugate(), complex(v[2]), x1, x1.conjugate(), z1, z1.conjugate())


def _real_constraints(c: ComplexState, params: Params) -> np.ndarray:
    e1, _, e3 = orbit_residuals(c, params)
    return np.array([e1.real, e1.imag, e3.real])


def newton_close(
    closure: Callable[[PartialState, Params], ComplexState],
    params: Params,
    v0: np.ndarray,
    tol: float = 1e-13,
    max_iter: int = 60,
) -> ComplexState | None:
    """Gauss-Newton (minimum-norm steps) on the orbit constraints.

    The unknowns are the seven real parameters of a real partial state; the
    closure supplies ``y1, y2``.  Returns ``None`` when it fails to converge.
    """
    v = np.array(v0, dtype=float)
    h = 1e-7
    for _ in range(max_iter):
        try:
            r = _real_constraints(closure(_partial_from_params(v), params), params)
            if not np.all(np.isfinite(r)):
                return None
            if np.abs(r).max() < tol:
                return closure(_partial_from_params(v), params)
            J = np.empty((3, 7))
            for i in range(7):
                e = np.zeros(7)
                e[i] = h * (1 + abs(v[i]))
                rp = _real_constraints(closure(_partial_from_params(v + e), params), params)
                rm = _real_constraints(closure(_partial_from_params(v - e), params), params)
                J[:, i] = (rp - rm) / (2 * e[i])
        except DegenerateDenominator:
            return None
        step = np.linalg.lstsq(J, r, rcond=None)[0]
        if not np.all(np.isfinite(step)):
            return None
        v = v - step
    return None


def _well_conditioned(c: ComplexState, params: Params, which: str, bound: float) -> bool:
    if max(abs(z) for z in c) > bound:
        return False
    lam = params.lam
    w1, w2, w3, x1, x2, y1, y2, z1, z2 = c
    if which == "N":
        dens = (w1 * w2 + lam * w3, w2 * x1 + lam * z1, lagrange_delta(c, params))
    else:
        dens = (w1 * w2 * (w3 - lam), lagrange_delta(c, params))
    if min(abs(d) for d in dens) < 1e-2:
        return False
    rep = rank_report(c, params)
    sv = rep.singular_values
    return rep.rank == 2 and sv[1] > 1e-3 * sv[0] and sv[2] < 1e-10 * sv[0]


def sample_stratum(
    which: str,
    params: Params,
    rng: np.random.Generator,
    max_tries: int = 200,
    bound: float = 50.0,
) -> ComplexState:
    """A real point of the L, N or O family away from its degenerate loci.

    L points are axial pendulum states.  N and O points come from random free
    coordinates closed by the family's formula and pushed onto the orbit by
    Gauss-Newton; seeds that fail or land near a lower stratum are retried.
    """
    if which == "L":
        phi = rng.uniform(-math.pi, math.pi)
        phidot = rng.normal()
        sign = 1 if rng.random() < 0.5 else -1
        return complexify(pendulum_state("P3", phi, phidot, sign, params))
    closure = {"N": close_N, "O": close_O}[which]
    for _ in range(max_tries):
        c = newton_close(closure, params, rng.normal(size=7))
        if c is None:
            continue
        if realness_defect(c) < 1e-9 and _well_conditioned(c, params, which, bound):
            return c
    raise SamplingFailure(f"no well-conditioned {which} point after {max_tries} seeds")
