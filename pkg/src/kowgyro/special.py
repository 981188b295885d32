"""Closed-form critical motions: equilibria, pendulum families, the rank-one family."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import BranchFailure, InadmissibleFamily
from .phase import INERTIA, ComplexState, Params, PhaseState, orbit_residuals

FAMILIES = ("P1", "P2", "P3")


def equilibria(params: Params) -> list[PhaseState]:
    """The four equilibria, ordered (e1, e2) = (+,+), (+,-), (-,+), (-,-)."""
    out = []
    for e1 in (1, -1):
        for e2 in (1, -1):
            out.append(PhaseState(np.zeros(3), [e1 * params.a, 0, 0], [0, e2 * params.b, 0]))
    return out


def pendulum_state(family: str, phi: float, phidot: float, sign: int, params: Params) -> PhaseState:
    """Point of a pendulum-type periodic motion with angle ``phi`` and rate ``phidot``.

    ``P3`` rotates about the symmetry axis and survives a nonzero gyrostatic
    momentum; ``P1`` and ``P2`` exist only for ``lam == 0``.
    """
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}")
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    if family != "P3" and params.lam != 0:
        raise InadmissibleFamily(f"{family} requires zero gyrostatic momentum")
    a, b = params.a, params.b
    c, s = math.cos(phi), math.sin(phi)
    if family == "P1":
        return PhaseState([phidot, 0, 0], [sign * a, 0, 0], [0, b * c, -b * s])
    if family == "P2":
        return PhaseState([0, phidot, 0], [a * c, 0, a * s], [0, sign * b, 0])
    return PhaseState([0, 0, phidot], [a * c, -a * s, 0], [sign * b * s, sign * b * c, 0])


def pendulum_frequency_sq(family: str, sign: int, params: Params) -> float:
    """Coefficient ``w`` in ``phi'' = -w sin(phi)`` for the family."""
    if family == "P1":
        return params.b / INERTIA[0]
    if family == "P2":
        return params.a / INERTIA[1]
    return (params.a + sign * params.b) / INERTIA[2]


# --- rank-one family ---------------------------------------------------------


def rank1_quintic(sigma: float, params: Params) -> np.ndarray:
    """Coefficients (highest degree first) of the quintic linking ``u`` and ``sigma``."""
    L2 = params.lam**2
    m = L2 + sigma
    r4 = params.r2**2
    return np.array(
        [
            L2 * m**2,
            m * (2 * params.p2 * L2**2 - m**3 * sigma) * sigma,
            r4 * L2**3 * sigma**2,
            2 * r4 * L2**2 * sigma**4 * m**2,
            0.0,
            -(r4**2) * L2**4 * sigma**6,
        ]
    )


class QuinticRoot(NamedTuple):
    u: float
    residual: float
    multiple: bool


def _polish(coeffs: np.ndarray, x: complex, iters: int = 8) -> complex:
    d = np.polyder(coeffs)
    for _ in range(iters):
        fx = np.polyval(coeffs, x)
        dfx = np.polyval(d, x)
        if dfx == 0:
            break
        step = fx / dfx
        x -= step
        if abs(step) <= 1e-16 * max(1.0, abs(x)):
            break
    return x


def _rel_residual(coeffs: np.ndarray, x: float) -> float:
    terms = np.abs(coeffs) * np.abs(x) ** np.arange(len(coeffs) - 1, -1, -1)
    return float(abs(np.polyval(coeffs, x)) / max(terms.max(), np.finfo(float).tiny))


def rank1_solve_u(sigma: float, params: Params, imag_tol: float = 1e-7) -> list[QuinticRoot]:
    """Real roots ``u`` of the quintic: companion eigenvalues, then Newton polishing."""
    if sigma == 0 or params.lam == 0:
        raise ValueError("need sigma != 0 and lam != 0")
    coeffs = rank1_quintic(sigma, params)
    # normalize to tame the wide coefficient range
    coeffs = coeffs / np.abs(coeffs).max()
    roots = [_polish(coeffs, complex(z)) for z in np.roots(coeffs)]
    scale = max(1.0, max(abs(z) for z in roots))
    real = sorted(float(z.real) for z in roots if abs(z.imag) <= imag_tol * scale)
    out = []
    for i, u in enumerate(real):
        close = [v for j, v in enumerate(real) if j != i and abs(v - u) <= 1e-6 * max(1.0, abs(u))]
        out.append(QuinticRoot(u, _rel_residual(coeffs, u), bool(close)))
    return out


def rank1_Q(w: float, sigma: float, u: float, params: Params) -> float:
    L2 = params.lam**2
    m = L2 + sigma
    num = sigma * u**3 + m * (L2 * w**2 + sigma**2 * (2 * w - sigma)) * u**2 + params.r2**2 * L2**2 * sigma**4
    return num / (2 * params.r2 * L2 * sigma**2 * m * u * w)


def _poly_coeffs(sigma: float, u: float, params: Params) -> tuple[float, float, float]:
    L2 = params.lam**2
    m = L2 + sigma
    r2 = params.r2
    c0 = sigma * (u**3 - m * sigma**2 * u**2 + r2**2 * L2**2 * sigma**3) / (m * L2 * u**2)
    lin = 2 * sigma**2 / (L2 * u)
    return lin * (u + r2 * L2), lin * (u - r2 * L2), c0


def rank1_polys(sigma: float, u: float, params: Params, w):
    """The two quadratics ``P+(w), P-(w)`` governing ``(dw/dt)^2``."""
    bp, bm, c0 = _poly_coeffs(sigma, u, params)
    w = np.asarray(w, dtype=float)
    return w**2 + bp * w + c0, w**2 + bm * w + c0


def rank1_dwdt_sq(sigma: float, u: float, params: Params, w):
    """Right-hand side of ``(dw/dt)^2 = -(lam^2 / 4 sigma^2) P+ P-``."""
    pp, pm = rank1_polys(sigma, u, params, w)
    return -(params.lam**2) / (4 * sigma**2) * pp * pm


def rank1_windows(sigma: float, u: float, params: Params) -> list[tuple[float, float]]:
    """Intervals of ``w > 0`` with ``P+ P- <= 0``: the real-motion region.

    The endpoints are positive real roots of ``P+ P-`` (turning points of
    the elliptic motion).
    """
    bp, bm, c0 = _poly_coeffs(sigma, u, params)
    roots = list(np.roots([1.0, bp, c0])) + list(np.roots([1.0, bm, c0]))
    pts = sorted({float(z.real) for z in roots if abs(z.imag) < 1e-12 * max(1.0, abs(z)) and z.real > 0})
    edges = [0.0] + pts + [math.inf]
    windows = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        mid = 0.5 * (lo + hi) if math.isfinite(hi) else lo + 1.0
        if lo == hi:
            continue
        if rank1_dwdt_sq(sigma, u, params, mid) >= 0:
            windows.append((lo, hi))
    return windows


@dataclass(frozen=True)
class Rank1Data:
    sigma: float
    u: float
    w: float
    q: complex


def rank1_data(sigma: float, u: float, w: float, params: Params) -> Rank1Data:
    """Pick the branch ``q`` of ``q^4 - 2 Q q^2 + 1 = 0`` at ``w``.

    Both roots ``q^2`` are tried; the smaller orbit residual wins, then
    ``|q| <= 1``, then ``Im q^2 >= 0``.
    """
    Q = rank1_Q(w, sigma, u, params)
    disc = cmath.sqrt(Q * Q - 1)
    best = None
    for q2 in (Q + disc, Q - disc):
        q = cmath.sqrt(q2)
        if abs(q**4 - 2 * Q * q**2 + 1) > 1e-10 * max(1.0, abs(Q)):
            continue
        d = Rank1Data(sigma, u, w, q)
        c = _rank1_point(d, params)
        res = float(np.abs(orbit_residuals(c, params)).max())
        key = (round(res, 12), abs(q) > 1 + 1e-12, q2.imag < 0)
        if best is None or key < best[0]:
            best = (key, d)
    if best is None:
        raise BranchFailure(f"no admissible q at w={w}")
    return best[1]


def _rank1_point(d: Rank1Data, params: Params) -> ComplexState:
    lam, sigma, u, w, q = params.lam, d.sigma, d.u, d.w, d.q
    L2 = lam**2
    m = L2 + sigma
    r2 = params.r2
    sw = cmath.sqrt(w)
    q2 = q * q
    base = sigma * (1 + sigma / L2 - r2**2 * L2 * sigma / u**2)
    return ComplexState(
        q * sw,
        sw / q,
        complex(lam * w / sigma),
        (r2 * L2 * sigma**2 - m * u * q2 * w) / (sigma * u),
        (r2 * L2 * sigma**2 - m * u * w / q2) / (sigma * u),
        base + r2 * L2 / u * q2 * w,
        base + r2 * L2 / u * w / q2,
        -r2 * lam * sigma / u * sw / q + m / lam * q * sw,
        -r2 * lam * sigma / u * q * sw + m / lam * sw / q,
    )


def rank1_point(d: Rank1Data, params: Params, tol: float = 1e-9) -> ComplexState:
    """Complex coordinates of the rank-one motion at ``w``."""
    Q = rank1_Q(d.w, d.sigma, d.u, params)
    if abs(d.q**4 - 2 * Q * d.q**2 + 1) > tol * max(1.0, abs(Q)):
        raise BranchFailure("q does not solve its quartic")
    return _rank1_point(d, params)


def rank1_u_definition(c: ComplexState, sigma: float, params: Params) -> complex:
    """The constant ``u`` recomputed from a point of the motion."""
    w = c.w1 * c.w2
    return (w - sigma) ** 2 * (params.lam**2 + sigma) - sigma * c.x1 * c.x2


def rank1_sigma_from_s(s_value: float, u: float, params: Params) -> float:
    """Inverse of ``s = -u / (2 lam^2 sigma)``, the partial-integral value on N."""
    return -u / (2 * params.lam**2 * s_value)


class Rank1Pair(NamedTuple):
    sigma: float
    u: float
    window: tuple[float, float]


def admissible_pairs(params: Params, sigmas, min_width: float = 1e-6) -> list[Rank1Pair]:
    """``(sigma, u)`` pairs with a bounded, non-degenerate real-motion window."""
    out = []
    for sigma in sigmas:
        sigma = float(sigma)
        if sigma == 0 or sigma == -params.lam**2:
            continue
        for root in rank1_solve_u(sigma, params):
            if root.multiple or root.u == 0:
                continue
            for lo, hi in rank1_windows(sigma, root.u, params):
                if math.isfinite(hi) and hi - lo > min_width:
                    out.append(Rank1Pair(sigma, root.u, (lo, hi)))
    return out
