"""4x4 Lax pair with spectral parameter and the spectral-curve identity."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .dynamics import field_complex
from .errors import OffOrbit, ZeroKappa
from .phase import ComplexState, Params, integrals_complex, orbit_residuals

KAPPA_RING = (0.1, 10.0)


def _check_kappa(kappa: complex) -> complex:
    kappa = complex(kappa)
    if kappa == 0:
        raise ZeroKappa("spectral parameter must be nonzero")
    return kappa


def _L(c, kappa: complex, lam: float, with_constant: bool = True) -> np.ndarray:
    w1, w2, w3, x1, x2, y1, y2, z1, z2 = c
    k = kappa
    k4 = 4 * k if with_constant else 0.0
    l2 = 2 * lam if with_constant else 0.0
    return np.array(
        [
            [l2, x2 / k, -2 * w2, z2 / k],
            [-x1 / k, -l2, -z1 / k, 2 * w1],
            [-2 * w1, z2 / k, -2 * w3, -y1 / k - k4],
            [-z1 / k, 2 * w2, y2 / k + k4, 2 * w3],
        ],
        dtype=complex,
    )


def lax_matrices(c: ComplexState, kappa: complex, params: Params) -> tuple[np.ndarray, np.ndarray]:
    """``L(kappa)`` and ``M(kappa)`` with ``L' = [L, M]``, prime meaning ``d/d(i t)``."""
    k = _check_kappa(kappa)
    w1, w2, w3 = c.w1, c.w2, c.w3
    L = _L(c, k, params.lam)
    M = np.array(
        [
            [-w3 / 2, 0, w2 / 2, 0],
            [0, w3 / 2, 0, -w1 / 2],
            [w1 / 2, 0, w3 / 2, k],
            [0, -w2 / 2, -k, -w3 / 2],
        ],
        dtype=complex,
    )
    return L, M


def lax_derivative(c: ComplexState, kappa: complex, params: Params) -> np.ndarray:
    """``L'`` along the flow; ``L`` is affine in the coordinates, so this is ``L`` of the field."""
    k = _check_kappa(kappa)
    return _L(field_complex(c, params), k, params.lam, with_constant=False)


def lax_residual(c: ComplexState, kappa: complex, params: Params) -> float:
    L, M = lax_matrices(c, kappa, params)
    return float(np.linalg.norm(lax_derivative(c, kappa, params) - (L @ M - M @ L)))


def char_poly(A: np.ndarray) -> np.ndarray:
    """Coefficients of ``det(mu I - A)``, highest degree first (Faddeev-LeVerrier)."""
    n = A.shape[0]
    coeffs = np.zeros(n + 1, dtype=A.dtype)
    coeffs[0] = 1
    Mk = np.zeros_like(A)
    eye = np.eye(n, dtype=A.dtype)
    for k in range(1, n + 1):
        Mk = A @ Mk + coeffs[k - 1] * eye
        coeffs[k] = -np.trace(A @ Mk) / k
    return coeffs


class SpectralCoeffs(NamedTuple):
    """Curve ``mu^4 + c2 mu^2 + c0 = 0``."""

    c2: complex
    c0: complex


def spectral_coeffs(s, g, k, h, params: Params) -> SpectralCoeffs:
    """Coefficients of the spectral curve at ``s = 2 kappa^2``."""
    lam2 = params.lam**2
    p2, r4 = params.p2, params.r2**2
    c2 = -4 * (p2 / s - (2 * h + lam2) + 2 * s)
    c0 = 4 * (r4 / s**2 + (2 / s) * (4 * g - 2 * p2 * h - p2 * lam2) + 4 * (k + 2 * lam2 * h) - 8 * lam2 * s)
    return SpectralCoeffs(c2, c0)


class SpectralReport(NamedTuple):
    deviation: float  # even coefficients, relative to max(1, |coefficient|)
    odd: float  # largest odd-power coefficient
    computed: tuple[complex, ...]
    expected: SpectralCoeffs


def spectral_report(c: ComplexState, kappa: complex, params: Params, orbit_tol: float = 1e-8) -> SpectralReport:
    """Compare ``det(mu I - i L)`` with the spectral-curve polynomial.

    The curve is written for ``i L``: ``det(mu I - L)`` has the same constant
    term and the opposite ``mu^2`` coefficient.
    """
    k = _check_kappa(kappa)
    res = float(np.abs(orbit_residuals(c, params)).max())
    if res > orbit_tol:
        raise OffOrbit(f"orbit residual {res:.3e} exceeds {orbit_tol:.1e}")
    L, _ = lax_matrices(c, k, params)
    cp = char_poly(1j * L)
    g, kk, h = integrals_complex(c, params)
    exp = spectral_coeffs(2 * k * k, g, kk, h, params)
    dev = max(abs(cp[2] - exp.c2) / max(1.0, abs(exp.c2)), abs(cp[4] - exp.c0) / max(1.0, abs(exp.c0)))
    odd = max(abs(cp[1]), abs(cp[3]))
    return SpectralReport(float(dev), float(odd), tuple(complex(v) for v in cp), exp)


def spectral_check(c: ComplexState, kappa: complex, params: Params) -> float:
    """Largest coefficient deviation between the characteristic and curve polynomials."""
    rep = spectral_report(c, kappa, params)
    return max(rep.deviation, rep.odd)


def sample_kappa(rng: np.random.Generator, ring: tuple[float, float] = KAPPA_RING) -> complex:
    """Random spectral parameter, log-uniform modulus on the ring, uniform phase."""
    lo, hi = ring
    mod = float(np.exp(rng.uniform(np.log(lo), np.log(hi))))
    return complex(mod * np.exp(1j * rng.uniform(0, 2 * np.pi)))


def lax_eigenvalues(c: ComplexState, kappa: complex, params: Params) -> np.ndarray:
    """Eigenvalues of ``L``, sorted by real then imaginary part."""
    L, _ = lax_matrices(c, kappa, params)
    ev = np.linalg.eigvals(L)
    return ev[np.lexsort((ev.imag, ev.real))]
