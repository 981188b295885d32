"""Equations of motion, trajectory integration and a finite-difference Lie-Poisson bracket."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import StepFailure
from .phase import INERTIA, ComplexState, Params, PhaseState, integrals_vec

_INV_INERTIA = 1.0 / INERTIA


def _vec(s) -> np.ndarray:
    return s.as_vector() if isinstance(s, PhaseState) else np.asarray(s, dtype=float)


def field_real(s: PhaseState | np.ndarray, params: Params) -> np.ndarray:
    """Right-hand side of the normalized Euler-Poisson equations (inertia 2:2:1)."""
    o1, o2, o3, a1, a2, a3, b1, b2, b3 = _vec(s).tolist()
    lam = params.lam
    return np.array(
        [
            0.5 * (o2 * (o3 - lam) + b3),
            -0.5 * (o1 * (o3 - lam) + a3),
            a2 - b1,
            a2 * o3 - a3 * o2,
            a3 * o1 - a1 * o3,
            a1 * o2 - a2 * o1,
            b2 * o3 - b3 * o2,
            b3 * o1 - b1 * o3,
            b1 * o2 - b2 * o1,
        ]
    )


def field_complex(c: ComplexState, params: Params) -> ComplexState:
    """Derivative with respect to ``i t`` in the complex chart.

    ``d/dt complexify(s) == 1j * field_complex(complexify(s))``.
    """
    w1, w2, w3, x1, x2, y1, y2, z1, z2 = c
    lam = params.lam
    return ComplexState(
        -0.5 * (w1 * (w3 - lam) + z1),
        0.5 * (w2 * (w3 - lam) + z2),
        0.5 * (y2 - y1),
        -x1 * w3 + z1 * w1,
        x2 * w3 - z2 * w2,
        -y1 * w3 + z2 * w1,
        y2 * w3 - z1 * w2,
        0.5 * (x1 * w2 - y2 * w1),
        0.5 * (-x2 * w1 + y1 * w2),
    )


# Dormand-Prince 5(4) tableau
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_E = _B - np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)
_ORDER = 5
MIN_TOL = 1e-15  # relative; smaller targets only make the step size crawl


def dopri(
    f: Callable[[np.ndarray], np.ndarray],
    y0,
    t_end: float,
    tol: float = 1e-12,
    h0: float | None = None,
    max_steps: int = 10_000_000,
    post_step: Callable[[np.ndarray], np.ndarray] | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Integrate ``y' = f(y)`` from 0 to ``t_end`` with an embedded 5(4) pair.

    Step size follows a PI controller on the RMS of the local error scaled by
    ``tol * (1 + |y|)``.  Returns the accepted times and states.
    """
    if not tol >= MIN_TOL:
        raise StepFailure(f"tolerance {tol:g} is below double-precision rounding ({MIN_TOL:g})")
    y = np.array(y0, dtype=float)
    n = y.size
    K = np.empty((7, n))
    K[0] = f(y)
    if h0 is None:
        scale = 1.0 + np.abs(y)
        d0 = np.sqrt(np.mean((y / scale) ** 2))
        d1 = np.sqrt(np.mean((K[0] / scale) ** 2))
        h0 = 1e-6 if min(d0, d1) < 1e-5 else 0.01 * d0 / d1
        h0 = min(h0, abs(t_end)) if t_end else h0
    h = max(h0, 1e-12)
    t = 0.0
    times = [0.0]
    states = [y.copy()]
    err_prev = 1e-4
    beta1, beta2 = 0.7 / _ORDER, 0.4 / _ORDER
    steps = 0
    while t < t_end:
        if steps >= max_steps:
            raise StepFailure(f"exceeded {max_steps} steps at t={t}")
        if h < 1e-14 * max(1.0, abs(t)):
            raise StepFailure(f"step size underflow at t={t} (h={h:.3e})")
        last = t + h >= t_end
        if last:
            h = t_end - t
        for i in range(1, 7):
            K[i] = f(y + h * (np.dot(_A[i], K[:i])))
        y_new = y + h * (_B @ K)
        if not np.all(np.isfinite(y_new)):
            h *= 0.2
            continue
        err = h * (_E @ K)
        sc = tol * (1.0 + np.maximum(np.abs(y), np.abs(y_new)))
        e = math.sqrt(float(np.mean((err / sc) ** 2)))
        steps += 1
        if e <= 1.0:
            t = t_end if last else t + h
            y = y_new if post_step is None else post_step(y_new)
            K[0] = K[6] if post_step is None else f(y)
            times.append(t)
            states.append(y.copy())
            fac = 5.0 if e == 0 else 0.9 * e ** (-beta1) * err_prev**beta2
            err_prev = max(e, 1e-4)
            h *= min(5.0, max(0.2, fac))
        else:
            h *= max(0.2, 0.9 * e ** (-1.0 / _ORDER))
    return np.array(times), np.array(states)


def project_to_orbit(y: np.ndarray, params: Params) -> np.ndarray:
    """Nearest point with ``|alpha| = a``, ``|beta| = b``, ``alpha . beta = 0``."""
    W = np.column_stack([y[3:6] / params.a, y[6:9] / params.b])
    u, _, vt = np.linalg.svd(W, full_matrices=False)
    Q = u @ vt
    out = y.copy()
    out[3:6] = params.a * Q[:, 0]
    out[6:9] = params.b * Q[:, 1]
    return out


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Accepted integration steps.

    ``states`` is an ``(N, 9)`` array of real phase vectors; ``integrals``
    holds ``(g, k, h)`` per row and ``drift`` its deviation from row 0.
    """

    times: np.ndarray
    states: np.ndarray
    integrals: np.ndarray
    drift: np.ndarray
    casimirs: np.ndarray

    def __len__(self) -> int:
        return len(self.times)

    def state(self, i: int) -> PhaseState:
        return PhaseState.from_vector(self.states[i])

    @property
    def max_drift(self) -> np.ndarray:
        return np.abs(self.drift).max(axis=0)

    @property
    def max_casimir(self) -> float:
        return float(np.abs(self.casimirs).max())


def _casimirs(states: np.ndarray, params: Params) -> np.ndarray:
    al, be = states[:, 3:6], states[:, 6:9]
    return np.column_stack(
        [
            np.einsum("ij,ij->i", al, al) - params.a**2,
            np.einsum("ij,ij->i", be, be) - params.b**2,
            np.einsum("ij,ij->i", al, be),
        ]
    )


def integrate(
    s0: PhaseState | np.ndarray,
    params: Params,
    t_end: float,
    tol: float = 1e-12,
    project: bool = False,
    max_steps: int = 10_000_000,
) -> Trajectory:
    """Integrate the equations of motion and record conservation diagnostics.

    Orbit projection is off by default: drift of the integrals and Casimirs is
    itself a quality measure and projection would hide it.
    """
    post = (lambda y: project_to_orbit(y, params)) if project else None
    times, states = dopri(
        lambda y: field_real(y, params), _vec(s0), t_end, tol, max_steps=max_steps, post_step=post
    )
    ints = integrals_vec(states, params)
    return Trajectory(times, states, ints, ints - ints[0], _casimirs(states, params))


def momentum(y: np.ndarray, params: Params) -> np.ndarray:
    """Total angular momentum ``I omega + lambda e3``."""
    return INERTIA * y[:3] + np.array([0.0, 0.0, params.lam])


def _fd_gradient(f, y: np.ndarray, h_fd: float | None):
    grads = []
    for i in range(9):
        step = h_fd if h_fd is not None else 1e-6 * (1.0 + abs(y[i]))
        e = np.zeros(9)
        e[i] = step
        grads.append((f(y + e) - f(y - e)) / (2 * step))
    return np.array(grads)


def bracket_oracle(f, g, s: PhaseState | np.ndarray, params: Params, h_fd: float | None = None):
    """Lie-Poisson bracket ``{f, g}`` at ``s`` by central differences.

    ``f`` and ``g`` take a 9-vector ``(omega, alpha, beta)`` and may be
    complex valued.  Partials in ``omega`` are converted to partials in the
    momentum ``M = I omega + lambda e3``.
    """
    y = _vec(s)
    df = _fd_gradient(f, y, h_fd)
    dg = _fd_gradient(g, y, h_fd)
    M = momentum(y, params)
    alpha, beta = y[3:6], y[6:9]
    fM, gM = df[:3] * _INV_INERTIA, dg[:3] * _INV_INERTIA
    fa, ga, fb, gb = df[3:6], dg[3:6], df[6:9], dg[6:9]
    return (
        M @ np.cross(fM, gM)
        + alpha @ (np.cross(fM, ga) + np.cross(fa, gM))
        + beta @ (np.cross(fM, gb) + np.cross(fb, gM))
    )
