"""Phase space of the gyrostat: parameters, real and complex states, integrals.

Real states live in R^9 as (omega, alpha, beta).  The complex chart
(w1, w2, w3, x1, x2, y1, y2, z1, z2) is the Kowalevski-type change of
variables; on images of real points the pairs are complex conjugate and
w3 is real.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import InvalidParams, NotRealImage, OffOrbit

ORBIT_TOL = 1e-8
REAL_TOL = 1e-9

#: principal moments of inertia of the Kowalevski gyrostat
INERTIA = np.array([2.0, 2.0, 1.0])


@dataclass(frozen=True)
class Params:
    """Canonical field intensities ``a > b > 0`` and axial gyrostatic momentum."""

    a: float
    b: float
    lam: float = 0.0

    def __post_init__(self):
        for name in ("a", "b", "lam"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise InvalidParams(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, float(value))
        if not self.a > self.b > 0:
            raise InvalidParams(
                f"need a > b > 0 (irreducible canonical problem), got a={self.a}, b={self.b}"
            )

    @property
    def p(self) -> float:
        return math.sqrt(self.a**2 + self.b**2)

    @property
    def r(self) -> float:
        return math.sqrt(self.a**2 - self.b**2)

    @property
    def p2(self) -> float:
        return self.a**2 + self.b**2

    @property
    def r2(self) -> float:
        return self.a**2 - self.b**2

    def to_dict(self) -> dict:
        return {"a": self.a, "b": self.b, "lambda": self.lam}

    @classmethod
    def from_dict(cls, d: dict) -> "Params":
        try:
            return cls(float(d["a"]), float(d["b"]), float(d.get("lambda", 0.0)))
        except (KeyError, TypeError) as exc:
            raise InvalidParams(f"bad params record {d!r}: {exc}") from exc


def _frozen(v, n=3) -> np.ndarray:
    arr = np.array(v, dtype=float).reshape(n)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PhaseState:
    """Real phase point: angular velocity and the two field vectors in the body frame."""

    omega: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "omega", _frozen(self.omega))
        object.__setattr__(self, "alpha", _frozen(self.alpha))
        object.__setattr__(self, "beta", _frozen(self.beta))

    def __eq__(self, other):
        if not isinstance(other, PhaseState):
            return NotImplemented
        return bool(np.array_equal(self.as_vector(), other.as_vector()))

    def __hash__(self):
        return hash(self.as_vector().tobytes())

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.omega, self.alpha, self.beta])

    @classmethod
    def from_vector(cls, y) -> "PhaseState":
        y = np.asarray(y, dtype=float)
        if y.shape != (9,):
            raise ValueError(f"expected 9 components, got shape {y.shape}")
        return cls(y[:3], y[3:6], y[6:])

    def to_dict(self) -> dict:
        return {
            "omega": self.omega.tolist(),
            "alpha": self.alpha.tolist(),
            "beta": self.beta.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PhaseState":
        return cls(d["omega"], d["alpha"], d["beta"])


class ComplexState(NamedTuple):
    w1: complex
    w2: complex
    w3: complex
    x1: complex
    x2: complex
    y1: complex
    y2: complex
    z1: complex
    z2: complex

    def as_vector(self) -> np.ndarray:
        return np.array(self, dtype=complex)

    @classmethod
    def from_vector(cls, v) -> "ComplexState":
        return cls(*(complex(x) for x in v))


class IntegralTriple(NamedTuple):
    g: float
    k: float
    h: float


def complexify(s: PhaseState | np.ndarray) -> ComplexState:
    y = s.as_vector() if isinstance(s, PhaseState) else np.asarray(s, dtype=float)
    o1, o2, o3, a1, a2, a3, b1, b2, b3 = (float(v) for v in y)
    return ComplexState(
        complex(o1, o2),
        complex(o1, -o2),
        complex(o3, 0.0),
        complex(a1 - b2, a2 + b1),
        complex(a1 - b2, -(a2 + b1)),
        complex(a1 + b2, a2 - b1),
        complex(a1 + b2, -(a2 - b1)),
        complex(a3, b3),
        complex(a3, -b3),
    )


def realness_defect(c: ComplexState) -> float:
    """Largest violation of the image-of-real criterion."""
    w1, w2, w3, x1, x2, y1, y2, z1, z2 = c
    return max(
        abs(w2 - w1.conjugate()),
        abs(x2 - x1.conjugate()),
        abs(y2 - y1.conjugate()),
        abs(z2 - z1.conjugate()),
        abs(complex(w3).imag),
    )


def realify(c: ComplexState, tol: float = REAL_TOL) -> PhaseState:
    defect = realness_defect(c)
    if defect > tol:
        raise NotRealImage(f"not the image of a real point (defect {defect:.3e} > {tol:.1e})")
    w1, w2, w3, x1, x2, y1, y2, z1, z2 = (complex(v) for v in c)
    # average each conjugate pair so that small defects are split evenly
    w = (w1 + w2.conjugate()) / 2
    x = (x1 + x2.conjugate()) / 2
    y = (y1 + y2.conjugate()) / 2
    z = (z1 + z2.conjugate()) / 2
    omega = (w.real, w.imag, w3.real)
    alpha = ((x.real + y.real) / 2, (x.imag + y.imag) / 2, z.real)
    beta = ((x.imag - y.imag) / 2, (y.real - x.real) / 2, z.imag)
    return PhaseState(omega, alpha, beta)


def casimir_residuals(s: PhaseState, params: Params) -> np.ndarray:
    """Return ``(|alpha|^2 - a^2, |beta|^2 - b^2, alpha.beta)``."""
    return np.array(
        [
            s.alpha @ s.alpha - params.a**2,
            s.beta @ s.beta - params.b**2,
            s.alpha @ s.beta,
        ]
    )


def orbit_residuals(c: ComplexState, params: Params) -> np.ndarray:
    """Residuals of the orbit constraints written in the complex chart."""
    w1, w2, w3, x1, x2, y1, y2, z1, z2 = c
    return np.array(
        [
            z1**2 + x1 * y2 - params.r2,
            z2**2 + x2 * y1 - params.r2,
            x1 * x2 + y1 * y2 + 2 * z1 * z2 - 2 * params.p2,
        ]
    )


def integrals_vec(y: np.ndarray, params: Params) -> np.ndarray:
    """(G, K, H) from the real formulas, no orbit check.  ``y`` may be (..., 9)."""
    y = np.asarray(y, dtype=float)
    o1, o2, o3, a1, a2, a3, b1, b2, b3 = np.moveaxis(y, -1, 0)
    lam, a, b = params.lam, params.a, params.b
    h = o1**2 + o2**2 + 0.5 * o3**2 - a1 - b2
    k = (
        (o1**2 - o2**2 + a1 - b2) ** 2
        + (2 * o1 * o2 + a2 + b1) ** 2
        + 2 * lam * ((o3 - lam) * (o1**2 + o2**2) + 2 * o1 * a3 + 2 * o2 * b3)
    )
    m1, m2, m3 = 2 * o1, 2 * o2, o3 + lam
    m_alpha = m1 * a1 + m2 * a2 + m3 * a3
    m_beta = m1 * b1 + m2 * b2 + m3 * b3
    m_gamma = (
        m1 * (a2 * b3 - a3 * b2) + m2 * (a3 * b1 - a1 * b3) + m3 * (a1 * b2 - a2 * b1)
    )
    g = 0.25 * (m_alpha**2 + m_beta**2) + 0.5 * (o3 - lam) * m_gamma - b**2 * a1 - a**2 * b2
    return np.stack([g, k, h], axis=-1)


def integrals(s: PhaseState, params: Params, tol: float = ORBIT_TOL) -> IntegralTriple:
    res = np.abs(casimir_residuals(s, params)).max()
    if res > tol:
        raise OffOrbit(f"Casimir residual {res:.3e} exceeds {tol:.1e}")
    g, k, h = integrals_vec(s.as_vector(), params)
    return IntegralTriple(float(g), float(k), float(h))


def integrals_complex(c: ComplexState, params: Params) -> tuple[complex, complex, complex]:
    """(G, K, H) in the complex chart; equal to the real ones on the orbit."""
    w1, w2, w3, x1, x2, y1, y2, z1, z2 = c
    lam, p2, r2 = params.lam, params.p2, params.r2
    h = w1 * w2 + 0.5 * w3**2 - 0.5 * (y1 + y2)
    k = (
        (w1**2 + x1) * (w2**2 + x2)
        + 2 * lam * (w1 * w2 * w3 + z2 * w1 + z1 * w2)
        - 2 * lam**2 * w1 * w2
    )
    g = (
        0.25 * (p2 - x1 * x2) * w3**2
        + 0.5 * (x2 * z1 * w1 + x1 * z2 * w2) * w3
        + 0.25 * (x2 * w1 + y1 * w2) * (y2 * w1 + x1 * w2)
        - 0.25 * p2 * (y1 + y2)
        + 0.25 * r2 * (x1 + x2)
        + 0.5 * lam * (z1 * z2 * w3 + y2 * z2 * w1 + y1 * z1 * w2)
        + 0.25 * lam**2 * (p2 - y1 * y2)
    )
    return g, k, h


def integral_gradients(c: ComplexState, params: Params) -> np.ndarray:
    """Holomorphic partials of the complex (G, K, H); shape (3, 9), chart order."""
    w1, w2, w3, x1, x2, y1, y2, z1, z2 = c
    lam, p2, r2 = params.lam, params.p2, params.r2
    P = x2 * w1 + y1 * w2
    Q = y2 * w1 + x1 * w2
    dg = [
        0.5 * x2 * z1 * w3 + 0.25 * (x2 * Q + P * y2) + 0.5 * lam * y2 * z2,
        0.5 * x1 * z2 * w3 + 0.25 * (y1 * Q + P * x1) + 0.5 * lam * y1 * z1,
        0.5 * (p2 - x1 * x2) * w3 + 0.5 * (x2 * z1 * w1 + x1 * z2 * w2) + 0.5 * lam * z1 * z2,
        -0.25 * x2 * w3**2 + 0.5 * z2 * w2 * w3 + 0.25 * P * w2 + 0.25 * r2,
        -0.25 * x1 * w3**2 + 0.5 * z1 * w1 * w3 + 0.25 * Q * w1 + 0.25 * r2,
        0.25 * Q * w2 - 0.25 * p2 + 0.5 * lam * z1 * w2 - 0.25 * lam**2 * y2,
        0.25 * P * w1 - 0.25 * p2 + 0.5 * lam * z2 * w1 - 0.25 * lam**2 * y1,
        0.5 * x2 * w1 * w3 + 0.5 * lam * (z2 * w3 + y1 * w2),
        0.5 * x1 * w2 * w3 + 0.5 * lam * (z1 * w3 + y2 * w1),
    ]
    dk = [
        2 * w1 * (w2**2 + x2) + 2 * lam * (w2 * w3 + z2) - 2 * lam**2 * w2,
        2 * w2 * (w1**2 + x1) + 2 * lam * (w1 * w3 + z1) - 2 * lam**2 * w1,
        2 * lam * w1 * w2,
        w2**2 + x2,
        w1**2 + x1,
        0.0,
        0.0,
        2 * lam * w2,
        2 * lam * w1,
    ]
    dh = [w2, w1, w3, 0.0, 0.0, -0.5, -0.5, 0.0, 0.0]
    return np.array([dg, dk, dh], dtype=complex)


def canonical_frame(params: Params, rotation=None) -> PhaseState:
    """Zero-velocity state with the fields rotated from ``a e1, b e2`` by ``rotation``."""
    R = np.eye(3) if rotation is None else np.asarray(rotation, dtype=float)
    return PhaseState(
        np.zeros(3), R @ np.array([params.a, 0.0, 0.0]), R @ np.array([0.0, params.b, 0.0])
    )


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Haar-random rotation via QR of a Gaussian matrix."""
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 2] = -q[:, 2]
    return q


def random_state(params: Params, rng: np.random.Generator, omega_scale: float = 1.0) -> PhaseState:
    """On-orbit state: rotated canonical field frame plus Gaussian angular velocity."""
    R = random_rotation(rng)
    omega = omega_scale * rng.normal(size=3)
    frame = canonical_frame(params, R)
    return PhaseState(omega, frame.alpha, frame.beta)
