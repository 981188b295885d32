"""Matrix-pair algebra of a body in two constant fields and its orthogonalization.

A general problem is ``DGParams(I, l, A, C)``: inertia tensor, gyrostatic
momentum, the 3x2 matrix of force-centre radius vectors and the 2x2 Gram
matrix of the field intensities.  The group ``SO(3) x GL(2)`` acts on states
by ``(omega, U) -> (L omega, L U D^T)`` and on parameters by
``(I, l, A, C) -> (L I L^T, L l, L A D^-1, D C D^T)``; the two actions
intertwine the vector fields, so problems in one orbit are equivalent.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DependentFields, ReducibleCaseWarning, SingularD
from .phase import INERTIA, Params

REDUCIBLE_TOL = 1e-10


def _ro(a, shape) -> np.ndarray:
    arr = np.array(a, dtype=float).reshape(shape)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class DGParams:
    inertia: np.ndarray
    gyro: np.ndarray
    A: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "inertia", _ro(self.inertia, (3, 3)))
        object.__setattr__(self, "gyro", _ro(self.gyro, (3,)))
        object.__setattr__(self, "A", _ro(self.A, (3, 2)))
        object.__setattr__(self, "C", _ro(self.C, (2, 2)))

    def is_independent(self, tol: float = 1e-12) -> bool:
        if np.linalg.matrix_rank(self.A, tol=tol * max(1.0, np.abs(self.A).max())) < 2:
            return False
        try:
            np.linalg.cholesky(0.5 * (self.C + self.C.T))
        except np.linalg.LinAlgError:
            return False
        return True

    def to_dict(self) -> dict:
        return {
            "inertia": self.inertia.tolist(),
            "gyro": self.gyro.tolist(),
            "A": self.A.tolist(),
            "C": self.C.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DGParams":
        return cls(d["inertia"], d["gyro"], d["A"], d["C"])

    @classmethod
    def kowalevski(cls, params: Params) -> "DGParams":
        """The canonical problem with inertia 2:2:1 and gyrostatic momentum along e3."""
        return cls(
            np.diag(INERTIA),
            [0.0, 0.0, params.lam],
            np.eye(3)[:, :2],
            np.diag([params.a**2, params.b**2]),
        )


@dataclass(frozen=True, eq=False)
class GroupElement:
    Lambda: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "Lambda", _ro(self.Lambda, (3, 3)))
        object.__setattr__(self, "D", _ro(self.D, (2, 2)))

    @classmethod
    def identity(cls) -> "GroupElement":
        return cls(np.eye(3), np.eye(2))

    def compose(self, other: "GroupElement") -> "GroupElement":
        """``self * other``: act with ``other`` first."""
        return GroupElement(self.Lambda @ other.Lambda, self.D @ other.D)

    def is_valid(self, tol: float = 1e-12) -> bool:
        L = self.Lambda
        return (
            np.abs(L.T @ L - np.eye(3)).max() < tol
            and abs(np.linalg.det(L) - 1) < tol
            and abs(np.linalg.det(self.D)) > tol
        )

    def to_dict(self) -> dict:
        return {"Lambda": self.Lambda.tolist(), "D": self.D.tolist()}


def col_cross(A, B) -> np.ndarray:
    """Sum of the cross products of corresponding columns of two 3x2 matrices."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    return np.cross(A[:, 0], B[:, 0]) + np.cross(A[:, 1], B[:, 1])


def vec_cross_mat(a, A) -> np.ndarray:
    """Columnwise ``a x A``."""
    A = np.asarray(A, dtype=float)
    return np.cross(np.asarray(a, dtype=float), A, axisb=0, axisc=0)


def act(g: GroupElement, omega, U) -> tuple[np.ndarray, np.ndarray]:
    return g.Lambda @ np.asarray(omega, dtype=float), g.Lambda @ np.asarray(U, dtype=float) @ g.D.T


def act_params(g: GroupElement, P: DGParams) -> DGParams:
    if abs(np.linalg.det(g.D)) < 1e-14 * max(1.0, np.abs(g.D).max() ** 2):
        raise SingularD("D is not invertible")
    L, D = g.Lambda, g.D
    return DGParams(L @ P.inertia @ L.T, L @ P.gyro, L @ P.A @ np.linalg.inv(D), D @ P.C @ D.T)


def dg_field(P: DGParams, omega, U) -> tuple[np.ndarray, np.ndarray]:
    """Time derivatives ``(d omega/dt, dU/dt)`` of the general two-field problem."""
    omega = np.asarray(omega, dtype=float)
    U = np.asarray(U, dtype=float)
    torque = np.cross(P.inertia @ omega + P.gyro, omega) + col_cross(P.A, U)
    return np.linalg.solve(P.inertia, torque), -vec_cross_mat(omega, U)


def dg_energy(P: DGParams, omega, U) -> float:
    omega = np.asarray(omega, dtype=float)
    return float(0.5 * omega @ P.inertia @ omega - np.trace(P.A.T @ np.asarray(U, dtype=float)))


class Canonicalization(NamedTuple):
    group: GroupElement
    a: float
    b: float
    lam: float
    problem: DGParams
    reducible: bool

    @property
    def params(self) -> Params:
        """Canonical :class:`Params`; raises ``InvalidParams`` in the reducible case."""
        return Params(self.a, self.b, self.lam)


def _fix_signs(V: np.ndarray) -> np.ndarray:
    # deterministic eigenvector signs: largest-magnitude entry of each column positive
    idx = np.argmax(np.abs(V), axis=0)
    return V * np.sign(V[idx, np.arange(V.shape[1])])


def canonicalize(P: DGParams, tol: float = REDUCIBLE_TOL) -> Canonicalization:
    """Find ``(Lambda, D)`` taking ``P`` to force centres ``e1, e2`` and ``C = diag(a^2, b^2)``.

    ``D`` simultaneously reduces ``(A^T A)^-1`` to the identity and ``C`` to a
    diagonal with ``a >= b``; ``Lambda`` maps the orthonormal columns of
    ``A D^-1`` onto ``e1, e2`` and their cross product onto ``e3``, so
    ``det Lambda = 1`` by construction.  Coinciding intensities are flagged
    with :class:`ReducibleCaseWarning`.
    """
    if not P.is_independent():
        raise DependentFields("need rank A = 2 and C positive definite")
    gram_inv = np.linalg.inv(P.A.T @ P.A)
    F = np.linalg.cholesky(gram_inv)
    Finv = np.linalg.inv(F)
    Csym = 0.5 * (P.C + P.C.T)
    evals, V = np.linalg.eigh(Finv @ Csym @ Finv.T)
    order = np.argsort(evals)[::-1]
    evals, V = evals[order], _fix_signs(V[:, order])
    D = V.T @ Finv
    B = P.A @ np.linalg.inv(D)
    c1, c2 = B[:, 0], B[:, 1]
    Lambda = np.vstack([c1, c2, np.cross(c1, c2)])
    # re-orthonormalize against rounding
    u, _, vt = np.linalg.svd(Lambda)
    Lambda = u @ vt
    g = GroupElement(Lambda, D)
    a, b = (float(np.sqrt(max(e, 0.0))) for e in evals)
    reducible = abs(a - b) < tol * max(1.0, a)
    if reducible:
        warnings.warn(f"reducible case: a = {a!r}, b = {b!r}", ReducibleCaseWarning, stacklevel=2)
    problem = act_params(g, P)
    return Canonicalization(g, a, b, float(problem.gyro[2]), problem, reducible)
