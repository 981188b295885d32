"""Bifurcation surfaces in (g, k, h) and their iso-energetic slices.

At a fixed energy ``h`` the two lines reduce to points of the ``(g, k)``
plane and the surfaces ``Gamma_1``, ``Gamma_2`` to curves parametrized by
the partial-integral value ``s != 0``.  Singular points of the slice are
cusps, self-intersections, mutual intersections and the two ends at
``s -> 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.optimize import brentq

from .errors import GridTooCoarse, GyrostatError, SZero
from .lax import spectral_coeffs
from .phase import Params, integrals, realify
from .special import rank1_data, rank1_point, rank1_solve_u, rank1_windows

BRANCHES = ("gamma_plus", "gamma_minus", "gamma1", "gamma2")
CURVES = ("gamma1", "gamma2")


class GridSpec(NamedTuple):
    s_min: float = 1e-3
    s_max: float = 50.0
    n: int = 4000  # per branch, split evenly between the two signs of s
    jump_tol: float = 0.05
    max_refine: int = 12


@dataclass(frozen=True)
class DiagramSample:
    s: float
    branch: str
    g: float
    k: float
    dg_ds: float
    dk_ds: float


@dataclass(frozen=True)
class SingularPoint:
    kind: str  # cusp | double_point | intersection | s_zero_asymptote
    location: tuple[float, float]
    parameters: dict = field(default_factory=dict)


def shifted_energy(h: float, params: Params) -> float:
    return h - params.lam**2 / 2


def gamma_lines(h: float, params: Params) -> dict[str, tuple[float, float]]:
    """``(g, k)`` of the two lines at energy ``h``."""
    ab = params.a * params.b
    ht = shifted_energy(h, params)
    return {
        "gamma_plus": (-ab * ht, (params.a + params.b) ** 2),
        "gamma_minus": (ab * ht, (params.a - params.b) ** 2),
    }


def _check_s(s):
    if np.any(np.asarray(s) == 0):
        raise SZero("the curve parameter s must be nonzero")


def gamma1(s, h: float, params: Params):
    """``(g, k, dg/ds, dk/ds)`` on ``Gamma_1``; vectorized over ``s``."""
    _check_s(s)
    s = np.asarray(s, dtype=float)
    L2, r4, p2 = params.lam**2, params.r2**2, params.p2
    k = 4 * L2 * s - 2 * L2 * h + r4 / (4 * s**2)
    g = -L2 * s**2 + 0.5 * p2 * (h + L2 / 2) - r4 / (4 * s)
    dk = 4 * L2 - r4 / (2 * s**3)
    dg = -2 * L2 * s + r4 / (4 * s**2)
    return g, k, dg, dk


def gamma2(s, h: float, params: Params):
    """``(g, k, dg/ds, dk/ds)`` on ``Gamma_2``; depends on ``h`` and ``lam`` only via ``h - lam^2/2``."""
    _check_s(s)
    s = np.asarray(s, dtype=float)
    ht = shifted_energy(h, params)
    c = params.p2**2 - params.r2**2
    k = 3 * s**2 - 4 * ht * s + params.p2 + ht**2 - c / (4 * s**2)
    g = -(s**3) + ht * s**2 + c / (4 * s)
    dk = 6 * s - 4 * ht + c / (2 * s**3)
    dg = -3 * s**2 + 2 * ht * s - c / (4 * s**2)
    return g, k, dg, dk


def _second_derivs(branch: str, s: float, h: float, params: Params) -> tuple[float, float]:
    if branch == "gamma1":
        L2, r4 = params.lam**2, params.r2**2
        return -2 * L2 - r4 / (2 * s**3), 3 * r4 / (2 * s**4)
    ht = shifted_energy(h, params)
    c = params.p2**2 - params.r2**2
    return -6 * s + 2 * ht + c / (2 * s**3), 6 - 3 * c / (2 * s**4)


def curve(branch: str, s, h: float, params: Params):
    if branch == "gamma1":
        return gamma1(s, h, params)
    if branch == "gamma2":
        return gamma2(s, h, params)
    raise ValueError(f"not a curve branch: {branch!r}")


def spectral_degeneracy(branch: str, s, h: float, params: Params):
    """Constant term and discriminant of the spectral curve as a quadratic in ``mu^2``.

    Returns ``(c0, disc)`` at the curve point with parameter ``s``; on
    ``Gamma_1`` the constant term vanishes, on ``Gamma_2`` the discriminant.
    """
    g, k, _, _ = curve(branch, s, h, params)
    c2, c0 = spectral_coeffs(np.asarray(s, dtype=float), g, k, h, params)
    return c0, c2 * c2 - 4 * c0


# --- sampling -----------------------------------------------------------------


def s_grid(spec: GridSpec = GridSpec()) -> tuple[np.ndarray, np.ndarray]:
    """Negative and positive parameter grids, logarithmic towards ``s = 0``."""
    half = max(spec.n // 2, 2)
    pos = np.geomspace(spec.s_min, spec.s_max, half)
    return -pos[::-1], pos


def _refine(branch: str, s: np.ndarray, h: float, params: Params, spec: GridSpec) -> np.ndarray:
    """Bisect intervals whose chord exceeds ``jump_tol`` relative to the local scale."""
    for level in range(spec.max_refine + 1):
        g, k = curve(branch, s, h, params)[:2]
        jump = np.hypot(np.diff(g), np.diff(k))
        scale = 1.0 + np.minimum(np.hypot(g[:-1], k[:-1]), np.hypot(g[1:], k[1:]))
        bad = np.nonzero(jump > spec.jump_tol * scale)[0]
        if bad.size == 0:
            return s
        if level == spec.max_refine:
            break
        # geometric midpoints keep the refinement logarithmic near zero
        mids = np.sign(s[bad]) * np.sqrt(s[bad] * s[bad + 1])
        s = np.sort(np.concatenate([s, mids]))
    worst = float(np.max(jump / scale))
    raise GridTooCoarse(f"{branch}: relative jump {worst:.3g} after {spec.max_refine} refinements")


@dataclass
class Piece:
    """One connected sampled piece of a curve (a fixed sign of ``s``)."""

    branch: str
    s: np.ndarray
    g: np.ndarray
    k: np.ndarray
    dg: np.ndarray
    dk: np.ndarray


def sample_curves(h: float, params: Params, spec: GridSpec = GridSpec()) -> list[Piece]:
    pieces = []
    for branch in CURVES:
        for s0 in s_grid(spec):
            s = _refine(branch, s0, h, params, spec)
            g, k, dg, dk = curve(branch, s, h, params)
            pieces.append(Piece(branch, s, g, k, dg, dk))
    return pieces


def pieces_to_samples(pieces: list[Piece], h: float, params: Params) -> list[DiagramSample]:
    """Flatten to samples; the lines contribute one sample each with ``s = h - lam^2/2``."""
    out = []
    ht = shifted_energy(h, params)
    ab = params.a * params.b
    for name, (g, k) in gamma_lines(h, params).items():
        slope = -ab if name == "gamma_plus" else ab
        out.append(DiagramSample(ht, name, g, k, slope, 0.0))
    for p in pieces:
        for row in zip(p.s.tolist(), p.g.tolist(), p.k.tolist(), p.dg.tolist(), p.dk.tolist()):
            out.append(DiagramSample(row[0], p.branch, row[1], row[2], row[3], row[4]))
    return out


# --- cusps --------------------------------------------------------------------


def _cusp_newton(branch: str, s: float, h: float, params: Params, iters: int = 60) -> float | None:
    """Damped Gauss-Newton on ``(dg/ds, dk/ds) = 0`` in the single unknown ``s``."""
    for _ in range(iters):
        _, _, dg, dk = curve(branch, s, h, params)
        ddg, ddk = _second_derivs(branch, s, h, params)
        den = ddg * ddg + ddk * ddk
        if den == 0:
            return None
        step = (dg * ddg + dk * ddk) / den
        t = 1.0
        # keep the iterate on the same side of s = 0
        while s - t * step == 0 or np.sign(s - t * step) != np.sign(s):
            t *= 0.5
            if t < 1e-12:
                return None
        s_new = s - t * step
        if abs(s_new - s) <= 1e-15 * max(1.0, abs(s)):
            s = s_new
            break
        s = s_new
    _, _, dg, dk = curve(branch, s, h, params)
    g, k, _, _ = curve(branch, s, h, params)
    scale = 1.0 + abs(float(g)) + abs(float(k))
    if math.hypot(float(dg), float(dk)) > 1e-9 * scale:
        return None
    return float(s)


def find_cusps(pieces: list[Piece], h: float, params: Params) -> list[SingularPoint]:
    """Cusps seeded from sign changes of ``dk/ds`` (shared with ``dg/ds`` on both curves)."""
    out = []
    for p in pieces:
        sc = np.nonzero(np.sign(p.dk[:-1]) * np.sign(p.dk[1:]) < 0)[0]
        found: list[float] = []
        for i in sc:
            s = _cusp_newton(p.branch, 0.5 * (p.s[i] + p.s[i + 1]), h, params)
            if s is None or any(abs(s - t) < 1e-9 * max(1.0, abs(s)) for t in found):
                continue
            found.append(s)
            g, k, _, _ = curve(p.branch, s, h, params)
            out.append(SingularPoint("cusp", (float(g), float(k)), {"branch": p.branch, "s": s}))
    return out


def cusp_parameters_exact(branch: str, h: float, params: Params) -> list[float]:
    """Cusp parameters from the polynomial conditions; used to cross-check :func:`find_cusps`."""
    if branch == "gamma1":
        if params.lam == 0:
            return []
        return [float(np.cbrt(params.r2**2 / (8 * params.lam**2)))]
    ht = shifted_energy(h, params)
    c = params.p2**2 - params.r2**2
    roots = np.roots([3.0, -2 * ht, 0.0, 0.0, c / 4])
    return sorted(float(z.real) for z in roots if abs(z.imag) < 1e-9 * max(1.0, abs(z)))


# --- intersections --------------------------------------------------------------


def _warp(g, k):
    # asinh is a monotone homeomorphism, so crossings are preserved while the
    # 1/s^2 growth near s = 0 is tamed for candidate detection
    return np.arcsinh(g), np.arcsinh(k)


def _segments(pieces: list[Piece]):
    segs = []
    for pi, p in enumerate(pieces):
        X, Y = _warp(p.g, p.k)
        for i in range(len(p.s) - 1):
            segs.append((pi, i, X[i], Y[i], X[i + 1], Y[i + 1]))
    return segs


def _seg_cross(a, b) -> bool:
    _, _, x1, y1, x2, y2 = a
    _, _, x3, y3, x4, y4 = b

    def orient(ax, ay, bx, by, cx, cy):
        return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)

    d1 = orient(x3, y3, x4, y4, x1, y1)
    d2 = orient(x3, y3, x4, y4, x2, y2)
    d3 = orient(x1, y1, x2, y2, x3, y3)
    d4 = orient(x1, y1, x2, y2, x4, y4)
    return d1 * d2 <= 0 and d3 * d4 <= 0


def _candidate_pairs(pieces: list[Piece]):
    segs = _segments(pieces)
    if not segs:
        return []
    lengths = np.array([math.hypot(s[4] - s[2], s[5] - s[3]) for s in segs])
    cell = max(4 * float(np.median(lengths)), 1e-6)
    grid: dict[tuple[int, int], list[int]] = {}
    for idx, (_, _, x1, y1, x2, y2) in enumerate(segs):
        i0, i1 = sorted((math.floor(x1 / cell), math.floor(x2 / cell)))
        j0, j1 = sorted((math.floor(y1 / cell), math.floor(y2 / cell)))
        for i in range(i0, i1 + 1):
            for j in range(j0, j1 + 1):
                grid.setdefault((i, j), []).append(idx)
    seen = set()
    out = []
    for members in grid.values():
        for u in range(len(members)):
            for v in range(u + 1, len(members)):
                a, b = segs[members[u]], segs[members[v]]
                if a[0] == b[0] and abs(a[1] - b[1]) <= 1:
                    continue
                key = (members[u], members[v])
                if key in seen:
                    continue
                seen.add(key)
                if _seg_cross(a, b):
                    out.append((a, b))
    return out


def _pair_newton(ba: str, sa: float, bb: str, sb: float, h: float, params: Params, iters: int = 50):
    """Solve ``curve_a(sa) = curve_b(sb)`` by Newton in ``(sa, sb)``."""
    for _ in range(iters):
        ga, ka, dga, dka = curve(ba, sa, h, params)
        gb, kb, dgb, dkb = curve(bb, sb, h, params)
        F = np.array([ga - gb, ka - kb], dtype=float)
        J = np.array([[dga, -dgb], [dka, -dkb]], dtype=float)
        try:
            step = np.linalg.solve(J, F)
        except np.linalg.LinAlgError:
            return None
        t = 1.0
        while (sa - t * step[0]) * sa <= 0 or (sb - t * step[1]) * sb <= 0:
            t *= 0.5
            if t < 1e-12:
                return None
        sa, sb = sa - t * step[0], sb - t * step[1]
        if np.abs(t * step).max() <= 1e-15 * max(1.0, abs(sa), abs(sb)):
            break
    ga, ka, _, _ = curve(ba, sa, h, params)
    gb, kb, _, _ = curve(bb, sb, h, params)
    if math.hypot(ga - gb, ka - kb) > 1e-9 * (1.0 + abs(ga) + abs(ka)):
        return None
    return float(sa), float(sb), float(ga), float(ka)


def find_crossings(pieces: list[Piece], h: float, params: Params) -> list[SingularPoint]:
    """Self-intersections (``double_point``) and ``Gamma_1``/``Gamma_2`` intersections."""
    out: list[SingularPoint] = []
    keys: list[tuple] = []
    for a, b in _candidate_pairs(pieces):
        pa, pb = pieces[a[0]], pieces[b[0]]
        sa = 0.5 * (pa.s[a[1]] + pa.s[a[1] + 1])
        sb = 0.5 * (pb.s[b[1]] + pb.s[b[1] + 1])
        res = _pair_newton(pa.branch, sa, pb.branch, sb, h, params)
        if res is None:
            continue
        sa, sb, g, k = res
        same = pa.branch == pb.branch
        if same and abs(sa - sb) <= 1e-7 * max(1.0, abs(sa)):
            continue  # collapsed onto one point of a single branch
        if same and sa > sb:
            sa, sb = sb, sa
        key = (pa.branch, pb.branch, sa, sb)
        if any(
            k0[:2] == key[:2] and abs(k0[2] - sa) < 1e-8 * max(1.0, abs(sa)) and abs(k0[3] - sb) < 1e-8 * max(1.0, abs(sb))
            for k0 in keys
        ):
            continue
        keys.append(key)
        if same:
            out.append(SingularPoint("double_point", (g, k), {"branch": pa.branch, "s": [sa, sb]}))
        else:
            s1, s2 = (sa, sb) if pa.branch == "gamma1" else (sb, sa)
            out.append(SingularPoint("intersection", (g, k), {"branches": ["gamma1", "gamma2"], "s": [s1, s2]}))
    return out


def line_points_on_curves(h: float, params: Params, tol: float = 1e-9) -> list[SingularPoint]:
    """Points of the two lines that lie on ``Gamma_1`` or ``Gamma_2``.

    ``k(s) = k_line`` is polynomial in ``s``; each real root is checked
    against ``g``.
    """
    out = []
    L2, r4, p2 = params.lam**2, params.r2**2, params.p2
    ht = shifted_energy(h, params)
    c = params.p2**2 - params.r2**2
    for name, (gl, kl) in gamma_lines(h, params).items():
        polys = {
            "gamma1": [4 * L2, -(2 * L2 * h + kl), 0.0, r4 / 4],
            "gamma2": [3.0, -4 * ht, p2 + ht**2 - kl, 0.0, -c / 4],
        }
        for branch, coeffs in polys.items():
            for z in np.roots(np.trim_zeros(coeffs, "f")):
                if abs(z.imag) > 1e-7 * max(1.0, abs(z)) or z.real == 0:
                    continue
                s = float(z.real)
                g, k, _, _ = curve(branch, s, h, params)
                if abs(g - gl) + abs(k - kl) <= tol * (1.0 + abs(gl) + abs(kl)):
                    out.append(SingularPoint("intersection", (gl, kl), {"branches": [name, branch], "s": [s]}))
    return out


def asymptote_notes(pieces: list[Piece], params: Params) -> list[SingularPoint]:
    """Annotate the ``s -> 0`` ends: parabolic asymptotes ``k ~ coef * g^2``."""
    coef = {"gamma1": 4 / params.r2**2, "gamma2": -4 / (params.p2**2 - params.r2**2)}
    out = []
    for p in pieces:
        i = int(np.argmin(np.abs(p.s)))
        out.append(
            SingularPoint(
                "s_zero_asymptote",
                (float(p.g[i]), float(p.k[i])),
                {"branch": p.branch, "s": float(p.s[i]), "k_over_g2": coef[p.branch]},
            )
        )
    return out


# --- rank-one cross-check --------------------------------------------------------


# a branch point can leave the real, on-orbit region between grid values of sigma
_BRANCH_ERRORS = (GyrostatError, ArithmeticError, ValueError)


class Rank1Image(NamedTuple):
    sigma: float
    u: float
    g: float
    k: float


def _rank1_energy(sigma: float, u: float, window, params: Params):
    lo, hi = window
    d = rank1_data(sigma, u, 0.5 * (lo + hi), params)
    s = realify(rank1_point(d, params), tol=1e-7)
    return integrals(s, params, tol=1e-6)


def rank1_images(h: float, params: Params, sigmas=None, min_width: float = 1e-6) -> list[Rank1Image]:
    """``(g, k)`` of the rank-one periodic motions at energy ``h``.

    Admissible ``(sigma, u)`` pairs are scanned over ``sigma``; roots are
    tracked by nearest ``u`` between neighbouring ``sigma`` and the energy
    condition is solved by Brent's method on each tracked branch.
    """
    if params.lam == 0:
        return []
    if sigmas is None:
        base = np.geomspace(1e-2, 1e2, 300)
        sigmas = np.concatenate([-base[::-1], base])
    sigmas = [float(s) for s in sigmas if s != -params.lam**2]

    def admissible(sigma):
        out = []
        for root in rank1_solve_u(sigma, params):
            if root.multiple or root.u == 0:
                continue
            wins = [w for w in rank1_windows(sigma, root.u, params) if math.isfinite(w[1]) and w[1] - w[0] > min_width]
            if wins:
                out.append((root.u, wins[0]))
        return out

    def energy(sigma, u_hint):
        cands = admissible(sigma)
        if not cands:
            return None
        u, win = min(cands, key=lambda c: abs(c[0] - u_hint))
        if abs(u - u_hint) > 0.2 * max(1.0, abs(u_hint)):
            return None
        try:
            return _rank1_energy(sigma, u, win, params), u
        except _BRANCH_ERRORS:
            return None

    table = [(s, admissible(s)) for s in sigmas]
    out: list[Rank1Image] = []
    for (s0, c0), (s1, c1) in zip(table[:-1], table[1:]):
        if s0 * s1 <= 0:
            continue
        for u0, win0 in c0:
            if not c1:
                continue
            u1, win1 = min(c1, key=lambda c: abs(c[0] - u0))
            if abs(u1 - u0) > 0.2 * max(1.0, abs(u0)):
                continue
            try:
                h0 = _rank1_energy(s0, u0, win0, params).h - h
                h1 = _rank1_energy(s1, u1, win1, params).h - h
            except _BRANCH_ERRORS:
                continue
            if h0 * h1 > 0:
                continue

            def f(sig):
                r = energy(sig, u0 + (u1 - u0) * (sig - s0) / (s1 - s0))
                if r is None:
                    raise ValueError("branch lost")
                return r[0].h - h

            try:
                sig = brentq(f, s0, s1, xtol=1e-14, rtol=1e-13)
            except ValueError:
                continue
            r = energy(sig, u0 + (u1 - u0) * (sig - s0) / (s1 - s0))
            if r is None:
                continue
            tri, u = r
            out.append(Rank1Image(float(sig), float(u), tri.g, tri.k))
    return out


# --- the slice ---------------------------------------------------------------


@dataclass
class Slice:
    h: float
    params: Params
    pieces: list[Piece]
    singular: list[SingularPoint]
    rank1: list[Rank1Image]
    rank1_matched: list[bool]

    @property
    def samples(self) -> list[DiagramSample]:
        return pieces_to_samples(self.pieces, self.h, self.params)

    def kinds(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for p in self.singular:
            out[p.kind] = out.get(p.kind, 0) + 1
        return out


def match_rank1(images: list[Rank1Image], singular: list[SingularPoint], tol: float = 1e-6) -> list[bool]:
    pts = [p.location for p in singular if p.kind == "intersection" and p.parameters.get("branches") == ["gamma1", "gamma2"]]
    out = []
    for im in images:
        scale = 1.0 + abs(im.g) + abs(im.k)
        out.append(any(abs(g - im.g) + abs(k - im.k) <= tol * scale for g, k in pts))
    return out


def sigma_h(h: float, params: Params, spec: GridSpec = GridSpec(), rank1_check: bool = True) -> Slice:
    """Sample ``Sigma_h`` and locate its singular points.

    Intersections of ``Gamma_1`` and ``Gamma_2`` are found by two-parameter
    Newton from crossing segments; with ``rank1_check`` they are compared
    against the integral values of the rank-one periodic motions at the
    same energy.
    """
    pieces = sample_curves(h, params, spec)
    singular = find_cusps(pieces, h, params)
    singular += find_crossings(pieces, h, params)
    singular += line_points_on_curves(h, params)
    singular += asymptote_notes(pieces, params)
    images = rank1_images(h, params) if rank1_check else []
    return Slice(h, params, pieces, singular, images, match_rank1(images, singular))
