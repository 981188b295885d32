"""The acceptance checks as plain functions, and the ``verify-all`` report.

Every check draws its randomness from ``SeedSequence([seed, number])`` so
the report is reproducible bit for bit under a fixed seed.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import bifurcation as bif
from . import critical as crit
from .dynamics import bracket_oracle, field_real, integrate
from .lax import lax_eigenvalues, lax_residual, sample_kappa, spectral_report
from .phase import (
    Params,
    complexify,
    integrals,
    integrals_complex,
    integrals_vec,
    random_state,
    realify,
)
from .special import (
    admissible_pairs,
    equilibria,
    pendulum_state,
    rank1_data,
    rank1_dwdt_sq,
    rank1_point,
)

DEFAULT_PARAMS = Params(1.0, 0.6, 0.7)
RANK1_SIGMAS = (-1.0, -0.3, 0.2, 0.5, 1.0, 2.0, 3.0)

THRESHOLDS = {
    1: 1e-9,
    2: 1e-11,
    3: 1e-10,
    4: 1e-9,
    5: 0.0,
    6: 1e-8,
    7: 1e-6,
    8: 1e-7,
    9: 1e-10,
    10: 0.0,
}


@dataclass
class CriterionResult:
    number: int
    name: str
    metric: str
    threshold: float
    value: float
    passed: bool
    details: dict = field(default_factory=dict)


def _rng(seed: int, number: int, sub: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, number, sub]))


def _result(number, name, metric, value, threshold, passed=None, **details) -> CriterionResult:
    value = float(value)
    ok = value < threshold if passed is None else passed
    return CriterionResult(number, name, metric, threshold, value, bool(ok), details)


# --- 1 ----------------------------------------------------------------------------


def _conservation_job(job):
    vec, pdict, t_end, tol = job
    params = Params.from_dict(pdict)
    tr = integrate(vec, params, t_end, tol=tol)
    return float(tr.max_drift.max()), tr.max_casimir


def check_conservation(params, seed, n=20, t_end=100.0, tol=1e-12, workers=1, threshold=THRESHOLDS[1]):
    rng = _rng(seed, 1)
    jobs = [(random_state(params, rng).as_vector(), params.to_dict(), t_end, tol) for _ in range(n)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            out = list(pool.map(_conservation_job, jobs))
    else:
        out = [_conservation_job(j) for j in jobs]
    drift = max(o[0] for o in out)
    cas = max(o[1] for o in out)
    return _result(1, "conservation", "max |drift| of G,K,H and Casimirs", max(drift, cas), threshold, integrals=drift, casimirs=cas)


# --- 2 ----------------------------------------------------------------------------


def check_dual_integrals(params, seed, n=1000, threshold=THRESHOLDS[2]):
    rng = _rng(seed, 2)
    worst = 0.0
    for _ in range(n):
        s = random_state(params, rng)
        real = integrals_vec(s.as_vector(), params)
        cplx = np.array(integrals_complex(complexify(s), params))
        rel = np.abs(real - cplx) / np.maximum(1.0, np.abs(real))
        worst = max(worst, float(rel.max()))
    return _result(2, "dual-form integrals", "max relative |real - complex|", worst, threshold)


# --- 3, 4 --------------------------------------------------------------------------


def _lax_samples(params, seed, n):
    rng = _rng(seed, 3)
    return [(complexify(random_state(params, rng)), sample_kappa(rng)) for _ in range(n)]


def _best_match(a: np.ndarray, b: np.ndarray) -> float:
    scale = max(1.0, float(np.abs(a).max()))
    return min(float(np.abs(a - b[list(p)]).max()) for p in itertools.permutations(range(len(b)))) / scale


def check_lax(params, seed, n=100, n_traj=5, t_end=10.0, threshold=THRESHOLDS[3], iso_threshold=1e-8):
    worst = max(lax_residual(c, k, params) for c, k in _lax_samples(params, seed, n))
    rng = _rng(seed, 3, 1)
    iso = 0.0
    for _ in range(n_traj):
        s0 = random_state(params, rng)
        kappa = sample_kappa(rng)
        tr = integrate(s0, params, t_end)
        ev0 = lax_eigenvalues(complexify(tr.states[0]), kappa, params)
        for y in tr.states[:: max(1, len(tr.states) // 50)]:
            iso = max(iso, _best_match(ev0, lax_eigenvalues(complexify(y), kappa, params)))
    passed = worst < threshold and iso < iso_threshold
    return _result(3, "Lax exactness", "max ||L' - [L,M]||_F (isospectral drift in details)", worst, threshold, passed, isospectral_drift=iso, isospectral_threshold=iso_threshold)


def check_spectral(params, seed, n=100, threshold=THRESHOLDS[4], odd_threshold=1e-11):
    dev = odd = 0.0
    for c, k in _lax_samples(params, seed, n):
        rep = spectral_report(c, k, params)
        dev, odd = max(dev, rep.deviation), max(odd, rep.odd)
    passed = dev < threshold and odd < odd_threshold
    return _result(4, "spectral identity", "max relative coefficient deviation (odd terms in details)", dev, threshold, passed, odd=odd, odd_threshold=odd_threshold)


# --- 5 ----------------------------------------------------------------------------


def rank1_states(params, count=10, frac=0.37):
    """Complex points of ``count`` admissible rank-one motions, ``w`` inside each window."""
    out = []
    for pair in admissible_pairs(params, RANK1_SIGMAS)[:count]:
        lo, hi = pair.window
        d = rank1_data(pair.sigma, pair.u, lo + frac * (hi - lo), params)
        out.append((pair, d, rank1_point(d, params)))
    return out


def check_ranks(params, seed, n=20):
    rng = _rng(seed, 5)
    got: dict[str, list[int]] = {}
    got["equilibria"] = [crit.momentum_rank(complexify(s), params) for s in equilibria(params)]
    got["pendulum"] = [
        crit.momentum_rank(complexify(pendulum_state("P3", rng.uniform(-3, 3), rng.uniform(0.5, 2), sign, params)), params)
        for sign in (1, -1)
        for _ in range(5)
    ]
    got["rank1"] = [crit.momentum_rank(c, params) for _, _, c in rank1_states(params)]
    got["N"] = [crit.momentum_rank(crit.sample_stratum("N", params, rng), params) for _ in range(n)]
    got["O"] = [crit.momentum_rank(crit.sample_stratum("O", params, rng), params) for _ in range(n)]
    got["random"] = [crit.momentum_rank(complexify(random_state(params, rng)), params) for _ in range(n)]
    expected = {"equilibria": 0, "pendulum": 1, "rank1": 1, "N": 2, "O": 2, "random": 3}
    wrong = sum(sum(r != expected[key] for r in ranks) for key, ranks in got.items())
    counts = {key: len(v) for key, v in got.items()}
    return _result(5, "stratum ranks", "number of points with unexpected rank", wrong, 0.5, wrong == 0, counts=counts)


# --- 6 ----------------------------------------------------------------------------


def _plane_residual(g, k, g0, k0) -> float:
    return (abs(g - g0) + abs(k - k0)) / (1.0 + abs(g0) + abs(k0))


def check_inclusion(params, seed, n=20, threshold=THRESHOLDS[6], line_threshold=1e-10):
    rng = _rng(seed, 6)
    line = 0.0
    for _ in range(n):
        sign = 1 if rng.random() < 0.5 else -1
        s = pendulum_state("P3", rng.uniform(-3, 3), rng.normal(), sign, params)
        tri = integrals(s, params)
        name = "gamma_minus" if sign == 1 else "gamma_plus"
        line = max(line, _plane_residual(tri.g, tri.k, *bif.gamma_lines(tri.h, params)[name]))
    surf = {}
    for which, branch, S in (("N", bif.gamma1, crit.S_N), ("O", bif.gamma2, crit.S_O)):
        worst = 0.0
        for _ in range(n):
            c = crit.sample_stratum(which, params, rng)
            tri = integrals(realify(c), params)
            g, k, _, _ = branch(S(c, params).real, tri.h, params)
            worst = max(worst, _plane_residual(tri.g, tri.k, float(g), float(k)))
        surf[which] = worst
    value = max(surf.values())
    passed = value < threshold and line < line_threshold
    return _result(6, "surface inclusion", "max normalized residual of N/O images (line residual in details)", value, threshold, passed, lines=line, line_threshold=line_threshold, N=surf["N"], O=surf["O"])


# --- 7 ----------------------------------------------------------------------------


def _complex_fn(fn: Callable, params, index=None):
    def f(y):
        v = fn(complexify(y), params)
        return v if index is None else v[index]

    return f


def check_brackets(params, seed, n=20, threshold=THRESHOLDS[7]):
    rng = _rng(seed, 7)
    worst_u = 0.0
    for _ in range(n):
        c = crit.sample_stratum("O", params, rng)
        y = realify(c)
        num = bracket_oracle(_complex_fn(crit.U1, params), _complex_fn(crit.U2, params), y, params)
        # the bracket of the complex functions carries the factor -i of d/d(it)
        closed = -1j * crit.bracket_U_closed(crit.S_O(c, params).real, integrals(y, params).h, params)
        worst_u = max(worst_u, abs(num - closed) / abs(closed))
    worst_f = 0.0
    for _ in range(n):
        c = crit.sample_stratum("N", params, rng)
        y = realify(c)
        num = bracket_oracle(_complex_fn(crit.F_polys, params, 0), _complex_fn(crit.F_polys, params, 1), y, params)
        closed = 1j * crit.bracket_F_closed(c, params, integrals(y, params).h, crit.S_N(c, params).real)
        # the radicals fix the closed form only up to sign
        worst_f = max(worst_f, min(abs(num - closed), abs(num + closed)) / abs(closed))
    return _result(7, "bracket closed forms", "max relative error of {U1,U2} and {F1,F2}", max(worst_u, worst_f), threshold, U=worst_u, F=worst_f)


# --- 8 ----------------------------------------------------------------------------


def check_rank1(params, seed, t_end=2.0, threshold=THRESHOLDS[8], strata_threshold=1e-8):
    strata = 0.0
    dw = 0.0
    states = rank1_states(params)
    for pair, d, c in states:
        strata = max(strata, float(crit.residual_N(c, params).max()), float(crit.residual_O(c, params).max()))
        tr = integrate(realify(c, tol=1e-8), params, t_end)
        for y in tr.states:
            f = field_real(y, params)
            w = y[0] ** 2 + y[1] ** 2
            dwdt = 2 * (y[0] * f[0] + y[1] * f[1])
            rhs = float(rank1_dwdt_sq(d.sigma, d.u, params, w))
            dw = max(dw, abs(dwdt**2 - rhs) / max(1.0, abs(rhs)))
    passed = len(states) == 10 and dw < threshold and strata < strata_threshold
    return _result(8, "rank-one family", "max relative error of (dw/dt)^2 (strata residual in details)", dw, threshold, passed, pairs=len(states), strata=strata, strata_threshold=strata_threshold)


# --- 9 ----------------------------------------------------------------------------


def check_degeneration(params, seed, threshold=THRESHOLDS[9]):
    p0 = Params(params.a, params.b, 0.0)
    rng = _rng(seed, 9)
    s = np.concatenate([-np.geomspace(1e-2, 20, 200), np.geomspace(1e-2, 20, 200)])
    worst = 0.0
    for h in rng.uniform(-2.0, 5.0, size=10):
        g, k, _, _ = bif.gamma1(s, h, p0)
        lhs = (p0.p2 * h - 2 * g) ** 2
        rhs = p0.r2**2 * k
        worst = max(worst, float(np.max(np.abs(lhs - rhs) / np.maximum(1.0, np.maximum(lhs, rhs)))))
    # dyadic data: h - lam^2/2 is computed exactly before and after the shift
    pa = Params(params.a, params.b, 0.5)
    pb = Params(params.a, params.b, 1.0)
    ha, hb = 2.0, 2.0 + 0.375
    grid = np.arange(1, 41) / 8.0
    grid = np.concatenate([-grid, grid])
    exact = all(np.array_equal(x, y) for x, y in zip(bif.gamma2(grid, ha, pa), bif.gamma2(grid, hb, pb)))
    exact = exact and bif.gamma_lines(ha, pa) == bif.gamma_lines(hb, pb)
    return _result(9, "zero-momentum degeneration", "max relative residual of (p^2 h - 2g)^2 = r^4 k", worst, threshold, worst < threshold and exact, shift_exact=exact)


CHECKS = {
    1: check_conservation,
    2: check_dual_integrals,
    3: check_lax,
    4: check_spectral,
    5: check_ranks,
    6: check_inclusion,
    7: check_brackets,
    8: check_rank1,
    9: check_degeneration,
}

REPORT_COLUMNS = ("criterion", "name", "metric", "threshold", "value", "passed")


def report_csv(results: list[CriterionResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for r in results:
        w.writerow([r.number, r.name, r.metric, format(r.threshold, ".17g"), format(r.value, ".17g"), "pass" if r.passed else "FAIL"])
    return buf.getvalue()


def run_checks(params=DEFAULT_PARAMS, seed=0, workers=1, thresholds=None, only=None) -> list[CriterionResult]:
    thresholds = {**THRESHOLDS, **(thresholds or {})}
    out = []
    for number, fn in CHECKS.items():
        if only is not None and number not in only:
            continue
        kw = {"threshold": thresholds[number]} if number not in (5,) else {}
        if number == 1:
            kw["workers"] = workers
        out.append(fn(params, seed, **kw))
    return out


def verify_all(params=DEFAULT_PARAMS, seed=0, workers=1, thresholds=None, repeat=2, only=None):
    """Run the checks ``repeat`` times; the last row records whether the reports were identical.

    Returns ``(results, csv_text)``.
    """
    texts = []
    results: list[CriterionResult] = []
    for _ in range(max(1, repeat)):
        results = run_checks(params, seed, workers, thresholds, only)
        texts.append(report_csv(results))
    same = all(t == texts[0] for t in texts)
    differing = 0 if same else 1
    results = results + [
        _result(10, "determinism", f"reports differing across {len(texts)} runs", differing, 0.5, same and len(texts) > 1, runs=len(texts))
    ]
    return results, report_csv(results)


def format_table(results: list[CriterionResult]) -> str:
    lines = []
    for r in results:
        mark = "PASS" if r.passed else "FAIL"
        lines.append(f"[{mark}] {r.number:2d} {r.name:28s} {r.value:.3e} (threshold {r.threshold:.1e})")
    return "\n".join(lines)


def results_to_json(results: list[CriterionResult]) -> list[dict]:
    def clean(v):
        if isinstance(v, float) and not math.isfinite(v):
            return str(v)
        if isinstance(v, dict):
            return {k: clean(x) for k, x in v.items()}
        return v

    return [
        {
            "criterion": r.number,
            "name": r.name,
            "metric": r.metric,
            "threshold": r.threshold,
            "value": r.value,
            "passed": r.passed,
            "details": clean(r.details),
        }
        for r in results
    ]
