"""Command-line front end: ``kowgyro <subcommand> ...``.

Exit status is 0 on success, 1 for invalid input (bad files, parameters,
arguments) and 2 when a numerical procedure fails or a check does not pass.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import bifurcation as bif
from . import critical as crit
from . import export
from .canonical import DGParams, canonicalize
from .dynamics import integrate
from .errors import GyrostatError, IOFailure
from .lax import lax_residual, sample_kappa, spectral_report
from .phase import Params, PhaseState, complexify, integrals, random_state, realify
from .special import admissible_pairs, equilibria, pendulum_state, rank1_data, rank1_point
from .verify import CHECKS, DEFAULT_PARAMS, RANK1_SIGMAS, format_table, results_to_json, verify_all

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2


class InputError(GyrostatError, ValueError):
    pass


@dataclass
class RunConfig:
    params_path: str | None = None
    seed: int = 0
    tolerances: dict = field(default_factory=dict)
    output_dir: str | None = None
    workers: int | None = None

    @classmethod
    def load(cls, path: str) -> "RunConfig":
        data = _read_json(path)
        unknown = set(data) - {"params_path", "seed", "tolerances", "output_dir", "workers"}
        if unknown:
            raise InputError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


def _read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise InputError(f"file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"invalid JSON in {path}: {exc}") from exc
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc


def _load_params(path) -> Params:
    if path is None:
        return DEFAULT_PARAMS
    return Params.from_dict(_read_json(path))


def _cx(c) -> list[list[float]]:
    return [[complex(v).real, complex(v).imag] for v in c]


def _triple(tri) -> dict:
    return {"g": tri.g, "k": tri.k, "h": tri.h}


def _emit(obj, args, text: str | None = None, out: str | None = None) -> None:
    if out:
        export.write_json(obj, out)
    if args.json:
        json.dump(obj, sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
    elif text is not None:
        print(text)


# --- subcommands -----------------------------------------------------------------


def cmd_simulate(args, cfg: RunConfig) -> int:
    params = _load_params(args.params)
    if args.state:
        s0 = PhaseState.from_dict(_read_json(args.state))
    else:
        s0 = random_state(params, np.random.default_rng(cfg.seed))
    integrals(s0, params)  # rejects off-orbit input
    tr = integrate(s0, params, args.t_end, tol=args.tol, project=args.project)
    out = args.out or (str(Path(cfg.output_dir) / "traj.csv") if cfg.output_dir else None)
    if out:
        export.write_trajectory_csv(tr, out)
    summary = {
        "steps": len(tr) - 1,
        "t_end": float(tr.times[-1]),
        "max_drift": dict(zip(("g", "k", "h"), tr.max_drift.tolist())),
        "max_casimir": tr.max_casimir,
        "out": out,
    }
    text = (
        f"{summary['steps']} steps to t={summary['t_end']:g}; max drift "
        f"g {tr.max_drift[0]:.2e}, k {tr.max_drift[1]:.2e}, h {tr.max_drift[2]:.2e}; "
        f"Casimirs {tr.max_casimir:.2e}"
    )
    _emit(summary, args, text)
    return EXIT_OK


def cmd_canonicalize(args, cfg: RunConfig) -> int:
    try:
        problem = DGParams.from_dict(_read_json(args.problem))
    except (KeyError, TypeError) as exc:
        raise InputError(f"bad problem record: {exc}") from exc
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        res = canonicalize(problem)
    out = {
        "group": res.group.to_dict(),
        "params": {"a": res.a, "b": res.b, "lambda": res.lam},
        "problem": res.problem.to_dict(),
        "reducible": res.reducible,
        "warnings": [str(w.message) for w in caught],
    }
    text = f"a = {res.a:.12g}, b = {res.b:.12g}, lambda = {res.lam:.12g}" + (" (reducible)" if res.reducible else "")
    _emit(out, args, text, args.out)
    return EXIT_OK


def _state_record(s: PhaseState, params: Params) -> dict:
    return {"state": s.to_dict(), "integrals": _triple(integrals(s, params))}


def cmd_special(args, cfg: RunConfig) -> int:
    params = _load_params(args.params)
    if args.kind == "equilibria":
        records = [_state_record(s, params) for s in equilibria(params)]
    elif args.kind == "pendulum":
        s = pendulum_state(args.family, args.phi, args.phidot, args.sign, params)
        records = [{**_state_record(s, params), "family": args.family}]
    else:
        sigmas = args.sigma if args.sigma else RANK1_SIGMAS
        records = []
        for pair in admissible_pairs(params, sigmas):
            lo, hi = pair.window
            d = rank1_data(pair.sigma, pair.u, lo + args.frac * (hi - lo), params)
            c = rank1_point(d, params)
            rec = _state_record(realify(c, tol=1e-8), params)
            rec.update(sigma=pair.sigma, u=pair.u, window=list(pair.window), w=d.w, q=[d.q.real, d.q.imag])
            records.append(rec)
    out = {"kind": args.kind, "params": params.to_dict(), "states": records}
    lines = [f"{len(records)} {args.kind} state(s)"]
    for r in records:
        t = r["integrals"]
        lines.append(f"  g={t['g']:+.10f} k={t['k']:+.10f} h={t['h']:+.10f}")
    _emit(out, args, "\n".join(lines), args.out)
    return EXIT_OK


def _scan_one(job):
    which, pdict, seed, i = job
    params = Params.from_dict(pdict)
    rng = np.random.default_rng(np.random.SeedSequence([seed, i]))
    c = crit.sample_stratum(which, params, rng)
    rep = crit.rank_report(c, params)
    res = crit.stratum_residual(c, params, which)
    s = realify(c, tol=1e-8)
    return {
        "state": s.to_dict(),
        "complex": _cx(c),
        "residuals": list(res.values),
        "s_value": res.s_value,
        "rank": rep.rank,
        "singular_values": list(rep.singular_values),
        "integrals": _triple(integrals(s, params)),
    }


def _workers(cfg: RunConfig) -> int:
    return cfg.workers or os.cpu_count() or 1


def _pool_map(fn, jobs, workers: int):
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(workers) as pool:
            return list(pool.map(fn, jobs))
    return [fn(j) for j in jobs]


def cmd_critical_scan(args, cfg: RunConfig) -> int:
    params = _load_params(args.params)
    if args.stratum == "N" and params.lam == 0:
        raise InputError("the N family needs nonzero lambda")
    jobs = [(args.stratum, params.to_dict(), cfg.seed, i) for i in range(args.count)]
    points = _pool_map(_scan_one, jobs, _workers(cfg))
    out = {"stratum": args.stratum, "params": params.to_dict(), "seed": cfg.seed, "points": points}
    lines = [f"{len(points)} point(s) on {args.stratum}"]
    for p in points:
        sv = "" if p["s_value"] is None else f" s={p['s_value']:+.10f}"
        lines.append(f"  rank {p['rank']} residual {max(p['residuals']):.1e}{sv}")
    _emit(out, args, "\n".join(lines), args.out)
    return EXIT_OK


def cmd_lax_verify(args, cfg: RunConfig) -> int:
    params = _load_params(args.params)
    rng = np.random.default_rng(cfg.seed)
    res, dev, odd = [], [], []
    for _ in range(args.samples):
        c = complexify(random_state(params, rng))
        kappa = sample_kappa(rng)
        res.append(lax_residual(c, kappa, params))
        rep = spectral_report(c, kappa, params)
        dev.append(rep.deviation)
        odd.append(rep.odd)
    stats = {
        name: {"max": float(np.max(v)), "mean": float(np.mean(v))}
        for name, v in (("lax_residual", res), ("spectral_deviation", dev), ("odd_coefficients", odd))
    }
    out = {"samples": args.samples, "params": params.to_dict(), **stats}
    text = "\n".join(f"{k:20s} max {v['max']:.3e}  mean {v['mean']:.3e}" for k, v in stats.items())
    _emit(out, args, text)
    return EXIT_OK


def cmd_diagram(args, cfg: RunConfig) -> int:
    params = _load_params(args.params)
    formats = {f.strip() for f in args.format.split(",") if f.strip()}
    if not formats <= {"csv", "svg"}:
        raise InputError(f"unknown format(s): {sorted(formats - {'csv', 'svg'})}")
    outdir = Path(args.out or cfg.output_dir or ".")
    try:
        outdir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IOFailure(f"cannot create {outdir}: {exc}") from exc
    spec = bif.GridSpec(n=args.samples)
    sl = bif.sigma_h(args.h, params, spec, rank1_check=not args.no_rank1)
    samples = sl.samples
    tag = format(args.h, "g")
    written = []
    if "csv" in formats:
        for branch in bif.BRANCHES:
            path = outdir / f"sigma_h_{tag}_{branch}.csv"
            export.write_diagram_csv([d for d in samples if d.branch == branch], path)
            written.append(str(path))
    if "svg" in formats:
        path = outdir / f"sigma_h_{tag}.svg"
        export.write_svg(export.diagram_svg(samples, sl.singular, title=f"Sigma_h, h = {tag}"), path)
        written.append(str(path))
    path = outdir / f"sigma_h_{tag}_singular.json"
    export.write_json(
        {
            "h": args.h,
            "params": params.to_dict(),
            "singular": export.singular_to_json(sl.singular),
            "rank1": [im._asdict() for im in sl.rank1],
            "rank1_matched": sl.rank1_matched,
        },
        path,
    )
    written.append(str(path))
    summary = {"files": written, "singular_counts": sl.kinds(), "rank1": len(sl.rank1), "rank1_matched": sum(sl.rank1_matched)}
    text = f"wrote {len(written)} file(s) to {outdir}; singular points {sl.kinds()}; rank-one images matched {sum(sl.rank1_matched)}/{len(sl.rank1)}"
    _emit(summary, args, text)
    return EXIT_OK


def cmd_verify_all(args, cfg: RunConfig) -> int:
    params = _load_params(args.params)
    thresholds = {int(k): float(v) for k, v in cfg.tolerances.items()}
    only = set(args.only) if args.only else None
    if only and not only <= set(CHECKS):
        raise InputError(f"unknown criteria: {sorted(only - set(CHECKS))}")
    results, text = verify_all(params, cfg.seed, _workers(cfg), thresholds, repeat=args.repeat, only=only)
    out = args.out or (str(Path(cfg.output_dir) / "acceptance_report.csv") if cfg.output_dir else "acceptance_report.csv")
    try:
        Path(out).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise IOFailure(f"cannot write {out}: {exc}") from exc
    _emit(results_to_json(results), args, format_table(results))
    return EXIT_OK if all(r.passed for r in results) else EXIT_NUMERIC


# --- parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="machine-readable output on stdout")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--workers", type=int, default=None, help="process pool size (default: CPU count)")
    common.add_argument("--config", help="RunConfig JSON file")

    p = argparse.ArgumentParser(prog="kowgyro", description=__doc__.splitlines()[0], parents=[common])
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_, parents=[common])
        sp.set_defaults(func=fn)
        return sp

    sp = add("simulate", cmd_simulate, "integrate the equations of motion")
    sp.add_argument("--params")
    sp.add_argument("--state", help="initial state JSON (default: random on-orbit state)")
    sp.add_argument("--t-end", type=float, default=10.0)
    sp.add_argument("--tol", type=float, default=1e-12)
    sp.add_argument("--project", action="store_true", help="project onto the orbit after each step")
    sp.add_argument("--out")

    sp = add("canonicalize", cmd_canonicalize, "reduce a two-field problem to canonical form")
    sp.add_argument("--problem", "--params", dest="problem", required=True, help="problem JSON {inertia, gyro, A, C}")
    sp.add_argument("--out")

    sp = add("special", cmd_special, "equilibria, pendulum and rank-one states")
    sp.add_argument("--kind", choices=("equilibria", "pendulum", "rank1"), required=True)
    sp.add_argument("--params")
    sp.add_argument("--family", choices=("P1", "P2", "P3"), default="P3")
    sp.add_argument("--phi", type=float, default=0.0)
    sp.add_argument("--phidot", type=float, default=1.0)
    sp.add_argument("--sign", type=int, choices=(1, -1), default=1)
    sp.add_argument("--sigma", type=float, action="append", help="rank-one multiplier (repeatable)")
    sp.add_argument("--frac", type=float, default=0.37, help="position inside the w-window")
    sp.add_argument("--out")

    sp = add("critical-scan", cmd_critical_scan, "sample points of a critical family")
    sp.add_argument("--params")
    sp.add_argument("--stratum", choices=crit.STRATA, required=True)
    sp.add_argument("--count", type=int, default=10)
    sp.add_argument("--out")

    sp = add("lax-verify", cmd_lax_verify, "check the Lax equation and the spectral curve")
    sp.add_argument("--params")
    sp.add_argument("--samples", type=int, default=100)

    sp = add("diagram", cmd_diagram, "iso-energetic bifurcation diagram")
    sp.add_argument("--params")
    sp.add_argument("--h", type=float, required=True)
    sp.add_argument("--out", help="output directory")
    sp.add_argument("--format", default="csv,svg")
    sp.add_argument("--samples", type=int, default=bif.GridSpec().n, help="grid size per branch")
    sp.add_argument("--no-rank1", action="store_true", help="skip the rank-one cross-check")

    sp = add("verify-all", cmd_verify_all, "run the acceptance checks")
    sp.add_argument("--params")
    sp.add_argument("--out", help="report CSV path")
    sp.add_argument("--repeat", type=int, default=2, help="runs compared for determinism")
    sp.add_argument("--only", type=int, nargs="+", metavar="N", help="run only these criteria (1-9)")
    return p


def _config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.workers is not None:
        cfg.workers = args.workers
    if getattr(args, "params", None) is None and cfg.params_path and hasattr(args, "params"):
        args.params = cfg.params_path
    if cfg.workers is not None and cfg.workers < 1:
        raise InputError("workers must be positive")
    return cfg


def dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        cfg = _config(args)
        return args.func(args, cfg)
    except (ArithmeticError, RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, KeyError, TypeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
