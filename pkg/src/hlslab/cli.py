"""Command-line front end (``hlslab``).

Every subcommand accepts the same global flags (``--config``, ``--out``,
``--seed``, ``--jobs``, ``--rmax``, ``--rtol``) and the inline system flags
``--kind/--n/--p/--q/--k``, which override the config file.  Commands that
write files put ``<command>.json``, optionally ``<command>_profile.csv`` or
``<command>.csv``, and ``<command>_manifest.json`` in the output directory.

Exit codes: 0 success, 1 runtime failure, 2 invalid or not-applicable input.
"""

from __future__ import annotations

import argparse
import itertools
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, SystemConfig, build_config, load_raw
from .diagnostics import WindowError, energy_growth, fit_decay_slopes, verify_profile
from .integrator import IntegrationError, OutcomeTag, RadialProfile, Shot, flux_residual, integrate_shot
from .io import RunManifest, dumps, read_profile_csv, write_json, write_profile_csv, write_rows_csv
from .regimes import NotApplicableError, PowerPair, RegimeTag, check_assumptions, classify
from .shooting import (
    IndeterminateBracket,
    NoSeparation,
    TargetMapError,
    dirichlet_scan,
    simplex_grid,
    simplex_samples,
    simplex_search,
)

DEFAULT_OUT = "hlslab-out"
EXIT_OK, EXIT_RUNTIME, EXIT_INVALID = 0, 1, 2
RUNTIME_ERRORS = (IntegrationError, TargetMapError, NoSeparation, IndeterminateBracket, OSError, WindowError)


class UsageError(ValueError):
    """Invalid command-line input (exit 2)."""


# ---------------------------------------------------------------------------
# argument helpers


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _pair(text: str) -> tuple[float, float]:
    vals = _floats(text)
    if len(vals) != 2:
        raise argparse.ArgumentTypeError(f"expected LO,HI, got {text!r}")
    return vals[0], vals[1]


def _global_parent() -> argparse.ArgumentParser:
    g = argparse.ArgumentParser(add_help=False)
    grp = g.add_argument_group("global options")
    grp.add_argument("--config", metavar="PATH", help="TOML system configuration")
    grp.add_argument("--out", metavar="DIR", help=f"output directory (default: $HLS_LAB_OUT or {DEFAULT_OUT})")
    grp.add_argument("--seed", type=int, help="seed for every random choice (default: config seed or 0)")
    grp.add_argument("--jobs", type=int, help="worker processes for sweeps and label probes")
    grp.add_argument("--rmax", type=float, help="integration horizon r_max")
    grp.add_argument("--rtol", type=float, help="integrator relative tolerance")
    sysg = g.add_argument_group("system (overrides the config file)")
    sysg.add_argument("--kind", choices=["lane-emden", "scalar", "cascade", "decoupled"])
    sysg.add_argument("--n", type=int, help="dimension")
    sysg.add_argument("--p", type=float)
    sysg.add_argument("--q", type=float)
    sysg.add_argument("--k", type=int, help="cascade order (kind = cascade)")
    return g


def build_parser() -> argparse.ArgumentParser:
    parent = _global_parent()
    ap = argparse.ArgumentParser(prog="hlslab", description="Radial shooting and diagnostics for Lane-Emden type systems.")
    ap.add_argument("--version", action="version", version=f"hlslab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    sub.add_parser("classify", parents=[parent], help="regime and scaling exponents of (n, p, q)")

    sp = sub.add_parser("shoot", parents=[parent], help="integrate one shot from alpha")
    sp.add_argument("--alpha", type=_floats, required=True, help="initial values, e.g. 1,1")

    sp = sub.add_parser("ground-state", parents=[parent], help="search the simplex for the separating initial value")
    sp.add_argument("--a", type=float, help="simplex level (sum of initial values)")
    sp.add_argument("--tol", type=float, help="bracket tolerance")

    sp = sub.add_parser("dirichlet-scan", parents=[parent], help="first-zero radius over simplex points")
    sp.add_argument("--a", type=float, help="simplex level")
    mode = sp.add_mutually_exclusive_group()
    mode.add_argument("--count", type=int, default=10, help="evenly spaced simplex points (two components)")
    mode.add_argument("--samples", type=int, help="seeded random simplex points")
    sp.add_argument("--lam", type=float, default=2.0, help="scale factor for the collapse residual")

    sp = sub.add_parser("sweep", parents=[parent], help="outcome table over an alpha grid or a (p, q) grid")
    sp.add_argument("--grid", choices=["alpha", "pq"], default="alpha")
    sp.add_argument("--points", type=int, default=10, help="grid points per axis")
    sp.add_argument("--alpha-range", type=_pair, default=(0.1, 2.0), metavar="LO,HI")
    sp.add_argument("--p-range", type=_pair, metavar="LO,HI")
    sp.add_argument("--q-range", type=_pair, metavar="LO,HI")
    sp.add_argument("--jitter", type=float, default=0.0, help="seeded relative jitter of alpha grid points")
    sp.add_argument("--shoot-alpha", type=_floats, help="for pq grids: also shoot from this alpha")

    sp = sub.add_parser("verify", parents=[parent], help="structural checks on a profile")
    src = sp.add_mutually_exclusive_group(required=True)
    src.add_argument("--profile", metavar="CSV", help="profile written by shoot/ground-state")
    src.add_argument("--alpha", type=_floats, help="shoot from alpha and verify the result")
    sp.add_argument("--a1", type=float, help="Pohozaev weight a1 (a2 = n - 2 - a1)")
    sp.add_argument("--checkpoints", type=_floats, help="Pohozaev radii (default 1,2,5 inside the profile)")
    sp.add_argument("--window", type=_pair, metavar="LO,HI", help="fit window for slopes")

    sp = sub.add_parser("asymptotics", parents=[parent], help="decay slopes and energy growth of a positive profile")
    sp.add_argument("--alpha", type=_floats, help="shoot from alpha instead of running the ground-state search")
    sp.add_argument("--a", type=float, help="simplex level for the search")
    sp.add_argument("--window", type=_pair, metavar="LO,HI")

    sp = sub.add_parser("check-assumptions", parents=[parent], help="sampled sign and boundary-control checks")
    sp.add_argument("--samples", type=int, default=64, help="samples per probe radius")
    return ap


def load_config(args, require_pq: bool = False) -> SystemConfig:
    raw, text = {}, ""
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}", "config") from exc
        raw = load_raw(text)
    for key in ("kind", "n", "p", "q", "k"):
        val = getattr(args, key, None)
        if val is not None:
            raw[key] = val
    if "p" in raw and "q" not in raw and raw.get("kind") != "scalar":
        raise ConfigError("'q' is required with 'p'", "q")
    shot = dict(raw.get("shot", {}))
    if args.rmax is not None:
        shot["r_max"] = args.rmax
    if args.rtol is not None:
        shot["rtol"] = args.rtol
    if shot:
        raw["shot"] = shot
    search = dict(raw.get("search", {}))
    if args.jobs is not None:
        search["jobs"] = args.jobs
    if getattr(args, "tol", None) is not None:
        search["tol"] = args.tol
    if search:
        raw["search"] = search
    if args.seed is not None:
        raw["seed"] = args.seed
    if getattr(args, "a", None) is not None:
        raw["a"] = args.a
    return build_config(raw, text, require_pq)


def out_dir(args, cfg: SystemConfig | None) -> Path:
    if args.out:
        return Path(args.out)
    if cfg is not None and cfg.out:
        return Path(cfg.out)
    return Path(os.environ.get("HLS_LAB_OUT", DEFAULT_OUT))


def _finite(x):
    return x if x is not None and math.isfinite(x) else None


def _system_dict(cfg: SystemConfig) -> dict:
    spec = cfg.system()
    return {"kind": cfg.kind, "n": cfg.n, "k": cfg.k, "p": cfg.p, "q": cfg.q, "L": spec.L, "label": spec.label}


def _shot_report(shot: Shot, spec) -> dict:
    out = shot.outcome
    return {
        "alpha": [float(x) for x in shot.alpha],
        "outcome": out.to_dict(),
        "r0": out.r if out.tag is OutcomeTag.CROSSED else None,
        "stats": {"steps": shot.stats.steps, "rejected": shot.stats.rejected, "rhs_evals": shot.stats.rhs_evals},
        "flux_residual": [float(x) for x in flux_residual(spec, shot)] if shot.profile.r.size > 1 else None,
    }


class Run:
    """Collects outputs and writes the manifest for one command."""

    def __init__(self, args, argv, cfg: SystemConfig, command: str):
        self.cfg = cfg
        self.command = command
        self.dir = out_dir(args, cfg)
        self.t0 = time.perf_counter()
        self.manifest = RunManifest(["hlslab"] + list(argv), cfg.to_dict(), __version__, cfg.seed)

    def json(self, obj, suffix="") -> Path:
        path = write_json(self.dir / f"{self.command}{suffix}.json", obj)
        self.manifest.outputs.append(path.name)
        return path

    def profile(self, profile: RadialProfile) -> Path:
        path = write_profile_csv(self.dir / f"{self.command}_profile.csv", profile)
        self.manifest.outputs.append(path.name)
        return path

    def rows(self, header, rows) -> Path:
        path = write_rows_csv(self.dir / f"{self.command}.csv", header, rows)
        self.manifest.outputs.append(path.name)
        return path

    def finish(self, summary: dict) -> int:
        self.manifest.wall_time = time.perf_counter() - self.t0
        name = f"{self.command}_manifest.json"
        self.manifest.outputs.append(name)
        write_json(self.dir / name, self.manifest.to_dict())
        print(dumps(summary), end="")
        return EXIT_OK


# ---------------------------------------------------------------------------
# commands


def cmd_classify(args, argv) -> int:
    cfg = load_config(args)
    if cfg.powers is None:
        raise UsageError("classify needs p and q")
    regime = classify(cfg.n, cfg.powers, cfg.k)
    if regime.tag is RegimeTag.NOT_APPLICABLE:
        raise NotApplicableError(regime.detail)
    out = {"regime": regime.tag.value, "alpha": regime.exponents.alpha, "beta": regime.exponents.beta}
    print(json.dumps(out, separators=(",", ":")))
    return EXIT_OK


def cmd_shoot(args, argv) -> int:
    cfg = load_config(args)
    spec = cfg.system()
    if len(args.alpha) != spec.L:
        raise UsageError(f"--alpha needs {spec.L} values, got {len(args.alpha)}")
    run = Run(args, argv, cfg, "shoot")
    shot = integrate_shot(spec, args.alpha, cfg.shot)
    report = {"system": _system_dict(cfg), **_shot_report(shot, spec)}
    run.profile(shot.profile)
    run.json(report)
    return run.finish(report)


def cmd_ground_state(args, argv) -> int:
    cfg = load_config(args, require_pq=True)
    spec = cfg.system()
    run = Run(args, argv, cfg, "ground-state")
    res = simplex_search(spec, cfg.a, cfg.shot, cfg.search)
    report = {"system": _system_dict(cfg), "a": cfg.a, **res.to_dict()}
    run.profile(res.shot.profile)
    run.json(report)
    return run.finish(report)


def cmd_dirichlet_scan(args, argv) -> int:
    cfg = load_config(args, require_pq=True)
    spec = cfg.system()
    if args.samples is not None:
        alphas = simplex_samples(cfg.a, args.samples, spec.L, cfg.seed)
    else:
        if spec.L != 2:
            raise UsageError("--count needs a two-component system; use --samples")
        alphas = simplex_grid(cfg.a, args.count)
    run = Run(args, argv, cfg, "dirichlet-scan")
    table = dirichlet_scan(spec, alphas, cfg.shot, args.lam, cfg.search.jobs)
    report = {"system": _system_dict(cfg), "a": cfg.a, **table.to_dict()}
    header = ["index"] + [f"alpha{i + 1}" for i in range(spec.L)] + ["outcome", "r0", "component", "collapse_residual"]
    run.rows(header, ([j, *row.alpha, row.outcome, _finite(row.r0), row.component, row.collapse_residual]
                      for j, row in enumerate(table.rows)))
    run.json(report)
    return run.finish({k: report[k] for k in ("system", "max_collapse_residual")} | {"rows": len(table.rows)})


def _alpha_row(cfg: SystemConfig, index: int, alpha: tuple) -> dict:
    row = {"index": index, "alpha": list(alpha), "outcome": None, "r0": None, "component": None, "error": None}
    try:
        shot = integrate_shot(cfg.system(), alpha, cfg.shot)
        out = shot.outcome
        row.update(outcome=out.tag.value, component=out.component,
                   r0=out.r if out.tag is OutcomeTag.CROSSED else None)
    except Exception as exc:  # recorded per row
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def _pq_row(cfg: SystemConfig, index: int, pq: tuple, alpha) -> dict:
    p, q = pq
    row = {"index": index, "p": p, "q": q, "pq": p * q, "regime": None, "hyperbola_lhs": None,
           "hyperbola_rhs": None, "outcome": None, "r0": None, "slopes": None, "error": None}
    try:
        regime = classify(cfg.n, PowerPair(p, q), cfg.k)
        row.update(regime=regime.tag.value, hyperbola_lhs=_finite(regime.hyperbola_lhs),
                   hyperbola_rhs=_finite(regime.hyperbola_rhs))
        if alpha is not None and regime.tag is not RegimeTag.NOT_APPLICABLE:
            sub = replace(cfg, p=p, q=q)
            shot = integrate_shot(sub.system(), alpha, cfg.shot)
            out = shot.outcome
            row.update(outcome=out.tag.value, r0=out.r if out.tag is OutcomeTag.CROSSED else None)
            if out.positive:
                try:
                    row["slopes"] = [float(s) for s in fit_decay_slopes(shot.profile).slopes]
                except WindowError:
                    pass
    except Exception as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def _parallel(fn, cfg, items, consts, jobs):
    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(fn, itertools.repeat(cfg), range(len(items)), items,
                                 *[itertools.repeat(c) for c in consts]))
    else:
        rows = [fn(cfg, j, x, *consts) for j, x in enumerate(items)]
    return sorted(rows, key=lambda r: r["index"])


def cmd_sweep(args, argv) -> int:
    if args.points < 1:
        raise UsageError("--points must be >= 1")
    if args.grid == "pq":
        if args.p_range is None or args.q_range is None:
            raise UsageError("--grid pq needs --p-range and --q-range")
        if not (args.config or args.n):
            raise UsageError("--grid pq needs --n or a config")
        # base powers only seed the config; every row sets its own (p, q)
        args.p = args.p if args.p is not None else args.p_range[0]
        args.q = args.q if args.q is not None else args.q_range[0]
        cfg = load_config(args)
        if cfg.kind not in ("lane-emden", "cascade"):
            raise UsageError("--grid pq applies to lane-emden or cascade systems")
        ps = np.linspace(*args.p_range, args.points)
        qs = np.linspace(*args.q_range, args.points)
        items = [(float(p), float(q)) for p in ps for q in qs]
        run = Run(args, argv, cfg, "sweep")
        alpha = tuple(args.shoot_alpha) if args.shoot_alpha else None
        rows = _parallel(_pq_row, cfg, items, [alpha], cfg.search.jobs)
        header = ["index", "p", "q", "pq", "regime", "hyperbola_lhs", "hyperbola_rhs", "outcome", "r0", "error"]
        run.rows(header, ([r[h] for h in header] for r in rows))
    else:
        cfg = load_config(args)
        spec = cfg.system()
        axis = np.linspace(*args.alpha_range, args.points)
        grid = np.array(list(itertools.product(axis, repeat=spec.L)), dtype=float)
        if args.jitter:
            rng = np.random.default_rng(cfg.seed)
            grid = grid * (1.0 + args.jitter * rng.uniform(-1.0, 1.0, size=grid.shape))
        items = [tuple(float(x) for x in g) for g in grid]
        run = Run(args, argv, cfg, "sweep")
        rows = _parallel(_alpha_row, cfg, items, [], cfg.search.jobs)
        header = ["index"] + [f"alpha{i + 1}" for i in range(spec.L)] + ["outcome", "r0", "component", "error"]
        run.rows(header, ([r["index"], *r["alpha"], r["outcome"], r["r0"], r["component"], r["error"]]
                          for r in rows))
    report = {"grid": args.grid, "system": _system_dict(cfg), "rows": rows}
    run.json(report)
    counts = {}
    for r in rows:
        key = r.get("regime") if args.grid == "pq" else r["outcome"]
        counts[str(key)] = counts.get(str(key), 0) + 1
    return run.finish({"grid": args.grid, "rows": len(rows), "counts": counts,
                       "failures": sum(r["error"] is not None for r in rows)})


def cmd_verify(args, argv) -> int:
    cfg = load_config(args)
    spec = cfg.system()
    run = Run(args, argv, cfg, "verify")
    if args.profile:
        try:
            profile = read_profile_csv(args.profile)
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read profile: {exc}") from exc
        if profile.L != spec.L:
            raise UsageError(f"profile has {profile.L} components, system has {spec.L}")
        source = {"profile": os.path.basename(args.profile)}
    else:
        shot = integrate_shot(spec, args.alpha, cfg.shot)
        profile = shot.profile
        source = {"alpha": list(args.alpha), "outcome": shot.outcome.tag.value}
    rep = verify_profile(profile, spec, checkpoints=args.checkpoints, a1=args.a1, window=args.window)
    report = {"system": _system_dict(cfg), "source": source, **rep.to_dict()}
    run.json(report)
    return run.finish(report)


def cmd_asymptotics(args, argv) -> int:
    cfg = load_config(args, require_pq=True)
    spec = cfg.system()
    run = Run(args, argv, cfg, "asymptotics")
    if args.alpha:
        shot = integrate_shot(spec, args.alpha, cfg.shot)
        source = {"alpha": list(args.alpha)}
    else:
        res = simplex_search(spec, cfg.a, cfg.shot, cfg.search)
        shot = res.shot
        source = {"t_star": res.t_star, "alpha_star": [float(x) for x in res.alpha_star], "status": res.status}
    if not shot.outcome.positive:
        raise IntegrationError(f"shot is not positive (outcome {shot.outcome.tag.value} at r={shot.outcome.r:g})")
    slopes = fit_decay_slopes(shot.profile, args.window, spec)
    energy = energy_growth(shot.profile, spec)
    report = {
        "system": _system_dict(cfg),
        "source": source,
        "outcome": shot.outcome.to_dict(),
        "slopes": slopes.to_dict(),
        "energy_exponents": {e.name: e.to_dict() for e in energy.entries},
    }
    run.profile(shot.profile)
    run.json(report)
    return run.finish(report)


def cmd_check_assumptions(args, argv) -> int:
    cfg = load_config(args)
    spec = cfg.system()
    run = Run(args, argv, cfg, "check-assumptions")
    rep = check_assumptions(spec, args.samples, cfg.seed)
    report = {
        "system": _system_dict(cfg),
        "ok": rep.ok,
        "nonnegative_ok": rep.nonnegative_ok,
        "min_rhs_sum": rep.min_rhs_sum,
        "warnings": list(rep.warnings),
        "probes": [{"point": list(p.point), "zero_coords": list(p.zero_coords), "radii": list(p.radii),
                    "max_ratios": [_finite(x) for x in p.max_ratios], "bounded": p.bounded} for p in rep.probes],
    }
    run.json(report)
    return run.finish(report)


COMMANDS = {
    "classify": cmd_classify,
    "shoot": cmd_shoot,
    "ground-state": cmd_ground_state,
    "dirichlet-scan": cmd_dirichlet_scan,
    "sweep": cmd_sweep,
    "verify": cmd_verify,
    "asymptotics": cmd_asymptotics,
    "check-assumptions": cmd_check_assumptions,
}


def _fail(code: int, exc: BaseException) -> int:
    err = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    for attr in ("key", "line"):
        if getattr(exc, attr, None) is not None:
            err[attr] = getattr(exc, attr)
    print(json.dumps(err, sort_keys=True), file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed usage
        return int(exc.code or 0) and EXIT_INVALID
    try:
        return COMMANDS[args.command](args, argv)
    except (ConfigError, NotApplicableError, UsageError) as exc:
        return _fail(EXIT_INVALID, exc)
    except RUNTIME_ERRORS as exc:
        return _fail(EXIT_RUNTIME, exc)
    except ValueError as exc:
        return _fail(EXIT_INVALID, exc)
    except Exception as exc:
        return _fail(EXIT_RUNTIME, exc)


if __name__ == "__main__":
    sys.exit(main())
