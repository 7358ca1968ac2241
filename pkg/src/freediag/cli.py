"""Command-line front end.

Commands: ``convolve``, ``atoms``, ``check-theorem``, ``mc``, ``selftest``.
Settings come from flags, then an optional JSON ``--config`` file, then the
documented defaults.  Exit codes: 0 ok, 2 input error, 3 numerical failure,
4 acceptance failure.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional

import numpy as np

from . import __version__
from .boundary import LadderParams, ladder_csv_header, ladder_csv_rows, build_ladder
from .errors import (DimensionMismatch, FreeDiagError, InconsistentProfile, LadderFailure,
                     LinearSolveFailure, MonotonicityViolation, NoConvergence)
from .models import check_compatible, load_model
from .output import write_csv, write_json

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_ACCEPTANCE = 0, 2, 3, 4

DEFAULTS = {
    "grid": "-3:3:601",
    "y": 1e-6,
    "tol": 1e-12,
    "a": None,
    "candidates": "auto",
    "y0": 1.0,
    "rho": 0.5,
    "K": 45,
    "N": 2000,
    "trials": 20,
    "seed": 20240611,
    "mc_grid": "-3:3:21",
    "mc_y": 0.05,
    "output_dir": ".",
    "threads": os.cpu_count() or 1,
    "dump_ladder": False,
}

NUMERIC_ERRORS = (NoConvergence, LadderFailure, MonotonicityViolation, InconsistentProfile,
                  LinearSolveFailure)


class InputError(Exception):
    pass


def parse_grid(text: str) -> np.ndarray:
    """``start:stop:count`` to ``count`` evenly spaced points (endpoints included)."""
    try:
        start, stop, count = text.split(":")
        start, stop, count = float(start), float(stop), int(count)
    except ValueError:
        raise InputError(f"grid must look like start:stop:count, got {text!r}") from None
    if not (math.isfinite(start) and math.isfinite(stop)) or not 1 <= count <= 1_000_000:
        raise InputError(f"grid {text!r} needs finite endpoints and 1 <= count <= 1e6")
    return np.linspace(start, stop, count)


def _finite_positive(name, v, upper=math.inf):
    if v is None or not isinstance(v, (int, float)) or isinstance(v, bool) \
            or not math.isfinite(v) or not 0 < v <= upper:
        raise InputError(f"{name} must be a finite number in (0, {upper:g}], got {v!r}")
    return v


def resolve(args: argparse.Namespace) -> dict:
    """Merge flags over the config file over the defaults and validate ranges."""
    cfg = {}
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(cfg, dict):
            raise InputError("config file must hold a JSON object")
        unknown = set(cfg) - set(DEFAULTS)
        if unknown:
            raise InputError(f"unknown config keys: {sorted(unknown)}")
    out = {}
    for key, default in DEFAULTS.items():
        flag = getattr(args, key, None)
        out[key] = flag if flag is not None else cfg.get(key, default)

    _finite_positive("tol", out["tol"], 1e-3)
    if out["tol"] < 1e-16:
        raise InputError(f"tol must be at least 1e-16, got {out['tol']!r}")
    _finite_positive("y", out["y"])
    _finite_positive("mc_y", out["mc_y"])
    _finite_positive("y0", out["y0"])
    _finite_positive("rho", out["rho"], 1.0)
    if out["rho"] >= 1:
        raise InputError("rho must be below 1")
    for key, lo, hi in (("K", 2, 200), ("N", 1, 20000), ("trials", 1, 100000), ("threads", 1, 1024)):
        v = out[key]
        if not isinstance(v, int) or isinstance(v, bool) or not lo <= v <= hi:
            raise InputError(f"{key} must be an integer in [{lo}, {hi}], got {v!r}")
    if not isinstance(out["seed"], int) or not 0 <= out["seed"] < 2 ** 64:
        raise InputError(f"seed must be a 64-bit unsigned integer, got {out['seed']!r}")
    if out["a"] is not None:
        if not isinstance(out["a"], (int, float)) or not math.isfinite(out["a"]):
            raise InputError(f"a must be a finite number, got {out['a']!r}")
    out["ladder"] = LadderParams(float(out["y0"]), float(out["rho"]), int(out["K"]))
    os.makedirs(out["output_dir"], exist_ok=True)
    if not os.access(out["output_dir"], os.W_OK):
        raise InputError(f"output directory {out['output_dir']} is not writable")
    return out


def _models(args):
    try:
        mx, my = load_model(args.model_x), load_model(args.model_y)
    except OSError as exc:
        raise InputError(f"cannot read model file: {exc}") from None
    check_compatible(mx, my)
    return mx, my


def _path(cfg, name):
    return os.path.join(cfg["output_dir"], name)


def cmd_convolve(args, cfg, pool) -> int:
    from .subordination import grid_convolve, grid_csv_header, grid_csv_rows

    mx, my = _models(args)
    grid = parse_grid(cfg["grid"])
    rows = grid_convolve(mx, my, grid, cfg["y"], tol=cfg["tol"], executor=pool)
    write_csv(_path(cfg, "density.csv"), grid_csv_header(mx.dim), grid_csv_rows(rows, mx.dim))
    ok = [r for r in rows if r.ok]
    summary = {
        "points": len(rows),
        "failed": len(rows) - len(ok),
        "failed_a": [r.a for r in rows if not r.ok],
        "max_residual_vsubord": max((r.residual_vsubord for r in ok), default=None),
        "max_residual_bsubord": max((r.residual_bsubord for r in ok), default=None),
        "max_iterations": max((r.iterations for r in ok), default=None),
        "mean_iterations": (sum(r.iterations for r in ok) / len(ok)) if ok else None,
    }
    write_json(_path(cfg, "summary.json"), summary)
    print(f"wrote {len(rows)} rows to {_path(cfg, 'density.csv')}; "
          f"{summary['failed']} failed")
    return EXIT_OK if not summary["failed"] else EXIT_NUMERIC


def cmd_atoms(args, cfg, pool) -> int:
    from .theorem import atom_scan

    mx, my = _models(args)
    cands = cfg["candidates"]
    if cands != "auto":
        try:
            cands = [float(v) for v in str(cands).split(",") if v.strip()]
        except ValueError:
            raise InputError(f"candidates must be 'auto' or comma-separated numbers") from None
        if not all(math.isfinite(v) for v in cands):
            raise InputError("candidates must be finite")
    found = atom_scan(mx, my, cands, ladder_params=cfg["ladder"], executor=pool)
    write_csv(_path(cfg, "atoms.csv"), ["a", "trace_mass"], found)
    print(f"{'a':>12}  {'trace E[p]':>12}")
    for a, m in found:
        print(f"{a:12.6g}  {m:12.6g}")
    return EXIT_OK


def cmd_check_theorem(args, cfg, pool) -> int:
    from .theorem import check_invariant_projection

    mx, my = _models(args)
    if cfg["a"] is None:
        raise InputError("check-theorem needs --a")
    a = float(cfg["a"])
    rep = check_invariant_projection(mx, my, a, ladder_params=cfg["ladder"], tol=cfg["tol"])
    write_json(_path(cfg, "theorem.json"), rep.to_dict())
    if cfg["dump_ladder"]:
        lad = build_ladder(mx, my, a, cfg["ladder"], tol=cfg["tol"])
        write_csv(_path(cfg, "ladder.csv"), ladder_csv_header(mx.dim), ladder_csv_rows(lad))
    print(rep.to_json(indent=2))
    return EXIT_OK


def cmd_mc(args, cfg, pool) -> int:
    from .montecarlo import ensemble_for_model, validate

    mx, my = _models(args)
    sx = ensemble_for_model(mx, cfg["N"], cfg["seed"], cfg["trials"])
    sy = ensemble_for_model(my, cfg["N"], cfg["seed"] + 1, cfg["trials"])
    comp = validate(mx, my, sx, sy, parse_grid(cfg["mc_grid"]), cfg["mc_y"], executor=pool)
    comp.write_csv(_path(cfg, "mc.csv"))
    print(f"sup discrepancy {comp.sup_discrepancy:.6g} over {len(comp.points)} points, "
          f"{comp.trials} trials")
    return EXIT_OK


def cmd_selftest(args, cfg, pool) -> int:
    from .acceptance import run_battery

    def show(r):
        print(r.line() + f"  [{r.seconds:.1f}s]", flush=True)

    results = run_battery(cfg["output_dir"], cfg["seed"], executor=pool, report=show)
    ok = all(r.passed for r in results)
    print(f"selftest {'PASSED' if ok else 'FAILED'}: "
          f"{sum(r.passed for r in results)}/{len(results)} criteria")
    return EXIT_OK if ok else EXIT_ACCEPTANCE


COMMANDS = {"convolve": cmd_convolve, "atoms": cmd_atoms, "check-theorem": cmd_check_theorem,
            "mc": cmd_mc, "selftest": cmd_selftest}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="freediag", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, models=True):
        if models:
            sp.add_argument("model_x", help="JSON model file for X")
            sp.add_argument("model_y", help="JSON model file for Y")
        sp.add_argument("--config", help="JSON file with default settings")
        sp.add_argument("--output-dir", dest="output_dir", help="directory for outputs (default .)")
        sp.add_argument("--threads", type=int, help="worker threads (default: CPU count)")
        sp.add_argument("--tol", type=float, help="solver tolerance (default 1e-12)")

    def ladder(sp):
        sp.add_argument("--y0", type=float, help="top rung of the y-ladder (default 1)")
        sp.add_argument("--rho", type=float, help="ladder ratio (default 0.5)")
        sp.add_argument("--K", type=int, help="number of rungs (default 45)")

    sp = sub.add_parser("convolve", help="density of X+Y on a grid")
    common(sp)
    sp.add_argument("--grid", help="start:stop:count (default -3:3:601)")
    sp.add_argument("--y", type=float, help="distance to the real axis (default 1e-6)")

    sp = sub.add_parser("atoms", help="scan candidate levels for atoms of X+Y")
    common(sp)
    ladder(sp)
    sp.add_argument("--candidates", help="'auto' or comma-separated levels (default auto)")

    sp = sub.add_parser("check-theorem", help="invariant-projection report at level a")
    common(sp)
    ladder(sp)
    sp.add_argument("--a", type=float, help="real level to examine")
    sp.add_argument("--dump-ladder", dest="dump_ladder", action="store_true", default=None,
                    help="also write ladder.csv")

    sp = sub.add_parser("mc", help="random-matrix comparison")
    common(sp)
    sp.add_argument("--N", type=int, help="matrix size (default 2000)")
    sp.add_argument("--trials", type=int, help="number of samples (default 20)")
    sp.add_argument("--seed", type=int, help="seed; Y uses seed+1 (default 20240611)")
    sp.add_argument("--grid", dest="mc_grid", help="start:stop:count (default -3:3:21)")
    sp.add_argument("--y", dest="mc_y", type=float, help="distance to the real axis (default 0.05)")

    sp = sub.add_parser("selftest", help="run the acceptance battery")
    common(sp, models=False)
    sp.add_argument("--seed", type=int, help="battery seed (default 20240611)")
    return p


def _attach_grid_values(argv: List[str]) -> List[str]:
    """Let ``--grid -3:3:601`` through: argparse would read the value as a flag."""
    out, i = [], 0
    while i < len(argv):
        if argv[i] in ("--grid", "--candidates") and i + 1 < len(argv) \
                and argv[i + 1].startswith("-"):
            out.append(f"{argv[i]}={argv[i + 1]}")
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    argv = _attach_grid_values(list(sys.argv[1:] if argv is None else argv))
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        cfg = resolve(args)
        with ThreadPoolExecutor(max_workers=cfg["threads"]) as pool:
            return COMMANDS[args.command](args, cfg, pool)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NUMERIC_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (FreeDiagError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
