"""Command-line front end.

Subcommands::

    region    MER region boundaries in relay power (CSV)
    curve     MER vs optimized ergodic capacity over relay power (CSV)
    check     all criteria at one operating point
    optimize  numerically optimal eigenmode allocation at one point

Powers are given in dB relative to the noise power. ``--config FILE`` reads
``key = value`` lines (keys are long flag names, with or without dashes);
explicit flags win over the file.

Exit codes: 0 success or MER optimal, 1 MER not optimal, 2 usage or I/O
error, 3 degenerate criterion, 4 optimizer did not converge.
"""

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .allocation import optimize_allocation
from .channel import SystemConfig, build_constant_correlation
from .criteria import boundary_db, mer_allocation, mer_exact_condition
from .montecarlo import estimate_ergodic_capacity, finite_difference_derivative

EXIT_OK = 0
EXIT_NOT_OPTIMAL = 1
EXIT_USAGE = 2
EXIT_DEGENERATE = 3
EXIT_NOT_CONVERGED = 4

REGION_COLUMNS = ["p_s_db", "rho", "n_s", "p_r_boundary_exact_db",
                  "p_r_boundary_large_ns_db", "p_r_boundary_jensen_db"]
CURVE_COLUMNS = ["p_r_db", "rho", "cap_mer_nats", "cap_mer_se", "cap_opt_nats",
                 "cap_opt_se", "mer_optimal"]


class UsageError(Exception):
    pass


def _frange(start: float, stop: float, step: float) -> List[float]:
    """Inclusive float range on a step grid."""
    if not step > 0:
        raise UsageError("range step must be positive")
    if stop < start:
        raise UsageError("range stop must not be below start")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + k * step, 12) for k in range(n)]


@dataclass(frozen=True)
class SweepSpec:
    p_s_db: Tuple[float, float, float]
    p_r_db: Tuple[float, float, float]
    rhos: Tuple[float, ...]
    n_s: Tuple[int, ...]
    n_r: int = 2
    mc_samples: int = 100_000
    seed: int = 1

    def __post_init__(self):
        for rng in (self.p_s_db, self.p_r_db):
            _frange(*rng)
        if not self.rhos or not self.n_s:
            raise UsageError("rho and n_s lists must be nonempty")
        if any(not 0 <= r < 1 for r in self.rhos):
            raise UsageError("rho must lie in [0, 1)")
        if any(n < 1 for n in self.n_s) or self.n_r < 2:
            raise UsageError("need n_s >= 1 and n_r >= 2")
        if self.mc_samples < 2:
            raise UsageError("need at least 2 Monte Carlo samples")

    @property
    def p_s_grid(self):
        return _frange(*self.p_s_db)

    @property
    def p_r_grid(self):
        return _frange(*self.p_r_db)


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.16e}"


def write_csv(path: str, columns: Sequence[str], rows: Sequence[Sequence]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    if path == "-":
        sys.stdout.write(buf.getvalue())
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def _pool_map(fn, items, jobs: int):
    if jobs <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _region_row(item):
    p_s_db, rho, n_s, n_r, lo, hi = item
    cols = [boundary_db(p_s_db, rho, n_s, n_r, criterion=c, lo_db=lo, hi_db=hi)
            for c in ("exact", "large_ns", "jensen")]
    return [p_s_db, rho, n_s] + cols


def region_rows(spec: SweepSpec, jobs: int = 1, lo_db: float = -30.0, hi_db: float = 60.0):
    items = [(ps, rho, ns, spec.n_r, lo_db, hi_db)
             for ps in spec.p_s_grid for rho in spec.rhos for ns in spec.n_s]
    return _pool_map(_region_row, items, jobs)


def _curve_row(item):
    p_s_db, p_r_db, rho, n_s, n_r, samples, seed = item
    config = SystemConfig.from_db(p_s_db, p_r_db, n_s=n_s, n_r=n_r)
    corr = build_constant_correlation(rho, n_r)
    mer = estimate_ergodic_capacity(config, corr, mer_allocation(config, corr), samples, seed)
    opt = optimize_allocation(config, corr, samples, seed)
    report = mer_exact_condition(config, corr)
    return [p_r_db, rho, mer.mean, mer.std_error, opt.capacity.mean, opt.capacity.std_error,
            report.mer_optimal]


def curve_rows(spec: SweepSpec, jobs: int = 1):
    p_s = spec.p_s_db[0]
    items = [(p_s, pr, rho, spec.n_s[0], spec.n_r, spec.mc_samples, spec.seed)
             for rho in spec.rhos for pr in spec.p_r_grid]
    return _pool_map(_curve_row, items, jobs)


def _to_bits(rows, cols):
    scale = 1.0 / math.log(2.0)
    return [[v * scale if i in cols else v for i, v in enumerate(r)] for r in rows]


def cmd_region(args) -> int:
    spec = SweepSpec(p_s_db=tuple(args.ps_db_range), p_r_db=(0.0, 0.0, 1.0),
                     rhos=tuple(args.rho), n_s=tuple(args.ns), n_r=args.nr)
    rows = region_rows(spec, jobs=args.jobs, lo_db=args.lo_db, hi_db=args.hi_db)
    write_csv(args.out, REGION_COLUMNS, rows)
    return EXIT_OK


def cmd_curve(args) -> int:
    spec = SweepSpec(p_s_db=(args.ps_db, args.ps_db, 1.0), p_r_db=tuple(args.pr_db_range),
                     rhos=tuple(args.rho), n_s=(args.ns[0],), n_r=args.nr,
                     mc_samples=args.samples, seed=args.seed)
    rows = curve_rows(spec, jobs=args.jobs)
    columns = list(CURVE_COLUMNS)
    if args.bits:
        rows = _to_bits(rows, {2, 3, 4, 5})
        columns = [c.replace("_nats", "_bits") for c in columns]
    write_csv(args.out, columns, rows)
    return EXIT_OK


def _point(args):
    if not 0 <= args.rho[0] < 1:
        raise UsageError("rho must lie in [0, 1)")
    if args.nr < 2:
        raise UsageError("the criteria need n_r >= 2")
    config = SystemConfig.from_db(args.ps_db, args.pr_db, n_s=args.ns[0], n_r=args.nr)
    return config, build_constant_correlation(args.rho[0], args.nr)


def _jsonable(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return _jsonable(x.item())
    return x


def cmd_check(args) -> int:
    config, corr = _point(args)
    report = mer_exact_condition(config, corr)
    verify = None
    if args.verify:
        step = 1e-3 * report.total_gain
        est = finite_difference_derivative(config, corr, report.total_gain, step,
                                           args.samples, args.seed)
        agree = (est.mean <= 0) == (report.margin_exact <= 0) or \
            abs(report.margin_exact) < 2 * est.std_error
        verify = {"fd_mean": est.mean, "fd_std_error": est.std_error,
                  "n_samples": est.n_samples, "p_step": step, "agrees": bool(agree)}
    if args.json:
        doc = {
            "config": {"p_s_db": args.ps_db, "p_r_db": args.pr_db, "rho": args.rho[0],
                       "n_s": config.n_s, "n_r": config.n_r, "n0": config.n0},
            "report": {k: _jsonable(v) for k, v in report.to_dict().items()},
        }
        if verify is not None:
            doc["verify"] = {k: _jsonable(v) for k, v in verify.items()}
        json.dump(doc, sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
    else:
        print(f"P_S = {args.ps_db} dB, P_R = {args.pr_db} dB, rho = {args.rho[0]}, "
              f"n_S = {config.n_s}, n_R = {config.n_r}")
        for key, val in report.to_dict().items():
            print(f"  {key:20s} {fmt(val)}")
        if verify is not None:
            print("  finite-difference check:")
            for key, val in verify.items():
                print(f"    {key:18s} {fmt(val)}")
    if report.degenerate:
        return EXIT_DEGENERATE
    return EXIT_OK if report.mer_optimal else EXIT_NOT_OPTIMAL


def cmd_optimize(args) -> int:
    config, corr = _point(args)
    res = optimize_allocation(config, corr, args.samples, args.seed)
    scale, unit = (1.0 / math.log(2.0), "bits") if args.bits else (1.0, "nats")
    print(f"alpha*     {fmt(res.alpha)}")
    print("weights*   " + " ".join(fmt(w) for w in res.weights))
    print("lambda_G*  " + " ".join(fmt(g) for g in res.best_alloc.gains))
    print(f"capacity   {fmt(res.capacity.mean * scale)} +/- "
          f"{fmt(res.capacity.std_error * scale)} {unit}")
    print(f"iterations {res.iterations}")
    print(f"converged  {fmt(res.converged)}")
    for key, val in res.diagnostics.items():
        print(f"  {key:18s} {fmt(val)}")
    return EXIT_OK if res.converged else EXIT_NOT_CONVERGED


def read_config(path: str) -> dict:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key = value")
            key, val = (s.strip() for s in line.split("=", 1))
            out[key.lstrip("-").replace("-", "_")] = val
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mer-relay", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, sweep=False):
        p.add_argument("--config", help="key = value defaults file")
        p.add_argument("--rho", type=float, nargs="+", default=[0.3, 0.5] if sweep else [0.5],
                       help="inter-antenna correlation(s) (default: %(default)s)")
        p.add_argument("--ns", type=int, nargs="+", default=[2, 4] if sweep else [2],
                       help="source antennas (default: %(default)s)")
        p.add_argument("--nr", type=int, default=2, help="relay antennas (default: %(default)s)")
        p.add_argument("--samples", type=int, default=100_000,
                       help="Monte Carlo samples (default: %(default)s)")
        p.add_argument("--seed", type=int, default=1, help="RNG seed (default: %(default)s)")

    p = sub.add_parser("region", help="MER region boundary P_R(P_S), CSV")
    common(p, sweep=True)
    p.add_argument("--ps-db-range", type=float, nargs=3, default=[0.0, 20.0, 1.0],
                   metavar=("START", "STOP", "STEP"), help="P_S grid in dB (default: %(default)s)")
    p.add_argument("--lo-db", type=float, default=-30.0, help="bisection bracket low (dB)")
    p.add_argument("--hi-db", type=float, default=60.0, help="bisection bracket high (dB)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes (default: %(default)s)")
    p.add_argument("--out", default="-", help="output CSV path, '-' for stdout")
    p.set_defaults(func=cmd_region)

    p = sub.add_parser("curve", help="MER vs optimized capacity over P_R, CSV")
    common(p, sweep=True)
    p.set_defaults(ns=[2])
    p.add_argument("--ps-db", type=float, default=10.0, help="P_S in dB (default: %(default)s)")
    p.add_argument("--pr-db-range", type=float, nargs=3, default=[0.0, 30.0, 1.0],
                   metavar=("START", "STOP", "STEP"), help="P_R grid in dB (default: %(default)s)")
    p.add_argument("--bits", action="store_true", help="report capacities in bits")
    p.add_argument("--jobs", type=int, default=1, help="worker processes (default: %(default)s)")
    p.add_argument("--out", default="-", help="output CSV path, '-' for stdout")
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("check", help="evaluate every criterion at one point")
    common(p)
    p.add_argument("--ps-db", type=float, default=10.0, help="P_S in dB (default: %(default)s)")
    p.add_argument("--pr-db", type=float, default=10.0, help="P_R in dB (default: %(default)s)")
    p.add_argument("--verify", action="store_true",
                   help="add a Monte Carlo finite-difference cross-check")
    p.add_argument("--json", action="store_true", help="print JSON instead of text")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("optimize", help="optimize the eigenmode allocation at one point")
    common(p)
    p.add_argument("--ps-db", type=float, default=10.0, help="P_S in dB (default: %(default)s)")
    p.add_argument("--pr-db", type=float, default=10.0, help="P_R in dB (default: %(default)s)")
    p.add_argument("--bits", action="store_true", help="report capacity in bits")
    p.set_defaults(func=cmd_optimize)
    return parser


def _apply_config(parser, argv):
    # Two passes: find --config, load it as defaults, then parse for real.
    args = parser.parse_args(argv)
    if not getattr(args, "config", None):
        return args
    values = read_config(args.config)
    sub = parser._subparsers._group_actions[0].choices[args.command]
    known = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, raw in values.items():
        if key not in known:
            raise UsageError(f"unknown config key {key!r}")
        action = known[key]
        if action.nargs in ("+", 3):
            parts = raw.replace(",", " ").split()
            defaults[key] = [action.type(v) for v in parts]
        elif action.const is True:
            defaults[key] = raw.lower() in ("1", "true", "yes", "on")
        else:
            defaults[key] = action.type(raw) if action.type else raw
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        return args.func(args)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    except (UsageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
