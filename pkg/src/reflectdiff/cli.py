"""Command line interface: ``reflectdiff <verb> --scenario FILE ...``.

Exit codes: 0 when every check passes, 1 when a check fails (or a
simulation aborts), 2 on bad input.
"""

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from . import __version__
from .cones import boundary_sweep, cone_report
from .controlled import default_workers, map_paths, simulate_controlled
from .convergence import METRICS, convergence_study
from .errors import InputError, ReflectDiffError
from .markov import StoppingRule, run_restart_test
from .resolvent import (VGrid, agree, combined_stderr, estimate_v_grid, estimate_vh_constrained,
                        estimate_vh_controlled, parse_test_function, viscosity_subsolution_check,
                        viscosity_supersolution_check)
from .scenario import load_scenario
from .sder import controlled_to_sder, simulate_sder
from .timechange import check_natural, time_change

EXIT_PASS, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


def _floats(text, name):
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise InputError(f"{name} must be comma-separated numbers, got {text!r}") from None


def _dump_json(obj, path):
    text = json.dumps(obj, indent=1, sort_keys=True, allow_nan=True)
    if path == "-":
        print(text)
    else:
        Path(path).write_text(text + "\n")


def _write_csv(rows, path):
    if not rows:
        return
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    if path == "-":
        sys.stdout.write(buf.getvalue())
    else:
        Path(path).write_text(buf.getvalue())


def _scenario(args):
    sc = load_scenario(args.scenario)
    changes = {k: getattr(args, k) for k in ("dt", "delta") if getattr(args, k, None) is not None}
    return sc.with_numerics(**changes) if changes else sc


def _workers(args):
    return default_workers() if args.workers is None else int(args.workers)


def _x0(args, sc):
    return sc.x0 if getattr(args, "x0", None) is None else _floats(args.x0, "x0")


# verbs ------------------------------------------------------------------


def cmd_conecheck(args):
    sc = load_scenario(args.scenario)
    reports = []
    if args.point:
        reports = [cone_report(sc.domain, _floats(p, "point")) for p in args.point]
    if args.samples > 0:
        swept, _ = boundary_sweep(sc.domain, args.samples, seed=args.seed,
                                  workers=_workers(args))
        reports += swept
    n_failed = sum(not r.holds for r in reports)
    out = {"scenario_hash": sc.hash, "seed": args.seed, "n_points": len(reports),
           "n_failed": n_failed,
           "min_margin": min((r.condition_b.margin for r in reports), default=None),
           "min_beta": min((r.condition_c.beta_x for r in reports), default=None),
           "points": [r.to_dict() for r in reports]}
    if args.json:
        _dump_json(out, args.json)
    print(f"conecheck: {len(reports) - n_failed}/{len(reports)} points satisfy the cone conditions")
    return EXIT_PASS if n_failed == 0 and reports else EXIT_FAIL


def cmd_simulate(args):
    sc = _scenario(args)
    x0 = _x0(args, sc)
    seed = sc.seed("simulate") if args.seed is None else args.seed
    T = args.lambda0_target if args.lambda0_target is not None else sc.numerics.t_trunc
    workers = _workers(args)
    mode = sc.numerics.select_mode

    def one(p):
        if args.mode == "sder":
            sp = simulate_sder(sc.domain, sc.coefficients, x0, T, sc.dt, sc.delta, seed, p, mode)
            row = {"path": p, "seed": seed, "samples": len(sp), "atoms": int(sp.atom_t.size),
                   "t": float(sp.t[-1]), "lambda": float(sp.lam[-1]),
                   "decomposition_residual": sp.decomposition_residual(sc.coefficients),
                   **{f"x{k}": float(v) for k, v in enumerate(sp.x[-1])}}
            return row, sp.to_dict() if args.emit != "summary" else None, True
        path = simulate_controlled(sc.domain, sc.coefficients, sc.behavior, x0, sc.dt,
                                   delta=sc.delta, lambda0_target=T, seed=seed, path=p,
                                   select_mode=mode)
        row = path.summary()
        ok = row["clock_residual"] <= sc.numerics.tolerances["clock"]
        dump = None
        if args.emit == "controlled":
            dump = path.to_dict()
        elif args.emit == "constrained":
            cp = time_change(path)
            nat = check_natural(cp)
            row["naturality"] = nat.max_distance
            dump = dict(cp.to_dict(), naturality=nat.to_dict())
        elif args.emit == "sder":
            dump = controlled_to_sder(path).to_dict()
        return row, dump, ok

    results = map_paths(one, args.paths, workers)
    rows = [r for r, _, _ in results]
    meta = {"scenario_hash": sc.hash, "seed": seed, "workers": workers, "mode": args.mode,
            "dt": sc.dt, "delta": sc.delta, "horizon": T}
    prefix = args.out
    _write_csv(rows, "-" if prefix == "-" else f"{prefix}_summary.csv")
    if args.emit != "summary" and prefix != "-":
        _dump_json({"meta": meta, "paths": [d for _, d, _ in results]}, f"{prefix}_paths.json")
    ok = all(o for _, _, o in results)
    print(f"simulate: {args.paths} {args.mode} paths, "
          f"{'all checks passed' if ok else 'clock identity violated'}", file=sys.stderr)
    return EXIT_PASS if ok else EXIT_FAIL


def cmd_resolvent(args):
    sc = _scenario(args)
    h = parse_test_function(args.h, sc.domain.dim)
    seed = sc.seed("resolvent") if args.seed is None else args.seed
    workers = _workers(args)
    if args.grid_out:
        est = "controlled" if args.estimator == "both" else args.estimator
        grid = estimate_v_grid(sc, h, args.spacing, args.paths, seed, args.horizon, est, workers)
        grid.meta["workers"] = workers
        _dump_json(grid.to_dict(), args.grid_out)
        print(f"resolvent: v-grid with {len(grid.values)} points written to {args.grid_out}")
        return EXIT_PASS
    x0 = _x0(args, sc)
    names = ["controlled", "constrained"] if args.estimator == "both" else [args.estimator]
    fns = {"controlled": estimate_vh_controlled, "constrained": estimate_vh_constrained}
    ests = {}
    for k, name in enumerate(names):
        # independent streams for the two estimators unless asked to share
        s = seed if args.common_seed else seed + k
        ests[name] = fns[name](sc, h, x0, args.paths, s, args.horizon, workers)
    out = {name: e.to_dict() for name, e in ests.items()}
    ok = True
    if len(ests) == 2:
        a, b = ests["controlled"], ests["constrained"]
        ok = agree(a, b)
        out["agreement"] = {"difference": a.mean - b.mean, "combined_stderr": combined_stderr(a, b),
                            "passes": ok}
    if args.reference is not None:
        errs = {n: abs(e.mean - args.reference) for n, e in ests.items()}
        ok = ok and all(v <= args.tol for v in errs.values())
        out["reference"] = {"value": args.reference, "tolerance": args.tol, "errors": errs}
    out["workers"] = workers
    if args.json:
        _dump_json(out, args.json)
    for name, e in ests.items():
        print(f"resolvent[{name}]: {e.mean:.6f} +/- {e.stderr:.6f} (N={e.n_paths})")
    return EXIT_PASS if ok else EXIT_FAIL


def cmd_viscosity(args):
    sc = load_scenario(args.scenario)
    grid = VGrid.from_dict(json.loads(Path(args.grid).read_text()))
    f = parse_test_function(args.f, sc.domain.dim)
    h = parse_test_function(args.h, sc.domain.dim)
    check = viscosity_supersolution_check if args.super else viscosity_subsolution_check
    rep = check(grid, f, sc, h, args.tol)
    if args.json:
        _dump_json(rep.to_dict(), args.json)
    kind = "supersolution" if args.super else "subsolution"
    print(f"viscosity {kind}: {rep.location} point {list(rep.x_star)}, "
          f"{'pass' if rep.passes else 'FAIL'} (slack {rep.slack:.4g})")
    return EXIT_PASS if rep.passes else EXIT_FAIL


def _parse_rule(text):
    text = text.strip()
    if text.startswith("{"):
        try:
            return StoppingRule.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise InputError(f"stopping rule is not valid JSON: {exc}") from None
    kind, _, rest = text.partition(":")
    if kind == "fixed":
        return StoppingRule.fixed(float(rest))
    raise InputError("stopping rule must be fixed:T or a JSON object")


def cmd_markov(args):
    sc = _scenario(args)
    rule = _parse_rule(args.rule)
    bins = [int(v) for v in _floats(args.bins, "bins")]
    ctrl = None if args.control_start is None else _floats(args.control_start, "control start")
    rep = run_restart_test(sc, rule, _floats(args.lags, "lags"), args.paths, args.seed, bins,
                           _x0(args, sc), args.mode, ctrl, workers=_workers(args))
    out = dict(rep.to_dict(), workers=_workers(args))
    if args.json:
        _dump_json(out, args.json)
    if args.csv:
        rows = [{"cell": " ".join(map(str, c.cell)), "n": c.n, "lag": lag, "coord": k,
                 "ks": float(c.statistics[j, k]), "p": float(c.pvalues[j, k])}
                for c in rep.cells for j, lag in enumerate(rep.lags)
                for k in range(c.pvalues.shape[1])]
        _write_csv(rows, args.csv)
    print(f"markov-test[{rep.mode}]: {len(rep.cells)} cells, min p = {rep.min_p:.4g}, "
          f"{'pass' if rep.passes else 'FAIL'}")
    return EXIT_PASS if rep.passes else EXIT_FAIL


def cmd_converge(args):
    sc = load_scenario(args.scenario)
    ladder = []
    for rung in args.ladder.split(","):
        dt, _, delta = rung.partition(":")
        try:
            ladder.append((float(dt), float(delta) if delta else None))
        except ValueError:
            raise InputError(f"bad ladder rung {rung!r}; use dt or dt:delta") from None
    h = None if args.h is None else parse_test_function(args.h, sc.domain.dim)
    table = convergence_study(sc, ladder, args.metric, args.paths, args.seed, h, _x0(args, sc),
                              args.reference, args.estimator, args.horizon, _workers(args))
    out = dict(table.to_dict(), workers=_workers(args))
    if args.json:
        _dump_json(out, args.json)
    if args.csv:
        _write_csv(table.rows(), args.csv)
    if args.metric == "clock":
        ok = all(r.value <= sc.numerics.tolerances["clock"] for r in table.rungs)
    else:
        ok = table.non_increasing
    for r in table.rungs:
        err = "" if r.error is None else f" error {r.error:.4g}"
        print(f"converge[{args.metric}] dt={r.dt:g} delta={r.delta:g}: {r.value:.6g}{err}")
    return EXIT_PASS if ok else EXIT_FAIL


# parser -----------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="reflectdiff",
                                description="Simulate and check obliquely reflected diffusions.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="verb", required=True)

    def common(sp, numerics=True):
        sp.add_argument("--scenario", required=True, help="scenario JSON file or builtin name")
        sp.add_argument("--workers", type=int, help="thread count (default: $REFLECTDIFF_WORKERS or 1)")
        if numerics:
            sp.add_argument("--dt", type=float)
            sp.add_argument("--delta", type=float)
            sp.add_argument("--seed", type=int)

    sp = sub.add_parser("conecheck", help="check the cone conditions at sampled boundary points")
    common(sp, numerics=False)
    sp.add_argument("--samples", type=int, default=500)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--point", action="append", help="extra boundary point x1,x2,...")
    sp.add_argument("--json")
    sp.set_defaults(func=cmd_conecheck)

    sp = sub.add_parser("simulate", help="simulate paths and write summaries or dumps")
    common(sp)
    sp.add_argument("--paths", type=int, default=1)
    sp.add_argument("--lambda0-target", type=float, help="interior clock (physical time) horizon")
    sp.add_argument("--x0")
    sp.add_argument("--mode", choices=["controlled", "sder"], default="controlled")
    sp.add_argument("--emit", choices=["summary", "controlled", "constrained", "sder"],
                    default="summary", help="what full-path JSON dump to write")
    sp.add_argument("--out", default="-", help="output prefix, or - for CSV on stdout")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("resolvent", help="estimate v_h(x0) or a v-grid")
    common(sp)
    sp.add_argument("--h", required=True, help="const:C, exp:a, bump:c:w or JSON")
    sp.add_argument("--x0")
    sp.add_argument("--paths", type=int, default=1000)
    sp.add_argument("--horizon", type=float)
    sp.add_argument("--estimator", choices=["controlled", "constrained", "both"], default="both")
    sp.add_argument("--common-seed", action="store_true",
                    help="drive both estimators with the same streams")
    sp.add_argument("--reference", type=float)
    sp.add_argument("--tol", type=float, default=0.02)
    sp.add_argument("--grid-out", help="write a v-grid JSON instead of a point estimate")
    sp.add_argument("--spacing", type=float)
    sp.add_argument("--json")
    sp.set_defaults(func=cmd_resolvent)

    sp = sub.add_parser("viscosity", help="viscosity inequality at the maximizer of v - f")
    common(sp, numerics=False)
    sp.add_argument("--grid", required=True, help="v-grid JSON from `resolvent --grid-out`")
    sp.add_argument("--f", required=True)
    sp.add_argument("--h", required=True)
    sp.add_argument("--tol", type=float)
    sp.add_argument("--super", action="store_true", help="check the supersolution side")
    sp.add_argument("--json")
    sp.set_defaults(func=cmd_viscosity)

    sp = sub.add_parser("markov-test", help="strong Markov restart test")
    common(sp)
    sp.add_argument("--rule", required=True, help="fixed:T or a JSON stopping rule")
    sp.add_argument("--lags", default="0.1")
    sp.add_argument("--paths", type=int, default=2000)
    sp.add_argument("--bins", default="1")
    sp.add_argument("--x0")
    sp.add_argument("--mode", choices=["restart", "control", "calibration"], default="restart")
    sp.add_argument("--control-start")
    sp.add_argument("--json")
    sp.add_argument("--csv")
    sp.set_defaults(func=cmd_markov)

    sp = sub.add_parser("converge", help="rerun a metric over a (dt, delta) ladder")
    common(sp, numerics=False)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--ladder", required=True, help="dt[:delta],dt[:delta],...")
    sp.add_argument("--metric", choices=METRICS, required=True)
    sp.add_argument("--paths", type=int, default=200)
    sp.add_argument("--h")
    sp.add_argument("--x0")
    sp.add_argument("--reference", type=float)
    sp.add_argument("--estimator", choices=["controlled", "constrained"], default="controlled")
    sp.add_argument("--horizon", type=float)
    sp.add_argument("--json")
    sp.add_argument("--csv")
    sp.set_defaults(func=cmd_converge)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InputError, OSError, json.JSONDecodeError) as exc:
        print(f"reflectdiff: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ReflectDiffError as exc:
        print(f"reflectdiff: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
