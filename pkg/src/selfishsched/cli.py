"""Command-line front end.

Subcommands: equilibrium, compare, sweep, braess-scan, simulate, repro.

Exit codes:

    0  success
    2  input error (unreadable or malformed instance, bad flags)
    3  solver error (linear program or partition search failed)
    4  a theoretical guarantee was contradicted (Braess paradox found,
       equivalent-subsystem check failed, repro constant mismatch)
    5  simulated throughput outside the requested tolerance
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import BUNDLED_INSTANCES, __version__, load_bundled
from .allocations import (
    braess_check,
    max_min_fair,
    max_sum_throughput,
    price_of_anarchy_instance,
    proportional_fair,
    random_augmentation,
    sdf_instance,
)
from .equilibrium import degradation_bounds, saturation_thresholds, system_equilibrium
from .errors import (
    DegenerateInstance,
    EmptyWindow,
    MalformedInstance,
    NumericalBreakdown,
    PartitionNotFound,
    SubsystemViolation,
)
from .fluidsim import SimConfig, available_backends, compare_to_closed_form, events_csv, run, samples_csv
from .model import System, Worker, is_feasible, load_system
from .report import ReportBundle, compare_bundle, equilibrium_bundle, provenance

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_SOLVER = 3
EXIT_THEOREM = 4
EXIT_SIM_TOLERANCE = 5

REPRO_IDS = ("example-2x2", "smk", "fig-degradation")


class InputError(Exception):
    pass


def fmt(x) -> str:
    return f"{float(x):.12g}"


def _csv_writer(buf):
    return csv.writer(buf, lineterminator="\n")


def load_instance(arg: str | None) -> System:
    """A file path, or the name of a bundled instance."""
    if arg is None:
        raise InputError("--input is required")
    path = Path(arg)
    if path.is_file():
        return load_system(path)
    if arg.removesuffix(".json") in BUNDLED_INSTANCES and not path.exists():
        return load_bundled(arg)
    raise InputError(f"cannot read instance {arg!r}: no such file or bundled instance")


def _emit(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def _row(label, values) -> str:
    return f"{label:<22}" + "  ".join(f"{fmt(v):>14}" for v in values)


# ---------------------------------------------------------------- equilibrium


def _equilibrium_table(bundle: ReportBundle) -> str:
    nash = bundle.nash
    lines = [f"instance: {bundle.system.get('label') or '(unnamed)'}", _row("nash totals", nash["totals"])]
    for wk in nash["workers"]:
        lines.append(f"worker {wk['worker']}: {wk['case']}" + (f" (m={wk['m']})" if wk["m"] is not None else ""))
        lines.append(f"  comp-saturated {wk['comp_saturated']}  comm-saturated {wk['comm_saturated']}")
        for key in ("rates", "seq_comm", "seq_comp", "par_comm", "par_comp"):
            lines.append("  " + _row(key, wk[key]))
    return "\n".join(lines) + "\n"


def _equilibrium_csv(bundle: ReportBundle) -> str:
    buf = io.StringIO()
    wr = _csv_writer(buf)
    wr.writerow(["worker", "app", "rate", "case", "saturates", "seq_comm", "seq_comp", "par_comm", "par_comp"])
    for wk in bundle.nash["workers"]:
        for k in range(len(wk["rates"])):
            sat = "comm" if k + 1 in wk["comm_saturated"] else "comp"
            wr.writerow(
                [wk["worker"], k + 1, fmt(wk["rates"][k]), wk["case"], sat]
                + [fmt(wk[key][k]) for key in ("seq_comm", "seq_comp", "par_comm", "par_comp")]
            )
    for k, v in enumerate(bundle.nash["totals"], 1):
        wr.writerow(["total", k, fmt(v), "", "", "", "", "", ""])
    return buf.getvalue()


def cmd_equilibrium(args) -> int:
    s = load_instance(args.input)
    bundle = equilibrium_bundle(s, seed=args.seed, config={"input": args.input})
    if args.format == "json":
        text = bundle.to_json() + "\n"
    elif args.format == "csv":
        text = _equilibrium_csv(bundle)
    else:
        text = _equilibrium_table(bundle)
    _emit(text, args.output)
    return EXIT_OK


# -------------------------------------------------------------------- compare


def _compare_table(bundle: ReportBundle) -> str:
    m = bundle.metrics
    lines = [f"instance: {bundle.system.get('label') or '(unnamed)'}", _row("nash", bundle.nash["totals"])]
    for name, ref in bundle.references.items():
        lines.append(_row(name, ref["totals"]))
    lines.append(f"I_sum (price of anarchy)     {fmt(m['I_sum'])}")
    lines.append(f"I(S) (selfishness factor)    {fmt(m['I_sdf'])}")
    witness = m["pareto_witness"]
    lines.append(
        "nash Pareto inefficient      "
        + (f"yes (applications {witness[0]} and {witness[1]})" if m["pareto_inefficient"] else "no")
    )
    lines.append("equivalent subsystem:")
    for wk in m["equivalent_subsystem"]:
        lines.append(f"  worker {wk['worker']}: bandwidth {fmt(wk['bandwidth'])}, power {fmt(wk['power'])}")
    return "\n".join(lines) + "\n"


def _compare_csv(bundle: ReportBundle) -> str:
    m = bundle.metrics
    buf = io.StringIO()
    buf.write(f"# I_sum={fmt(m['I_sum'])}\n# I_sdf={fmt(m['I_sdf'])}\n")
    buf.write(f"# pareto_inefficient={str(m['pareto_inefficient']).lower()}\n")
    wr = _csv_writer(buf)
    wr.writerow(["allocation", "app", "total"])
    rows = [("nash", bundle.nash["totals"])] + [(k, v["totals"]) for k, v in bundle.references.items()]
    for name, totals in rows:
        for k, v in enumerate(totals, 1):
            wr.writerow([name, k, fmt(v)])
    return buf.getvalue()


def cmd_compare(args) -> int:
    s = load_instance(args.input)
    bundle = compare_bundle(s, seed=args.seed, config={"input": args.input})
    if args.format == "json":
        text = bundle.to_json() + "\n"
    elif args.format == "csv":
        text = _compare_csv(bundle)
    else:
        text = _compare_table(bundle)
    _emit(text, args.output)
    return EXIT_OK


# ---------------------------------------------------------------------- sweep


def sweep_rows(s: System, worker: int, resource: str, values) -> list[list[float]]:
    """Nash totals while one capacity of worker ``worker`` (0-based) varies."""
    rows = []
    for v in values:
        workers = list(s.workers)
        p = workers[worker]
        workers[worker] = Worker(v, p.power) if resource == "bandwidth" else Worker(p.bandwidth, v)
        totals = system_equilibrium(s.with_workers(workers)).totals
        rows.append([float(v), *totals.tolist(), float(totals.max()), float(totals.min()), float(totals.mean())])
    return rows


def sweep_thresholds(s: System, worker: int, resource: str) -> tuple[str, float, str, float]:
    """Boundaries of the mixed regime of the swept worker, in units of the swept resource."""
    p = s.workers[worker]
    if resource == "bandwidth":
        th = saturation_thresholds(p.power, s.apps)
        return "bLower", th.lower, "bUpper", th.upper
    # all applications computation-saturated below wLower, communication-saturated above wUpper
    c = s.c
    return "wLower", p.bandwidth * s.K / float(np.sum(c)), "wUpper", p.bandwidth * float(np.sum(1.0 / c)) / s.K


def sweep_csv(s: System, worker: int, resource: str, lo: float, hi: float, steps: int) -> str:
    values = np.linspace(lo, hi, steps)
    lo_name, lo_val, hi_name, hi_val = sweep_thresholds(s, worker, resource)
    buf = io.StringIO()
    buf.write(f"# worker={worker + 1}\n# resource={resource}\n")
    buf.write(f"# {lo_name}={fmt(lo_val)}\n# {hi_name}={fmt(hi_val)}\n")
    wr = _csv_writer(buf)
    wr.writerow(["swept_value", *[f"alpha_{k}" for k in range(1, s.K + 1)], "max", "min", "avg"])
    for row in sweep_rows(s, worker, resource, values):
        wr.writerow([fmt(v) for v in row])
    return buf.getvalue()


def cmd_sweep(args) -> int:
    s = load_instance(args.input)
    if not 1 <= args.worker <= s.N:
        raise InputError(f"--worker must lie in 1..{s.N}, got {args.worker}")
    if args.steps < 2:
        raise InputError(f"--steps must be at least 2, got {args.steps}")
    if not (np.isfinite(args.lo) and np.isfinite(args.hi)) or args.lo <= 0.0:
        raise InputError(f"--lo must be positive and finite, got {args.lo}")
    if not args.hi > args.lo:
        raise InputError(f"--hi must exceed --lo (got lo={args.lo}, hi={args.hi})")
    text = sweep_csv(s, args.worker - 1, args.resource, args.lo, args.hi, args.steps)
    _emit(text, args.output)
    return EXIT_OK


# ---------------------------------------------------------------- braess-scan


def braess_scan(s: System, seed: int, trials: int) -> tuple[int, float]:
    """Paradox count and the smallest ``rho(augmented, initial)`` seen."""
    rng = np.random.default_rng(seed)
    paradoxes = 0
    worst = np.inf
    for _ in range(trials):
        verdict = braess_check(s, random_augmentation(rng, s))
        paradoxes += verdict.paradox
        worst = min(worst, verdict.rho_aug_over_ini)
    return paradoxes, float(worst)


def cmd_braess_scan(args) -> int:
    if args.trials < 1:
        raise InputError(f"--trials must be at least 1, got {args.trials}")
    s = load_instance(args.input)
    seed = 0 if args.seed is None else args.seed
    paradoxes, worst = braess_scan(s, seed, args.trials)
    if args.format == "json":
        text = json.dumps(
            {"trials": args.trials, "paradoxes": paradoxes, "min_rho_aug_over_ini": worst, "provenance": provenance(seed=seed)},
            indent=2,
            sort_keys=True,
        ) + "\n"
    elif args.format == "csv":
        text = f"trials,paradoxes,min_rho_aug_over_ini\n{args.trials},{paradoxes},{fmt(worst)}\n"
    else:
        text = f"trials {args.trials}\nparadoxes {paradoxes}\nmin rho(augmented, initial) {fmt(worst)}\n"
    _emit(text, args.output)
    if paradoxes:
        print(f"error: {paradoxes} Braess paradox(es) found; the equilibrium code is wrong", file=sys.stderr)
        return EXIT_THEOREM
    return EXIT_OK


# ------------------------------------------------------------------- simulate


def cmd_simulate(args) -> int:
    s = load_instance(args.input)
    try:
        cfg = SimConfig(horizon=args.horizon, warmup=args.warmup, buffer_cap=args.buffer, measure_window=args.window)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    if args.backend is not None and args.backend not in available_backends():
        raise InputError(f"backend {args.backend!r} is not available (have {', '.join(available_backends())})")
    trace = run(s, cfg, backend=args.backend)
    err = compare_to_closed_form(trace, s)  # EmptyWindow -> input error
    expected = system_equilibrium(s).totals
    if args.trace_out:
        with open(args.trace_out, "w", newline="") as fh:
            events_csv(trace, fh)
    if args.samples_out:
        with open(args.samples_out, "w", newline="") as fh:
            samples_csv(trace, fh)
    tol = 0.05 if args.tolerance is None else args.tolerance
    if args.format == "json":
        text = json.dumps(
            {
                "simulated": trace.final_estimate.tolist(),
                "closed_form": expected.tolist(),
                "relative_error": err.tolist(),
                "tolerance": tol,
                "events": int(trace.events.size),
                "provenance": provenance(
                    backend=trace.backend,
                    config={"horizon": cfg.horizon, "warmup": cfg.warmup, "buffer": cfg.buffer_cap, "window": cfg.measure_window},
                ),
            },
            indent=2,
            sort_keys=True,
        ) + "\n"
    else:
        buf = io.StringIO()
        wr = _csv_writer(buf)
        wr.writerow(["app", "simulated", "closed_form", "relative_error"])
        for k in range(s.K):
            wr.writerow([k + 1, fmt(trace.final_estimate[k]), fmt(expected[k]), fmt(err[k])])
        text = buf.getvalue()
    _emit(text, args.output)
    if np.any(err > tol):
        print(f"error: relative error {err.max():.3g} exceeds tolerance {tol:g}", file=sys.stderr)
        return EXIT_SIM_TOLERANCE
    return EXIT_OK


# ---------------------------------------------------------------------- repro


def _check(name, got, expected, tol):
    ok = abs(float(got) - float(expected)) <= tol
    return ok, f"{'PASS' if ok else 'FAIL'} {name}: got {fmt(got)}, expected {expected} ({fmt(expected)})"


def _totals_csv(named) -> str:
    buf = io.StringIO()
    wr = _csv_writer(buf)
    wr.writerow(["allocation", "app", "total"])
    for name, totals in named:
        for k, v in enumerate(totals, 1):
            wr.writerow([name, k, fmt(v)])
    return buf.getvalue()


def repro_example_2x2(tol):
    s = load_bundled("example-2x2")
    nash = system_equilibrium(s).totals
    coop = np.array([[1.0, 0.0], [0.0, 1.0]])
    sdf = sdf_instance(s)
    checks = [
        _check("nash total app 1", nash[0], Fraction(3, 4), tol),
        _check("nash total app 2", nash[1], Fraction(3, 4), tol),
        _check("selfishness factor I(S)", sdf.value, Fraction(4, 3), max(tol, 1e-9)),
    ]
    feasible, _ = is_feasible(s, coop)
    checks.append((feasible, f"{'PASS' if feasible else 'FAIL'} cooperative allocation (1, 1) is feasible"))
    return checks, _totals_csv([("nash", nash), ("cooperative", coop.sum(axis=0)), ("sdf_witness", sdf.witness.totals)])


def repro_smk(tol):
    s = load_bundled("smk")
    nash = system_equilibrium(s).totals
    mm = max_min_fair(s).totals
    ms = max_sum_throughput(s).totals
    pf = proportional_fair(s).totals
    poa = price_of_anarchy_instance(s)
    lp_tol = max(tol, 1e-9)
    checks = [_check(f"nash total app {k + 1}", nash[k], e, tol) for k, e in enumerate((Fraction(2, 3), Fraction(1, 3), Fraction(1, 3)))]
    checks += [_check(f"max-min total app {k + 1}", mm[k], Fraction(2, 5), lp_tol) for k in range(3)]
    checks.append(_check("sum-optimal value", ms.sum(), 2, lp_tol))
    checks.append(_check("price of anarchy I_sum", poa.ratio, Fraction(3, 2), lp_tol))
    pf_gap = float(np.max(np.abs(pf - nash)))
    checks.append((pf_gap <= 1e-4, f"{'PASS' if pf_gap <= 1e-4 else 'FAIL'} proportional fair equals nash (gap {pf_gap:.3g})"))
    checks.append(_check("max-min inefficiency (M(K-1)+1)/K", ms.sum() / mm.sum(), Fraction(5, 3), lp_tol))
    M = 10**6
    big = System.from_vectors([1.0 / M, 1.0, 1.0], [1.0 / M, 1.0, 1.0], [1.0], [1.0], label="S_{1e6,3}")
    ratio = price_of_anarchy_instance(big).ratio
    ok = 2.999 <= ratio <= 3.0
    checks.append((ok, f"{'PASS' if ok else 'FAIL'} I_sum with M=1e6 approaches K=3: got {fmt(ratio)}"))
    # the max-min point grows inefficient like M, unlike the equilibrium
    mm_big = max_sum_throughput(big).totals.sum() / max_min_fair(big).totals.sum()
    checks.append(_check("max-min inefficiency with M=1e6", mm_big, Fraction(2 * M + 1, 3), 1e-9 * M))
    return checks, _totals_csv([("nash", nash), ("max_sum", ms), ("max_min", mm), ("proportional_fair", pf)])


def repro_fig_degradation(tol):
    s = load_bundled("fig-degradation")
    p = s.workers[0]
    th = saturation_thresholds(p.power, s.apps)
    bounds = degradation_bounds(s.apps)
    checks = [
        _check("bandwidth threshold bLower", th.lower, Fraction(560, 73), tol),
        _check("bandwidth threshold bUpper", th.upper, Fraction(245, 24), tol),
        _check("max-throughput degradation", bounds.max_throughput, Fraction(112, 73), tol),
        _check("min-throughput degradation", bounds.min_throughput, Fraction(84, 73), tol),
        _check("average-throughput degradation", bounds.avg_throughput, Fraction(2466, 2263), tol),
    ]
    low, high = sweep_rows(s, 0, "bandwidth", [th.lower, th.upper])
    for name, col in (("max", -3), ("min", -2), ("avg", -1)):
        ok = high[col] < low[col]
        checks.append(
            (ok, f"{'PASS' if ok else 'FAIL'} {name} throughput lower at bUpper than at bLower: {fmt(high[col])} < {fmt(low[col])}")
        )
    return checks, sweep_csv(s, 0, "bandwidth", 5.0, 12.0, 141)


REPRO = {"example-2x2": repro_example_2x2, "smk": repro_smk, "fig-degradation": repro_fig_degradation}


def cmd_repro(args) -> int:
    if args.example not in REPRO:
        raise InputError(f"unknown example {args.example!r} (choose from {', '.join(REPRO_IDS)})")
    tol = 1e-12 if args.tolerance is None else args.tolerance
    checks, artifact = REPRO[args.example](tol)
    for _, line in checks:
        print(line)
    if args.output:
        Path(args.output).write_text(artifact)
    return EXIT_OK if all(ok for ok, _ in checks) else EXIT_THEOREM


# ----------------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", help="instance file, or the name of a bundled instance")
    common.add_argument("--output", help="write the report here instead of stdout")
    common.add_argument("--format", choices=("table", "json", "csv"), default="table")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--tolerance", type=float, default=None)

    parser = argparse.ArgumentParser(prog="selfishsched", description="Selfish bag-of-tasks scheduling on master-worker platforms.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("equilibrium", parents=[common], help="closed-form Nash equilibrium")
    p.set_defaults(func=cmd_equilibrium)

    p = sub.add_parser("compare", parents=[common], help="Nash point against cooperative allocations")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("sweep", parents=[common], help="Nash totals while one capacity varies (CSV)")
    p.add_argument("--worker", type=int, default=1, help="1-based worker index")
    p.add_argument("--resource", choices=("bandwidth", "power"), default="bandwidth")
    p.add_argument("--lo", type=float, required=True)
    p.add_argument("--hi", type=float, required=True)
    p.add_argument("--steps", type=int, default=141)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("braess-scan", parents=[common], help="random capacity augmentations")
    p.add_argument("--trials", type=int, default=1000)
    p.set_defaults(func=cmd_braess_scan)

    p = sub.add_parser("simulate", parents=[common], help="fluid simulation against the closed form")
    p.add_argument("--horizon", type=float, default=2000.0)
    p.add_argument("--warmup", type=float, default=None, help="defaults to 10%% of the horizon")
    p.add_argument("--buffer", type=int, default=2, help="tasks buffered per application and worker")
    p.add_argument("--window", type=float, default=50.0, help="sampling window length")
    p.add_argument("--trace-out", help="events CSV")
    p.add_argument("--samples-out", help="windowed throughput CSV")
    p.add_argument("--backend", default=None, help="compiled or python (default: fastest available)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("repro", parents=[common], help="check bundled examples against exact constants")
    p.add_argument("example", help=", ".join(REPRO_IDS))
    p.set_defaults(func=cmd_repro)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors with status 2
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (InputError, MalformedInstance, EmptyWindow, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericalBreakdown, PartitionNotFound, DegenerateInstance) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except SubsystemViolation as exc:
        print(f"theorem check failed: {exc}", file=sys.stderr)
        return EXIT_THEOREM


if __name__ == "__main__":
    sys.exit(main())
