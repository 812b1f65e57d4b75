"""Command-line entry point: ``aerial-ndt run | identify | metrics``.

Exit codes: 0 success, 1 mission aborted, 2 configuration or schema
error, 3 numerical failure.
"""
import argparse
import os
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from ._jit import BACKEND
from .errors import (ConfigError, DegenerateData, LimitUnreachable, NoContactPhase, NonFiniteInput,
                     NonFiniteState, SchemaError, SolverSingular)
from .metrics import compare, compute_metrics, empty_metrics, read_baseline, write_metrics
from .mission import Phase
from .observer import identification_experiment, identify_cf, write_dataset
from .runlog import read_csv, write_csv
from .scenario import describe_defaults, load_scenario

EXIT_OK, EXIT_ABORTED, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
NUMERIC_ERRORS = (NonFiniteState, NonFiniteInput, SolverSingular, LimitUnreachable, DegenerateData)


def _err(msg):
    print(f"error: {msg}", file=sys.stderr)


def _load(args):
    overrides = list(args.set or [])
    if getattr(args, "seed", None) is not None:
        overrides.append(f"run.seed={args.seed}")
    if getattr(args, "log_rate", None) is not None:
        overrides.append(f"run.log_rate={args.log_rate}")
    return load_scenario(args.scenario, overrides)


def format_timeline(timeline):
    lines = ["state  t [s]   phase"]
    for ph, t in timeline:
        lines.append(f"{int(ph):>5}  {t:7.2f}  {Phase(int(ph)).name.lower()}")
    return "\n".join(lines)


def _summary(sc, log, metrics):
    meta = log.meta
    parts = [
        f"scenario: {sc.source or '<defaults>'}",
        f"seed: {meta['seed']}   backend: {BACKEND}",
        f"outcome: {meta['outcome']}" + (f" ({meta['reason']})" if meta.get("reason") else ""),
        "",
        format_timeline(meta["timeline"]),
        "",
        metrics.table(),
    ]
    notes = describe_defaults(sc)
    if notes:
        parts += ["", "defaulted parameters:"] + [f"  {n}" for n in notes]
    return "\n".join(parts) + "\n"


def _run_one(sc, out_dir):
    """Run one scenario into ``out_dir``. Returns ``(exit_code, metrics, summary)``."""
    from .scheduler import run

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # couplant warnings surface as an aborted outcome
        log = run(sc)
    os.makedirs(out_dir, exist_ok=True)
    log_path = os.path.join(out_dir, "log.csv")
    write_csv(log, log_path)
    # metrics come from the file as written so `metrics` on it reproduces them exactly
    reread = read_csv(log_path)
    try:
        metrics = compute_metrics(reread)
    except NoContactPhase:
        metrics = empty_metrics(log.meta["outcome"], log.meta["seed"])
    write_metrics(os.path.join(out_dir, "metrics.csv"), [metrics])
    summary = _summary(sc, log, metrics)
    with open(os.path.join(out_dir, "summary.txt"), "w") as fh:
        fh.write(summary)
    code = EXIT_OK if log.meta["outcome"] == "success" else EXIT_ABORTED
    return code, metrics, summary


def _run_seed(job):
    sc, out_dir = job
    try:
        return _run_one(sc, out_dir)
    except NUMERIC_ERRORS as exc:
        return EXIT_NUMERIC, None, f"numerical failure: {exc}\n"


def cmd_run(args):
    try:
        sc = _load(args)
    except ConfigError as exc:
        _err(exc)
        return EXIT_CONFIG
    if args.repeat <= 1:
        try:
            code, _, summary = _run_one(sc, args.out)
        except NUMERIC_ERRORS as exc:
            _err(f"numerical failure: {exc}")
            return EXIT_NUMERIC
        print(summary, end="")
        return code

    seeds = [sc.run.seed + i for i in range(args.repeat)]
    jobs = [(sc.with_seed(s), os.path.join(args.out, f"seed_{s:04d}")) for s in seeds]
    workers = args.workers or min(len(jobs), os.cpu_count() or 1)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_seed, jobs))
    else:
        results = [_run_seed(j) for j in jobs]
    rows = [m for _, m, _ in results if m is not None]
    write_metrics(os.path.join(args.out, "metrics.csv"), rows)
    for s, (code, m, summary) in zip(seeds, results):
        outcome = m.outcome if m is not None else "numerical failure"
        print(f"seed {s}: exit {code}, {outcome}")
    return max(code for code, _, _ in results)


def cmd_identify(args):
    try:
        sc = _load(args)
    except ConfigError as exc:
        _err(exc)
        return EXIT_CONFIG
    masses = None
    if args.masses:
        try:
            masses = [float(m) for m in args.masses.split(",") if m.strip()]
        except ValueError:
            _err(f"--masses must be comma-separated numbers, got {args.masses!r}")
            return EXIT_CONFIG
    try:
        dataset = identification_experiment(sc, masses=masses, hover_duration=args.duration)
        c_f, residual = identify_cf(dataset, sc.vehicle.rotor_axes, sc.vehicle.g)
    except NUMERIC_ERRORS as exc:
        _err(f"numerical failure: {exc}")
        return EXIT_NUMERIC
    os.makedirs(args.out, exist_ok=True)
    write_dataset(os.path.join(args.out, "identification.csv"), dataset)
    truth = sc.vehicle.c_f
    rel = abs(c_f - truth) / truth
    print(f"c_f estimate   {c_f:.9e} N/(rad/s)^2")
    print(f"c_f truth      {truth:.9e}")
    print(f"relative error {rel:.3e}")
    print(f"residual rms   {residual:.3e} N")
    return EXIT_OK


def cmd_metrics(args):
    try:
        log = read_csv(args.log)
        metrics = compute_metrics(log)
    except (SchemaError, OSError) as exc:
        _err(exc)
        return EXIT_CONFIG
    except NoContactPhase as exc:
        _err(exc)
        return EXIT_ABORTED
    print(metrics.table())
    if args.baseline:
        try:
            base = read_baseline(args.baseline)
        except (SchemaError, OSError, ValueError) as exc:
            _err(exc)
            return EXIT_CONFIG
        print()
        print(f"{'field':<14}{'value':>10}{'baseline':>10}{'delta':>10}  result (tol {args.tol:g})")
        for name, val, ref, delta, ok in compare(metrics, base, args.tol):
            print(f"{name:<14}{val:>10.4f}{ref:>10.4f}{delta:>+10.4f}  {'pass' if ok else 'FAIL'}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        write_metrics(os.path.join(args.out, "metrics.csv"), [metrics])
        if args.columns:
            cols = [c.strip() for c in args.columns.split(",") if c.strip()]
            try:
                data = np.column_stack([log.col(c) for c in cols])
            except SchemaError as exc:
                _err(exc)
                return EXIT_CONFIG
            np.savetxt(os.path.join(args.out, "plot.csv"), data, delimiter=",", fmt="%.9g",
                       header=",".join(cols), comments="")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="aerial-ndt", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("scenario", help="scenario TOML file")
        sp.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                        help="override a scenario parameter (repeatable)")
        sp.add_argument("--seed", type=int, help="noise seed")
        sp.add_argument("--out", default="out", help="output directory (default: out)")

    r = sub.add_parser("run", help="simulate one inspection mission")
    common(r)
    r.add_argument("--repeat", type=int, default=1, help="run N consecutive seeds in parallel workers")
    r.add_argument("--workers", type=int, default=None, help="worker processes for --repeat")
    r.add_argument("--log-rate", type=float, help="log rows per second (physics rate logs every tick)")
    r.set_defaults(func=cmd_run)

    i = sub.add_parser("identify", help="hover identification of the thrust coefficient")
    common(i)
    i.add_argument("--masses", help="comma-separated total masses in kg (default: m + 0..0.4 kg)")
    i.add_argument("--duration", type=float, default=10.0, help="hover length per mass in s")
    i.set_defaults(func=cmd_identify)

    m = sub.add_parser("metrics", help="recompute metrics from a log")
    m.add_argument("log", help="log.csv written by `run`")
    m.add_argument("--baseline", help="CSV with a subset of metric fields to compare against")
    m.add_argument("--tol", type=float, default=0.01, help="absolute tolerance for --baseline")
    m.add_argument("--out", default=None, help="write metrics.csv (and plot.csv) here")
    m.add_argument("--columns", help="comma-separated log columns exported to plot.csv")
    m.set_defaults(func=cmd_metrics)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
