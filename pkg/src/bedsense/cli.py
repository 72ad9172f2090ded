"""Adaptive single-spin sensing runs, benchmark campaigns and checks.

    bedsense sense-nuclear --config fig1.cfg --seed 7 --out out/fig1
    bedsense sense-ac --config ac_single.cfg
    bedsense benchmark --config fig3_desk.cfg --workers 4
    bedsense throughput
    bedsense validate

Exit codes: 0 success, 2 usage or configuration error, 3 runtime failure
(including a failed validation suite).
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import io as bio
from .bench import generate_sweep, repeated_truth, run_campaign
from .eig import throughput_bench
from .exceptions import BedsenseError, ConfigurationError
from .orchestrator import MODES, run

logger = logging.getLogger("bedsense")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_RUNTIME = 3

DEFAULT_CONFIGS = {"sense-nuclear": "fig1.cfg", "sense-ac": "ac_single.cfg",
                   "benchmark": "fig3_desk.cfg", "throughput": None, "validate": None}


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _seed(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="config file, or the name of a bundled config")
    common.add_argument("--seed", type=_seed, help="run seed (overrides the config)")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--mode", choices=MODES, help="estimation mode")
    common.add_argument("--shots", type=_positive_int, help="number of single shots")
    common.add_argument("--workers", type=_positive_int, default=1,
                        help="parallel runs in a campaign (default 1)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="bedsense", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"bedsense {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("sense-nuclear", parents=[common], help="single run, nuclear spins")
    sub.add_parser("sense-ac", parents=[common], help="single run, AC field")
    sub.add_parser("benchmark", parents=[common], help="multi-run campaign with medians")
    t = sub.add_parser("throughput", parents=[common], help="EIG kernel throughput")
    t.add_argument("--particles", type=_positive_int, default=3200)
    t.add_argument("--duration", type=float, default=2.0, help="seconds per measurement")
    t.add_argument("--precision", choices=("mixed", "double"), default="mixed")
    v = sub.add_parser("validate", parents=[common], help="likelihood oracle suites")
    v.add_argument("--cases", type=_positive_int, default=50,
                   help="random nuclear parameter sets (default 50)")
    return p


def _out_dir(args, default: str) -> Path:
    out = args.out or Path("out") / default
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_sense(args, kind: str) -> int:
    ec = bio.load_config(args.config or DEFAULT_CONFIGS[args.command])
    if ec.kind != kind:
        raise ConfigurationError(f"{args.command} needs a [model] kind = {kind} config, "
                                 f"{ec.source} has kind = {ec.kind}")
    model = bio.build_model(ec)
    grid = bio.build_grid(ec)
    cfg = bio.build_run_config(ec, model, grid, mode=args.mode, seed=args.seed, shots=args.shots)
    truth = bio.build_truth(ec, model)
    trace = run(cfg, truth)
    out = _out_dir(args, args.command)
    bio.write_run(trace, cfg, out)
    s = trace.final_summary
    for name, m, r, t in zip(trace.param_names, s.mean, s.rel_uncertainty, truth.canonical):
        print(f"{name:>10s}  estimate {m:.6g}  rel_unc {r:.3%}  truth {t:.6g}")
    print(f"shots={trace.n_shots} failed={trace.failed} out={out}")
    logger.info("compute time %.2f s", trace.compute_time_s)
    if trace.failed:
        print(f"run failed: {trace.error}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_benchmark(args) -> int:
    ec = bio.load_config(args.config or DEFAULT_CONFIGS["benchmark"])
    model = bio.build_model(ec)
    grid = bio.build_grid(ec)
    base = bio.build_run_config(ec, model, grid, seed=args.seed, shots=args.shots)
    modes = bio.sweep_modes(ec, args.mode)
    configs = {m: base.with_mode(m) for m in modes}
    reps = ec.getint("sweep", "repetitions")
    sweep_seed = ec.getint("sweep", "seed", 0)
    if reps is not None:
        truth = bio.build_truth(ec, model)
        truths = repeated_truth(model, truth.params, reps)
        extra = {"sweep.repetitions": reps}
    else:
        spec = bio.build_sweep(ec, model)
        truths = generate_sweep(spec, sweep_seed, model)
        extra = {"sweep.kind": spec.kind, "sweep.layout": spec.resolved_layout
                 if spec.kind == "nuclear" else "cross", "sweep.full_count": spec.full_count(),
                 "sweep.n_bench": len(truths), "sweep.seed": sweep_seed}
    t0 = time.perf_counter()
    report = run_campaign(truths, configs, args.workers)
    logger.info("campaign of %d runs took %.1f s", len(report.results), time.perf_counter() - t0)
    out = _out_dir(args, "benchmark")
    bio.write_report(report, out)
    bio.write_manifest(out / "manifest.txt", bio.run_manifest(
        base, None, **{"campaign.modes": list(modes), "campaign.n_truths": len(truths),
                       **extra, **{f"result.failed.{m}": report.n_failed(m) for m in modes}}))
    last = max(n for (_, n, _) in report.medians)
    for m in modes:
        cells = "  ".join(f"{g}={report.median(m, last, g):.3%}" for g in report.groups)
        print(f"{m:>12s}  n_shot={last}  {cells}  failed={report.n_failed(m)}")
    print(f"out={out}")
    return EXIT_OK


def cmd_throughput(args) -> int:
    ec = bio.load_config(args.config) if args.config else bio.parse_config("")
    model = bio.build_model(ec)
    grid = bio.build_grid(ec)
    seed = 0 if args.seed is None else args.seed
    rep = throughput_bench(model, args.particles, grid, args.duration,
                           precision=args.precision, seed=seed)
    row = rep.as_row()
    print(",".join(bio.THROUGHPUT_HEADER))
    print(",".join(str(row[k]) for k in bio.THROUGHPUT_HEADER))
    print(f"# evaluations per measurement {rep.evaluations_per_measurement:.6g}, "
          f"max shot rate {rep.max_shot_rate_hz:.4g} Hz", file=sys.stderr)
    if args.out is not None:
        bio.write_throughput([rep], _out_dir(args, "throughput") / "throughput.csv")
    return EXIT_OK


def cmd_validate(args) -> int:
    from .validation import run_suites
    seed = 0 if args.seed is None else args.seed
    results = run_suites(n_cases=args.cases, seed=seed)
    for r in results:
        print(r.line())
    if args.out is not None:
        bio.write_csv(_out_dir(args, "validate") / "validate.csv",
                      ("suite", "passed", "max_error", "tolerance", "n_checks"),
                      ((r.name, r.passed, r.max_error, r.tolerance, r.n_checks) for r in results))
    return EXIT_OK if all(r.passed for r in results) else EXIT_RUNTIME


COMMANDS = {
    "sense-nuclear": lambda a: cmd_sense(a, "nuclear"),
    "sense-ac": lambda a: cmd_sense(a, "ac"),
    "benchmark": cmd_benchmark,
    "throughput": cmd_throughput,
    "validate": cmd_validate,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    np.seterr(over="ignore", under="ignore")
    try:
        return COMMANDS[args.command](args)
    except ConfigurationError as exc:
        print(f"bedsense: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (BedsenseError, ArithmeticError, OSError) as exc:
        print(f"bedsense: runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
