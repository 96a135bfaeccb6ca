"""Command-line interface: ``qsat {exponent,p1,bench,train}``.

Exit codes: 0 success, 1 usage error, 2 numerical failure (or failed benchmark rows).
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from typing import Optional, Sequence

from . import bench
from .mnsum import ConsistencyError, DivergenceError, SizeError
from .qaoa import QaoaAngles, QaoaKsatProblem, SolverOptions, log2_of_power, p1_exact, qaoa_exponent
from .sat import UnsupportedError, is_satisfiable, sample_instance, threshold
from .simulator import TrainConfig, optimize_angles

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("QSAT_SEED")
    if env:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"QSAT_SEED must be an integer, got {env!r}") from None
    return 0


def _ratio(args) -> float:
    if args.threshold and args.r is not None:
        raise UsageError("give either --r or --threshold, not both")
    if args.threshold:
        try:
            return threshold(args.k)
        except UnsupportedError as exc:
            raise UsageError(str(exc)) from None
    if args.r is None:
        raise UsageError("one of --r or --threshold is required")
    if args.r <= 0:
        raise UsageError("--r must be positive")
    return args.r


def _angles(args, p: Optional[int]) -> QaoaAngles:
    if args.angles:
        if args.beta or args.gamma:
            raise UsageError("give angles either inline or via --angles, not both")
        with open(args.angles) as fh:
            angles = QaoaAngles.from_dict(json.load(fh))
    else:
        if not args.beta or not args.gamma:
            raise UsageError("--beta and --gamma are required (or --angles FILE)")
        if len(args.beta) != len(args.gamma):
            raise UsageError("--beta and --gamma need the same number of values")
        angles = QaoaAngles(args.beta, args.gamma)
    if p is not None and angles.p != p:
        raise UsageError(f"--p {p} does not match {angles.p} angle pairs")
    return angles


def _emit(args, text: str) -> None:
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")
    else:
        print(text)


def _add_angle_flags(sp, with_file=True):
    sp.add_argument("--beta", type=float, nargs="+", help="mixer angles beta_0 ... beta_{p-1}")
    sp.add_argument("--gamma", type=float, nargs="+", help="phase angles gamma_0 ... gamma_{p-1}")
    if with_file:
        sp.add_argument("--angles", help="JSON file {p, beta[], gamma[]} (e.g. from 'train')")


def _add_ratio_flags(sp):
    sp.add_argument("--r", type=float, help="clauses-to-variables ratio")
    sp.add_argument("--threshold", action="store_true", help="use the tabulated satisfiability threshold for k")


def _add_global_flags(parser, suppress: bool):
    # accepted before or after the subcommand; the subcommand copy only overrides when given
    default = (lambda value: argparse.SUPPRESS) if suppress else (lambda value: value)
    parser.add_argument("--seed", type=int, default=default(None), help="random seed (fallback: $QSAT_SEED, then 0)")
    parser.add_argument("--threads", type=int, default=default(os.cpu_count() or 1), help="parallel workers")
    parser.add_argument("--out", default=default(None), help="write the main output here instead of stdout")
    parser.add_argument("-v", "--verbose", action="store_true", default=default(False))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qsat", description=__doc__.splitlines()[0])
    _add_global_flags(parser, suppress=False)
    common = _Parser(add_help=False)
    _add_global_flags(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    add = sub.add_parser

    def add_parser(name, **kw):
        return add(name, parents=[common], **kw)

    sub.add_parser = add_parser

    sp = sub.add_parser("exponent", help="infinite-size scaling exponent of the averaged success probability")
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--p", type=int)
    _add_ratio_flags(sp)
    _add_angle_flags(sp)
    sp.add_argument("--rho", type=float, help="damping in [0, 1); default: undamped with damped retry")
    sp.add_argument("--eps", type=float, default=1e-10)
    sp.add_argument("--max-iter", type=int, default=1000)

    sp = sub.add_parser("p1", help="exact depth-1 success probability at finite n")
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--n", type=int, required=True)
    _add_ratio_flags(sp)
    sp.add_argument("--beta", type=float, required=True)
    sp.add_argument("--gamma", type=float, required=True)

    sp = sub.add_parser("bench", help="run a benchmark suite from a JSON config")
    sp.add_argument("--config", required=True)
    sp.add_argument("--summary", help="also write the fit summary (JSON) here")
    sp.add_argument("--plot-data", help="write (method, n, median, err) rows here")

    sp = sub.add_parser("train", help="train QAOA angles on random satisfiable instances")
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--p", type=int, required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--count", type=int, default=100)
    sp.add_argument("--lr", type=float, default=0.1)
    sp.add_argument("--iters", type=int, default=200)
    _add_ratio_flags(sp)
    sp.add_argument("--gradient", choices=["adjoint", "fd"], default="adjoint")
    sp.add_argument("--log", help="write the training log CSV here")
    return parser


def cmd_exponent(args) -> int:
    try:
        log2_of_power(args.k)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.rho is not None and not 0 <= args.rho < 1:
        raise UsageError("--rho must lie in [0, 1)")
    if args.eps <= 0 or args.max_iter < 1:
        raise UsageError("--eps must be positive and --max-iter >= 1")
    problem = QaoaKsatProblem(args.k, _ratio(args), _angles(args, args.p))
    options = SolverOptions(rho=args.rho, eps=args.eps, max_iter=args.max_iter)
    try:
        result = qaoa_exponent(problem, options)
    except (DivergenceError, ConsistencyError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc),
                          "iterations": getattr(exc, "iterations", None)}), file=sys.stderr)
        return EXIT_NUMERIC
    _emit(args, json.dumps(result.to_record(problem)))
    return EXIT_OK


def cmd_p1(args) -> int:
    if args.n < 1 or args.k < 1:
        raise UsageError("--n and --k must be >= 1")
    r = _ratio(args)
    try:
        prob = p1_exact(args.k, args.n, r, args.beta, args.gamma)
    except ConsistencyError as exc:
        print(json.dumps({"error": "ConsistencyError", "message": str(exc)}), file=sys.stderr)
        return EXIT_NUMERIC
    record = {"k": args.k, "n": args.n, "r": r, "beta": args.beta, "gamma": args.gamma, "probability": prob}
    _emit(args, json.dumps(record))
    return EXIT_OK


def cmd_bench(args) -> int:
    try:
        with open(args.config) as fh:
            doc = json.load(fh)
        cfg = bench.BenchConfig.from_dict(doc, seed_fallback=_seed(args))
    except (OSError, ValueError, KeyError, SizeError, UnsupportedError) as exc:
        raise UsageError(f"bad config: {exc}") from None
    rows, _ = bench.run_benchmark(cfg, threads=max(1, args.threads))
    _emit(args, bench.rows_to_csv(rows).rstrip("\n"))
    summary = bench.summary_table(rows, cfg)
    print(bench.format_summary(summary), file=sys.stderr)
    if args.summary:
        with open(args.summary, "w") as fh:
            json.dump(summary, fh, indent=2, default=str)
    if args.plot_data:
        with open(args.plot_data, "w") as fh:
            fh.write("method,n,median,err\n")
            for method in cfg.methods:
                for n, med, err in bench.plot_data(rows, method, seed=cfg.seed):
                    fh.write(f"{method},{n},{med},{err}\n")
    failed = sum(1 for r in rows if r["error"])
    if failed:
        print(f"{failed} benchmark rows failed", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_train(args) -> int:
    if min(args.p, args.n, args.count, args.iters) < 1 or args.lr <= 0:
        raise UsageError("--p, --n, --count, --iters must be >= 1 and --lr positive")
    if args.n > 26:
        raise UsageError("--n must be <= 26")
    r = _ratio(args)
    import numpy as np

    rng = np.random.default_rng(_seed(args))
    instances = []
    attempts = 0
    while len(instances) < args.count:
        attempts += 1
        if attempts > 100 * args.count + 10_000:
            print("could not find enough satisfiable instances", file=sys.stderr)
            return EXIT_NUMERIC
        inst = sample_instance(args.n, args.k, r, rng)
        if is_satisfiable(inst):
            instances.append(inst)
    config = TrainConfig(learning_rate=args.lr, iterations=args.iters, instance_count=args.count,
                         instance_size=args.n, gradient=args.gradient)
    result = optimize_angles(instances, args.p, config)
    doc = result.angles.to_dict()
    doc.update(objective=result.objective, initial_objective=result.initial_objective,
               stalled=result.stalled, iterations=result.iterations)
    _emit(args, json.dumps(doc))
    if args.log:
        with open(args.log, "w") as fh:
            fh.write(result.log_csv())
    if not math.isfinite(result.objective):
        return EXIT_NUMERIC
    return EXIT_OK


COMMANDS = {"exponent": cmd_exponent, "p1": cmd_p1, "bench": cmd_bench, "train": cmd_train}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"qsat {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
