"""Command line entry point ``fdbbd``.

Exit status is 0 on success, 1 on a usage or configuration error and 2 when
an oracle check fails.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .harness import (EXPERIMENTS, ExperimentConfig, load_config, run_experiment,
                      run_oracle_suite, write_csv, write_outputs)
from .signals import ParameterError

EXIT_OK, EXIT_ERROR, EXIT_ORACLE = 0, 1, 2


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors, which is reserved for oracle failures
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fdbbd", description="FD-BBD key agreement simulator")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a Monte Carlo experiment")
    run.add_argument("experiment", choices=list(EXPERIMENTS))
    run.add_argument("--config", type=Path, help="JSON ExperimentConfig")
    run.add_argument("--seed", type=_u64)
    run.add_argument("--trials", type=_positive)
    run.add_argument("--out", type=Path)
    run.add_argument("--workers", type=_positive)
    run.add_argument("--plot", action="store_true", help="also write SVG figures")

    plot = sub.add_parser("plot", help="render SVG figures from an experiment CSV")
    plot.add_argument("csv", type=Path)
    plot.add_argument("--out", type=Path)

    oracle = sub.add_parser("oracle", help="run the brute-force verification suite")
    oracle.add_argument("--suite", choices=["full", "quick"], default="full")
    oracle.add_argument("--seed", type=_u64, default=0)
    oracle.add_argument("--out", type=Path)
    return p


def _config(args) -> ExperimentConfig:
    overrides = {"seed": args.seed, "trials": args.trials,
                 "output_dir": str(args.out) if args.out else None, "workers": args.workers}
    if args.config:
        cfg = load_config(args.config, **overrides)
        if cfg.experiment != args.experiment:
            raise ParameterError(f"config is for {cfg.experiment!r}, not {args.experiment!r}")
        return cfg
    return ExperimentConfig(args.experiment, **{k: v for k, v in overrides.items() if v is not None})


def _progress(done: int, total: int) -> None:
    if done == total or done % max(1, total // 20) == 0:
        print(f"\r{done}/{total} trials", end="\n" if done == total else "", file=sys.stderr, flush=True)


def _cmd_oracle(suite: str, seed: int, out: Path | None) -> int:
    rows = run_oracle_suite(suite, seed)
    for r in rows:
        status = "PASS" if r["passed"] else "FAIL"
        print(f"{status}  {r['check']:<30} {r['params']:<34} closed_form={r['closed_form']:.6g} "
              f"oracle={r['oracle']:.6g}")
    if out:
        out.mkdir(parents=True, exist_ok=True)
        write_csv(rows, out / "oracle_suite.csv")
        (out / "oracle_suite.json").write_text(json.dumps({"suite": suite, "seed": seed}) + "\n")
    return EXIT_OK if all(r["passed"] for r in rows) else EXIT_ORACLE


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "oracle":
            return _cmd_oracle(args.suite, args.seed, args.out)
        if args.command == "plot":
            from .plots import emit_plots
            for path in emit_plots(args.csv, args.out):
                print(path)
            return EXIT_OK
        cfg = _config(args)
        if cfg.experiment == "oracle_suite":
            return _cmd_oracle(cfg.grids["suite"][0], cfg.seed, Path(cfg.output_dir))
        rows, runtimes = run_experiment(cfg, progress=_progress)
        paths = write_outputs(cfg, rows, runtimes)
        for path in paths.values():
            print(path)
        if args.plot:
            from .plots import emit_plots
            for path in emit_plots(paths["csv"]):
                print(path)
        return EXIT_OK
    except (ParameterError, OSError, json.JSONDecodeError) as exc:
        print(f"fdbbd: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
