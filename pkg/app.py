"""
Command-line front end: list the registry, run experiments, check results
against the acceptance criteria, and browse the run history.

    python app.py list
    python app.py run fig4 fig6 --set omega2=0.04 --out results
    python app.py check results
    python app.py history --out results
"""
import argparse
import json
import logging
import sys
from dataclasses import replace
from typing import Dict, List, Optional

import pandas as pd

import settings
from acceptance import check_acceptance
from dynamics import run_parallel
from errors import ConfigError, UrpError
from experiments import ExperimentConfig, list_experiments, run_experiment
from run_index import get_run_by_id, list_runs

logger = logging.getLogger("app")


# =========================
# Helpers: argument parsing
# =========================
def _parse_sets(pairs: Optional[List[str]]) -> Dict[str, float]:
    out: Dict[str, float] = {}
    for item in pairs or []:
        key, sep, raw = item.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"--set expects key=value, got {item!r}.")
        try:
            out[key] = float(raw)
        except ValueError:
            raise ConfigError(f"--set {key}: value must be a number, got {raw!r}.")
    return out


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="urp",
        description="Simulate unconventional Rydberg pumping schemes and check them against the reference results.",
    )
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING (default: URP_LOG_LEVEL or INFO)")
    parser.add_argument("--version", action="version", version=f"%(prog)s {settings.APP_VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("list", help="List the registered experiments and their defaults.")

    run = sub.add_parser("run", help="Run one or more experiments and write CSV + metadata.")
    run.add_argument("experiments", nargs="*", help="Registry names, e.g. fig4 fig6.")
    run.add_argument("--set", dest="sets", action="append", metavar="KEY=VALUE",
                     help="Override a registry parameter (repeatable).")
    run.add_argument("--out", default=None, help="Output root (default: URP_OUT_DIR or ./results).")
    run.add_argument("--integrator", choices=["fixed", "adaptive"], default=None)
    run.add_argument("--reduced", action="store_true", help="Use the cheaper reduced setting where one exists.")
    run.add_argument("--config", default=None, help="JSON file with ExperimentConfig fields.")
    run.add_argument("--record-stride", type=int, default=None)

    check = sub.add_parser("check", help="Check a results directory against the acceptance criteria.")
    check.add_argument("results_dir")
    check.add_argument("--only", nargs="+", default=None, metavar="EXPERIMENT",
                       help="Check only these experiments (missing output is an error).")

    history = sub.add_parser("history", help="List past runs recorded under the output root.")
    history.add_argument("--out", default=None)
    history.add_argument("--limit", type=int, default=25)
    history.add_argument("--experiment", default=None)
    history.add_argument("--id", dest="run_id", type=int, default=None, help="Show one run in full.")
    return parser


def _configs(args: argparse.Namespace) -> List[ExperimentConfig]:
    base = ExperimentConfig.from_file(args.config) if args.config else None
    names = list(args.experiments)
    if base is not None and not names:
        names = [base.experiment]
    if not names:
        raise ConfigError("Name at least one experiment (see `list`) or pass --config.")

    sets = _parse_sets(args.sets)
    out = []
    for name in names:
        cfg = replace(base, experiment=name) if base is not None else ExperimentConfig(experiment=name)
        cfg = replace(
            cfg,
            overrides={**cfg.overrides, **sets},
            integrator={**cfg.integrator, **({"method": args.integrator} if args.integrator else {})},
            out_dir=args.out or cfg.out_dir,
            record_stride=args.record_stride if args.record_stride is not None else cfg.record_stride,
            reduced=args.reduced or cfg.reduced,
        )
        out.append(cfg)
    return out


# =========================
# Commands
# =========================
def cmd_list(args: argparse.Namespace) -> int:
    rows = list_experiments()
    df = pd.DataFrame(rows)[["name", "scheme", "long_running", "reference_defaults", "description"]]
    with pd.option_context("display.max_colwidth", 80, "display.width", 200):
        print(df.to_string(index=False))
    print()
    for row in rows:
        params = ", ".join(f"{k}={v:g}" for k, v in row["defaults"].items())
        print(f"{row['name']}: {params}")
        if row["notes"]:
            print(f"  note: {row['notes']}")
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    configs = _configs(args)
    jobs = [lambda c=c: run_experiment(c) for c in configs]
    results = run_parallel(jobs)

    table = pd.DataFrame([
        {"experiment": r.experiment, "out_path": r.out_path, "trajectories": ", ".join(r.trajectories)}
        for r in results
    ])
    print(table.to_string(index=False))
    for r in results:
        print(f"\n{r.experiment} summary:")
        print(json.dumps(r.summary, indent=2, default=float))
    return 0


def cmd_check(args: argparse.Namespace) -> int:
    report, ok = check_acceptance(args.results_dir, args.only)
    with pd.option_context("display.width", 200, "display.max_colwidth", 60):
        print(report.to_string(index=False))
    passed = int(report["passed"].sum())
    print(f"\n{passed}/{len(report)} criteria passed -> {'PASS' if ok else 'FAIL'}")
    return 0 if ok else 1


def cmd_history(args: argparse.Namespace) -> int:
    root = settings.out_dir(args.out)
    if args.run_id is not None:
        run = get_run_by_id(root, args.run_id)
        if not run:
            print(f"No run with id {args.run_id} under {root}.")
            return 1
        print(json.dumps(run, indent=2))
        return 0

    runs = list_runs(root, limit=args.limit, experiment=args.experiment)
    if not runs:
        print(f"No runs recorded under {root} yet. Use `run` first.")
        return 0
    df = pd.DataFrame(runs)[["run_id", "experiment", "created_at", "code_version", "reduced", "out_path"]]
    print(df.to_string(index=False))
    return 0


COMMANDS = {"list": cmd_list, "run": cmd_run, "check": cmd_check, "history": cmd_history}


def main(argv: Optional[List[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    settings.configure_logging(args.log_level)
    try:
        return COMMANDS[args.command](args)
    except UrpError as e:
        logger.error("%s", e)
        return 2


if __name__ == "__main__":
    sys.exit(main())
