"""Command-line entry points for headless evaluation runs."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from ..gateway import BackendConfig, HttpBackend, ScriptedMockBackend
from ..switching import StrategyKind
from ..tasks import TASK_NAMES
from .metrics import markdown_table, write_csv
from .shadow import shadow_replay
from .trial import TrialConfig, run_experiment, run_trial

STRATEGY_CHOICES = [s.value for s in StrategyKind]
LLM_VARIANTS = [s.value for s in StrategyKind if s.uses_llm]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lams", description="Scripted-user evaluation harness")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an N-trial experiment")
    run.add_argument("--task", choices=TASK_NAMES, required=True)
    run.add_argument("--strategy", choices=STRATEGY_CHOICES, required=True)
    run.add_argument("--trials", type=int, default=3)
    run.add_argument("--seed", type=int, default=1)
    run.add_argument("--backend", default="oracle",
                     choices=["oracle", "staged", "mock", "real"])
    run.add_argument("--mock-script", default="", help="script path for --backend mock")
    run.add_argument("--endpoint", default="", help="chat-completions URL for --backend real")
    run.add_argument("--model", default="", help="model name for --backend real")
    run.add_argument("--patience", type=int, default=1)
    run.add_argument("--budget", type=int, default=20000)
    run.add_argument("--out", default="runs", help="output directory for logs and results")

    shadow = sub.add_parser("shadow", help="replay recorded logs under a variant")
    shadow.add_argument("--log", action="append", required=True,
                        help="event log path; repeat in trial order")
    shadow.add_argument("--variant", choices=LLM_VARIANTS, required=True)
    shadow.add_argument("--mock-script", default="",
                        help="prompt-matching mock for cross-variant replay "
                             "(defaults to exact replay from the logs)")

    report = sub.add_parser("report", help="aggregate result files into CSV + Markdown")
    report.add_argument("--dir", required=True, help="directory containing results_*.json")
    report.add_argument("--csv", default="", help="CSV output path")
    report.add_argument("--md", default="", help="Markdown output path")
    return parser


def cmd_run(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    strategy = StrategyKind(args.strategy)

    if args.backend == "real":
        backend = HttpBackend(BackendConfig(
            backend="real", endpoint=args.endpoint, model=args.model))
        results = []
        from ..learning import LearningStore
        store = LearningStore(args.task, seed=args.seed) if strategy.learns else None
        for trial_index in range(1, args.trials + 1):
            config = TrialConfig(
                task=args.task, strategy=strategy,
                layout_seed=args.seed * 10 + trial_index, trial_index=trial_index,
                rng_seed=args.seed, patience=args.patience, tick_budget=args.budget,
                log_path=str(out / f"{args.task}_{strategy.value}_seed{args.seed}"
                                   f"_trial{trial_index}.jsonl"))
            results.append(run_trial(config, store=store, backend=backend))
    else:
        results = run_experiment(
            args.task, strategy, seed=args.seed, trials=args.trials,
            backend_kind=args.backend, mock_script=args.mock_script,
            patience=args.patience, tick_budget=args.budget, log_dir=out)

    payload = [r.to_dict() for r in results]
    result_path = out / f"results_{args.task}_{strategy.value}_seed{args.seed}.json"
    result_path.write_text(json.dumps(payload, indent=2, sort_keys=True))
    for r in results:
        print(f"trial {r.trial_index}: manual_switches={r.manual_switches} "
              f"completed={r.completed} ticks={r.ticks}")
    print(f"results written to {result_path}")
    return 0


def cmd_shadow(args) -> int:
    backend = ScriptedMockBackend.from_file(args.mock_script) if args.mock_script else None
    results = shadow_replay(args.log, StrategyKind(args.variant), backend=backend)
    for r in results:
        print(f"trial {r.trial_index}: simulated={r.simulated_manual_switches} "
              f"recorded={r.recorded_manual_switches} points={r.switch_points}")
    return 0


def cmd_report(args) -> int:
    rows = []
    for path in sorted(Path(args.dir).glob("results_*.json")):
        rows.extend(json.loads(path.read_text()))
    if not rows:
        print(f"no results_*.json under {args.dir}", file=sys.stderr)
        return 1

    class _Row:
        def __init__(self, d):
            self._d = d

        def to_dict(self):
            return self._d

    results = [_Row(r) for r in rows]
    csv_path = args.csv or str(Path(args.dir) / "report.csv")
    csv_text = write_csv(results, csv_path)
    table = markdown_table(results)
    if args.md:
        Path(args.md).write_text(table + "\n")
    print(table)
    print(f"\nCSV written to {csv_path} ({len(rows)} rows)")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return cmd_run(args)
    if args.command == "shadow":
        return cmd_shadow(args)
    return cmd_report(args)


if __name__ == "__main__":
    sys.exit(main())
