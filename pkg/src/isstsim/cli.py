"""Command-line front end.

Exit codes: 0 success, 2 bad input (scenario, overrides, result files),
3 output could not be written.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Sequence

from isstsim.config import DEFAULT_SCENARIO, load_scenario, scenario_to_dict
from isstsim.experiments import (
    ExperimentId,
    SchemaError,
    aggregate_json,
    group_rows,
    replication_rows,
    rows_from_csv,
    rows_to_csv,
    run_experiment,
)
from isstsim.model import MODES, ConfigError, run_day
from isstsim.stats import (
    MEASURES,
    ComparisonRow,
    render_tables,
    table2_csv,
    table2_markdown,
    table3_csv,
    table3_markdown,
    tables_json,
    welch_t_test,
)

log = logging.getLogger("isstsim")

OUTPUT_ENV = "ISSTSIM_OUTPUT_DIR"
EXIT_OK, EXIT_INPUT, EXIT_IO = 0, 2, 3


class InputError(Exception):
    pass


class OutputError(Exception):
    pass


def _output_dir(args) -> Path:
    return Path(args.output_dir or os.environ.get(OUTPUT_ENV) or "isstsim-out")


def _write(out: Path, files: dict[str, str]) -> None:
    try:
        out.mkdir(parents=True, exist_ok=True)
        for name, text in files.items():
            with open(out / name, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
    except OSError as exc:
        raise OutputError(f"cannot write to {out}: {exc}") from None


def _load(args):
    try:
        return load_scenario(args.scenario, args.set or ())
    except FileNotFoundError as exc:
        raise InputError(str(exc)) from None
    except ConfigError as exc:
        raise InputError(f"invalid scenario: {exc}") from None


def _read_rows(path: str):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    try:
        return rows_from_csv(text)
    except SchemaError as exc:
        raise InputError(f"{path}: {exc}") from None


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _tables(runs, alpha: float, out: Path, fmt: str) -> str:
    try:
        table2, table3 = render_tables(runs, alpha)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    files = {
        "table2.md": table2_markdown(table2),
        "table2.csv": table2_csv(table2),
        "table3.md": table3_markdown(table3),
        "table3.csv": table3_csv(table3),
        "tables.json": tables_json(table2, table3),
    }
    _write(out, files)
    if fmt == "json":
        return files["tables.json"]
    if fmt == "csv":
        return files["table2.csv"] + "\n" + files["table3.csv"]
    return files["table2.md"] + "\n" + files["table3.md"]


# --- subcommands ---------------------------------------------------------------


def cmd_run(args) -> str:
    cfg = _load(args)
    if args.mode:
        cfg = cfg.with_mode(args.mode)
    trace = [] if args.trace else None
    metrics = run_day(cfg, args.seed, args.replication, trace=trace)
    out = _output_dir(args)
    doc = {"mode": cfg.mode, "seed": args.seed, "replication": args.replication, "metrics": metrics.to_dict()}
    files = {"metrics.json": _dump(doc)}
    if args.format == "csv":
        files = {"metrics.csv": rows_to_csv([{
            "experiment": "-", "mode": cfg.mode, "replication": args.replication,
            "mean_wait_minutes": metrics.mean_wait_minutes, "n_served": metrics.n_served,
            "n_not_served": metrics.n_not_served, "turned_away": metrics.turned_away,
            "leftover": metrics.leftover,
        }])}
    if trace is not None:
        files["trace.jsonl"] = "".join(json.dumps(r, sort_keys=True) + "\n" for r in trace)
    _write(out, files)
    return (
        f"{cfg.mode}: mean wait {metrics.mean_wait_minutes:.3f} min, served {metrics.n_served}, "
        f"not served {metrics.n_not_served}, turned away {metrics.turned_away}\n"
    )


def cmd_experiment(args) -> str:
    cfg = _load(args)
    mode = args.mode or cfg.mode
    run = run_experiment(cfg, args.experiment, mode, args.replications, args.seed, args.crn, args.jobs)
    _write(_output_dir(args), {
        "replications.csv": rows_to_csv(replication_rows([run])),
        "aggregate.json": aggregate_json([run]),
    })
    s = json.loads(aggregate_json([run]))[0]["summary"]
    return (
        f"{run.experiment.value}/{mode}: mean wait {s['mean_wait_minutes']['mean']:.3f} min, "
        f"not served {s['n_not_served']['mean']:.2f}\n"
    )


def cmd_suite(args) -> str:
    cfg = _load(args)
    modes = args.modes.split(",") if args.modes else list(MODES)
    for m in modes:
        if m not in MODES:
            raise InputError(f"--modes: unknown mode {m!r}")
    runs = []
    for mode in modes:
        for exp in ExperimentId:
            log.info("running %s/%s (%d replications)", exp.value, mode, args.replications)
            runs.append(run_experiment(cfg, exp, mode, args.replications, args.seed, args.crn, args.jobs))
    out = _output_dir(args)
    _write(out, {
        "scenario.json": _dump(scenario_to_dict(cfg)),
        "replications.csv": rows_to_csv(replication_rows(runs)),
        "aggregate.json": aggregate_json(runs),
    })
    grouped = {(r.experiment.value, r.mode): r.results for r in runs}
    text = _tables(grouped, args.alpha, out, args.format)
    if args.replications < 3:
        text += "warning: fewer than 3 replications; confidence intervals flagged low_n\n"
    return text


def cmd_render(args) -> str:
    rows = _read_rows(args.results)
    return _tables(group_rows(rows), args.alpha, _output_dir(args), args.format)


def cmd_compare(args) -> str:
    a_rows, b_rows = _read_rows(args.results_a), _read_rows(args.results_b)
    if len(a_rows) < 2 or len(b_rows) < 2:
        raise InputError("each results file needs at least 2 replications")
    label_a = "+".join(sorted({f"{r['experiment']}/{r['mode']}" for r in a_rows}))
    label_b = "+".join(sorted({f"{r['experiment']}/{r['mode']}" for r in b_rows}))
    rows = []
    for measure in MEASURES:
        key = "mean_wait_minutes" if measure == "waiting_time" else "n_not_served"
        res = welch_t_test([r[key] for r in a_rows], [r[key] for r in b_rows], args.alpha)
        rows.append(ComparisonRow(label_a, label_b, measure, "compare", res))
    records = []
    for r in rows:
        d = {"a": r.baseline, "b": r.other, "measure": r.measure,
             "mean_difference": r.result.mean_a - r.result.mean_b}
        d.update(r.result.to_dict())
        records.append(d)
    files = {"compare.json": _dump(records), "compare.md": table3_markdown(rows)}
    files["compare.md"] += "".join(
        f"\n{d['measure']}: mean difference {d['mean_difference']:+.4f}" for d in records
    ) + "\n"
    _write(_output_dir(args), files)
    return files["compare.json"] if args.format == "json" else files["compare.md"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="isstsim",
        description="Simulate the student-support office in process-oriented or agent-based mode.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, scenario=True):
        if scenario:
            p.add_argument("--scenario", default=DEFAULT_SCENARIO,
                           help="scenario YAML path or packaged name (default: %(default)s)")
            p.add_argument("--set", action="append", metavar="KEY=VALUE",
                           help="override a scenario value, e.g. rules.speedup_factor=0.75")
        p.add_argument("--output-dir", help=f"output directory (default: ${OUTPUT_ENV} or ./isstsim-out)")
        p.add_argument("--format", choices=("csv", "json", "md"), default="md")

    p = sub.add_parser("run", help="simulate a single day")
    common(p)
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--replication", type=int, default=0)
    p.add_argument("--trace", action="store_true", help="write trace.jsonl, one event per line")
    p.set_defaults(func=cmd_run)

    def replicated(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--replications", type=int, default=100)
        p.add_argument("--crn", action="store_true", help="common random numbers across experiments")
        p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("experiment", help="replicate one experiment")
    common(p)
    p.add_argument("--experiment", type=ExperimentId.parse, required=True)
    p.add_argument("--mode", choices=MODES)
    replicated(p)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("suite", help="run E1-E5 in both modes and render the comparison tables")
    common(p)
    replicated(p)
    p.add_argument("--modes", help="comma-separated subset of des,hybrid")
    p.add_argument("--alpha", type=float, default=0.05)
    p.set_defaults(func=cmd_suite)

    p = sub.add_parser("render", help="render tables from a replications CSV")
    common(p, scenario=False)
    p.add_argument("results")
    p.add_argument("--alpha", type=float, default=0.05)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("compare", help="Welch t-tests between two replications CSVs")
    common(p, scenario=False)
    p.add_argument("results_a")
    p.add_argument("results_b")
    p.add_argument("--alpha", type=float, default=0.05)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        text = args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OutputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
