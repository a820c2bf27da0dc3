"""Experiment presets, replication control and result files."""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

from isstsim.kernel import mix
from isstsim.model import MODES, ReplicationMetrics, ScenarioConfig, run_day
from isstsim.stats import mean, sample_variance, student_t_ppf


class ExperimentId(str, enum.Enum):
    E1 = "E1"
    E2 = "E2"
    E3 = "E3"
    E4 = "E4"
    E5 = "E5"

    @property
    def toggles(self) -> tuple[bool, bool, bool]:
        """(stop_numbers, speedup, skip)."""
        return _TOGGLES[self]

    @property
    def label(self) -> str:
        return _LABELS[self]

    @classmethod
    def parse(cls, value: Any) -> "ExperimentId":
        if isinstance(value, cls):
            return value
        text = str(value).strip().upper()
        if text.isdigit():
            text = "E" + text
        try:
            return cls(text)
        except ValueError:
            raise ValueError(f"unknown experiment {value!r}; expected one of E1..E5") from None


_TOGGLES = {
    ExperimentId.E1: (False, False, False),
    ExperimentId.E2: (True, False, False),
    ExperimentId.E3: (False, True, False),
    ExperimentId.E4: (False, False, True),
    ExperimentId.E5: (True, True, True),
}

_LABELS = {
    ExperimentId.E1: "reactive only",
    ExperimentId.E2: "receptionist stops issuing numbers",
    ExperimentId.E3: "advisors speed up",
    ExperimentId.E4: "students skip the reception queue",
    ExperimentId.E5: "all proactive rules",
}


def apply_experiment(cfg: ScenarioConfig, exp: ExperimentId) -> ScenarioConfig:
    return cfg.with_rules(cfg.rules.with_toggles(*ExperimentId.parse(exp).toggles))


def replication_seed(master_seed: int, exp: ExperimentId, mode: str, crn: bool) -> int:
    """Seed handed to ``run_day`` for every replication of one run.

    With common random numbers the seed ignores experiment and mode, so
    replication ``i`` sees the same streams everywhere.
    """
    if crn:
        return int(master_seed)
    return mix(int(master_seed), ExperimentId.parse(exp).value, mode)


@dataclass
class ExperimentRun:
    experiment: ExperimentId
    mode: str
    replications: int
    master_seed: int
    crn: bool = False
    results: list[ReplicationMetrics] = field(default_factory=list)


def _one(args) -> ReplicationMetrics:
    cfg, seed, i = args
    return run_day(cfg, seed, i)


def run_experiment(
    cfg: ScenarioConfig,
    exp: ExperimentId | str,
    mode: str = "des",
    replications: int = 100,
    master_seed: int = 0,
    crn: bool = False,
    jobs: int = 1,
) -> ExperimentRun:
    exp = ExperimentId.parse(exp)
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if replications < 2:
        raise ValueError(f"replications must be >= 2, got {replications}")
    run_cfg = apply_experiment(cfg, exp).with_mode(mode).validate()
    seed = replication_seed(master_seed, exp, mode, crn)
    tasks = [(run_cfg, seed, i) for i in range(replications)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_one, tasks, chunksize=max(1, replications // (4 * jobs))))
    else:
        results = [_one(t) for t in tasks]
    return ExperimentRun(exp, mode, replications, int(master_seed), crn, results)


SUMMARY_FIELDS = ("mean_wait_minutes", "n_served", "n_not_served", "turned_away", "leftover")


def _value(m: Any, name: str) -> float:
    if isinstance(m, Mapping):
        return float(m[name])
    return float(getattr(m, name))


def summarize(values: Sequence[float], confidence: float = 0.95) -> dict[str, Any]:
    n = len(values)
    if n == 0:
        raise ValueError("cannot summarize an empty sample")
    m = mean(values)
    if n < 2:
        return {"n": n, "mean": m, "std": None, "ci_low": None, "ci_high": None, "low_n": True}
    sd = math.sqrt(sample_variance(values))
    half = student_t_ppf(0.5 + confidence / 2.0, n - 1) * sd / math.sqrt(n)
    return {"n": n, "mean": m, "std": sd, "ci_low": m - half, "ci_high": m + half, "low_n": n < 3}


def aggregate(run: ExperimentRun | Sequence[Any], confidence: float = 0.95) -> dict[str, dict[str, Any]]:
    """Mean, sample standard deviation and t-based confidence interval per metric."""
    results = run.results if isinstance(run, ExperimentRun) else list(run)
    if not results:
        raise ValueError("no results to aggregate")
    return {name: summarize([_value(r, name) for r in results], confidence) for name in SUMMARY_FIELDS}


# --- files ---------------------------------------------------------------------

CSV_COLUMNS = (
    "experiment",
    "mode",
    "replication",
    "mean_wait_minutes",
    "n_served",
    "n_not_served",
    "turned_away",
    "leftover",
)


def replication_rows(runs: Iterable[ExperimentRun]) -> list[dict[str, Any]]:
    rows = []
    for run in runs:
        for i, m in enumerate(run.results):
            rows.append({
                "experiment": run.experiment.value,
                "mode": run.mode,
                "replication": i,
                "mean_wait_minutes": m.mean_wait_minutes,
                "n_served": m.n_served,
                "n_not_served": m.n_not_served,
                "turned_away": m.turned_away,
                "leftover": m.leftover,
            })
    return rows


def rows_to_csv(rows: Iterable[Mapping[str, Any]]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        # repr() keeps floats round-trippable.
        w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
    return buf.getvalue()


class SchemaError(ValueError):
    pass


def rows_from_csv(text: str) -> list[dict[str, Any]]:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or tuple(reader.fieldnames) != CSV_COLUMNS:
        raise SchemaError(f"expected columns {','.join(CSV_COLUMNS)}, got {reader.fieldnames}")
    rows = []
    for line, r in enumerate(reader, start=2):
        try:
            rows.append({
                "experiment": r["experiment"],
                "mode": r["mode"],
                "replication": int(r["replication"]),
                "mean_wait_minutes": float(r["mean_wait_minutes"]),
                "n_served": int(r["n_served"]),
                "n_not_served": int(r["n_not_served"]),
                "turned_away": int(r["turned_away"]),
                "leftover": int(r["leftover"]),
            })
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"line {line}: {exc}") from None
    return rows


def group_rows(rows: Iterable[Mapping[str, Any]]) -> dict[tuple[str, str], list[Mapping[str, Any]]]:
    out: dict[tuple[str, str], list[Mapping[str, Any]]] = {}
    for r in rows:
        out.setdefault((r["experiment"], r["mode"]), []).append(r)
    for key in out:
        out[key].sort(key=lambda r: r["replication"])
    return out


def aggregate_json(runs: Iterable[ExperimentRun]) -> str:
    doc = []
    for run in runs:
        doc.append({
            "experiment": run.experiment.value,
            "mode": run.mode,
            "replications": run.replications,
            "master_seed": run.master_seed,
            "crn": run.crn,
            "summary": aggregate(run),
        })
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"
