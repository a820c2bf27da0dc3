"""Welch t-test, Student-t distribution, and the experiment comparison tables."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass
from typing import Any, Iterable, Mapping, Optional, Sequence

_EPS = 1e-16
_TINY = 1e-300


def _betacf(a: float, b: float, x: float, max_iter: int = 100_000) -> float:
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) for a, b > 0 and 0 <= x <= 1."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    # The fraction converges fast only on one side of the mean; use symmetry on the other.
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_sf2(t: float, df: float) -> float:
    """Two-sided tail probability P(|T| >= |t|)."""
    if df <= 0:
        raise ValueError(f"df must be > 0, got {df}")
    if math.isnan(t):
        return math.nan
    if math.isinf(t):
        return 0.0
    if t == 0:
        return 1.0
    t2 = t * t
    # Pick the argument that keeps precision: x close to 1 loses digits in 1 - x.
    if t2 < df:
        return 1.0 - regularized_incomplete_beta(0.5, df / 2.0, t2 / (df + t2))
    return regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t2))


def student_t_cdf(x: float, df: float) -> float:
    if df <= 0:
        raise ValueError(f"df must be > 0, got {df}")
    if x == math.inf:
        return 1.0
    if x == -math.inf:
        return 0.0
    tail = 0.5 * student_t_sf2(x, df)
    return 1.0 - tail if x > 0 else tail


def student_t_ppf(q: float, df: float) -> float:
    """Quantile of the Student t distribution, by bisection on the CDF."""
    if not 0.0 < q < 1.0:
        raise ValueError(f"q must be in (0, 1), got {q}")
    if q == 0.5:
        return 0.0
    if q < 0.5:
        return -student_t_ppf(1.0 - q, df)
    lo, hi = 0.0, 1.0
    while student_t_cdf(hi, df) < q:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if student_t_cdf(mid, df) < q:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-14 * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


def mean(xs: Sequence[float]) -> float:
    return math.fsum(xs) / len(xs)


def sample_variance(xs: Sequence[float]) -> float:
    m = mean(xs)
    return math.fsum((x - m) ** 2 for x in xs) / (len(xs) - 1)


@dataclass(frozen=True)
class TTestResult:
    t_stat: float
    df: float
    p_value: float
    reject: bool
    alpha: float = 0.05
    mean_a: float = math.nan
    mean_b: float = math.nan
    degenerate: bool = False

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def welch_t_test(a: Sequence[float], b: Sequence[float], alpha: float = 0.05, pooled: bool = False) -> TTestResult:
    """Two-sided two-sample t-test; Welch's unequal-variance form by default.

    ``pooled=True`` gives the classic equal-variance Student test.
    """
    a = [float(x) for x in a]
    b = [float(x) for x in b]
    na, nb = len(a), len(b)
    if na < 2 or nb < 2:
        raise ValueError(f"each sample needs at least 2 values, got {na} and {nb}")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    ma, mb = mean(a), mean(b)
    va, vb = sample_variance(a), sample_variance(b)
    if va == 0 and vb == 0:
        df = float(na + nb - 2)
        if ma == mb:
            return TTestResult(0.0, df, 1.0, 1.0 < alpha, alpha, ma, mb, degenerate=True)
        t = math.copysign(math.inf, ma - mb)
        return TTestResult(t, df, 0.0, 0.0 < alpha, alpha, ma, mb, degenerate=True)
    if pooled:
        df = float(na + nb - 2)
        sp2 = ((na - 1) * va + (nb - 1) * vb) / df
        se = math.sqrt(sp2 * (1.0 / na + 1.0 / nb))
    else:
        sa, sb = va / na, vb / nb
        se = math.sqrt(sa + sb)
        # Welch-Satterthwaite, written in variance shares so tiny variances cannot underflow.
        ra, rb = sa / (sa + sb), sb / (sa + sb)
        df = 1.0 / (ra * ra / (na - 1) + rb * rb / (nb - 1))
    t = (ma - mb) / se
    p = min(1.0, max(0.0, student_t_sf2(t, df)))
    return TTestResult(t, df, p, p < alpha, alpha, ma, mb)


# --- report tables -------------------------------------------------------------

MEASURES = ("waiting_time", "customers_not_served")
MEASURE_FIELD = {"waiting_time": "mean_wait_minutes", "customers_not_served": "n_not_served"}


@dataclass(frozen=True)
class ComparisonRow:
    baseline: str
    other: str
    measure: str
    mode: str
    result: TTestResult

    @property
    def pair(self) -> str:
        return f"{self.baseline} vs. {self.other}"


def format_p(p: float) -> str:
    return "<1e-4" if p < 1e-4 else f"{p:.4f}"


def _samples(results: Iterable[Any], measure: str) -> list[float]:
    key = MEASURE_FIELD[measure]
    out = []
    for r in results:
        out.append(float(r[key] if isinstance(r, Mapping) else getattr(r, key)))
    return out


def render_tables(
    runs: Mapping[tuple[str, str], Sequence[Any]],
    alpha: float = 0.05,
    baseline: str = "E1",
) -> tuple[list[dict[str, Any]], list[ComparisonRow]]:
    """Build the per-experiment means table and the baseline comparison rows.

    ``runs`` maps ``(experiment, mode)`` to replication metrics (objects or
    dicts carrying ``mean_wait_minutes`` and ``n_not_served``).
    """
    modes = sorted({m for _, m in runs}, key=lambda m: (m != "des", m))
    experiments = sorted({e for e, _ in runs})
    table2 = []
    for exp in experiments:
        row: dict[str, Any] = {"experiment": exp}
        for mode in modes:
            res = runs.get((exp, mode))
            if res is None:
                continue
            row[mode] = {
                "waiting_time": mean(_samples(res, "waiting_time")),
                "customers_not_served": mean(_samples(res, "customers_not_served")),
                "replications": len(res),
            }
        table2.append(row)

    table3 = []
    for mode in modes:
        base = runs.get((baseline, mode))
        if base is None:
            raise ValueError(f"baseline experiment {baseline} missing for mode {mode!r}")
        others = [e for e in experiments if e != baseline and (e, mode) in runs]
        if not others:
            raise ValueError(f"no experiment to compare against {baseline} in mode {mode!r}")
        for exp in others:
            for measure in MEASURES:
                res = welch_t_test(_samples(base, measure), _samples(runs[(exp, mode)], measure), alpha)
                table3.append(ComparisonRow(baseline, exp, measure, mode, res))
    return table2, table3


def table2_markdown(table2: Sequence[Mapping[str, Any]]) -> str:
    modes = [m for m in ("des", "hybrid") if any(m in r for r in table2)]
    head = ["Experiment"]
    for m in modes:
        head += [f"{m} waiting time (min)", f"{m} customers not served"]
    lines = ["| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
    for r in table2:
        cells = [r["experiment"]]
        for m in modes:
            if m in r:
                cells += [f"{r[m]['waiting_time']:.2f}", f"{r[m]['customers_not_served']:.2f}"]
            else:
                cells += ["", ""]
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def table3_markdown(rows: Sequence[ComparisonRow]) -> str:
    head = ["Experiments", "Measure", "Mode", "t", "df", "p-value", f"alpha", "Decision"]
    lines = ["| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
    for r in rows:
        res = r.result
        lines.append(
            "| "
            + " | ".join(
                [r.pair, r.measure, r.mode, f"{res.t_stat:.4f}", f"{res.df:.2f}",
                 format_p(res.p_value), f"{res.alpha:g}", "Reject" if res.reject else "Fail to reject"]
            )
            + " |"
        )
    return "\n".join(lines) + "\n"


def table3_records(rows: Sequence[ComparisonRow]) -> list[dict[str, Any]]:
    out = []
    for r in rows:
        d = {"baseline": r.baseline, "other": r.other, "measure": r.measure, "mode": r.mode}
        d.update(r.result.to_dict())
        out.append(d)
    return out


def table3_csv(rows: Sequence[ComparisonRow]) -> str:
    recs = table3_records(rows)
    buf = io.StringIO()
    fields = ["baseline", "other", "measure", "mode", "t_stat", "df", "p_value", "reject",
              "alpha", "mean_a", "mean_b", "degenerate"]
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    for rec in recs:
        w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in rec.items()})
    return buf.getvalue()


def table2_csv(table2: Sequence[Mapping[str, Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["experiment", "mode", "waiting_time", "customers_not_served", "replications"])
    for r in table2:
        for m in ("des", "hybrid"):
            if m in r:
                c = r[m]
                w.writerow([r["experiment"], m, repr(c["waiting_time"]), repr(c["customers_not_served"]), c["replications"]])
    return buf.getvalue()


REPORT_SCHEMA_VERSION = 1


def tables_json(table2, table3: Sequence[ComparisonRow]) -> str:
    """Stable JSON rendering of both tables (sorted keys, 2-space indent)."""
    doc = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "table2": list(table2),
        "table3": table3_records(table3),
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"
