import json
import math
from pathlib import Path

import pytest
from hypothesis import given, strategies as st

from isstsim.stats import (
    format_p,
    regularized_incomplete_beta,
    render_tables,
    student_t_cdf,
    student_t_ppf,
    table2_markdown,
    table3_csv,
    table3_markdown,
    tables_json,
    welch_t_test,
)
from reference_values import T_CDF, WELCH

GOLDEN = Path(__file__).parent / "golden" / "tables.json"


@pytest.mark.parametrize("x,df,expected", T_CDF)
def test_t_cdf_reference(x, df, expected):
    assert student_t_cdf(x, df) == pytest.approx(expected, abs=1e-10)


@pytest.mark.parametrize("a,b,t,df,p", WELCH)
def test_welch_reference(a, b, t, df, p):
    res = welch_t_test(a, b)
    assert res.p_value == pytest.approx(p, abs=1e-8)
    assert res.t_stat == pytest.approx(t, rel=1e-10)
    assert res.df == pytest.approx(df, rel=1e-10)


def test_welch_small_example():
    res = welch_t_test([2.1, 2.5, 2.3], [3.0, 3.2, 3.1])
    assert res.t_stat < 0
    assert res.reject


def test_against_scipy():
    scipy_stats = pytest.importorskip("scipy.stats")
    for a, b, *_ in WELCH:
        ours = welch_t_test(a, b)
        ref = scipy_stats.ttest_ind(a, b, equal_var=False)
        assert ours.p_value == pytest.approx(ref.pvalue, abs=1e-10)
        pooled = welch_t_test(a, b, pooled=True)
        ref = scipy_stats.ttest_ind(a, b, equal_var=True)
        assert pooled.p_value == pytest.approx(ref.pvalue, abs=1e-10)
    for q in (0.6, 0.9, 0.975, 0.999):
        for df in (1, 3.5, 30):
            assert student_t_ppf(q, df) == pytest.approx(scipy_stats.t.ppf(q, df), rel=1e-9)


@given(st.floats(-50, 50, allow_nan=False), st.floats(0.2, 500))
def test_t_cdf_symmetry(x, df):
    assert student_t_cdf(x, df) + student_t_cdf(-x, df) == pytest.approx(1.0, abs=1e-12)


# Quarter-minute grid: values keep a real spread under the shifts below.
samples = st.lists(st.integers(-4000, 4000).map(lambda k: k / 4), min_size=2, max_size=15)


@given(samples, samples)
def test_welch_swap_symmetry(a, b):
    if len(set(a)) < 2 or len(set(b)) < 2:
        return
    ab, ba = welch_t_test(a, b), welch_t_test(b, a)
    assert ab.p_value == pytest.approx(ba.p_value, abs=1e-12)
    assert ab.t_stat == pytest.approx(-ba.t_stat, rel=1e-12, abs=1e-12)


@given(samples, samples, st.sampled_from([0.01, 0.5, 3.0, 60.0, 1e3]), st.floats(-100, 100))
def test_welch_scale_and_shift_invariance(a, b, scale, shift):
    if len(set(a)) < 2 or len(set(b)) < 2:
        return
    base = welch_t_test(a, b)
    moved = welch_t_test([x * scale + shift for x in a], [x * scale + shift for x in b])
    if base.p_value > 1e-6:
        assert moved.p_value == pytest.approx(base.p_value, abs=1e-12, rel=1e-9)


def test_welch_exact_scaling():
    # Power-of-two scale factors are exact in floating point.
    a, b = [1.0, 2.5, 3.25, 4.0], [2.0, 2.75, 5.5]
    base = welch_t_test(a, b)
    for k in (0.25, 2.0, 64.0):
        assert abs(welch_t_test([x * k for x in a], [x * k for x in b]).p_value - base.p_value) <= 1e-12


def test_degenerate_samples():
    same = welch_t_test([3.0, 3.0, 3.0], [3.0, 3.0])
    assert same.p_value == 1.0 and same.t_stat == 0.0 and same.degenerate and not same.reject
    diff = welch_t_test([3.0, 3.0], [4.0, 4.0])
    assert diff.p_value == 0.0 and diff.t_stat == -math.inf and diff.reject
    with pytest.raises(ValueError):
        welch_t_test([1.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        welch_t_test([1.0, 2.0], [1.0, 2.0], alpha=1.5)


def test_identical_samples_do_not_reject():
    res = welch_t_test([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
    assert res.p_value == pytest.approx(1.0) and not res.reject


def test_incomplete_beta_edges():
    assert regularized_incomplete_beta(2, 3, 0.0) == 0.0
    assert regularized_incomplete_beta(2, 3, 1.0) == 1.0
    # I_x(1, 1) = x and I_x(a, 1) = x**a
    assert regularized_incomplete_beta(1, 1, 0.3) == pytest.approx(0.3, abs=1e-15)
    assert regularized_incomplete_beta(3, 1, 0.5) == pytest.approx(0.125, abs=1e-15)
    with pytest.raises(ValueError):
        regularized_incomplete_beta(0, 1, 0.5)


def test_format_p():
    assert format_p(0.04567) == "0.0457"
    assert format_p(1e-7) == "<1e-4"


def fake_runs(modes=("des", "hybrid")):
    runs = {}
    for i, exp in enumerate(["E1", "E2", "E3", "E4", "E5"]):
        for mode in modes:
            shift = 0.0 if exp == "E1" else 0.5 + 0.1 * i
            runs[(exp, mode)] = [
                {"mean_wait_minutes": 2.0 - shift + 0.05 * k, "n_not_served": (k % 3) + (4 if exp == "E1" else 0)}
                for k in range(6)
            ]
    return runs


def test_render_tables_shape():
    table2, table3 = render_tables(fake_runs())
    assert [r["experiment"] for r in table2] == ["E1", "E2", "E3", "E4", "E5"]
    assert len(table3) == 4 * 2 * 2
    assert {r.pair for r in table3} == {"E1 vs. E2", "E1 vs. E3", "E1 vs. E4", "E1 vs. E5"}
    assert all(r.result.reject for r in table3)
    md = table3_markdown(table3)
    assert md.count("\n") == 2 + len(table3)
    assert "Reject" in md
    assert table2_markdown(table2).splitlines()[2].startswith("| E1 |")
    assert table3_csv(table3).count("\n") == 1 + len(table3)


def test_render_alpha_one_rejects_everything():
    _, table3 = render_tables(fake_runs(), alpha=1.0)
    assert all(r.result.reject for r in table3 if r.result.p_value < 1.0)


def test_render_single_mode():
    table2, table3 = render_tables(fake_runs(("hybrid",)))
    assert len(table3) == 8 and {r.mode for r in table3} == {"hybrid"}
    assert "des" not in table2_markdown(table2)


def test_render_missing_baseline():
    runs = {k: v for k, v in fake_runs().items() if k[0] != "E1"}
    with pytest.raises(ValueError, match="E1"):
        render_tables(runs)


def test_tables_json_golden():
    table2, table3 = render_tables(fake_runs())
    text = tables_json(table2, table3)
    doc = json.loads(text)
    assert doc["schema_version"] == 1
    assert text == GOLDEN.read_text(encoding="utf-8")
