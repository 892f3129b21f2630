import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from annealcast.errors import DomainError, InsufficientDataError, UndefinedMetricError
from annealcast.evaluation import (
    EvalReport,
    accuracy,
    auc_contributions,
    bce,
    comparison_table,
    confusion,
    evaluate,
    format_value,
    mse,
    paired_t_test,
    recall,
    render,
    roc_auc,
    top_group,
)

from oracles import brute_auc, paired_t_reference, t_two_sided_quadrature

DATA = Path(__file__).parent / "data"

# frozen from 40-digit mpmath quadrature of the Student-t density
T_FIXTURE_A = [0.9, 1.2, 0.4, 2.2, 1.1, 0.7, 1.9, 0.3, 1.4, 1.0]
T_FIXTURE_B = [1.1, 1.0, 0.9, 2.0, 1.6, 0.8, 2.3, 0.6, 1.5, 1.2]
T_FIXTURE = (-2.3895643064568155, 0.04058636707254119)


def test_regression_metric_examples():
    assert mse([1, 2], [1, 3]) == 0.5
    assert mse([4.0, -1.0], [4.0, -1.0]) == 0.0
    assert mse([1, 2, 3], [1, 2, 5]) == pytest.approx(4 / 3)
    assert bce([1], [0.5]) == pytest.approx(0.693147, abs=1e-6)
    assert bce([1, 0], [1.0, 0.0]) < 1e-10
    assert math.isfinite(bce([1, 0], [0.0, 1.0]))


@pytest.mark.parametrize("seed", range(10))
def test_mse_and_bce_match_loops(seed):
    rng = np.random.default_rng(seed)
    y, p = rng.standard_normal(37), rng.standard_normal(37)
    loop = sum((a - b) ** 2 for a, b in zip(y.tolist(), p.tolist())) / 37
    assert abs(mse(y, p) - loop) <= 1e-12
    yb, pb = rng.integers(0, 2, 37), rng.uniform(0.01, 0.99, 37)
    loop = -sum(a * math.log(b) + (1 - a) * math.log(1 - b) for a, b in zip(yb.tolist(), pb.tolist())) / 37
    assert abs(bce(yb, pb) - loop) <= 1e-12


def test_confusion_and_rates():
    cm = confusion([1, 1, 0, 0, 1], [1, 0, 0, 1, 1])
    assert (cm.tp, cm.fp, cm.tn, cm.fn) == (2, 1, 1, 1)
    assert accuracy(cm) == 0.6
    assert recall(cm) == pytest.approx(2 / 3)
    assert recall(confusion([0, 0], [1, 0])) == 0.0
    with pytest.raises(DomainError):
        confusion([-1, 1], [1, 1])


def test_confusion_count_examples():
    from annealcast.evaluation import ConfusionMatrix

    cm = ConfusionMatrix(tp=40, fp=20, tn=30, fn=10)
    assert accuracy(cm) == 0.7 and recall(cm) == 0.8
    assert accuracy(confusion([0, 1, 1], [0, 1, 1])) == 1.0
    assert accuracy(confusion([0, 1] * 5, [1] * 10)) == 0.5


@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), min_size=1, max_size=50))
def test_accuracy_is_one_minus_mean_abs_error(pairs):
    y, yhat = np.array(pairs).T
    assert accuracy(confusion(y, yhat)) == pytest.approx(1 - np.mean(np.abs(y - yhat)))


def test_auc_examples():
    assert roc_auc([1, 1, 0, 0], [0.9, 0.8, 0.3, 0.1]) == 1.0
    assert roc_auc([1, 0, 1, 0], [0.9, 0.8, 0.2, 0.1]) == 0.75
    assert roc_auc([1, 0, 1, 0, 0], [0.3] * 5) == 0.5
    assert roc_auc([0, 0, 1, 1], [0.1, 0.4, 0.35, 0.8]) == 0.75
    assert roc_auc([0, 1], [0.5, 0.5]) == 0.5
    with pytest.raises(UndefinedMetricError):
        roc_auc([1, 1], [0.2, 0.3])


@pytest.mark.parametrize("seed", range(20))
def test_auc_equals_pair_count(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 80))
    y = rng.integers(0, 2, n)
    y[:2] = [0, 1]
    s = np.round(rng.standard_normal(n), 1)  # coarse rounding forces ties
    assert roc_auc(y, s) == brute_auc(y, s)
    assert np.mean(auc_contributions(y, s)) == pytest.approx(roc_auc(y, s), abs=1e-12)


labels_scores = st.integers(2, 60).flatmap(
    lambda n: st.tuples(
        st.lists(st.integers(0, 1), min_size=n, max_size=n).filter(lambda y: 0 < sum(y) < n),
        st.lists(st.integers(-5, 5), min_size=n, max_size=n),
    )
)


@given(labels_scores)
def test_auc_reversal_and_monotone_invariance(ys):
    y, s = np.array(ys[0]), np.array(ys[1], dtype=float)
    a = roc_auc(y, s)
    assert a + roc_auc(y, -s) == 1.0
    assert roc_auc(y, np.exp(s)) == a
    assert roc_auc(y, 3 * s + 7) == a


def test_t_test_matches_quadrature_fixture():
    r = paired_t_test(T_FIXTURE_A, T_FIXTURE_B)
    assert r.n == 10
    assert r.t == pytest.approx(T_FIXTURE[0], abs=1e-12)
    assert abs(r.p - T_FIXTURE[1]) <= 1e-8


def test_t_test_matches_live_quadrature():
    rng = np.random.default_rng(4)
    for _ in range(5):
        a, b = rng.standard_normal(12), rng.standard_normal(12) + 0.3
        t, p = paired_t_reference(a.tolist(), b.tolist())
        r = paired_t_test(a, b)
        assert abs(r.t - t) <= 1e-9 * max(1, abs(t)) and abs(r.p - p) <= 1e-8
    assert abs(t_two_sided_quadrature(0.0, 5) - 1.0) <= 1e-12


@given(st.lists(st.floats(-100, 100), min_size=3, max_size=40), st.integers(0, 2**32 - 1))
def test_t_test_antisymmetric(a, seed):
    b = np.random.default_rng(seed).standard_normal(len(a))
    ab, ba = paired_t_test(a, b), paired_t_test(b, a)
    assert ab.p == pytest.approx(ba.p, abs=1e-12)
    assert ab.t == pytest.approx(-ba.t) or (math.isinf(ab.t) and ab.t == -ba.t)
    assert 0.0 <= ab.p <= 1.0


def test_t_test_p_shrinks_as_shift_grows():
    d = np.random.default_rng(5).standard_normal(30)
    ps = [paired_t_test(d - d.mean() + shift, np.zeros(30)).p for shift in (0.0, 0.2, 0.5, 1.0)]
    assert ps[0] == pytest.approx(1.0) and all(x > y for x, y in zip(ps, ps[1:]))


def test_t_test_degenerate_cases():
    sym = paired_t_test([1.0, 0.0], [0.0, 1.0])
    assert sym.t == 0.0 and sym.p == 1.0
    assert paired_t_test([2, 2, 2], [1, 1, 1]).p == 0.0
    assert paired_t_test([1, 2, 3], [1, 2, 3]).p == 1.0
    r = paired_t_test([2, 3, 4], [1, 2, 3])
    assert r.p == 0.0 and r.t == math.inf
    with pytest.raises(InsufficientDataError):
        paired_t_test([1], [2])


def test_top_group_spec_cases():
    same = np.arange(10.0)
    assert all(f.top for f in top_group({"a": same, "b": same.copy(), "c": same.copy()}).values())
    rng = np.random.default_rng(9)
    base = rng.uniform(1, 2, 100)
    flags = top_group({"weak": base + 5 + rng.uniform(0, 0.1, 100), "strong": base})
    assert flags["strong"].best and not flags["weak"].top and flags["weak"].p <= 0.05
    pair = top_group({"a": [1.0, 0.0], "b": [0.0, 1.0]})
    assert pair["a"].top and pair["b"].top


def test_top_group_examples():
    rng = np.random.default_rng(6)
    base = rng.standard_normal(100) ** 2
    flags = top_group({"a": base + 1.0, "b": base, "c": base + 1e-3 * rng.standard_normal(100)})
    assert flags["b"].best and not flags["a"].top and flags["c"].top
    tie = top_group({"x": [1.0, 2.0], "y": [2.0, 1.0]})
    assert tie["x"].best and tie["y"].top and not tie["y"].best
    up = top_group({"lo": [0, 1, 0, 1], "hi": [1, 1, 1, 1]}, direction="maximize")
    assert up["hi"].best


def test_evaluate_classification_flags():
    y = np.array([0, 1] * 50)
    good = np.where(y == 1, 0.9, 0.1)
    rep = evaluate("classification", y, {"good": good, "coin": np.full(100, 0.5)})
    assert rep.metrics["good"]["accuracy"] == 1.0
    assert rep.metrics["coin"]["recall"] == 1.0
    assert rep.flags["accuracy"]["good"].best and not rep.flags["accuracy"]["coin"].top
    assert math.isnan(rep.flags["auc"]["coin"].p)
    dec = evaluate("classification", y, {"good": good, "coin": np.full(100, 0.5)}, auc_decomposition=True)
    assert dec.flags["auc"]["coin"].p < 0.05
    assert EvalReport.from_dict(rep.to_dict()).to_dict() == rep.to_dict()


def golden_reports():
    rng = np.random.default_rng(20)
    reports = {}
    for name in ("AAA", "BBB"):
        y = rng.standard_normal(80)
        preds = {
            "null": np.zeros(80),
            "linear": y + rng.standard_normal(80),
            "fsa-linear": y + 0.95 * rng.standard_normal(80),
        }
        reports[name] = evaluate("regression", y, preds)
    return reports


@pytest.mark.parametrize("fmt", ["txt", "csv"])
def test_rendering_matches_golden_file(fmt):
    table = comparison_table(golden_reports(), "mse", title="Test MSE")
    assert render(table, fmt) == (DATA / f"golden_report.{fmt}").read_text()


def test_format_value():
    assert format_value(0.123456) == "0.1235"
    assert format_value(float("nan")) == "-"
    assert format_value(12345.6) == "1.235e+04"
