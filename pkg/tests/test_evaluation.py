import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from quicflow.dataset import Dataset
from quicflow.errors import DatasetTooSmall, EmptyEvaluation, UnknownFeature
from quicflow.evaluation import (AblationSpec, CVSpec, FiveNumber, accuracy, ablation,
                                 best_by_family, cross_condition_table, essential_subsets,
                                 fit_and_score, grid_cv, monotonicity_violations,
                                 monte_carlo_cv, split_indices)
from quicflow.features import FEATURE_NAMES, Normalization
from quicflow.ml import ConfusionCounts, ForestSpec, KNNSpec, SVCSpec


def separable(n=60):
    x = np.r_[np.linspace(0, 1, n // 2), np.linspace(2, 3, n // 2)]
    return Dataset(x.reshape(-1, 1), np.repeat([0, 1], n // 2), "raw", ("s0",))


def test_accuracy_examples():
    assert accuracy(ConfusionCounts(tp=95, tn=96, fp=4, fn=5)) == pytest.approx(0.955)
    assert accuracy(ConfusionCounts(3, 4, 0, 0)) == 1.0
    assert accuracy(ConfusionCounts(0, 0, 2, 5)) == 0.0
    with pytest.raises(EmptyEvaluation):
        accuracy(ConfusionCounts(0, 0, 0, 0))


@given(st.integers(0, 50), st.integers(0, 50), st.integers(0, 50), st.integers(0, 50))
def test_accuracy_is_correct_fraction(tp, tn, fp, fn):
    if tp + tn + fp + fn == 0:
        return
    assert accuracy(ConfusionCounts(tp, tn, fp, fn)) == (tp + tn) / (tp + tn + fp + fn)


def test_split_sizes_and_determinism():
    cv = CVSpec(repeats=5, seed=3)
    for r in range(5):
        tr, va = split_indices(120, cv, r)
        assert len(tr) == 100 and len(va) == 20
        assert np.intersect1d(tr, va).size == 0
        assert np.array_equal(np.union1d(tr, va), np.arange(120))
        again = split_indices(120, cv, r)
        assert np.array_equal(tr, again[0]) and np.array_equal(va, again[1])
    assert not np.array_equal(split_indices(120, cv, 0)[1], split_indices(120, cv, 1)[1])


@given(st.integers(6, 400), st.integers(1, 9), st.integers(1, 4))
def test_split_honours_ratio(n, a, b):
    cv = CVSpec(repeats=1, train_parts=a, validation_parts=b)
    if n < a + b:
        with pytest.raises(DatasetTooSmall):
            split_indices(n, cv, 0)
        return
    tr, va = split_indices(n, cv, 0)
    assert len(va) == max(1, n * b // (a + b)) and len(tr) + len(va) == n


def test_monte_carlo_separable_is_perfect():
    data = separable()
    assert np.all(np.diff(np.sort(data.X[:30, 0]))[-1] < 2)  # classes do not interleave
    dist = monte_carlo_cv(data, KNNSpec(1), CVSpec(repeats=200))
    assert dist.samples == (1.0,) * 200
    assert dist.summary == FiveNumber(1.0, 1.0, 1.0, 1.0, 1.0)


def test_monte_carlo_is_deterministic_and_checks_size():
    rng = np.random.default_rng(0)
    data = Dataset(rng.normal(size=(60, 3)), rng.integers(0, 2, size=60), "raw", ("s0", "s1", "s2"))
    data = Dataset(data.X, np.r_[0, 1, data.y[2:]], "raw", data.columns)
    a = monte_carlo_cv(data, ForestSpec(n_trees=3), CVSpec(repeats=5, seed=1))
    b = monte_carlo_cv(data, ForestSpec(n_trees=3), CVSpec(repeats=5, seed=1))
    assert a == b
    with pytest.raises(DatasetTooSmall):
        monte_carlo_cv(data.subset(np.arange(4)), KNNSpec(1), CVSpec())


def test_grid_and_best_by_family():
    data = separable()
    results = grid_cv(data, [KNNSpec(1), KNNSpec(3), SVCSpec()], CVSpec(repeats=3))
    best = best_by_family(results)
    assert set(best) == {"knn", "svc"} and best["knn"][0] == KNNSpec(1)


def test_cross_condition_rows_and_consistency():
    rng = np.random.default_rng(1)
    X = np.abs(rng.normal(size=(40, 8))) + np.repeat([[0.0], [2.0]], 20, axis=0)
    data = Dataset(X, np.repeat([0, 1], 20), "raw", tuple(f"s{i}" for i in range(8)))
    grid = [KNNSpec(1), SVCSpec()]
    rows = cross_condition_table(data, data, grid, list(Normalization), train_name="a", test_name="a")
    assert len(rows) == len(grid) * 2
    assert {r.normalization for r in rows} == {"minmax", "stdnorm"}
    knn_minmax = next(r for r in rows if r.family == "knn" and r.normalization == "minmax")
    assert knn_minmax.accuracy == 1.0  # 1-NN recalls its own training rows
    with pytest.raises(ValueError):
        cross_condition_table(data, data.select_columns(["s0"]), grid, ["minmax"])


def table_data(n=60, seed=0):
    rng = np.random.default_rng(seed)
    y = np.repeat([0, 1], n // 2)
    X = rng.normal(size=(n, 12))
    X[:, FEATURE_NAMES.index("n_c2s")] += 4 * y
    return Dataset(X, y, "table", FEATURE_NAMES)


def test_ablation_empty_and_all_deleted():
    data = table_data()
    spec = AblationSpec(((), tuple(FEATURE_NAMES)))
    rows = ablation(data, spec, [KNNSpec(3)], CVSpec(repeats=10))
    empty, everything = rows
    assert empty.delta_percent == 0.0
    # with no features left the model predicts the training majority class;
    # the oracle is the median validation accuracy of that rule
    cv = CVSpec(repeats=10)
    majority_acc = []
    for r in range(10):
        tr, va = split_indices(len(data), cv, r)
        label = np.argmax(np.bincount(data.y[tr], minlength=2))
        majority_acc.append(np.mean(data.y[va] == label))
    assert everything.reduced_median == pytest.approx(np.median(majority_acc))
    expected = 100 * (empty.baseline_median - np.median(majority_acc)) / empty.baseline_median
    assert everything.delta_percent == pytest.approx(expected)


def test_ablation_shape_and_errors():
    assert len(essential_subsets()) == 15
    data = table_data()
    rows = ablation(data, AblationSpec(), [KNNSpec(3)], CVSpec(repeats=3))
    assert len(rows) == 15
    drop_c2s = next(r for r in rows if r.deleted == ("n_c2s",))
    assert drop_c2s.delta_percent > 10
    with pytest.raises(UnknownFeature):
        ablation(data, AblationSpec((("zz",),)), [KNNSpec(1)], CVSpec(repeats=1))
    with pytest.raises(ValueError):
        ablation(separable(), AblationSpec(), [KNNSpec(1)], CVSpec(repeats=1))


def test_monotonicity_violations():
    from quicflow.evaluation import AblationRow
    rows = [AblationRow(("a",), "m", "knn", 1.0, 0.8), AblationRow(("a", "b"), "m", "knn", 1.0, 0.9)]
    assert monotonicity_violations(rows, 2.0) == [("m", ("a",), ("a", "b"))]
    assert monotonicity_violations(rows, 20.0) == []


def test_fit_and_score_scales_table_columns():
    data = table_data()
    big = Dataset(data.X * np.r_[[1e6] * 11, [1.0]], data.y, "table", FEATURE_NAMES)
    # column standardisation makes the byte-scaled copy score identically
    assert fit_and_score(KNNSpec(3), big.subset(np.arange(0, 60, 2)), big.subset(np.arange(1, 60, 2))) == \
        fit_and_score(KNNSpec(3), data.subset(np.arange(0, 60, 2)), data.subset(np.arange(1, 60, 2)))
