import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from quicflow.errors import DegenerateColumnWarning, EmptyInput, LengthMismatch, TooManyFeatures
from quicflow.infotheory import (Binning, DiscretizedDataset, conditional_entropy, discretize,
                                 discretize_dataset, entropy, joint_entropy, mrmr_rank,
                                 mutual_information, subset_analysis)

small_cols = st.lists(st.tuples(st.integers(0, 3), st.integers(0, 2)), min_size=1, max_size=80)


def mi_oracle(x, y):
    """Direct summation over the empirical joint table."""
    n = len(x)
    total = 0.0
    for a in set(x):
        for b in set(y):
            c = sum(1 for u, v in zip(x, y) if u == a and v == b)
            if c:
                pa = x.count(a) / n
                pb = y.count(b) / n
                total += c / n * math.log2((c / n) / (pa * pb))
    return total


def test_entropy_examples():
    assert entropy([0, 1] * 50) == 1.0
    assert entropy([3] * 9) == 0.0
    assert entropy([0] + [1] * 3) == pytest.approx(0.811278, abs=1e-6)
    with pytest.raises(EmptyInput):
        entropy([])


def test_mi_examples():
    assert mutual_information([0, 1] * 8, [0, 1] * 8) == 1.0
    assert mutual_information([0, 0, 1, 1], [0, 1, 0, 1]) == 0.0
    x = [0] * 5 + [1] * 5
    y = [0] * 4 + [1] + [0] + [1] * 4
    assert mutual_information(x, y) == pytest.approx(mi_oracle(x, y), abs=1e-12)
    with pytest.raises(LengthMismatch):
        mutual_information([0, 1], [0])


@given(small_cols)
def test_mi_symmetry_and_identities(rows):
    x = [a for a, _ in rows]
    y = [b for _, b in rows]
    ixy, iyx = mutual_information(x, y), mutual_information(y, x)
    assert abs(ixy - iyx) <= 1e-12
    assert ixy == pytest.approx(mi_oracle(x, y), abs=1e-12)
    assert ixy + conditional_entropy(y, x) == pytest.approx(entropy(y), abs=1e-9)
    assert conditional_entropy(y, x) == pytest.approx(joint_entropy(y, x) - entropy(x), abs=1e-12)
    assert -1e-12 <= ixy <= min(entropy(x), entropy(y)) + 1e-12


def test_product_design_is_independent():
    rng = np.random.default_rng(0)
    for _ in range(20):
        a, b = int(rng.integers(2, 5)), int(rng.integers(2, 5))
        reps = int(rng.integers(1, 4))
        x, y = np.meshgrid(np.arange(a), np.arange(b))
        x, y = np.tile(x.ravel(), reps), np.tile(y.ravel(), reps)
        assert abs(mutual_information(x, y)) <= 1e-12


def test_conditional_entropy_extremes():
    x = [0, 1, 2, 0, 1, 2]
    assert conditional_entropy(x, x) == 0.0
    y = [0, 0, 0, 1, 1, 1]
    assert conditional_entropy(x, y) == pytest.approx(entropy(x))


def test_mi_with_joint_columns():
    rng = np.random.default_rng(1)
    cols = rng.integers(0, 3, size=(100, 2))
    labels = (cols[:, 0] + cols[:, 1]) % 2
    joint = [tuple(r) for r in cols]
    assert mutual_information(cols, labels) == pytest.approx(mi_oracle(joint, list(labels)), abs=1e-12)


def test_discretize_examples():
    assert discretize(np.arange(1, 11), bins=2).tolist() == [0] * 5 + [1] * 5
    with pytest.warns(DegenerateColumnWarning):
        assert discretize([4.0] * 5).tolist() == [0] * 5
    assert discretize([0, 1, 2, 3], bins=2, strategy=Binning.EQUAL_WIDTH).tolist() == [0, 0, 1, 1]


def test_equal_frequency_bins_are_balanced():
    x = np.random.default_rng(2).uniform(size=1000)
    counts = np.bincount(discretize(x, bins=10), minlength=10)
    assert counts.min() >= 95 and counts.max() <= 105


def make_disc(columns, labels, names):
    return DiscretizedDataset(np.column_stack(columns), np.asarray(labels), tuple(names))


def test_mrmr_single_feature():
    data = make_disc([[0, 1, 0, 1]], [0, 1, 1, 0], ["a"])
    ranking = mrmr_rank(data)
    assert ranking.features == ("a",) and ranking.weights == (1.0,)


def test_mrmr_redundancy_penalty():
    rng = np.random.default_rng(3)
    labels = rng.integers(0, 2, size=200)
    f1 = labels.copy()
    f2 = f1.copy()
    f3 = rng.integers(0, 2, size=200)
    data = make_disc([f1, f2, f3], labels, ["f1", "f2", "f3"])
    ranking = mrmr_rank(data, 3)
    assert ranking.features == ("f1", "f3", "f2")
    assert math.fsum(ranking.weights) == pytest.approx(1.0, abs=1e-9)
    assert [r for _, _, r in ranking.rows()] == [1, 2, 3]


@given(st.integers(0, 10_000))
def test_mrmr_weights_sum_to_one(seed):
    rng = np.random.default_rng(seed)
    n, d = 60, int(rng.integers(1, 6))
    cols = rng.integers(0, 4, size=(n, d))
    labels = rng.integers(0, 2, size=n)
    ranking = mrmr_rank(DiscretizedDataset(cols, labels, tuple(f"f{j}" for j in range(d))))
    assert abs(math.fsum(ranking.weights) - 1.0) <= 1e-9
    assert min(ranking.weights) >= 0
    assert list(ranking.weights) == sorted(ranking.weights, reverse=True)
    assert sorted(ranking.features) == sorted(f"f{j}" for j in range(d))


def test_subset_analysis_counts_and_values():
    rng = np.random.default_rng(4)
    cols = rng.integers(0, 3, size=(50, 2))
    labels = rng.integers(0, 2, size=50)
    data = DiscretizedDataset(cols, labels, ("a", "b"))
    results = subset_analysis(data)
    assert len(results) == 3
    assert {r.subject for r in results} == {("a",), ("b",), ("a", "b")}
    for r in results:
        assert r.i_bits + r.h_cond_bits == pytest.approx(entropy(labels), abs=1e-9)
    assert [r.i_bits for r in results] == sorted((r.i_bits for r in results), reverse=True)


def test_subset_analysis_twelve_features():
    rng = np.random.default_rng(5)
    data = discretize_dataset(rng.normal(size=(40, 12)), rng.integers(0, 2, size=40),
                              [f"f{j}" for j in range(12)], bins=3)
    assert len(subset_analysis(data)) == 4095
    wide = DiscretizedDataset(np.zeros((4, 16), int), np.zeros(4, int), tuple(range(16)))
    with pytest.raises(TooManyFeatures):
        subset_analysis(wide)


def test_discretize_dataset_silences_constant_columns():
    X = np.column_stack([np.arange(10.0), np.ones(10)])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        data = discretize_dataset(X, np.arange(10) % 2, ["a", "b"], bins=2)
    assert data.columns[:, 1].tolist() == [0] * 10


@given(st.integers(0, 10_000))
def test_adding_a_feature_never_loses_information(seed):
    rng = np.random.default_rng(seed)
    cols = rng.integers(0, 4, size=(50, 2))
    labels = rng.integers(0, 3, size=50)
    assert mutual_information(cols, labels) >= mutual_information(cols[:, 0], labels) - 1e-12


@given(st.integers(0, 10_000))
def test_coarser_nested_binning_never_gains_information(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=120)
    labels = (x + rng.normal(size=120) > 0).astype(int)
    fine = discretize(x, bins=8)
    coarse = fine // 2  # a function of the finer binning
    assert mutual_information(coarse, labels) <= mutual_information(fine, labels) + 1e-9
