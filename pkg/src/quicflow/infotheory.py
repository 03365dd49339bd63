"""Plug-in entropy and mutual information on discrete data, mRMR ranking and
exhaustive subset analysis.

All quantities are in bits and computed from empirical frequencies without
bias correction.  Multi-column inputs are treated as one joint variable whose
symbols are the row tuples.
"""

from __future__ import annotations

import enum
import itertools
import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import (DegenerateColumnWarning, EmptyInput, LengthMismatch,
                     TooManyFeatures)
from .features import percentile


class Binning(str, enum.Enum):
    EQUAL_FREQUENCY = "equal-frequency"
    EQUAL_WIDTH = "equal-width"


@dataclass(frozen=True)
class MIResult:
    subject: tuple
    i_bits: float
    h_cond_bits: float


@dataclass(frozen=True)
class MRMRRanking:
    features: tuple
    weights: tuple
    scores: tuple  # raw selection scores, in selection order

    def __iter__(self):
        return iter(zip(self.features, self.weights))

    def rows(self):
        """(feature, weight, rank) with ranks starting at 1."""
        return [(f, w, r) for r, (f, w) in enumerate(self, start=1)]


@dataclass(frozen=True, eq=False)
class DiscretizedDataset:
    columns: np.ndarray  # (n_samples, n_features) integer bins
    labels: np.ndarray
    names: tuple
    bins: int = 10
    strategy: Binning = Binning.EQUAL_FREQUENCY

    @property
    def n_features(self) -> int:
        return self.columns.shape[1]


def _symbols(x) -> np.ndarray:
    """Map a column, or the rows of a 2-D array, to dense integer symbols."""
    arr = np.asarray(x)
    if arr.ndim == 1:
        return np.unique(arr, return_inverse=True)[1].ravel()
    if arr.ndim == 2:
        if arr.shape[1] == 0:
            return np.zeros(arr.shape[0], dtype=np.int64)
        return np.unique(arr, axis=0, return_inverse=True)[1].ravel()
    raise ValueError("expected a 1-D or 2-D array")


def _entropy_of_symbols(sym: np.ndarray) -> float:
    counts = np.bincount(sym)
    counts = counts[counts > 0]
    n = sym.size
    # 0 log 0 := 0 by dropping empty symbols
    return -math.fsum((c / n) * math.log2(c / n) for c in counts.tolist())


def entropy(labels) -> float:
    sym = _symbols(labels)
    if sym.size == 0:
        raise EmptyInput("entropy of an empty sample")
    return max(_entropy_of_symbols(sym), 0.0)


def _check_lengths(a, b):
    na, nb = np.asarray(a).shape[0], np.asarray(b).shape[0]
    if na != nb:
        raise LengthMismatch(f"lengths differ: {na} vs {nb}")
    if na == 0:
        raise EmptyInput("empty sample")


def joint_entropy(*variables) -> float:
    _check_lengths(variables[0], variables[-1])
    cols = np.column_stack([_symbols(v) for v in variables])
    return entropy(cols)


def mutual_information(x, y) -> float:
    """I(X;Y) = sum p(x,y) log2[p(x,y) / (p(x) p(y))] over the empirical joint."""
    _check_lengths(x, y)
    sx, sy = _symbols(x), _symbols(y)
    n = sx.size
    joint = np.zeros((sx.max() + 1, sy.max() + 1), dtype=np.int64)
    np.add.at(joint, (sx, sy), 1)
    px = joint.sum(axis=1)
    py = joint.sum(axis=0)
    terms = []
    for i, j in zip(*np.nonzero(joint)):
        c = joint[i, j]
        terms.append((c / n) * math.log2(c * n / (px[i] * py[j])))
    return max(math.fsum(terms), 0.0)


def conditional_entropy(x, y) -> float:
    """H(X|Y) = H(X,Y) - H(Y)."""
    _check_lengths(x, y)
    value = joint_entropy(x, y) - entropy(_symbols(y))
    return max(value, 0.0)


def discretize(column, bins: int = 10, strategy: Binning = Binning.EQUAL_FREQUENCY) -> np.ndarray:
    """Integer bin index per value.

    Equal-frequency edges sit at the empirical quantiles; a value equal to an
    edge goes to the lower bin.  Equal-width bins span [min, max] uniformly.
    A constant column maps to bin 0 with a DegenerateColumnWarning.
    """
    x = np.asarray(column, dtype=float)
    if x.size == 0:
        raise EmptyInput("cannot discretize an empty column")
    if not np.all(np.isfinite(x)):
        raise ValueError("column contains non-finite values")
    if bins < 1:
        raise ValueError("bins must be >= 1")
    lo, hi = x.min(), x.max()
    if lo == hi:
        warnings.warn("constant column mapped to a single bin", DegenerateColumnWarning, stacklevel=2)
        return np.zeros(x.size, dtype=np.int64)
    strategy = Binning(strategy)
    if strategy is Binning.EQUAL_FREQUENCY:
        edges = np.array([percentile(x, 100 * k / bins) for k in range(1, bins)])
        return np.searchsorted(edges, x, side="left").astype(np.int64)
    width = (hi - lo) / bins
    idx = np.floor((x - lo) / width).astype(np.int64)
    return np.clip(idx, 0, bins - 1)


def discretize_dataset(X, labels, names: Sequence[str], bins: int = 10,
                       strategy: Binning = Binning.EQUAL_FREQUENCY) -> DiscretizedDataset:
    X = np.asarray(X, dtype=float)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateColumnWarning)
        cols = [discretize(X[:, j], bins, strategy) for j in range(X.shape[1])]
    columns = np.column_stack(cols) if cols else np.empty((X.shape[0], 0), dtype=np.int64)
    return DiscretizedDataset(columns, np.asarray(labels), tuple(names), bins, Binning(strategy))


def mrmr_rank(data: DiscretizedDataset, top_i: Optional[int] = None) -> MRMRRanking:
    """Greedy mRMR with the difference (MID) criterion.

    The first pick maximises I(f; Cl); each later pick maximises
    I(f; Cl) - mean_{s in S} I(f; s).  Equal scores go to the candidate with
    the lower mean redundancy, then the lower feature index.

    A later pick's raw score can exceed an earlier one's because its
    redundancy is averaged over more features, so weights use the running
    minimum of the scores along the selection order.  These are shifted so
    the minimum is zero when any is negative and normalised to sum to one.
    The ranking is the selection order, which is then also sorted by weight.
    """
    d = data.n_features
    top_i = d if top_i is None else top_i
    if not 1 <= top_i <= d:
        raise ValueError(f"top_i must lie in [1, {d}]")
    cols = data.columns
    relevance = [mutual_information(cols[:, j], data.labels) for j in range(d)]
    pair_cache: dict = {}

    def redundancy(a, b):
        key = (min(a, b), max(a, b))
        if key not in pair_cache:
            pair_cache[key] = mutual_information(cols[:, key[0]], cols[:, key[1]])
        return pair_cache[key]

    selected, scores = [], []
    remaining = list(range(d))
    while len(selected) < top_i:
        best = None
        for j in remaining:
            red = sum(redundancy(j, s) for s in selected) / len(selected) if selected else 0.0
            score = relevance[j] - red
            key = (-score, red, j)
            if best is None or key < best[0]:
                best = (key, j, score)
        _, j, score = best
        selected.append(j)
        scores.append(score)
        remaining.remove(j)
    shifted = np.minimum.accumulate(np.array(scores, dtype=float))
    if shifted.min() < 0:
        shifted = shifted - shifted.min()
    total = math.fsum(shifted.tolist())
    weights = shifted / total if total > 0 else np.full(len(scores), 1.0 / len(scores))
    return MRMRRanking(
        features=tuple(data.names[j] for j in selected),
        weights=tuple(float(w) for w in weights),
        scores=tuple(scores),
    )


def subset_analysis(data: DiscretizedDataset, max_features: int = 15) -> list[MIResult]:
    """I(Cl; S) and H(Cl|S) for every non-empty feature subset S, sorted by I
    descending (enumeration order breaks ties)."""
    d = data.n_features
    if d > max_features:
        raise TooManyFeatures(f"{d} features exceed the subset-enumeration cap of {max_features}")
    results = []
    for size in range(1, d + 1):
        for combo in itertools.combinations(range(d), size):
            joint = data.columns[:, combo]
            i_bits = mutual_information(joint, data.labels)
            h_cond = conditional_entropy(data.labels, joint)
            results.append(MIResult(tuple(data.names[j] for j in combo), i_bits, h_cond))
    results.sort(key=lambda r: -r.i_bits)
    return results
