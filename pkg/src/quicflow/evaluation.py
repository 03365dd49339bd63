"""Accuracy scoring, Monte Carlo cross-validation, the cross-condition
harness and the essential-feature ablation study."""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dataset import Dataset, balanced_windows, dataset_from_windows
from .errors import DatasetTooSmall, EmptyEvaluation, UnknownFeature
from .features import (ESSENTIAL_FEATURES, ColumnScaler, Normalization,
                       Representation, percentile)
from .flowcore import TrafficClass, WindowSpec
from .ml import (ConfusionCounts, ModelSpec, confusion_from_predictions,
                 spec_label, train)
from .trafficgen import ScenarioConfig, default_profiles, generate_dataset

log = logging.getLogger(__name__)


def accuracy(c: ConfusionCounts) -> float:
    total = c.tp + c.tn + c.fp + c.fn
    if total <= 0:
        raise EmptyEvaluation("accuracy of an empty evaluation set")
    return (c.tp + c.tn) / (c.tn + c.tp + c.fp + c.fn)


@dataclass(frozen=True)
class CVSpec:
    repeats: int = 200
    train_parts: int = 5
    validation_parts: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.repeats < 1 or self.train_parts < 1 or self.validation_parts < 1:
            raise ValueError("repeats and ratio parts must be positive")

    @property
    def unit(self) -> int:
        return self.train_parts + self.validation_parts


@dataclass(frozen=True)
class FiveNumber:
    min: float
    q1: float
    median: float
    q3: float
    max: float

    @classmethod
    def of(cls, values) -> "FiveNumber":
        return cls(*(percentile(values, p) for p in (0, 25, 50, 75, 100)))


@dataclass(frozen=True)
class AccuracyDistribution:
    samples: tuple
    summary: FiveNumber

    @classmethod
    def of(cls, samples) -> "AccuracyDistribution":
        samples = tuple(float(s) for s in samples)
        return cls(samples, FiveNumber.of(samples))

    @property
    def median(self) -> float:
        return self.summary.median


def split_indices(n: int, cv: CVSpec, repeat: int) -> tuple[np.ndarray, np.ndarray]:
    """Train/validation indices of one repeat; a pure function of (seed, n, ratio, repeat)."""
    if n < cv.unit:
        raise DatasetTooSmall(f"{n} samples cannot honour a {cv.train_parts}:{cv.validation_parts} split")
    rng = np.random.default_rng(np.random.SeedSequence(cv.seed, spawn_key=(0, repeat)))
    perm = rng.permutation(n)
    n_val = max(1, n * cv.validation_parts // cv.unit)
    return np.sort(perm[n_val:]), np.sort(perm[:n_val])


def _model_seed(cv: CVSpec, repeat: int) -> int:
    return int(np.random.SeedSequence(cv.seed, spawn_key=(1, repeat)).generate_state(1)[0])


def fit_and_score(spec: ModelSpec, train_set: Dataset, test_set: Dataset, seed: int = 0) -> float:
    """Fit on one dataset and return accuracy on another.

    Table features are standardised column-wise with statistics from the
    training rows; raw series are expected to be normalised already.
    """
    Xtr, Xte = train_set.X, test_set.X
    if train_set.representation is Representation.TABLE_FEATURES and Xtr.shape[1]:
        scaler = ColumnScaler.fit(Xtr)
        Xtr, Xte = scaler.transform(Xtr), scaler.transform(Xte)
    model = train(spec, Xtr, train_set.y, seed=seed)
    pred = model.predict_indices(Xte)
    return accuracy(confusion_from_predictions(pred, test_set.y, TrafficClass.STREAMING))


def monte_carlo_cv(data: Dataset, spec: ModelSpec, cv: CVSpec = CVSpec()) -> AccuracyDistribution:
    n = len(data)
    if n < cv.unit:
        raise DatasetTooSmall(f"dataset of {n} samples is smaller than one {cv.unit}-sample ratio unit")
    samples = []
    for r in range(cv.repeats):
        tr, va = split_indices(n, cv, r)
        samples.append(fit_and_score(spec, data.subset(tr), data.subset(va), _model_seed(cv, r)))
    return AccuracyDistribution.of(samples)


def grid_cv(data: Dataset, grid: Sequence[ModelSpec], cv: CVSpec = CVSpec()) -> list[tuple]:
    """(spec, distribution) for every grid point."""
    return [(spec, monte_carlo_cv(data, spec, cv)) for spec in grid]


def best_by_family(results: Sequence[tuple]) -> dict:
    """Highest-median grid point of each family, first listed wins ties."""
    best: dict = {}
    for spec, dist in results:
        cur = best.get(spec.family)
        if cur is None or dist.median > cur[1].median:
            best[spec.family] = (spec, dist)
    return best


# ------------------------------------------------------- cross-condition

@dataclass(frozen=True)
class CrossConditionSpec:
    train_scenario: ScenarioConfig
    test_scenario: ScenarioConfig
    normalizations: tuple = (Normalization.MINMAX_PAPER, Normalization.STDNORM)
    model_grid: tuple = ()
    profiles: tuple = field(default_factory=lambda: tuple(default_profiles()))
    window: WindowSpec = WindowSpec()
    windows_per_class: int = 150
    seed: int = 0


@dataclass(frozen=True)
class CrossResult:
    model: str
    family: str
    normalization: str
    accuracy: float
    train_scenario: str = ""
    test_scenario: str = ""


def cross_condition_table(train_raw: Dataset, test_raw: Dataset, grid: Sequence[ModelSpec],
                          normalizations: Sequence[Normalization], seed: int = 0,
                          train_name: str = "", test_name: str = "") -> list[CrossResult]:
    """Fit each (model, normalisation) on the whole training set and score
    once on the whole test set."""
    if train_raw.X.shape[1] != test_raw.X.shape[1]:
        raise ValueError(
            f"train and test datasets have different widths ({train_raw.X.shape[1]} vs {test_raw.X.shape[1]})")
    rows = []
    for norm in normalizations:
        norm = Normalization(norm)
        if train_raw.representation is Representation.RAW_SERIES:
            tr, te = train_raw.normalized(norm), test_raw.normalized(norm)
        else:
            tr, te = train_raw, test_raw
        for spec in grid:
            acc = fit_and_score(spec, tr, te, seed)
            rows.append(CrossResult(spec_label(spec), spec.family, norm.value, acc, train_name, test_name))
    return rows


def scenario_windows_dataset(config: ScenarioConfig, profiles, window: WindowSpec,
                             per_class: int, representation=Representation.RAW_SERIES) -> Dataset:
    flows = generate_dataset(config, profiles)
    windows = balanced_windows(flows, window, per_class)
    return dataset_from_windows(windows, representation, window)


def cross_condition_eval(spec: CrossConditionSpec) -> list[CrossResult]:
    train_ds = scenario_windows_dataset(spec.train_scenario, spec.profiles, spec.window,
                                        spec.windows_per_class)
    test_ds = scenario_windows_dataset(spec.test_scenario, spec.profiles, spec.window,
                                       spec.windows_per_class)
    return cross_condition_table(train_ds, test_ds, spec.model_grid, spec.normalizations,
                                 spec.seed, spec.train_scenario.name, spec.test_scenario.name)


# ------------------------------------------------------------- ablation

def essential_subsets(features: Sequence[str] = ESSENTIAL_FEATURES) -> list[tuple]:
    """All non-empty subsets of the essential features, smallest first."""
    return [c for k in range(1, len(features) + 1) for c in itertools.combinations(features, k)]


@dataclass(frozen=True)
class AblationSpec:
    feature_subsets_to_delete: tuple = field(default_factory=lambda: tuple(essential_subsets()))


@dataclass(frozen=True)
class AblationRow:
    deleted: tuple
    model: str
    family: str
    baseline_median: float
    reduced_median: float

    @property
    def delta_percent(self) -> float:
        return 100.0 * (self.baseline_median - self.reduced_median) / self.baseline_median


def ablation(data: Dataset, spec: AblationSpec, models: Sequence[ModelSpec],
             cv: CVSpec = CVSpec()) -> list[AblationRow]:
    """Relative median-accuracy loss (percent of the full-feature median) per
    deleted feature subset and model.  All runs share the CV seed, so every
    configuration sees the same splits."""
    if data.representation is not Representation.TABLE_FEATURES:
        raise ValueError("ablation needs the table-feature representation")
    for subset in spec.feature_subsets_to_delete:
        unknown = set(subset) - set(data.columns)
        if unknown:
            raise UnknownFeature(f"unknown feature(s): {sorted(unknown)}")
    rows = []
    for model in models:
        base = monte_carlo_cv(data, model, cv).median
        for subset in spec.feature_subsets_to_delete:
            reduced = monte_carlo_cv(data.drop_columns(subset), model, cv).median if subset else base
            rows.append(AblationRow(tuple(subset), spec_label(model), model.family, base, reduced))
    return rows


def monotonicity_violations(rows: Sequence[AblationRow], tolerance_pp: float = 2.0) -> list[tuple]:
    """Pairs (smaller, larger) of nested deleted subsets where removing more
    features scored higher by more than ``tolerance_pp`` percentage points."""
    out = []
    by_model: dict = {}
    for r in rows:
        by_model.setdefault(r.model, []).append(r)
    for model, rs in by_model.items():
        for a in rs:
            for b in rs:
                if set(a.deleted) < set(b.deleted):
                    if 100 * (b.reduced_median - a.reduced_median) > tolerance_pp:
                        out.append((model, a.deleted, b.deleted))
    return out
