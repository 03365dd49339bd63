"""Model inputs: 100 ms throughput series and the 12 engineered flow features.

Note on ``Normalization.MINMAX_PAPER``: each sample is divided by the range
(max - min) of its sequence without subtracting the minimum first, so the
result is not confined to [0, 1].  This is deliberate.
"""

from __future__ import annotations

import enum
from dataclasses import astuple, dataclass, fields
from typing import Sequence

import numpy as np

from .errors import DegenerateSequence, EmptyInput, InsufficientPackets
from .flowcore import Direction, FlowWindow, WindowSpec


class Normalization(str, enum.Enum):
    MINMAX_PAPER = "minmax"
    STDNORM = "stdnorm"


class Representation(str, enum.Enum):
    RAW_SERIES = "raw"
    TABLE_FEATURES = "table"


FEATURE_NAMES = (
    "n_udp_avg",
    "t_w",
    "ln_p25",
    "ln_p50",
    "ln_p75",
    "ln_p90",
    "dt_p25",
    "dt_p50",
    "dt_p75",
    "dt_p90",
    "n_c2s",
    "n_s2c",
)
ESSENTIAL_FEATURES = ("ln_p25", "ln_p50", "n_c2s", "n_s2c")
FEATURE_CLUSTERS = {
    "time": ("t_w", "dt_p25", "dt_p50", "dt_p75", "dt_p90"),
    "packet": ("n_udp_avg", "ln_p25", "ln_p50", "ln_p75", "ln_p90"),
    "flow": ("n_c2s", "n_s2c"),
}


@dataclass(frozen=True)
class FeatureVector:
    n_udp_avg: float
    t_w: float
    ln_p25: float
    ln_p50: float
    ln_p75: float
    ln_p90: float
    dt_p25: float
    dt_p50: float
    dt_p75: float
    dt_p90: float
    n_c2s: int
    n_s2c: int

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=float)


assert tuple(f.name for f in fields(FeatureVector)) == FEATURE_NAMES


@dataclass(frozen=True, eq=False)
class ThroughputSeries:
    values: np.ndarray
    source: str
    start: float


def percentile(values, p: float) -> float:
    """Linear interpolation between closest ranks, rank = p/100 * (n - 1)."""
    arr = np.sort(np.asarray(values, dtype=float).ravel())
    if arr.size == 0:
        raise EmptyInput("percentile of an empty sequence")
    if not 0 <= p <= 100:
        raise ValueError("p must lie in [0, 100]")
    rank = p / 100 * (arr.size - 1)
    lo = int(np.floor(rank))
    hi = min(lo + 1, arr.size - 1)
    frac = rank - lo
    if frac == 0:
        return float(arr[lo])
    return float(arr[lo] + (arr[hi] - arr[lo]) * frac)


def throughput_series(window: FlowWindow, spec: WindowSpec) -> ThroughputSeries:
    """Bits per second in each bin of the window, both directions summed."""
    n_bins = spec.samples_per_window
    idx = np.floor((window.timestamps - window.start) / spec.bin).astype(np.int64)
    # guard against float round-up at the right edge
    idx = np.clip(idx, 0, n_bins - 1)
    byte_sums = np.bincount(idx, weights=window.lengths, minlength=n_bins)[:n_bins]
    return ThroughputSeries(byte_sums * 8 / spec.bin, window.source, window.start)


def extract_features(window: FlowWindow) -> FeatureVector:
    n = len(window)
    if n < 2:
        raise InsufficientPackets(f"window of {window.source} has {n} packet(s), need 2")
    t = np.sort(window.timestamps)
    lengths = window.lengths.astype(float)
    dt = np.diff(t)
    n_c2s = int(np.count_nonzero(window.directions == int(Direction.C2S)))
    return FeatureVector(
        n_udp_avg=n / window.duration,
        t_w=float(t[-1] - t[0]),
        ln_p25=percentile(lengths, 25),
        ln_p50=percentile(lengths, 50),
        ln_p75=percentile(lengths, 75),
        ln_p90=percentile(lengths, 90),
        dt_p25=percentile(dt, 25),
        dt_p50=percentile(dt, 50),
        dt_p75=percentile(dt, 75),
        dt_p90=percentile(dt, 90),
        n_c2s=n_c2s,
        n_s2c=n - n_c2s,
    )


def normalize(data, mode: Normalization, axis: int = -1) -> np.ndarray:
    """Per-sequence normalisation along ``axis`` (the last axis by default).

    MINMAX_PAPER: x / (max - min).  STDNORM: (x - mean) / population std.
    """
    mode = Normalization(mode)
    x = np.asarray(data, dtype=float)
    if mode is Normalization.MINMAX_PAPER:
        denom = x.max(axis=axis, keepdims=True) - x.min(axis=axis, keepdims=True)
        if np.any(denom == 0):
            raise DegenerateSequence("max equals min; minmax normalisation undefined")
        return x / denom
    mean = x.mean(axis=axis, keepdims=True)
    std = x.std(axis=axis, keepdims=True)
    if np.any(std == 0):
        raise DegenerateSequence("zero standard deviation; stdnorm undefined")
    return (x - mean) / std


@dataclass
class ColumnScaler:
    """Column standardisation fitted on training rows (table features only).

    Constant columns get unit scale so they map to zero instead of failing.
    """

    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, X) -> "ColumnScaler":
        X = np.asarray(X, dtype=float)
        std = X.std(axis=0)
        return cls(X.mean(axis=0), np.where(std > 0, std, 1.0))

    def transform(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.mean) / self.scale


def series_matrix(windows: Sequence[FlowWindow], spec: WindowSpec) -> np.ndarray:
    if not windows:
        return np.empty((0, spec.samples_per_window))
    return np.vstack([throughput_series(w, spec).values for w in windows])


def feature_matrix(windows: Sequence[FlowWindow]) -> np.ndarray:
    if not windows:
        return np.empty((0, len(FEATURE_NAMES)))
    return np.vstack([extract_features(w).as_array() for w in windows])


def column_names(representation: Representation, spec: WindowSpec) -> list[str]:
    if Representation(representation) is Representation.TABLE_FEATURES:
        return list(FEATURE_NAMES)
    return [f"s{i}" for i in range(spec.samples_per_window)]
