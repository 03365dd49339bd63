"""Packet records, flows and fixed-length observation windows.

Flows and windows store their packets column-wise (timestamp, length and
direction arrays) so that feature extraction over hundreds of thousands of
packets stays vectorised.  ``records`` rebuilds the row view on demand.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import FlowTooShort

# tolerance used when deciding whether a window fits inside a flow
_TIME_EPS = 1e-9


class Direction(enum.IntEnum):
    C2S = 0
    S2C = 1

    @classmethod
    def parse(cls, text: str) -> "Direction":
        try:
            return cls[text.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown direction {text!r}") from None


class TrafficClass(str, enum.Enum):
    STREAMING = "streaming"
    CONFERENCE = "conference"

    @property
    def index(self) -> int:
        return list(TrafficClass).index(self)

    @classmethod
    def parse(cls, text) -> "TrafficClass":
        if isinstance(text, TrafficClass):
            return text
        key = str(text).strip().lower()
        aliases = {
            "progressivestreaming": cls.STREAMING,
            "progressive_streaming": cls.STREAMING,
            "videoconference": cls.CONFERENCE,
            "video_conference": cls.CONFERENCE,
        }
        if key in aliases:
            return aliases[key]
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown traffic class {text!r}") from None


@dataclass(frozen=True)
class PacketRecord:
    timestamp: float
    direction: Direction
    length: int
    flow_id: str

    def __post_init__(self):
        if not math.isfinite(self.timestamp) or self.timestamp < 0:
            raise ValueError(f"invalid timestamp {self.timestamp}")
        if self.length < 0:
            raise ValueError(f"invalid length {self.length}")


@dataclass(frozen=True)
class WindowSpec:
    bin: float = 0.1
    samples_per_window: int = 50
    stride: Optional[int] = None

    def __post_init__(self):
        if not self.bin > 0:
            raise ValueError("bin must be positive")
        if self.samples_per_window < 1:
            raise ValueError("samples_per_window must be >= 1")
        if self.stride is None:
            object.__setattr__(self, "stride", self.samples_per_window)
        if self.stride < 1:
            raise ValueError("stride must be >= 1")

    @property
    def duration(self) -> float:
        return self.bin * self.samples_per_window


def _as_columns(timestamps, lengths, directions):
    t = np.asarray(timestamps, dtype=float)
    n = np.asarray(lengths, dtype=np.int64)
    d = np.asarray(directions, dtype=np.int8)
    if not (t.shape == n.shape == d.shape) or t.ndim != 1:
        raise ValueError("packet columns must be 1-D and of equal length")
    return t, n, d


@dataclass(frozen=True, eq=False)
class Flow:
    """Time-ordered packets of one flow key, optionally labelled."""

    key: str
    timestamps: np.ndarray
    lengths: np.ndarray
    directions: np.ndarray
    label: Optional[TrafficClass] = None

    def __post_init__(self):
        t, n, d = _as_columns(self.timestamps, self.lengths, self.directions)
        if t.size and np.any(np.diff(t) < 0):
            raise ValueError("flow records must be sorted by timestamp")
        for name, arr in (("timestamps", t), ("lengths", n), ("directions", d)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_records(cls, records: Sequence[PacketRecord], label=None) -> "Flow":
        if not records:
            raise ValueError("cannot build a flow from no records")
        key = records[0].flow_id
        if any(r.flow_id != key for r in records):
            raise ValueError("records belong to different flows")
        return cls(
            key,
            [r.timestamp for r in records],
            [r.length for r in records],
            [int(r.direction) for r in records],
            label,
        )

    def __len__(self) -> int:
        return int(self.timestamps.size)

    def __eq__(self, other):
        if not isinstance(other, Flow):
            return NotImplemented
        return (
            self.key == other.key
            and self.label == other.label
            and np.array_equal(self.timestamps, other.timestamps)
            and np.array_equal(self.lengths, other.lengths)
            and np.array_equal(self.directions, other.directions)
        )

    @property
    def records(self) -> list[PacketRecord]:
        return [
            PacketRecord(float(t), Direction(int(d)), int(n), self.key)
            for t, n, d in zip(self.timestamps, self.lengths, self.directions)
        ]

    @property
    def span(self) -> float:
        if not len(self):
            return 0.0
        return float(self.timestamps[-1] - self.timestamps[0])

    def with_label(self, label) -> "Flow":
        return Flow(self.key, self.timestamps, self.lengths, self.directions, label)


@dataclass(frozen=True, eq=False)
class FlowWindow:
    source: str
    start: float
    duration: float
    timestamps: np.ndarray
    lengths: np.ndarray
    directions: np.ndarray
    label: Optional[TrafficClass] = None

    def __post_init__(self):
        t, n, d = _as_columns(self.timestamps, self.lengths, self.directions)
        for name, arr in (("timestamps", t), ("lengths", n), ("directions", d)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return int(self.timestamps.size)

    @property
    def records(self) -> list[PacketRecord]:
        return [
            PacketRecord(float(t), Direction(int(d)), int(n), self.source)
            for t, n, d in zip(self.timestamps, self.lengths, self.directions)
        ]


def assemble_flows(records: Iterable[PacketRecord]) -> list[Flow]:
    """Group records by flow id, in order of first appearance.

    Records inside a flow are sorted by timestamp; equal timestamps keep
    their input order.
    """
    groups: dict[str, list[PacketRecord]] = {}
    for rec in records:
        groups.setdefault(rec.flow_id, []).append(rec)
    flows = []
    for key, recs in groups.items():
        # list.sort is stable, which gives the input-order tie-break
        recs.sort(key=lambda r: r.timestamp)
        flows.append(Flow.from_records(recs))
    return flows


def flatten_flows(flows: Iterable[Flow]) -> list[PacketRecord]:
    out: list[PacketRecord] = []
    for f in flows:
        out.extend(f.records)
    return out


def window_count(span: float, spec: WindowSpec) -> int:
    duration = spec.duration
    if span + _TIME_EPS < duration:
        return 0
    step = spec.bin * spec.stride
    return int(math.floor((span - duration) / step + _TIME_EPS)) + 1


def window_flow(flow: Flow, spec: WindowSpec) -> list[FlowWindow]:
    """Slice a flow into full windows starting at its first packet.

    Trailing partial windows are dropped.  Raises FlowTooShort when not even
    one window fits.
    """
    if not len(flow):
        raise ValueError("cannot window an empty flow")
    count = window_count(flow.span, spec)
    if count == 0:
        raise FlowTooShort(
            f"flow {flow.key} spans {flow.span:.3f}s, window needs {spec.duration:.3f}s"
        )
    t0 = float(flow.timestamps[0])
    duration = spec.duration
    step = spec.bin * spec.stride
    windows = []
    for k in range(count):
        start = t0 + k * step
        lo = np.searchsorted(flow.timestamps, start, side="left")
        hi = np.searchsorted(flow.timestamps, start + duration, side="left")
        windows.append(
            FlowWindow(
                flow.key,
                start,
                duration,
                flow.timestamps[lo:hi],
                flow.lengths[lo:hi],
                flow.directions[lo:hi],
                flow.label,
            )
        )
    return windows
