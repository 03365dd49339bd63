"""Soft-QoS conformance verification against per-prefix path descriptors.

Descriptors live in a TOML file, one ``[[path]]`` table each::

    [[path]]
    prefix = "2001:db8:10::/48"     # IP prefix matched against either endpoint
    class = "conference"
    mean_bitrate_max = 2.5e6         # bits/s
    burst_bytes_max = 400000         # bytes in any 1 s interval
    policy = "flag"                  # or "report"

    [[path]]
    flow_prefix = "geo-streaming-"   # matches flow ids starting with this text
    class = "streaming"
    ...

IP prefixes only match flows whose key is a canonical 5-tuple (pcap input);
``flow_prefix`` entries match opaque flow ids such as those in CSV traces.
A flow matched by several descriptors goes to the most specific one (longest
prefix).
"""

from __future__ import annotations

import enum
import ipaddress
import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, FlowTooShort
from .features import (ColumnScaler, Normalization, Representation,
                       feature_matrix, normalize, series_matrix)
from .flowcore import Flow, TrafficClass, WindowSpec, window_flow
from .ingest import parse_flow_key
from .ml import TrainedModel

BURST_INTERVAL = 1.0


class VerdictPolicy(str, enum.Enum):
    REPORT = "report"
    FLAG = "flag"


@dataclass(frozen=True)
class PathDescriptor:
    prefix: str
    expected_class: TrafficClass
    mean_bitrate_max: float
    burst_bytes_max: float
    policy: VerdictPolicy = VerdictPolicy.FLAG
    # True when ``prefix`` is an opaque flow-id prefix rather than an IP network
    is_flow_prefix: bool = False

    @property
    def network(self):
        return None if self.is_flow_prefix else ipaddress.ip_network(self.prefix, strict=False)

    @property
    def specificity(self) -> int:
        return len(self.prefix) if self.is_flow_prefix else self.network.prefixlen

    def matches(self, flow_key: str) -> bool:
        if self.is_flow_prefix:
            return flow_key.startswith(self.prefix)
        parsed = parse_flow_key(flow_key)
        if parsed is None:
            return False
        net = self.network
        return any(ip.version == net.version and ip in net for ip in (parsed[1], parsed[3]))

    def to_dict(self) -> dict:
        return {
            ("flow_prefix" if self.is_flow_prefix else "prefix"): self.prefix,
            "class": self.expected_class.value,
            "mean_bitrate_max": float(self.mean_bitrate_max),
            "burst_bytes_max": float(self.burst_bytes_max),
            "policy": self.policy.value,
        }


def _descriptor_from_dict(entry: dict, index: int) -> PathDescriptor:
    where = f"path #{index + 1}"
    keys = set(entry)
    allowed = {"prefix", "flow_prefix", "class", "mean_bitrate_max", "burst_bytes_max", "policy"}
    if keys - allowed:
        raise ConfigError(f"{where}: unknown keys {sorted(keys - allowed)}")
    if ("prefix" in entry) == ("flow_prefix" in entry):
        raise ConfigError(f"{where}: exactly one of 'prefix' or 'flow_prefix' is required")
    is_flow = "flow_prefix" in entry
    prefix = str(entry["flow_prefix"] if is_flow else entry["prefix"])
    if is_flow:
        if not prefix:
            raise ConfigError(f"{where}: empty flow_prefix")
    else:
        try:
            prefix = str(ipaddress.ip_network(prefix, strict=True))
        except ValueError as exc:
            raise ConfigError(f"{where}: bad prefix {prefix!r}: {exc}") from None
    try:
        cls = TrafficClass.parse(entry["class"])
    except KeyError:
        raise ConfigError(f"{where}: missing 'class'") from None
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None
    try:
        rate = float(entry["mean_bitrate_max"])
        burst = float(entry["burst_bytes_max"])
        policy = VerdictPolicy(entry.get("policy", "flag"))
    except KeyError as exc:
        raise ConfigError(f"{where}: missing {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None
    if rate <= 0 or burst <= 0:
        raise ConfigError(f"{where}: rate envelope must be positive")
    return PathDescriptor(prefix, cls, rate, burst, policy, is_flow)


def _overlap(a: PathDescriptor, b: PathDescriptor) -> bool:
    if a.is_flow_prefix != b.is_flow_prefix:
        return False
    if a.is_flow_prefix:
        return a.prefix.startswith(b.prefix) or b.prefix.startswith(a.prefix)
    na, nb = a.network, b.network
    return na.version == nb.version and na.overlaps(nb)


def validate_descriptors(descriptors: Sequence[PathDescriptor]) -> None:
    for i, a in enumerate(descriptors):
        for b in descriptors[i + 1:]:
            if _overlap(a, b):
                raise ConfigError(f"overlapping prefixes {a.prefix!r} and {b.prefix!r}")


def parse_pvd_config(doc: dict) -> list[PathDescriptor]:
    unknown = set(doc) - {"path"}
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}")
    entries = doc.get("path", [])
    if not isinstance(entries, list):
        raise ConfigError("'path' must be an array of tables")
    descriptors = [_descriptor_from_dict(e, i) for i, e in enumerate(entries)]
    validate_descriptors(descriptors)
    return descriptors


def load_pvd_config(path) -> list[PathDescriptor]:
    import tomli

    try:
        doc = tomli.loads(Path(path).read_text(encoding="utf-8"))
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse_pvd_config(doc)


def dump_pvd_config(descriptors: Sequence[PathDescriptor]) -> str:
    import tomli_w

    return tomli_w.dumps({"path": [d.to_dict() for d in descriptors]})


# --------------------------------------------------------------- verdicts

@dataclass(frozen=True)
class Featurizer:
    """How a trained model expects windows to be turned into rows."""

    representation: Representation = Representation.RAW_SERIES
    normalization: Optional[Normalization] = Normalization.MINMAX_PAPER
    window: WindowSpec = WindowSpec()
    scaler: Optional[ColumnScaler] = None

    def rows(self, windows) -> np.ndarray:
        if self.representation is Representation.TABLE_FEATURES:
            X = feature_matrix(windows)
            return self.scaler.transform(X) if self.scaler is not None else X
        X = series_matrix(windows, self.window)
        if self.normalization is not None:
            X = normalize(X, self.normalization, axis=1)
        return X

    def to_meta(self) -> dict:
        return {
            "representation": self.representation.value,
            "normalization": self.normalization.value if self.normalization else None,
            "bin": self.window.bin,
            "samples_per_window": self.window.samples_per_window,
            "stride": self.window.stride,
            "scaler": None if self.scaler is None else {
                "mean": self.scaler.mean.tolist(), "scale": self.scaler.scale.tolist()},
        }

    @classmethod
    def from_meta(cls, meta: dict) -> "Featurizer":
        scaler = meta.get("scaler")
        return cls(
            Representation(meta.get("representation", "raw")),
            Normalization(meta["normalization"]) if meta.get("normalization") else None,
            WindowSpec(meta.get("bin", 0.1), meta.get("samples_per_window", 50), meta.get("stride")),
            ColumnScaler(np.array(scaler["mean"]), np.array(scaler["scale"])) if scaler else None,
        )


class Status(str, enum.Enum):
    CONFORMANT = "conformant"
    VIOLATION = "violation"
    INSUFFICIENT = "insufficient-evidence"
    NO_DESCRIPTOR = "no-descriptor"


@dataclass
class FlowVerdict:
    flow: str
    descriptor: Optional[str]
    status: Status
    predicted_class: Optional[TrafficClass] = None
    class_conformant: Optional[bool] = None
    rate_conformant: Optional[bool] = None
    mean_bitrate: float = 0.0
    max_burst_bytes: float = 0.0
    window_predictions: list = field(default_factory=list)
    flagged: bool = False

    def to_dict(self) -> dict:
        return {
            "flow": self.flow,
            "descriptor": self.descriptor,
            "status": self.status.value,
            "predicted_class": self.predicted_class.value if self.predicted_class else None,
            "class_conformant": self.class_conformant,
            "rate_conformant": self.rate_conformant,
            "mean_bitrate": self.mean_bitrate,
            "max_burst_bytes": self.max_burst_bytes,
            "window_predictions": [c.value for c in self.window_predictions],
            "flagged": self.flagged,
        }


def mean_bitrate(flow: Flow) -> float:
    """Bits per second over the flow's span (both directions)."""
    span = flow.span
    if span <= 0:
        return 0.0
    return float(flow.lengths.sum()) * 8 / span


def max_burst_bytes(flow: Flow, interval: float = BURST_INTERVAL) -> float:
    """Largest byte count inside any half-open interval [t, t + interval)."""
    if not len(flow):
        return 0.0
    t = flow.timestamps
    csum = np.concatenate(([0], np.cumsum(flow.lengths)))
    # windows anchored at each packet cover every maximal interval
    end = np.searchsorted(t, t + interval, side="left")
    return float(np.max(csum[end] - csum[np.arange(len(t))]))


def _majority(labels: Sequence[int]) -> int:
    counts = Counter(int(i) for i in labels)
    return min(counts, key=lambda c: (-counts[c], c))


def verify_flow(flow: Flow, descriptor: PathDescriptor, model: TrainedModel,
                spec: Optional[WindowSpec] = None,
                featurizer: Optional[Featurizer] = None) -> FlowVerdict:
    featurizer = featurizer or Featurizer.from_meta(model.meta)
    if spec is not None and spec != featurizer.window:
        featurizer = Featurizer(featurizer.representation, featurizer.normalization, spec,
                                featurizer.scaler)
    rate = mean_bitrate(flow)
    burst = max_burst_bytes(flow)
    verdict = FlowVerdict(flow.key, descriptor.prefix, Status.INSUFFICIENT,
                          mean_bitrate=rate, max_burst_bytes=burst)
    try:
        windows = window_flow(flow, featurizer.window)
    except (FlowTooShort, ValueError):
        return verdict
    if featurizer.representation is Representation.TABLE_FEATURES:
        windows = [w for w in windows if len(w) >= 2]
        if not windows:
            return verdict
    classes = list(TrafficClass)
    preds = model.predict_indices(featurizer.rows(windows))
    predicted = classes[_majority(preds)]
    verdict.predicted_class = predicted
    verdict.window_predictions = [classes[int(i)] for i in preds]
    verdict.class_conformant = predicted is descriptor.expected_class
    verdict.rate_conformant = bool(rate <= descriptor.mean_bitrate_max and burst <= descriptor.burst_bytes_max)
    ok = verdict.class_conformant and verdict.rate_conformant
    verdict.status = Status.CONFORMANT if ok else Status.VIOLATION
    verdict.flagged = (not ok) and descriptor.policy is VerdictPolicy.FLAG
    return verdict


def match_descriptor(flow_key: str, descriptors: Sequence[PathDescriptor]) -> Optional[PathDescriptor]:
    hits = [d for d in descriptors if d.matches(flow_key)]
    if not hits:
        return None
    return max(hits, key=lambda d: d.specificity)


@dataclass
class ConformanceReport:
    entries: list

    @property
    def counts(self) -> dict:
        c = {"flows": len(self.entries), "conformant": 0, "class_violations": 0,
             "rate_violations": 0, "insufficient": 0, "unmatched": 0, "flagged": 0}
        for e in self.entries:
            if e.status is Status.NO_DESCRIPTOR:
                c["unmatched"] += 1
            elif e.status is Status.INSUFFICIENT:
                c["insufficient"] += 1
            elif e.status is Status.CONFORMANT:
                c["conformant"] += 1
            if e.class_conformant is False:
                c["class_violations"] += 1
            if e.rate_conformant is False:
                c["rate_violations"] += 1
            c["flagged"] += int(e.flagged)
        return c

    def to_dict(self) -> dict:
        return {"summary": self.counts, "flows": [e.to_dict() for e in self.entries]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_text(self) -> str:
        c = self.counts
        lines = [
            f"flows: {c['flows']}  conformant: {c['conformant']}  class violations: "
            f"{c['class_violations']}  rate violations: {c['rate_violations']}  "
            f"insufficient: {c['insufficient']}  no descriptor: {c['unmatched']}",
            "",
        ]
        width = max((len(e.flow) for e in self.entries), default=4)
        for e in self.entries:
            pred = e.predicted_class.value if e.predicted_class else "-"
            lines.append(
                f"{e.flow:<{width}}  {e.status.value:<21}  predicted={pred:<10}  "
                f"rate={e.mean_bitrate / 1e6:7.3f} Mb/s  burst={e.max_burst_bytes / 1e3:8.1f} kB"
                + ("  FLAGGED" if e.flagged else "")
            )
        return "\n".join(lines) + "\n"


def monitor_trace(flows: Sequence[Flow], descriptors: Sequence[PathDescriptor],
                  model: TrainedModel, spec: Optional[WindowSpec] = None,
                  featurizer: Optional[Featurizer] = None) -> ConformanceReport:
    entries = []
    for flow in sorted(flows, key=lambda f: f.key):
        desc = match_descriptor(flow.key, descriptors)
        if desc is None:
            entries.append(FlowVerdict(flow.key, None, Status.NO_DESCRIPTOR,
                                       mean_bitrate=mean_bitrate(flow),
                                       max_burst_bytes=max_burst_bytes(flow)))
            continue
        entries.append(verify_flow(flow, desc, model, spec, featurizer))
    return ConformanceReport(entries)
