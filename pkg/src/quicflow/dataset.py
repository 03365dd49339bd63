"""Labelled feature matrices and their CSV form.

Feature datasets carry the 12 engineered columns followed by ``label``; raw
series datasets carry ``s0 .. s{N-1}`` followed by ``label``.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import (DegenerateDataset, FlowTooShort,
                     NonFinite, SchemaError, UnknownFeature)
from .features import (FEATURE_NAMES, Normalization, Representation,
                       column_names, feature_matrix, normalize, series_matrix)
from .flowcore import Flow, FlowWindow, TrafficClass, WindowSpec, window_flow

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Dataset:
    X: np.ndarray
    y: np.ndarray  # TrafficClass.index per row
    representation: Representation
    columns: tuple

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1) if len(self.columns) == 1 else X.reshape(len(X), -1)
        y = np.asarray(self.y, dtype=np.int64)
        if X.shape[0] != y.shape[0]:
            raise ValueError(f"{X.shape[0]} rows but {y.shape[0]} labels")
        if X.shape[1] != len(self.columns):
            raise ValueError(f"{X.shape[1]} columns but {len(self.columns)} names")
        if not np.all(np.isfinite(X)):
            raise NonFinite("dataset contains NaN or infinite entries")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "representation", Representation(self.representation))
        object.__setattr__(self, "columns", tuple(self.columns))

    def __len__(self) -> int:
        return int(self.y.size)

    @property
    def labels(self) -> list[TrafficClass]:
        classes = list(TrafficClass)
        return [classes[i] for i in self.y]

    def subset(self, rows) -> "Dataset":
        return replace(self, X=self.X[rows], y=self.y[rows])

    def drop_columns(self, names: Iterable[str]) -> "Dataset":
        names = set(names)
        unknown = names - set(self.columns)
        if unknown:
            raise UnknownFeature(f"unknown feature(s): {sorted(unknown)}")
        keep = [i for i, c in enumerate(self.columns) if c not in names]
        return replace(self, X=self.X[:, keep], columns=tuple(self.columns[i] for i in keep))

    def select_columns(self, names: Sequence[str]) -> "Dataset":
        unknown = set(names) - set(self.columns)
        if unknown:
            raise UnknownFeature(f"unknown feature(s): {sorted(unknown)}")
        idx = [self.columns.index(c) for c in names]
        return replace(self, X=self.X[:, idx], columns=tuple(names))

    def normalized(self, mode: Normalization) -> "Dataset":
        """Per-row normalisation; only meaningful for raw throughput series."""
        return replace(self, X=normalize(self.X, mode, axis=1))

    def class_counts(self) -> dict:
        classes = list(TrafficClass)
        return {classes[i]: int(n) for i, n in zip(*np.unique(self.y, return_counts=True))}

    def require_classes(self, minimum: int = 2) -> None:
        if np.unique(self.y).size < minimum:
            raise DegenerateDataset(f"need at least {minimum} classes")


def windows_from_flows(flows: Sequence[Flow], spec: WindowSpec,
                       per_flow: Optional[int] = None) -> tuple[list[FlowWindow], int]:
    """Window every flow; returns the windows and the number of flows too short."""
    windows, short = [], 0
    for flow in flows:
        if not len(flow):
            short += 1
            continue
        try:
            ws = window_flow(flow, spec)
        except FlowTooShort:
            short += 1
            continue
        windows.extend(ws[:per_flow] if per_flow else ws)
    if short:
        log.info("%d flow(s) shorter than one %.1fs window were excluded", short, spec.duration)
    return windows, short


def dataset_from_windows(windows: Sequence[FlowWindow], representation,
                         spec: WindowSpec) -> Dataset:
    representation = Representation(representation)
    if representation is Representation.TABLE_FEATURES:
        usable = []
        for w in windows:
            if len(w) >= 2:
                usable.append(w)
        if len(usable) < len(windows):
            log.info("%d window(s) with fewer than 2 packets skipped", len(windows) - len(usable))
        windows = usable
        X = feature_matrix(windows)
    else:
        X = series_matrix(windows, spec)
    if any(w.label is None for w in windows):
        raise ValueError("every window needs a label")
    y = np.array([w.label.index for w in windows], dtype=np.int64)
    return Dataset(X, y, representation, tuple(column_names(representation, spec)))


def balanced_windows(flows: Sequence[Flow], spec: WindowSpec, per_class: int,
                     rng=None) -> list[FlowWindow]:
    """Take ``per_class`` windows of each class, cycling through flows so the
    windows are spread over as many flows as possible."""
    by_class: dict = {}
    for flow in flows:
        try:
            ws = window_flow(flow, spec)
        except (FlowTooShort, ValueError):
            continue
        by_class.setdefault(flow.label, []).append(ws)
    out = []
    for label in sorted(by_class, key=lambda c: c.index):
        lists = by_class[label]
        picked, depth = [], 0
        while len(picked) < per_class and any(depth < len(ws) for ws in lists):
            for ws in lists:
                if depth < len(ws) and len(picked) < per_class:
                    picked.append(ws[depth])
            depth += 1
        if len(picked) < per_class:
            log.warning("only %d %s windows available (wanted %d)", len(picked), label.value, per_class)
        out.extend(picked)
    return out


def write_dataset_csv(path, data: Dataset) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([*data.columns, "label"])
        for row, label in zip(data.X, data.labels):
            writer.writerow([*(repr(float(v)) for v in row), label.value])


def read_dataset_csv(path) -> Dataset:
    path = Path(path)
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty dataset file") from None
        if not header or header[-1] != "label":
            raise SchemaError(f"{path}: last column must be 'label'")
        columns = tuple(header[:-1])
        if columns == FEATURE_NAMES:
            representation = Representation.TABLE_FEATURES
        elif columns == tuple(f"s{i}" for i in range(len(columns))) and columns:
            representation = Representation.RAW_SERIES
        elif columns and set(columns) <= set(FEATURE_NAMES):
            representation = Representation.TABLE_FEATURES
        else:
            raise SchemaError(f"{path}: unrecognised columns {header[:3]}...")
        rows, labels = [], []
        for row in reader:
            if not row:
                continue
            if len(row) != len(header):
                raise SchemaError(f"{path}:{reader.line_num}: expected {len(header)} fields")
            try:
                rows.append([float(v) for v in row[:-1]])
                labels.append(TrafficClass.parse(row[-1]).index)
            except ValueError as exc:
                raise SchemaError(f"{path}:{reader.line_num}: {exc}") from None
    X = np.array(rows, dtype=float).reshape(len(rows), len(columns))
    return Dataset(X, np.array(labels, dtype=np.int64), representation, columns)
