import numpy as np
import pytest

from conftest import make_flow
from quicflow.dataset import (Dataset, balanced_windows, dataset_from_windows,
                              read_dataset_csv, windows_from_flows, write_dataset_csv)
from quicflow.errors import DegenerateDataset, NonFinite, SchemaError, UnknownFeature
from quicflow.features import FEATURE_NAMES, Representation
from quicflow.flowcore import TrafficClass, WindowSpec

SPEC = WindowSpec(0.1, 50)


def flows(n_each, span=12.0):
    out = []
    for label in TrafficClass:
        for i in range(n_each):
            times = np.arange(0, span, 0.05 + 0.01 * i)
            out.append(make_flow(times, lengths=100 + 10 * label.index, key=f"{label.value}-{i}",
                                 directions=np.arange(times.size) % 2, label=label))
    return out


def test_windows_from_flows_counts_short():
    fl = flows(2) + [make_flow([0.0, 1.0], key="short", label=TrafficClass.STREAMING)]
    windows, short = windows_from_flows(fl, SPEC)
    assert short == 1 and len(windows) == 8
    assert len(windows_from_flows(fl, SPEC, per_flow=1)[0]) == 4


def test_raw_and_table_datasets():
    windows, _ = windows_from_flows(flows(2), SPEC)
    raw = dataset_from_windows(windows, Representation.RAW_SERIES, SPEC)
    table = dataset_from_windows(windows, "table", SPEC)
    assert raw.X.shape == (8, 50) and raw.columns[0] == "s0"
    assert table.columns == FEATURE_NAMES and table.X.shape == (8, 12)
    assert raw.class_counts() == {TrafficClass.STREAMING: 4, TrafficClass.CONFERENCE: 4}


def test_balanced_windows_spreads_over_flows():
    picked = balanced_windows(flows(3), SPEC, per_class=3)
    assert len(picked) == 6
    assert len({w.source for w in picked}) == 6


def test_csv_round_trip(tmp_path):
    windows, _ = windows_from_flows(flows(2), SPEC)
    for repr_ in ("raw", "table"):
        data = dataset_from_windows(windows, repr_, SPEC)
        p = tmp_path / f"{repr_}.csv"
        write_dataset_csv(p, data)
        back = read_dataset_csv(p)
        assert np.array_equal(back.X, data.X) and np.array_equal(back.y, data.y)
        assert back.columns == data.columns and back.representation == data.representation


def test_bad_dataset_file(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("a,b\n1,2\n", encoding="utf-8")
    with pytest.raises(SchemaError):
        read_dataset_csv(p)


def test_column_ops():
    data = Dataset(np.arange(24.0).reshape(2, 12), [0, 1], "table", FEATURE_NAMES)
    assert data.drop_columns(["n_c2s"]).columns == FEATURE_NAMES[:10] + ("n_s2c",)
    assert data.select_columns(["t_w", "ln_p25"]).X.tolist() == [[1, 2], [13, 14]]
    with pytest.raises(UnknownFeature):
        data.drop_columns(["nope"])
    with pytest.raises(NonFinite):
        Dataset([[np.nan]], [0], "raw", ("s0",))
    with pytest.raises(DegenerateDataset):
        Dataset([[1.0]], [0], "raw", ("s0",)).require_classes()
