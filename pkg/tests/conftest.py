import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from quicflow.flowcore import Direction, Flow, FlowWindow, PacketRecord, TrafficClass

settings.register_profile(
    "quicflow", max_examples=60, deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("quicflow")


def make_window(times, lengths, directions, start=None, duration=5.0, label=TrafficClass.STREAMING):
    times = np.asarray(times, dtype=float)
    start = float(times[0]) if start is None and times.size else (start or 0.0)
    return FlowWindow("w", start, duration, times, np.asarray(lengths), np.asarray(directions), label)


def make_flow(times, lengths=1000, directions=Direction.S2C, key="f", label=None):
    times = np.asarray(times, dtype=float)
    lengths = np.broadcast_to(np.asarray(lengths), times.shape).copy()
    directions = np.broadcast_to(np.asarray(int(directions) if np.ndim(directions) == 0 else directions),
                                 times.shape).copy()
    return Flow(key, times, lengths, directions, label)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_records(rng, n, n_flows):
    return [
        PacketRecord(float(rng.uniform(0, 100)), Direction(int(rng.integers(0, 2))),
                     int(rng.integers(0, 1500)), f"flow-{int(rng.integers(0, n_flows))}")
        for _ in range(n)
    ]


def pytest_terminal_summary(terminalreporter):
    results = getattr(sys.modules.get("test_acceptance"), "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
