"""Shared setup for the experiment scripts."""
import csv
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from quicflow.dataset import Dataset
from quicflow.evaluation import scenario_windows_dataset
from quicflow.features import FEATURE_NAMES, Representation
from quicflow.flowcore import WindowSpec
from quicflow.ml import ForestSpec, KNNSpec, NeuralNetSpec, SVCSpec
from quicflow.trafficgen import preset, profile_set


@dataclass(frozen=True)
class ExperimentConfig:
    profile_set: str = "overlapping"
    windows_per_class: int = 150
    # one window per flow keeps per-flow constants out of the CV folds
    flow_duration: float = 12.0
    bin_seconds: float = 0.1
    samples: int = 50
    repeats: int = 50
    seed: int = 100
    out_dir: str = "results"

    @property
    def window(self) -> WindowSpec:
        return WindowSpec(self.bin_seconds, self.samples)


GRID = (KNNSpec(1), KNNSpec(5), ForestSpec(n_trees=30, max_depth=8), NeuralNetSpec((32,)),
        NeuralNetSpec((32,), learning_rate=0.01), SVCSpec(c=1), SVCSpec(c=10))


def scenario_dataset(cfg: ExperimentConfig, scenario: str, seed: int,
                     representation=Representation.RAW_SERIES) -> Dataset:
    config = preset(scenario, seed=seed, flows_per_class=cfg.windows_per_class,
                    flow_duration=cfg.flow_duration)
    return scenario_windows_dataset(config, profile_set(cfg.profile_set), cfg.window,
                                    cfg.windows_per_class, representation)


def pooled_table(cfg: ExperimentConfig, scenarios=("terrestrial", "geo", "leo")) -> Dataset:
    """Feature table over several scenarios, one seed per scenario."""
    parts = [scenario_dataset(cfg, sc, cfg.seed + i, Representation.TABLE_FEATURES)
             for i, sc in enumerate(scenarios)]
    return Dataset(np.vstack([p.X for p in parts]), np.concatenate([p.y for p in parts]),
                   Representation.TABLE_FEATURES, FEATURE_NAMES)


def write_rows(cfg: ExperimentConfig, name: str, rows: list[dict]) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{name}.csv"
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
    (out / f"{name}.config.json").write_text(json.dumps(asdict(cfg), indent=2))
    return path


def config_from_args(argv=None, **overrides) -> ExperimentConfig:
    import argparse
    base = ExperimentConfig(**overrides)
    p = argparse.ArgumentParser()
    for name, value in asdict(base).items():
        p.add_argument("--" + name.replace("_", "-"), type=type(value), default=value)
    return ExperimentConfig(**vars(p.parse_args(argv)))
