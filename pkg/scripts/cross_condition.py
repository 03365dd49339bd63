"""Train on one condition, test on another, for every model and normalisation.

Covers terrestrial -> GEO (delay change) and GEO 5 Mb/s -> GEO 2 Mb/s
(capacity change).  Each fit sees the whole training scenario and is scored
once on the whole test scenario.
"""
from _common import GRID, config_from_args, scenario_dataset, write_rows
from quicflow.evaluation import cross_condition_table
from quicflow.features import Normalization

PAIRS = (("terrestrial", "geo"), ("geo", "geo-2mbps"))


def main(argv=None):
    cfg = config_from_args(argv)
    scenarios = sorted({s for pair in PAIRS for s in pair})
    data = {sc: scenario_dataset(cfg, sc, cfg.seed + i) for i, sc in enumerate(scenarios)}
    rows = []
    for train_sc, test_sc in PAIRS:
        for r in cross_condition_table(data[train_sc], data[test_sc], GRID, list(Normalization),
                                       0, train_sc, test_sc):
            rows.append({"train": train_sc, "test": test_sc, "normalization": r.normalization,
                         "model": r.model, "family": r.family, "accuracy": r.accuracy})
            print(f"{train_sc:>11s} -> {test_sc:10s} {r.normalization:8s} {r.model:28s} {r.accuracy:.3f}")
    print("wrote", write_rows(cfg, "cross_condition", rows))


if __name__ == "__main__":
    main()
