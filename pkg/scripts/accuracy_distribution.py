"""Matched-condition accuracy distributions per scenario and model.

Monte Carlo CV over the model grid on minmax-normalised raw series, one row
per (scenario, model) with the five-number summary of the accuracy samples.
"""
import time

from _common import GRID, config_from_args, scenario_dataset, write_rows
from quicflow.evaluation import CVSpec, grid_cv
from quicflow.features import Normalization
from quicflow.ml import spec_label


def main(argv=None):
    cfg = config_from_args(argv)
    rows = []
    for i, scenario in enumerate(("terrestrial", "geo", "leo")):
        t0 = time.perf_counter()
        data = scenario_dataset(cfg, scenario, cfg.seed + i).normalized(Normalization.MINMAX_PAPER)
        for spec, dist in grid_cv(data, GRID, CVSpec(repeats=cfg.repeats)):
            s = dist.summary
            rows.append({"scenario": scenario, "model": spec_label(spec), "family": spec.family,
                         "min": s.min, "q1": s.q1, "median": s.median, "q3": s.q3, "max": s.max})
            print(f"{scenario:12s} {spec_label(spec):28s} median {s.median:.3f}  "
                  f"[{s.min:.3f}, {s.max:.3f}]")
        print(f"{scenario}: {time.perf_counter() - t0:.1f} s")
    print("wrote", write_rows(cfg, "accuracy_distribution", rows))


if __name__ == "__main__":
    main()
