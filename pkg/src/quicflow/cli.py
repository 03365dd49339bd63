"""Command-line pipeline: generate traces, featurise, train, evaluate, rank,
ablate and verify.

Every command writes its outputs atomically (temporary file, then rename)
next to a ``*.manifest.json`` holding the full argument set, seeds, package
versions and output checksums.  Exit status is 0 on success, 2 on usage,
configuration, input or data errors; partial outputs are removed on failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import platform
import shutil
import sys
import tempfile
from dataclasses import asdict, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .dataset import (Dataset, balanced_windows, dataset_from_windows,
                      read_dataset_csv, windows_from_flows, write_dataset_csv)
from .errors import ConfigError, QuicflowError
from .evaluation import (AblationSpec, CVSpec, ablation, best_by_family,
                         cross_condition_table, grid_cv, monotonicity_violations)
from .features import ColumnScaler, Normalization, Representation
from .flowcore import Flow, TrafficClass, WindowSpec, assemble_flows
from .infotheory import Binning, discretize_dataset, mrmr_rank, subset_analysis
from .ingest import TraceFormat, TraceSource, read_trace, write_csv_trace
from .ml import (default_grid, load_model, model_to_dict, parse_spec, spec_label,
                 spec_to_dict, train)
from .qosagent import Featurizer, load_pvd_config, monitor_trace
from .trafficgen import (PROFILE_SETS, generate_dataset, load_scenario, preset,
                         profile_set, scenario_to_dict)

log = logging.getLogger("quicflow")

EXIT_OK = 0
EXIT_ERROR = 2


class UsageError(QuicflowError):
    pass


# ----------------------------------------------------------------- outputs

class Outputs:
    """Collects files written during a command and commits them together.

    Files are first written to hidden temporaries in the destination
    directory; ``commit`` renames them into place, ``abort`` deletes them.
    """

    def __init__(self):
        self._pending: list[tuple[Path, Path]] = []
        self._dirs: list[tuple[Path, Path]] = []
        self.committed: list[Path] = []

    def path(self, final) -> Path:
        final = Path(final)
        final.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(prefix=f".{final.name}.", suffix=".part", dir=final.parent)
        os.close(fd)
        self._pending.append((Path(tmp), final))
        return Path(tmp)

    def write_text(self, final, text: str) -> None:
        self.path(final).write_text(text, encoding="utf-8")

    def directory(self, final) -> Path:
        final = Path(final)
        if final.exists() and any(final.iterdir()):
            raise UsageError(f"output directory {final} exists and is not empty")
        final.parent.mkdir(parents=True, exist_ok=True)
        tmp = Path(tempfile.mkdtemp(prefix=f".{final.name}.", suffix=".part", dir=final.parent))
        self._dirs.append((tmp, final))
        return tmp

    def commit(self) -> None:
        for tmp, final in self._dirs:
            if final.exists():
                final.rmdir()
            os.replace(tmp, final)
            self.committed.append(final)
        for tmp, final in self._pending:
            os.replace(tmp, final)
            self.committed.append(final)
        self._pending, self._dirs = [], []

    def abort(self) -> None:
        for tmp, _ in self._pending:
            tmp.unlink(missing_ok=True)
        for tmp, _ in self._dirs:
            shutil.rmtree(tmp, ignore_errors=True)
        self._pending, self._dirs = [], []


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _jsonable(value):
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if hasattr(value, "value"):
        return value.value
    return value


def manifest(command: str, args: argparse.Namespace, files: dict, extra: Optional[dict] = None) -> dict:
    """Run record: command, arguments, versions and output checksums.

    ``files`` maps manifest names to temporary paths written by the run.
    """
    params = {k: _jsonable(v) for k, v in sorted(vars(args).items())
              if k not in ("func", "verbose")}
    doc = {
        "tool": "quicflow",
        "version": __version__,
        "command": command,
        "arguments": params,
        "seed": params.get("seed"),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "outputs": {name: _sha256(p) for name, p in sorted(files.items()) if p.is_file()},
    }
    if extra:
        doc.update(extra)
    return doc


def _write_manifest(out: Outputs, target: Path, doc: dict) -> None:
    name = target / "manifest.json" if target.is_dir() or not target.suffix else \
        target.with_name(target.name + ".manifest.json")
    out.write_text(name, json.dumps(doc, indent=2, sort_keys=True) + "\n")


# ------------------------------------------------------------------ inputs

def _window_spec(args) -> WindowSpec:
    return WindowSpec(args.bin, args.samples, args.stride)


def _read_labels(path: Path) -> dict:
    labels = {}
    with path.open(encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"flow_id", "label"} <= set(reader.fieldnames):
            raise ConfigError(f"{path}: labels file needs flow_id and label columns")
        for row in reader:
            labels[row["flow_id"]] = TrafficClass.parse(row["label"])
    return labels


def load_flows(args) -> list[Flow]:
    """Flows from ``--traces`` (CSV files or a ``gen`` output directory) and
    ``--pcap`` files, labelled from ``--labels`` or the directory's labels.csv."""
    sources: list[TraceSource] = []
    labels_path = Path(args.labels) if getattr(args, "labels", None) else None
    for item in args.traces or []:
        p = Path(item)
        if p.is_dir():
            files = sorted((p / "flows").glob("*.csv")) if (p / "flows").is_dir() else sorted(p.glob("*.csv"))
            files = [f for f in files if f.name != "labels.csv"]
            if labels_path is None and (p / "labels.csv").is_file():
                labels_path = p / "labels.csv"
            sources += [TraceSource(TraceFormat.CSV, f) for f in files]
        elif p.is_file():
            sources.append(TraceSource(TraceFormat.CSV, p))
        else:
            raise FileNotFoundError(f"trace path {p} does not exist")
    for item in getattr(args, "pcap", None) or []:
        if not args.client:
            raise UsageError("--pcap needs --client to resolve packet direction")
        sources.append(TraceSource(TraceFormat.PCAP, Path(item), args.client))
    if not sources:
        raise UsageError("no trace files given")
    records = [r for s in sources for r in read_trace(s)]
    flows = assemble_flows(records)
    if labels_path is not None:
        labels = _read_labels(labels_path)
        flows = [f.with_label(labels.get(f.key)) for f in flows]
    return flows


def _model_grid(args) -> list:
    if getattr(args, "model", None):
        try:
            return [parse_spec(m) for m in args.model]
        except (ValueError, TypeError) as exc:
            raise UsageError(str(exc)) from None
    return default_grid()


def _cv(args) -> CVSpec:
    try:
        train_parts, val_parts = (int(p) for p in args.ratio.split(":"))
    except ValueError:
        raise UsageError(f"--ratio must look like 5:1, got {args.ratio!r}") from None
    return CVSpec(args.repeats, train_parts, val_parts, args.seed)


def _prepared(data: Dataset, norm: Optional[str]) -> Dataset:
    if data.representation is Representation.RAW_SERIES and norm and norm != "none":
        return data.normalized(Normalization(norm))
    return data


def _dist_row(spec, dist, **extra) -> dict:
    s = dist.summary
    return {"model": spec_label(spec), "family": spec.family, **extra,
            "min": s.min, "q1": s.q1, "median": s.median, "q3": s.q3, "max": s.max}


def _csv_text(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    if rows:
        writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    return buf.getvalue()


def _report_paths(out: str) -> tuple[Path, Path]:
    """JSON report path and the companion CSV summary path."""
    p = Path(out)
    if p.suffix == ".json":
        return p, p.with_suffix(".csv")
    return p.with_suffix(p.suffix + ".json") if p.suffix else p.with_suffix(".json"), \
        p.with_suffix(".csv")


# ---------------------------------------------------------------- commands

def cmd_gen(args, out: Outputs) -> None:
    if args.scenario:
        config, profiles = load_scenario(args.scenario)
    elif args.preset:
        config, profiles = preset(args.preset), profile_set("default")
    else:
        raise UsageError("gen needs --scenario FILE or --preset NAME")
    overrides = {k: v for k, v in (("seed", args.seed), ("flows_per_class", args.flows_per_class),
                                   ("flow_duration", args.duration)) if v is not None}
    if overrides:
        config = replace(config, **overrides)
    if args.profiles:
        profiles = profile_set(args.profiles)
    flows = generate_dataset(config, profiles)
    target = Path(args.out)
    tmp = out.directory(target)
    (tmp / "flows").mkdir()
    files = {}
    for flow in flows:
        p = tmp / "flows" / f"{flow.key}.csv"
        write_csv_trace(p, flow.records)
        files[f"flows/{p.name}"] = p
    labels = tmp / "labels.csv"
    labels.write_text("flow_id,label\n" + "".join(f"{f.key},{f.label.value}\n" for f in flows),
                      encoding="utf-8")
    files["labels.csv"] = labels
    doc = manifest("gen", args, files, {"scenario": scenario_to_dict(config, profiles)})
    (tmp / "manifest.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n",
                                       encoding="utf-8")
    log.info("generated %d flows in %s", len(flows), target)


def cmd_featurize(args, out: Outputs) -> None:
    flows = load_flows(args)
    unlabeled = [f.key for f in flows if f.label is None]
    if unlabeled:
        raise ConfigError(f"{len(unlabeled)} flow(s) have no label, e.g. {unlabeled[0]}")
    spec = _window_spec(args)
    if args.windows_per_class:
        windows = balanced_windows(flows, spec, args.windows_per_class)
    else:
        windows, short = windows_from_flows(flows, spec)
        if short:
            log.warning("%d flow(s) shorter than one window excluded", short)
    data = dataset_from_windows(windows, args.repr, spec)
    if not len(data):
        raise ConfigError("no windows could be extracted")
    tmp = out.path(args.out)
    write_dataset_csv(tmp, data)
    counts = {c.value: n for c, n in data.class_counts().items()}
    _write_manifest(out, Path(args.out), manifest("featurize", args, {Path(args.out).name: tmp},
                                                  {"rows": len(data), "class_counts": counts}))


def cmd_train(args, out: Outputs) -> None:
    data = read_dataset_csv(args.dataset)
    spec = _model_grid(args)[0] if args.model else parse_spec("svc")
    window = _window_spec(args)
    scaler = None
    norm = None
    if data.representation is Representation.TABLE_FEATURES:
        scaler = ColumnScaler.fit(data.X)
        X = scaler.transform(data.X)
    else:
        if data.X.shape[1] != window.samples_per_window:
            raise ConfigError(f"dataset has {data.X.shape[1]} samples per row but "
                              f"--samples is {window.samples_per_window}")
        norm = None if args.norm == "none" else Normalization(args.norm)
        X = _prepared(data, args.norm).X
    featurizer = Featurizer(data.representation, norm, window, scaler)
    model = train(spec, X, data.y, seed=args.seed, meta=featurizer.to_meta())
    tmp = out.path(args.out)
    tmp.write_text(json.dumps(model_to_dict(model)), encoding="utf-8")
    _write_manifest(out, Path(args.out), manifest("train", args, {Path(args.out).name: tmp},
                                                  {"model": spec_to_dict(spec)}))


def cmd_eval_cv(args, out: Outputs) -> None:
    data = _prepared(read_dataset_csv(args.dataset), args.norm)
    cv = _cv(args)
    results = grid_cv(data, _model_grid(args), cv)
    rows = [_dist_row(spec, dist, normalization=args.norm) for spec, dist in results]
    best = best_by_family(results)
    report = {
        "kind": "eval-cv",
        "cv": asdict(cv),
        "results": [dict(r, samples=list(d.samples)) for r, (_, d) in zip(rows, results)],
        "best": {fam: spec_label(s) for fam, (s, _) in best.items()},
    }
    json_path, csv_path = _report_paths(args.out)
    tj, tc = out.path(json_path), out.path(csv_path)
    tj.write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    tc.write_text(_csv_text(rows), encoding="utf-8")
    _write_manifest(out, json_path, manifest("eval-cv", args, {json_path.name: tj, csv_path.name: tc}))
    for r in rows:
        print(f"{r['model']:<24} median={r['median']:.4f}  [{r['min']:.4f}, {r['max']:.4f}]")


def cmd_eval_cross(args, out: Outputs) -> None:
    train_ds, test_ds = read_dataset_csv(args.train), read_dataset_csv(args.test)
    if train_ds.columns != test_ds.columns:
        raise ConfigError(f"train and test datasets have different columns "
                          f"({len(train_ds.columns)} vs {len(test_ds.columns)})")
    norms = [Normalization(n) for n in args.norm]
    rows = cross_condition_table(train_ds, test_ds, _model_grid(args), norms, args.seed,
                                 args.train_name or Path(args.train).stem,
                                 args.test_name or Path(args.test).stem)
    table = [asdict(r) for r in rows]
    json_path, csv_path = _report_paths(args.out)
    tj, tc = out.path(json_path), out.path(csv_path)
    tj.write_text(json.dumps({"kind": "eval-cross", "results": table}, indent=2) + "\n", encoding="utf-8")
    tc.write_text(_csv_text(table), encoding="utf-8")
    _write_manifest(out, json_path, manifest("eval-cross", args, {json_path.name: tj, csv_path.name: tc}))
    for r in rows:
        print(f"{r.normalization:<8} {r.model:<24} accuracy={r.accuracy:.4f}")


def cmd_rank(args, out: Outputs) -> None:
    data = read_dataset_csv(args.dataset)
    disc = discretize_dataset(data.X, data.y, data.columns, args.bins, Binning(args.binning))
    ranking = mrmr_rank(disc, args.top)
    rows = [{"rank": r, "feature": f, "weight": w} for f, w, r in ranking.rows()]
    files = {}
    tr = out.path(args.out)
    tr.write_text(_csv_text(rows), encoding="utf-8")
    files[Path(args.out).name] = tr
    if args.subsets:
        results = subset_analysis(disc)
        sub_rows = [{"subset": "+".join(r.subject), "size": len(r.subject),
                     "i_bits": r.i_bits, "h_cond_bits": r.h_cond_bits} for r in results]
        ts = out.path(args.subsets)
        ts.write_text(_csv_text(sub_rows), encoding="utf-8")
        files[Path(args.subsets).name] = ts
    _write_manifest(out, Path(args.out), manifest("rank", args, files))
    for row in rows:
        print(f"{row['rank']:>2}  {row['feature']:<10} {row['weight']:.4f}")


def cmd_ablate(args, out: Outputs) -> None:
    data = read_dataset_csv(args.dataset)
    if data.representation is not Representation.TABLE_FEATURES:
        raise ConfigError("ablation needs a table-feature dataset (featurize --repr table)")
    cv = _cv(args)
    rows = ablation(data, AblationSpec(), _model_grid(args), cv)
    table = [{"model": r.model, "family": r.family, "deleted": "+".join(r.deleted),
              "baseline_median": r.baseline_median, "reduced_median": r.reduced_median,
              "delta_percent": r.delta_percent} for r in rows]
    violations = monotonicity_violations(rows, args.tolerance)
    json_path, csv_path = _report_paths(args.out)
    tj, tc = out.path(json_path), out.path(csv_path)
    tj.write_text(json.dumps({"kind": "ablate", "cv": asdict(cv), "results": table,
                              "monotonicity_violations": [list(map(list, v[1:])) for v in violations]},
                             indent=2) + "\n", encoding="utf-8")
    tc.write_text(_csv_text(table), encoding="utf-8")
    _write_manifest(out, json_path, manifest("ablate", args, {json_path.name: tj, csv_path.name: tc}))
    for r in table:
        print(f"{r['model']:<24} -{r['deleted']:<32} delta={r['delta_percent']:6.2f}%")


def cmd_verify(args, out: Outputs) -> None:
    flows = load_flows(args)
    descriptors = load_pvd_config(args.pvd)
    model = load_model(args.model_file)
    report = monitor_trace(flows, descriptors, model)
    tj = out.path(args.out)
    tj.write_text(report.to_json() + "\n", encoding="utf-8")
    files = {Path(args.out).name: tj}
    if args.text:
        tt = out.path(args.text)
        tt.write_text(report.to_text(), encoding="utf-8")
        files[Path(args.text).name] = tt
    _write_manifest(out, Path(args.out), manifest("verify", args, files, {"summary": report.counts}))
    sys.stdout.write(report.to_text())


def cmd_report(args, out: Outputs) -> None:
    """Merge eval-cv / eval-cross / ablate JSON reports into one CSV table."""
    rows = []
    for item in args.inputs:
        doc = json.loads(Path(item).read_text(encoding="utf-8"))
        kind = doc.get("kind")
        if kind not in ("eval-cv", "eval-cross", "ablate"):
            raise ConfigError(f"{item}: not a quicflow report")
        for r in doc["results"]:
            row = {"source": Path(item).name, "kind": kind, "model": r["model"],
                   "family": r["family"], "normalization": r.get("normalization", ""),
                   "train": r.get("train_scenario", ""), "test": r.get("test_scenario", ""),
                   "deleted": r.get("deleted", ""),
                   "median": r.get("median", r.get("accuracy", r.get("reduced_median"))),
                   "min": r.get("min", ""), "max": r.get("max", ""),
                   "delta_percent": r.get("delta_percent", "")}
            rows.append(row)
    tr = out.path(args.out)
    tr.write_text(_csv_text(rows), encoding="utf-8")
    _write_manifest(out, Path(args.out), manifest("report", args, {Path(args.out).name: tr}))


# ------------------------------------------------------------------ parser

def _add_window(p):
    p.add_argument("--bin", type=float, default=0.1, help="throughput bin in seconds (default 0.1)")
    p.add_argument("--samples", type=int, default=50, help="samples per window, 50 or 100 (default 50)")
    p.add_argument("--stride", type=int, default=None, help="window stride in samples (default: non-overlapping)")


def _add_traces(p):
    p.add_argument("--traces", nargs="*", default=[], help="CSV trace files or a gen output directory")
    p.add_argument("--pcap", nargs="*", default=[], help="classic pcap files")
    p.add_argument("--client", help="client IP address defining C2S for pcap input")
    p.add_argument("--labels", help="CSV with flow_id,label columns")


def _add_cv(p):
    p.add_argument("--repeats", type=int, default=200, help="Monte Carlo repeats (default 200)")
    p.add_argument("--ratio", default="5:1", help="train:validation ratio (default 5:1)")
    p.add_argument("--seed", type=int, default=0)


def _add_models(p):
    p.add_argument("--model", action="append",
                   help="model spec such as knn:k=3, rf:n=8,m=64, nn:hidden=32-16, svc:c=10 "
                        "(repeatable; default: the built-in grid)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="quicflow", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"quicflow {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate labelled synthetic traces")
    p.add_argument("--scenario", help="scenario TOML file")
    p.add_argument("--preset", choices=("terrestrial", "geo", "leo", "geo-2mbps"))
    p.add_argument("--profiles", choices=sorted(PROFILE_SETS), help="named class profile set")
    p.add_argument("--seed", type=int)
    p.add_argument("--flows-per-class", type=int)
    p.add_argument("--duration", type=float, help="flow duration in seconds")
    p.add_argument("--out", required=True, help="output directory (must be new or empty)")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("featurize", help="turn traces into a window dataset")
    _add_traces(p)
    _add_window(p)
    p.add_argument("--repr", choices=("raw", "table"), default="raw")
    p.add_argument("--windows-per-class", type=int, help="balanced sample of this many windows per class")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("train", help="fit one model on a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--model", action="append", help="model spec (default svc)")
    p.add_argument("--norm", choices=("minmax", "stdnorm", "none"), default="minmax")
    _add_window(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval-cv", help="Monte Carlo cross-validation over a model grid")
    p.add_argument("--dataset", required=True)
    p.add_argument("--norm", choices=("minmax", "stdnorm", "none"), default="minmax")
    _add_models(p)
    _add_cv(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval_cv)

    p = sub.add_parser("eval-cross", help="train on one condition, test on another")
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--train-name")
    p.add_argument("--test-name")
    p.add_argument("--norm", nargs="+", choices=("minmax", "stdnorm"), default=["minmax", "stdnorm"])
    _add_models(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval_cross)

    p = sub.add_parser("rank", help="mRMR feature ranking")
    p.add_argument("--dataset", required=True)
    p.add_argument("--bins", type=int, default=10)
    p.add_argument("--binning", choices=[b.value for b in Binning], default="equal-frequency")
    p.add_argument("--top", type=int)
    p.add_argument("--subsets", help="also write I(Cl;S) and H(Cl|S) for every feature subset here")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("ablate", help="essential-feature ablation")
    p.add_argument("--dataset", required=True)
    _add_models(p)
    _add_cv(p)
    p.add_argument("--tolerance", type=float, default=2.0,
                   help="monotonicity tolerance in percentage points (default 2)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("verify", help="check flows against path descriptors")
    _add_traces(p)
    p.add_argument("--pvd", required=True, help="path descriptor TOML")
    p.add_argument("--model", dest="model_file", required=True, help="trained model JSON")
    p.add_argument("--text", help="also write a plain-text report here")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("report", help="merge JSON reports into one CSV table")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out = Outputs()
    try:
        args.func(args, out)
        out.commit()
    except (QuicflowError, OSError, ValueError, KeyError) as exc:
        out.abort()
        message = str(exc) if not isinstance(exc, KeyError) else f"missing key {exc}"
        print(f"quicflow {args.command}: error: {message}", file=sys.stderr)
        return EXIT_ERROR
    except BaseException:
        out.abort()
        raise
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
