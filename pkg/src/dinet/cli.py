"""Command-line surface: train, evaluate, experiment, inspect, fetch-data.

One declarative JSON config drives everything; every knob defaults to the
kidney-disease reference setup (beta=5, three output symbols per node,
200 balanced training rows, 1000 runs).  Dotted ``--set`` flags override
single keys.  Progress streams to stderr as JSON lines; stdout carries
only the final JSON report, so pipelines can consume it directly.

Exit codes: 0 success, 1 runtime failure, 2 usage/config/data error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .analysis import mi_flow
from .dataio import (
    CKD_URL,
    RawDataset,
    fetch_ckd,
    load_dataset,
    load_model,
    save_model,
    split,
)
from .errors import ConfigError, DatasetFormatError, DinetError
from .network import build_topology, derive_seed, predict, train_network
from .quantizer import QuantizedDataset, apply_quantizer, fit_quantizer
from .synthetic import make_synthetic_ckd

_RUN_TAG = 7          # purpose tag for per-run seed derivation
_SPLIT_TAG = 1
_TRAIN_TAG = 2
_PRED_TRAIN_TAG = 3
_PRED_TEST_TAG = 4


# ---------------------------------------------------------------------------
# configuration

@dataclass
class DatasetConfig:
    path: str = "data/ckd/chronic_kidney_disease_full.arff"
    format: str = "arff"              # csv | arff | synthetic
    target: str = "class"
    positive_class: str = "ckd"
    missing_tokens: tuple = ("?", "")
    delimiter: str = ","
    synthetic_rows: int = 400
    synthetic_seed: int = 7


@dataclass
class QuantizerConfig:
    default_levels: int | None = None     # None: one bin per distinct value
    categorical_max_distinct: int = 16
    overrides: dict = field(default_factory=dict)


@dataclass
class ModelConfig:
    beta: float = 5.0
    n_out: object = 3                 # scalar for all non-final layers, or full list
    tol: float = 1e-8
    max_iter: int = 500


@dataclass
class SplitConfig:
    n_train: int = 200
    stratify: str = "balanced"        # none | balanced
    positive_fraction: float = 0.5


@dataclass
class PredictionConfig:
    mode: str = "stochastic"          # stochastic | ensemble
    repeats: int = 25


@dataclass
class OutputConfig:
    model: str = "out/model.json"
    metrics: str = "out/metrics.json"
    mi_flow: str = "out/mi_flow.csv"


@dataclass
class ExperimentConfig:
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    quantizer: QuantizerConfig = field(default_factory=QuantizerConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    split: SplitConfig = field(default_factory=SplitConfig)
    prediction: PredictionConfig = field(default_factory=PredictionConfig)
    outputs: OutputConfig = field(default_factory=OutputConfig)
    runs: int = 1000
    seed: int = 0
    workers: int = 1

    def validate(self):
        if self.model.beta <= 0:
            raise ConfigError("model.beta must be positive")
        if self.model.tol <= 0 or self.model.max_iter < 1:
            raise ConfigError("model.tol must be positive and max_iter >= 1")
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.split.stratify not in ("none", "balanced"):
            raise ConfigError(f"unknown stratify mode {self.split.stratify!r}")
        if self.prediction.mode not in ("stochastic", "ensemble"):
            raise ConfigError(f"unknown prediction mode {self.prediction.mode!r}")
        if self.prediction.repeats < 1:
            raise ConfigError("prediction.repeats must be >= 1")
        if self.dataset.format not in ("csv", "arff", "synthetic"):
            raise ConfigError(f"unknown dataset format {self.dataset.format!r}")
        return self


_SECTIONS = {
    "dataset": DatasetConfig,
    "quantizer": QuantizerConfig,
    "model": ModelConfig,
    "split": SplitConfig,
    "prediction": PredictionConfig,
    "outputs": OutputConfig,
}


def _build_section(cls, data, where):
    fields = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - fields
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in {where}")
    if cls is DatasetConfig and "missing_tokens" in data:
        data = dict(data, missing_tokens=tuple(data["missing_tokens"]))
    return cls(**data)


def config_from_dict(raw: dict) -> ExperimentConfig:
    top_fields = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(raw) - top_fields
    if unknown:
        raise ConfigError(f"unknown top-level config key(s) {sorted(unknown)}")
    kwargs = {}
    for name, value in raw.items():
        if name in _SECTIONS:
            if not isinstance(value, dict):
                raise ConfigError(f"section {name!r} must be an object")
            kwargs[name] = _build_section(_SECTIONS[name], value, name)
        else:
            kwargs[name] = value
    return ExperimentConfig(**kwargs).validate()


def config_to_dict(cfg: ExperimentConfig) -> dict:
    d = dataclasses.asdict(cfg)
    d["dataset"]["missing_tokens"] = list(d["dataset"]["missing_tokens"])
    return d


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        raw = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: invalid JSON ({exc})") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{p}: config must be a JSON object")
    return config_from_dict(raw)


def apply_overrides(cfg: ExperimentConfig, assignments) -> ExperimentConfig:
    """Apply dotted key=value overrides (values parsed as JSON, else string)."""
    d = config_to_dict(cfg)
    for item in assignments or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, _, value = item.partition("=")
        try:
            parsed = json.loads(value)
        except json.JSONDecodeError:
            parsed = value
        node = d
        parts = key.split(".")
        for part in parts[:-1]:
            if part not in node or not isinstance(node[part], dict):
                raise ConfigError(f"override {key!r}: unknown section {part!r}")
            node = node[part]
        if parts[-1] not in node:
            raise ConfigError(f"override {key!r}: unknown key {parts[-1]!r}")
        node[parts[-1]] = parsed
    return config_from_dict(d)


# ---------------------------------------------------------------------------
# metrics

def compute_metrics(y_true, y_pred, positive_index: int) -> dict:
    """Binary confusion metrics; empty denominators yield 0.0."""
    t = np.asarray(y_true) == positive_index
    p = np.asarray(y_pred) == positive_index
    tp = int(np.sum(t & p))
    tn = int(np.sum(~t & ~p))
    fp = int(np.sum(~t & p))
    fn = int(np.sum(t & ~p))

    def ratio(num, den):
        return num / den if den else 0.0

    return {
        "accuracy": ratio(tp + tn, tp + tn + fp + fn),
        "sensitivity": ratio(tp, tp + fn),
        "specificity": ratio(tn, tn + fp),
        "f1": ratio(2 * tp, 2 * tp + fp + fn),
        "tp": tp, "tn": tn, "fp": fp, "fn": fn,
    }


_METRIC_KEYS = ("accuracy", "sensitivity", "specificity", "f1")


def aggregate_metrics(per_run) -> dict:
    out = {"mean": {}, "std": {}, "per_run": list(per_run)}
    for key in _METRIC_KEYS:
        vals = np.array([r[key] for r in per_run], dtype=np.float64)
        out["mean"][key] = float(vals.mean())
        out["std"][key] = float(vals.std())
    return out


# ---------------------------------------------------------------------------
# pipeline

def prepare_dataset(cfg: ExperimentConfig) -> RawDataset:
    ds = cfg.dataset
    if ds.format == "synthetic":
        data = make_synthetic_ckd(n_rows=ds.synthetic_rows, seed=ds.synthetic_seed)
    else:
        data = load_dataset(ds.path, format=ds.format, target=ds.target,
                            missing_tokens=ds.missing_tokens, delimiter=ds.delimiter)
    if ds.positive_class not in data.classes:
        raise ConfigError(
            f"positive_class {ds.positive_class!r} not among classes {list(data.classes)}")
    return data


def fit_quantizers(train: RawDataset, qcfg: QuantizerConfig):
    specs = []
    for i, name in enumerate(train.feature_names):
        override = qcfg.overrides.get(name, {})
        unknown = set(override) - {"kind", "levels"}
        if unknown:
            raise ConfigError(f"quantizer override for {name!r}: unknown key(s) {sorted(unknown)}")
        kind = override.get("kind")
        if kind is None and train.kinds[i] == "nominal":
            kind = "categorical"
        specs.append(fit_quantizer(
            train.columns[i],
            requested_levels=override.get("levels", qcfg.default_levels),
            kind=kind,
            name=name,
            categorical_max_distinct=qcfg.categorical_max_distinct,
        ))
    return specs


def quantize_with(specs, data: RawDataset) -> QuantizedDataset:
    return QuantizedDataset(
        columns=tuple(apply_quantizer(s, col) for s, col in zip(specs, data.columns)),
        cardinalities=tuple(s.cardinality for s in specs),
        labels=data.label_indices(),
        n_class=len(data.classes),
    )


def resolve_n_out(n_out_setting, n_layers: int, n_class: int):
    if isinstance(n_out_setting, (list, tuple)):
        values = [int(v) for v in n_out_setting]
        if len(values) != n_layers:
            raise ConfigError(
                f"model.n_out list has {len(values)} entries, tree has {n_layers} layers")
        return values
    return [int(n_out_setting)] * (n_layers - 1) + [n_class] if n_layers > 1 else [n_class]


def _tree_depth(d: int) -> int:
    sizes = [d]
    while sizes[-1] > 1:
        n = sizes[-1]
        sizes.append(n // 2 if n % 2 == 0 else (n - 3) // 2 + 1)
    return len(sizes)


def train_on(train: RawDataset, cfg: ExperimentConfig, seed: int):
    """Fit quantizers on the training rows only, then train the tree."""
    specs = fit_quantizers(train, cfg.quantizer)
    qtrain = quantize_with(specs, train)
    n_layers = _tree_depth(train.n_features)
    n_out = resolve_n_out(cfg.model.n_out, n_layers, len(train.classes))
    topo = build_topology(train.n_features, n_out, len(train.classes),
                          qtrain.cardinalities)
    model = train_network(
        qtrain, topo, beta=cfg.model.beta, tol=cfg.model.tol,
        max_iter=cfg.model.max_iter, seed=seed,
        quantizers=specs, feature_names=train.feature_names,
        class_names=train.classes,
    )
    return model, qtrain


def evaluate_on(model, data: RawDataset, cfg: ExperimentConfig, seed: int) -> dict:
    preds = predict(model, data, seed=seed,
                    mode=cfg.prediction.mode, repeats=cfg.prediction.repeats)
    positive = list(data.classes).index(cfg.dataset.positive_class)
    return compute_metrics(data.label_indices(), preds, positive)


def run_single(cfg: ExperimentConfig, data: RawDataset, run_index: int,
               keep_model: bool = False):
    """One split -> train -> evaluate cycle with fully derived seeds."""
    run_seed = derive_seed(cfg.seed, _RUN_TAG, run_index)
    positive = cfg.dataset.positive_class if cfg.split.stratify == "balanced" else None
    train, test = split(
        data, cfg.split.n_train, seed=derive_seed(run_seed, _SPLIT_TAG),
        stratify=cfg.split.stratify,
        positive_fraction=cfg.split.positive_fraction,
        positive_label=positive,
    )
    model, _ = train_on(train, cfg, seed=derive_seed(run_seed, _TRAIN_TAG))
    result = {
        "run": run_index,
        "train": evaluate_on(model, train, cfg, derive_seed(run_seed, _PRED_TRAIN_TAG)),
        "test": evaluate_on(model, test, cfg, derive_seed(run_seed, _PRED_TEST_TAG)),
    }
    if keep_model:
        result["model"] = model
        result["splits"] = (train, test)
    return result


def _run_indexed(cfg: ExperimentConfig, data: RawDataset, run_index: int):
    try:
        return run_single(cfg, data, run_index)
    except DinetError as exc:
        raise DinetError(f"run {run_index} failed: {exc}") from exc


def _pool_run(args):
    cfg_dict, data, run_index = args
    return run_index, _run_indexed(config_from_dict(cfg_dict), data, run_index)


def run_experiment(cfg: ExperimentConfig, data: RawDataset,
                   progress=None) -> dict:
    """Repeat split/train/evaluate ``cfg.runs`` times and aggregate.

    Per-run seeds derive from (master seed, run index), so the worker count
    never changes the numbers.  Any per-run failure aborts, naming the run.
    """
    results = [None] * cfg.runs
    if cfg.workers == 1:
        for r in range(cfg.runs):
            results[r] = _run_indexed(cfg, data, r)
            if progress:
                progress(results[r])
    else:
        jobs = [(config_to_dict(cfg), data, r) for r in range(cfg.runs)]
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            for idx, out in pool.map(_pool_run, jobs):
                results[idx] = out
                if progress:
                    progress(out)
    return {
        "runs": cfg.runs,
        "seed": cfg.seed,
        "train": aggregate_metrics([r["train"] for r in results]),
        "test": aggregate_metrics([r["test"] for r in results]),
    }


def report_json(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2) + "\n"


# ---------------------------------------------------------------------------
# commands

def _write(path, text):
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(text, encoding="utf-8")


def _progress_printer(args):
    if args.quiet:
        return None

    def emit(result):
        line = {"run": result["run"],
                "train_accuracy": result["train"]["accuracy"],
                "test_accuracy": result["test"]["accuracy"]}
        print(json.dumps(line, sort_keys=True), file=sys.stderr)

    return emit


def cmd_train(cfg: ExperimentConfig, args) -> int:
    data = prepare_dataset(cfg)
    result = run_single(cfg, data, run_index=0, keep_model=True)
    model = result["model"]
    train_rows, _ = result["splits"]
    save_model(model, args.model_out or cfg.outputs.model)
    _write(args.metrics_out or cfg.outputs.metrics, report_json(result["train"]))
    flow = mi_flow(model, quantize_with(model.quantizers, train_rows))
    flow_path = Path(args.miflow_out or cfg.outputs.mi_flow)
    flow_path.parent.mkdir(parents=True, exist_ok=True)
    flow.to_csv(flow_path)
    print(report_json(result["train"]), end="")
    return 0


def cmd_evaluate(cfg: ExperimentConfig, args) -> int:
    model = load_model(args.model)
    data = prepare_dataset(cfg)
    run_seed = derive_seed(cfg.seed, _RUN_TAG, 0)
    if args.split == "all":
        rows, tag = data, _PRED_TEST_TAG
    else:
        positive = cfg.dataset.positive_class if cfg.split.stratify == "balanced" else None
        train, test = split(
            data, cfg.split.n_train, seed=derive_seed(run_seed, _SPLIT_TAG),
            stratify=cfg.split.stratify,
            positive_fraction=cfg.split.positive_fraction,
            positive_label=positive,
        )
        rows = train if args.split == "train" else test
        tag = _PRED_TRAIN_TAG if args.split == "train" else _PRED_TEST_TAG
    metrics = evaluate_on(model, rows, cfg, derive_seed(run_seed, tag))
    if args.out:
        _write(args.out, report_json(metrics))
    print(report_json(metrics), end="")
    return 0


def cmd_experiment(cfg: ExperimentConfig, args) -> int:
    data = prepare_dataset(cfg)
    report = run_experiment(cfg, data, progress=_progress_printer(args))
    text = report_json(report)
    if args.out or cfg.outputs.metrics:
        _write(args.out or cfg.outputs.metrics, text)
    print(text, end="")
    return 0


def cmd_inspect(cfg: ExperimentConfig, args) -> int:
    model = load_model(args.model)
    data = prepare_dataset(cfg)
    flow = mi_flow(model, quantize_with(model.quantizers, data))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    flow.to_csv(out)
    print(json.dumps({"nodes": len(flow.nodes), "muxes": len(flow.muxes),
                      "csv": str(out)}, sort_keys=True))
    return 0


def cmd_fetch(args) -> int:
    path = fetch_ckd(args.dest, url=args.url, sha256=args.sha256)
    if args.sha256 is None:
        print(json.dumps({"warning": "archive checksum not verified; "
                          "pass --sha256 to pin it"}), file=sys.stderr)
    print(json.dumps({"dataset": str(path)}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dinet",
        description="Train and evaluate tree-structured information-bottleneck classifiers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE", help="override a config key (dotted path)")
        p.add_argument("--quiet", action="store_true", help="suppress stderr progress")

    p = sub.add_parser("train", help="train once and write model/metrics/MI-flow")
    add_common(p)
    p.add_argument("--model-out", default=None)
    p.add_argument("--metrics-out", default=None)
    p.add_argument("--miflow-out", default=None)

    p = sub.add_parser("evaluate", help="evaluate a saved model on a split")
    add_common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--split", choices=["train", "test", "all"], default="test")
    p.add_argument("--out", default=None)

    p = sub.add_parser("experiment", help="repeated splits, aggregated metrics")
    add_common(p)
    p.add_argument("--out", default=None)

    p = sub.add_parser("inspect", help="emit the MI-flow CSV for a saved model")
    add_common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("fetch-data", help="download the kidney-disease dataset")
    p.add_argument("--dest", default="data/ckd")
    p.add_argument("--url", default=CKD_URL)
    p.add_argument("--sha256", default=None,
                   help="expected archive checksum (verified when given)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "fetch-data":
            return cmd_fetch(args)
        cfg = apply_overrides(load_config(args.config), args.overrides)
        if args.command == "train":
            return cmd_train(cfg, args)
        if args.command == "evaluate":
            return cmd_evaluate(cfg, args)
        if args.command == "experiment":
            return cmd_experiment(cfg, args)
        if args.command == "inspect":
            return cmd_inspect(cfg, args)
        raise ConfigError(f"unknown command {args.command!r}")
    except (ConfigError, DatasetFormatError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 2
    except DinetError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
