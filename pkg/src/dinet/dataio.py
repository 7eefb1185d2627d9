"""Dataset ingestion (CSV / minimal ARFF), splitting, model persistence.

The ARFF support covers what the UCI Chronic Kidney Disease file needs:
numeric and nominal attribute declarations, '%' comments, '?' missing
cells, and the stray tabs/spaces that file is known for (every cell is
whitespace-stripped before interpretation).

Model files are versioned JSON with a SHA-256 checksum over the canonical
payload; floats survive the round trip bit-exactly because they are
written with shortest-repr encoding.
"""

from __future__ import annotations

import hashlib
import io
import json
import urllib.request
import zipfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    ConfigError,
    DatasetFormatError,
    ModelFormatError,
    ModelVersionError,
    ValidationError,
)
from .ib import IBDiagnostics
from .infotheory import ConditionalMatrix
from .network import DINModel, LayerSpec, Topology, TrainedNode
from .quantizer import FeatureSpec

DEFAULT_MISSING_TOKENS = ("?", "")

MODEL_FORMAT = "dinet-model"
MODEL_VERSION = 1

CKD_URL = "https://archive.ics.uci.edu/static/public/336/chronic+kidney+disease.zip"


@dataclass(frozen=True)
class RawDataset:
    """Rectangular raw table: feature columns, a target column, class order.

    Cells are floats, strings, or None for missing.  ``classes`` fixes the
    label index order (first appearance in the source) so that splits of
    one dataset always agree on the encoding.
    """

    feature_names: tuple
    columns: tuple           # per feature, tuple of cells
    target_name: str
    target: tuple            # raw label values, never missing
    classes: tuple
    kinds: tuple = ()        # per-feature hint: "numeric" | "nominal" | None

    def __post_init__(self):
        if len(self.columns) != len(self.feature_names):
            raise ValidationError("one column per feature name required")
        n = len(self.target)
        for name, col in zip(self.feature_names, self.columns):
            if len(col) != n:
                raise ValidationError(f"column {name!r} has {len(col)} rows, target has {n}")
        if not self.kinds:
            object.__setattr__(self, "kinds", (None,) * len(self.feature_names))
        unknown = set(self.target) - set(self.classes)
        if unknown:
            raise ValidationError(f"target values {sorted(map(str, unknown))} not in classes")

    @property
    def n_rows(self) -> int:
        return len(self.target)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def label_indices(self) -> np.ndarray:
        index = {c: i for i, c in enumerate(self.classes)}
        return np.array([index[v] for v in self.target], dtype=np.int64)

    def take(self, row_indices) -> "RawDataset":
        idx = list(int(i) for i in row_indices)
        return RawDataset(
            feature_names=self.feature_names,
            columns=tuple(tuple(col[i] for i in idx) for col in self.columns),
            target_name=self.target_name,
            target=tuple(self.target[i] for i in idx),
            classes=self.classes,
            kinds=self.kinds,
        )


def _clean_cell(raw: str, missing_tokens):
    v = raw.strip().strip("'\"").strip()
    return None if v in missing_tokens else v


def _first_appearance(values):
    seen, out = set(), []
    for v in values:
        if v not in seen:
            seen.add(v)
            out.append(v)
    return tuple(out)


def _load_csv(path, target, missing_tokens, delimiter=","):
    import csv as _csv

    with open(path, newline="", encoding="utf-8") as fh:
        reader = _csv.reader(fh, delimiter=delimiter)
        rows = list(reader)
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if not rows:
        raise DatasetFormatError(f"{path}: no rows")
    header = [h.strip().strip("'\"") for h in rows[0]]
    if target not in header:
        raise DatasetFormatError(f"{path}: target column {target!r} not in header {header}")
    t_idx = header.index(target)
    table = []
    for line_no, row in enumerate(rows[1:], start=2):
        if len(row) == len(header) + 1 and row[-1].strip() == "":
            row = row[:-1]          # tolerate a trailing comma
        if len(row) != len(header):
            raise DatasetFormatError(
                f"{path}: line {line_no}: expected {len(header)} fields, got {len(row)}")
        table.append([_clean_cell(c, missing_tokens) for c in row])
    return header, t_idx, table, [None] * len(header)


def _parse_arff_attribute(line, line_no, path):
    body = line.split(None, 1)[1].strip()
    if body.startswith(("'", '"')):
        quote = body[0]
        end = body.index(quote, 1)
        name = body[1:end]
        rest = body[end + 1:].strip()
    else:
        parts = body.split(None, 1)
        if len(parts) != 2:
            raise DatasetFormatError(f"{path}: line {line_no}: malformed @attribute")
        name, rest = parts
    rest = rest.strip()
    if rest.startswith("{"):
        if not rest.endswith("}"):
            raise DatasetFormatError(f"{path}: line {line_no}: unterminated nominal set")
        return name, "nominal"
    if rest.lower() in ("numeric", "real", "integer"):
        return name, "numeric"
    raise DatasetFormatError(
        f"{path}: line {line_no}: unsupported attribute type {rest!r}")


def _load_arff(path, target, missing_tokens):
    names, kinds = [], []
    table = []
    in_data = False
    with open(path, encoding="utf-8", errors="replace") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("%"):
                continue
            low = line.lower()
            if not in_data:
                if low.startswith("@relation"):
                    continue
                if low.startswith("@attribute"):
                    name, kind = _parse_arff_attribute(line, line_no, path)
                    names.append(name)
                    kinds.append(kind)
                    continue
                if low.startswith("@data"):
                    in_data = True
                    continue
                raise DatasetFormatError(f"{path}: line {line_no}: unexpected {line!r}")
            cells = [c for c in line.split(",")]
            if len(cells) == len(names) + 1 and cells[-1].strip() == "":
                cells = cells[:-1]
            if len(cells) != len(names):
                raise DatasetFormatError(
                    f"{path}: line {line_no}: expected {len(names)} fields, got {len(cells)}")
            table.append([_clean_cell(c, missing_tokens) for c in cells])
    if not in_data or not names:
        raise DatasetFormatError(f"{path}: not a usable ARFF file (no @data section)")
    if target not in names:
        raise DatasetFormatError(f"{path}: target column {target!r} not among attributes {names}")
    return names, names.index(target), table, kinds


def load_dataset(path, format: str = "csv", target: str = "class",
                 missing_tokens=DEFAULT_MISSING_TOKENS, delimiter=",") -> RawDataset:
    """Load a CSV or ARFF table into a RawDataset.

    Cells matching ``missing_tokens`` (after whitespace stripping) become
    None; ARFF numeric declarations force float parsing and nominal ones
    mark the column categorical for the quantizer.
    """
    path = Path(path)
    if not path.exists():
        raise DatasetFormatError(f"dataset file not found: {path}")
    tokens = set(missing_tokens)
    if format == "csv":
        header, t_idx, table, kinds = _load_csv(path, target, tokens, delimiter)
    elif format == "arff":
        header, t_idx, table, kinds = _load_arff(path, target, tokens)
    else:
        raise ConfigError(f"unknown dataset format {format!r}")

    n_col = len(header)
    columns = [[] for _ in range(n_col)]
    for r_idx, row in enumerate(table):
        for c_idx in range(n_col):
            columns[c_idx].append(row[c_idx])
    target_vals = columns[t_idx]
    if any(v is None for v in target_vals):
        bad = next(i for i, v in enumerate(target_vals) if v is None)
        raise DatasetFormatError(f"{path}: data row {bad + 1}: missing target value")

    feat_names, feat_cols, feat_kinds = [], [], []
    for c_idx in range(n_col):
        if c_idx == t_idx:
            continue
        col = columns[c_idx]
        if kinds[c_idx] == "numeric":
            parsed = []
            for r_idx, v in enumerate(col):
                if v is None:
                    parsed.append(None)
                    continue
                try:
                    parsed.append(float(v))
                except ValueError:
                    raise DatasetFormatError(
                        f"{path}: row {r_idx + 1}, column {header[c_idx]!r}: "
                        f"non-numeric value {v!r} in a numeric attribute") from None
            col = parsed
        feat_names.append(header[c_idx])
        feat_cols.append(tuple(col))
        feat_kinds.append(kinds[c_idx])

    return RawDataset(
        feature_names=tuple(feat_names),
        columns=tuple(feat_cols),
        target_name=target,
        target=tuple(target_vals),
        classes=_first_appearance(target_vals),
        kinds=tuple(feat_kinds),
    )


def split(data: RawDataset, n_train: int, seed: int, stratify: str = "none",
          positive_fraction: float = 0.5, positive_label=None):
    """Seeded train/test split; partitions are disjoint and exhaustive.

    ``stratify='balanced'`` fills the training set with the requested class
    mix (positive_fraction of ``positive_label``); everything not drawn for
    training becomes the test set.
    """
    if not 0 < n_train < data.n_rows:
        raise ValidationError(f"n_train must be in (0, {data.n_rows}), got {n_train}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(data.n_rows)
    if stratify == "none":
        train_idx = order[:n_train]
        test_idx = order[n_train:]
    elif stratify == "balanced":
        if positive_label is None or positive_label not in data.classes:
            raise ConfigError(f"balanced split needs a positive label among {data.classes}")
        want_pos = int(round(n_train * positive_fraction))
        want_neg = n_train - want_pos
        have_pos = sum(1 for v in data.target if v == positive_label)
        have_neg = data.n_rows - have_pos
        if want_pos > have_pos or want_neg > have_neg:
            raise ValidationError(
                f"cannot draw {want_pos} positive + {want_neg} negative rows: "
                f"dataset has {have_pos} positive and {have_neg} negative")
        train_sel, test_sel = [], []
        taken_pos = taken_neg = 0
        for i in order:
            is_pos = data.target[i] == positive_label
            if is_pos and taken_pos < want_pos:
                train_sel.append(i)
                taken_pos += 1
            elif not is_pos and taken_neg < want_neg:
                train_sel.append(i)
                taken_neg += 1
            else:
                test_sel.append(i)
        train_idx, test_idx = np.array(train_sel), np.array(test_sel)
    else:
        raise ConfigError(f"unknown stratify mode {stratify!r}")
    return data.take(train_idx), data.take(test_idx)


# ---------------------------------------------------------------------------
# model persistence

def _spec_to_dict(spec: FeatureSpec) -> dict:
    return {
        "kind": spec.kind,
        "has_missing": spec.has_missing,
        "name": spec.name,
        "levels": spec.levels,
        "vmin": spec.vmin,
        "vmax": spec.vmax,
        "categories": list(spec.categories),
    }


def _spec_from_dict(d: dict) -> FeatureSpec:
    return FeatureSpec(
        kind=d["kind"],
        has_missing=d["has_missing"],
        name=d["name"],
        levels=d["levels"],
        vmin=d["vmin"],
        vmax=d["vmax"],
        categories=tuple(d["categories"]),
    )


def _model_payload(model: DINModel) -> dict:
    topo = model.topology
    return {
        "beta": model.beta,
        "seed": model.seed,
        "feature_names": list(model.feature_names),
        "class_names": list(model.class_names),
        "class_alignment": list(model.class_alignment),
        "layers": [
            {"n_in": list(layer.n_in), "n_out": list(layer.n_out)}
            for layer in topo.layers
        ],
        "mux_groups": [[list(g) for g in stage] for stage in topo.mux_groups],
        "quantizers": [_spec_to_dict(s) for s in model.quantizers],
        "nodes": [
            {
                "layer": layer,
                "position": pos,
                "n_in": node.n_in,
                "n_out": node.n_out,
                "channel": node.channel.p.tolist(),
                "mi_in_y": node.mi_in_y,
                "mi_out_y": node.mi_out_y,
                "iterations": node.diagnostics.iterations,
                "converged": node.diagnostics.converged,
                "i_in_out": node.diagnostics.i_in_out,
                "i_y_out": node.diagnostics.i_y_out,
            }
            for (layer, pos), node in sorted(model.nodes.items())
        ],
    }


def _canonical(payload: dict) -> bytes:
    return json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")


def save_model(model: DINModel, path) -> None:
    """Write the model as versioned JSON with a payload checksum."""
    payload = _model_payload(model)
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "sha256": hashlib.sha256(_canonical(payload)).hexdigest(),
        "payload": payload,
    }
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_model(path) -> DINModel:
    """Read a model file back; checksum or version trouble raises."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ModelFormatError(f"{path}: not a valid model file ({exc})") from None
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise ModelFormatError(f"{path}: not a {MODEL_FORMAT} file")
    if doc.get("version") != MODEL_VERSION:
        raise ModelVersionError(
            f"{path}: format version {doc.get('version')!r} is not supported "
            f"(this build reads version {MODEL_VERSION})")
    payload = doc.get("payload")
    digest = hashlib.sha256(_canonical(payload)).hexdigest()
    if digest != doc.get("sha256"):
        raise ModelFormatError(f"{path}: checksum mismatch, file is corrupt")

    layers = tuple(
        LayerSpec(n_in=tuple(d["n_in"]), n_out=tuple(d["n_out"]))
        for d in payload["layers"]
    )
    topo = Topology(
        layers=layers,
        mux_groups=tuple(tuple(tuple(g) for g in stage) for stage in payload["mux_groups"]),
    )
    nodes = {}
    for nd in payload["nodes"]:
        diag = IBDiagnostics(
            iterations=nd["iterations"],
            lagrangian_trace=(),
            i_in_out=nd["i_in_out"],
            i_y_out=nd["i_y_out"],
            converged=nd["converged"],
        )
        nodes[(nd["layer"], nd["position"])] = TrainedNode(
            channel=ConditionalMatrix(np.array(nd["channel"], dtype=np.float64)),
            n_in=nd["n_in"],
            n_out=nd["n_out"],
            diagnostics=diag,
            mi_in_y=nd["mi_in_y"],
            mi_out_y=nd["mi_out_y"],
        )
    return DINModel(
        topology=topo,
        nodes=nodes,
        quantizers=tuple(_spec_from_dict(d) for d in payload["quantizers"]),
        feature_names=tuple(payload["feature_names"]),
        class_names=tuple(payload["class_names"]),
        class_alignment=tuple(payload["class_alignment"]),
        beta=payload["beta"],
        seed=payload["seed"],
    )


# ---------------------------------------------------------------------------
# dataset fetching

def fetch_ckd(dest_dir, url: str = CKD_URL, sha256: str | None = None) -> Path:
    """Download the UCI kidney-disease archive and extract its ARFF files.

    Verifies the archive checksum when one is supplied, then sanity-checks
    the extracted table (400 rows, 24 features, two classes).  Returns the
    path of the preferred ('full') ARFF file.
    """
    dest = Path(dest_dir)
    dest.mkdir(parents=True, exist_ok=True)
    with urllib.request.urlopen(url, timeout=60) as resp:
        blob = resp.read()
    if sha256 is not None:
        digest = hashlib.sha256(blob).hexdigest()
        if digest != sha256.lower():
            raise DatasetFormatError(
                f"downloaded archive checksum {digest} does not match expected {sha256}")
    extracted = []
    with zipfile.ZipFile(io.BytesIO(blob)) as zf:
        for info in zf.infolist():
            if info.filename.lower().endswith(".arff"):
                name = Path(info.filename).name
                (dest / name).write_bytes(zf.read(info))
                extracted.append(dest / name)
    if not extracted:
        raise DatasetFormatError("archive contained no ARFF files")
    preferred = [p for p in extracted if "full" in p.name.lower()] or extracted
    target = preferred[0]
    check_ckd_shape(load_dataset(target, format="arff", target="class"))
    return target


def check_ckd_shape(data: RawDataset) -> None:
    """Assert the loaded table matches the published kidney-disease shape."""
    problems = []
    if data.n_rows != 400:
        problems.append(f"{data.n_rows} rows (expected 400)")
    if data.n_features != 24:
        problems.append(f"{data.n_features} features (expected 24)")
    if sorted(map(str, data.classes)) != ["ckd", "notckd"]:
        problems.append(f"classes {list(data.classes)} (expected ckd/notckd)")
    if problems:
        raise DatasetFormatError("unexpected kidney-disease table: " + "; ".join(problems))
