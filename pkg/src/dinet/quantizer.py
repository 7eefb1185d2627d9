"""Map raw tabular columns onto finite integer alphabets.

Continuous columns get uniform bins between the observed training min and
max; categorical columns get a dictionary in first-appearance order.  A
column containing missing cells reserves one dedicated trailing symbol for
them.  Specs are fitted on training data only and then reused, clamping
out-of-range values to the edge bins, so nothing leaks from the test split.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import SchemaMismatchError, ValidationError

CATEGORICAL_MAX_DISTINCT = 16

CONTINUOUS = "continuous"
CATEGORICAL = "categorical"


@dataclass(frozen=True)
class FeatureSpec:
    kind: str
    has_missing: bool
    name: str = ""
    levels: int | None = None          # continuous only
    vmin: float | None = None
    vmax: float | None = None
    categories: tuple = ()             # categorical only, first-appearance order

    def __post_init__(self):
        if self.kind == CONTINUOUS:
            if self.levels is None or self.levels < 1:
                raise ValidationError("continuous spec needs levels >= 1")
            if self.vmin is None or self.vmax is None or self.vmin > self.vmax:
                raise ValidationError("continuous spec needs vmin <= vmax")
        elif self.kind == CATEGORICAL:
            if not self.categories:
                raise ValidationError("categorical spec needs a non-empty dictionary")
        else:
            raise ValidationError(f"unknown feature kind {self.kind!r}")

    @property
    def cardinality(self) -> int:
        base = self.levels if self.kind == CONTINUOUS else len(self.categories)
        return base + (1 if self.has_missing else 0)

    @property
    def missing_symbol(self) -> int:
        # defined as the last symbol whenever has_missing
        return self.levels if self.kind == CONTINUOUS else len(self.categories)


def _try_floats(values):
    """Parse every non-missing cell as float, or give up on the column."""
    out = []
    for v in values:
        if isinstance(v, (int, float)) and not isinstance(v, bool):
            out.append(float(v))
            continue
        try:
            out.append(float(str(v).strip()))
        except (TypeError, ValueError):
            return None
    return out


def fit_quantizer(raw_column, requested_levels: int | None = None,
                  kind: str | None = None, name: str = "",
                  categorical_max_distinct: int = CATEGORICAL_MAX_DISTINCT) -> FeatureSpec:
    """Fit a FeatureSpec on one raw column (missing cells are None).

    Kind resolution when not forced: non-numeric columns are categorical;
    numeric columns with at most ``categorical_max_distinct`` distinct
    values are treated as categorical symbols unless an explicit level
    count asks for binning; the rest are continuous.
    ``requested_levels=None`` means one bin per distinct training value.
    """
    values = list(raw_column)
    present = [v for v in values if v is not None]
    if not present:
        raise ValidationError(f"feature {name!r}: column is entirely missing")
    has_missing = len(present) < len(values)

    floats = _try_floats(present)
    if kind is None:
        if floats is None:
            kind = CATEGORICAL
        elif requested_levels is None and len(set(floats)) <= categorical_max_distinct:
            kind = CATEGORICAL
        else:
            kind = CONTINUOUS

    if kind == CATEGORICAL:
        source = floats if floats is not None else present
        seen, cats = set(), []
        for v in source:
            if v not in seen:
                seen.add(v)
                cats.append(v)
        return FeatureSpec(kind=CATEGORICAL, has_missing=has_missing,
                           name=name, categories=tuple(cats))

    if floats is None:
        raise ValidationError(f"feature {name!r}: non-numeric values in a continuous column")
    vmin, vmax = min(floats), max(floats)
    if vmin == vmax:
        warnings.warn(f"feature {name!r} is constant; using a single degenerate bin")
        return FeatureSpec(kind=CONTINUOUS, has_missing=has_missing, name=name,
                           levels=1, vmin=vmin, vmax=vmax)
    if requested_levels is None:
        levels = len(set(floats))
    else:
        if requested_levels < 2:
            raise ValidationError(f"feature {name!r}: need at least 2 levels")
        levels = requested_levels
    return FeatureSpec(kind=CONTINUOUS, has_missing=has_missing, name=name,
                       levels=levels, vmin=vmin, vmax=vmax)


def apply_quantizer(spec: FeatureSpec, raw_column) -> np.ndarray:
    """Map raw cells to integer symbols under a fitted spec.

    Continuous values clamp to the edge bins outside [vmin, vmax]; unseen
    categories map to the missing symbol when one exists, otherwise raise.
    """
    n = len(raw_column)
    out = np.zeros(n, dtype=np.int64)
    if spec.kind == CONTINUOUS:
        span = spec.vmax - spec.vmin
        for i, v in enumerate(raw_column):
            if v is None:
                if not spec.has_missing:
                    raise SchemaMismatchError(
                        f"feature {spec.name!r}: missing value but spec has no missing symbol")
                out[i] = spec.missing_symbol
                continue
            x = float(v) if not isinstance(v, str) else float(v.strip())
            if span == 0:
                out[i] = 0
            else:
                b = int((x - spec.vmin) / span * spec.levels)
                out[i] = min(max(b, 0), spec.levels - 1)
        return out

    index = {c: k for k, c in enumerate(spec.categories)}
    numeric_cats = spec.categories and isinstance(spec.categories[0], float)
    for i, v in enumerate(raw_column):
        if v is None:
            if not spec.has_missing:
                raise SchemaMismatchError(
                    f"feature {spec.name!r}: missing value but spec has no missing symbol")
            out[i] = spec.missing_symbol
            continue
        key = v
        if numeric_cats and not isinstance(v, float):
            try:
                key = float(str(v).strip())
            except (TypeError, ValueError):
                key = v
        k = index.get(key)
        if k is None:
            if spec.has_missing:
                out[i] = spec.missing_symbol
            else:
                raise SchemaMismatchError(
                    f"feature {spec.name!r}: unseen category {v!r} and no missing symbol")
        else:
            out[i] = k
    return out


@dataclass(frozen=True)
class QuantizedDataset:
    """Integer symbol columns plus integer class labels."""

    columns: tuple          # one int64 vector per feature
    cardinalities: tuple
    labels: np.ndarray
    n_class: int

    def __post_init__(self):
        cols = tuple(np.asarray(c, dtype=np.int64) for c in self.columns)
        labels = np.asarray(self.labels, dtype=np.int64)
        if len(cols) != len(self.cardinalities):
            raise ValidationError("one cardinality per column required")
        n = labels.size
        for c, card in zip(cols, self.cardinalities):
            if c.size != n:
                raise ValidationError("columns and labels must have equal length")
            if c.size and (c.min() < 0 or c.max() >= card):
                raise ValidationError(f"symbols outside [0, {card})")
        if n and (labels.min() < 0 or labels.max() >= self.n_class):
            raise ValidationError(f"labels outside [0, {self.n_class})")
        object.__setattr__(self, "columns", cols)
        object.__setattr__(self, "cardinalities", tuple(int(c) for c in self.cardinalities))
        object.__setattr__(self, "labels", labels)

    @property
    def n_rows(self) -> int:
        return self.labels.size

    @property
    def n_features(self) -> int:
        return len(self.columns)
