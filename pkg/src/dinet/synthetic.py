"""Synthetic kidney-disease-like table for offline tests and demos.

Same shape as the real thing: 24 mixed-type features (continuous labs,
small-integer grades, yes/no flags), scattered missing cells, and a binary
target.  The class structure is planted: feature ``lab_0`` separates the
classes deterministically, several others correlate with the target at
varying strength, and a few are pure noise.
"""

from __future__ import annotations

import numpy as np

from .dataio import RawDataset

N_FEATURES = 24


def make_synthetic_ckd(n_rows: int = 400, seed: int = 0,
                       missing_rate: float = 0.06,
                       positive_fraction: float = 0.625) -> RawDataset:
    """Generate a table; positive_fraction matches the real 250/400 split."""
    rng = np.random.default_rng(seed)
    y = (rng.random(n_rows) < positive_fraction).astype(int)

    columns = {}
    # deterministic separator: disjoint class-conditional ranges, no missing
    columns["lab_0"] = np.where(y == 1,
                                rng.uniform(2.0, 3.0, n_rows),
                                rng.uniform(0.0, 1.0, n_rows))
    for k in range(1, 8):
        shift = 1.5 * y * (k % 3 + 1) / 3
        columns[f"lab_{k}"] = rng.normal(5.0 + shift, 1.0, n_rows) * (10 + k)
    for k in range(8, 12):
        lam = np.where(y == 1, 6.0, 3.0) if k % 2 else np.where(y == 1, 2.0, 4.0)
        columns[f"count_{k}"] = rng.poisson(lam).astype(float)
    for k in range(12, 15):
        columns[f"grade_{k}"] = np.minimum(
            rng.poisson(np.where(y == 1, 2.2, 0.4)), 5).astype(float)
    flags = {}
    for k in range(15, 21):
        p_flag = np.where(y == 1, 0.75, 0.2) if k % 2 else np.where(y == 1, 0.3, 0.7)
        flags[f"flag_{k}"] = np.where(rng.random(n_rows) < p_flag, "yes", "no")
    # pure-noise features
    columns["noise_21"] = rng.normal(0.0, 1.0, n_rows) * 100
    columns["noise_22"] = rng.integers(0, 9, n_rows).astype(float)
    flags["noise_23"] = np.where(rng.random(n_rows) < 0.5, "left", "right")

    names, cols, kinds = [], [], []
    for name, values in columns.items():
        cells = [float(v) for v in values]
        if name != "lab_0" and missing_rate > 0:
            mask = rng.random(n_rows) < missing_rate
            cells = [None if m else v for v, m in zip(cells, mask)]
        names.append(name)
        cols.append(tuple(cells))
        kinds.append("numeric")
    for name, values in flags.items():
        cells = [str(v) for v in values]
        if missing_rate > 0:
            mask = rng.random(n_rows) < missing_rate
            cells = [None if m else v for v, m in zip(cells, mask)]
        names.append(name)
        cols.append(tuple(cells))
        kinds.append("nominal")

    assert len(names) == N_FEATURES
    target = tuple("sick" if v else "healthy" for v in y)
    return RawDataset(
        feature_names=tuple(names),
        columns=tuple(cols),
        target_name="status",
        target=target,
        classes=("sick", "healthy"),
        kinds=tuple(kinds),
    )
