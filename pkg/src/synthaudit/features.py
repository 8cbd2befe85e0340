"""Fixed-length feature vectors over datasets for the attack classifiers.

Three summaries of increasing granularity:

  naive  per continuous attribute (mean, median, population variance); per
         categorical attribute (count of distinct observed categories,
         most-frequent category index, least-frequent category index).
  hist   per attribute, the normalised histogram over its discrete view:
         category frequencies, or uniform-bin frequencies for continuous.
         Every block sums to one; zero-count categories are included.
  corr   Pearson correlations of all unordered column pairs after encoding:
         categoricals expand to one-hot indicators, continuous columns are
         reduced to their bin index. Upper triangle, diagonal excluded.

Vector layout follows schema order. Frequency ties in `naive` resolve to the
lowest category index. Zero-variance columns in `corr` contribute 0.
"""

from __future__ import annotations

import numpy as np

from synthaudit.data import Dataset, SchemaMetadata
from synthaudit.errors import EmptyDataset, InvalidConfig

FEATURE_SETS = ("naive", "hist", "corr")


def _require_rows(dataset: Dataset):
    if dataset.n_records == 0:
        raise EmptyDataset("cannot extract features from an empty dataset")


def f_naive(dataset: Dataset) -> np.ndarray:
    _require_rows(dataset)
    out = []
    for j, spec in enumerate(dataset.schema.attributes):
        col = dataset.values[:, j]
        if spec.is_categorical:
            counts = np.bincount(col.astype(np.intp), minlength=len(spec.categories))
            out.append(float(np.count_nonzero(counts)))
            out.append(float(np.argmax(counts)))
            out.append(float(np.argmin(counts)))
        else:
            out.append(float(col.mean()))
            out.append(float(np.median(col)))
            out.append(float(np.var(col)))
    return np.asarray(out, dtype=np.float64)


def _column_bins(col: np.ndarray, spec) -> np.ndarray:
    # vectorised twin of data.bin_index: same arithmetic, same clamping
    width = (spec.hi - spec.lo) / spec.bins
    idx = np.floor((col - spec.lo) / width).astype(np.intp)
    return np.clip(idx, 0, spec.bins - 1)


def f_hist(dataset: Dataset) -> np.ndarray:
    _require_rows(dataset)
    n = dataset.n_records
    blocks = []
    for j, spec in enumerate(dataset.schema.attributes):
        col = dataset.values[:, j]
        if spec.is_categorical:
            counts = np.bincount(col.astype(np.intp), minlength=len(spec.categories))
        else:
            counts = np.bincount(_column_bins(col, spec), minlength=spec.bins)
        blocks.append(counts / n)
    return np.concatenate(blocks)


def _corr_columns(dataset: Dataset) -> np.ndarray:
    cols = []
    for j, spec in enumerate(dataset.schema.attributes):
        col = dataset.values[:, j]
        if spec.is_categorical:
            idx = col.astype(np.intp)
            onehot = np.zeros((len(col), len(spec.categories)))
            onehot[np.arange(len(col)), idx] = 1.0
            cols.append(onehot)
        else:
            cols.append(_column_bins(col, spec).astype(np.float64)[:, None])
    return np.hstack(cols)


def f_corr(dataset: Dataset) -> np.ndarray:
    _require_rows(dataset)
    M = _corr_columns(dataset)
    Mc = M - M.mean(axis=0)
    norms = np.sqrt((Mc * Mc).sum(axis=0))
    d = M.shape[1]
    out = np.zeros(d * (d - 1) // 2)
    k = 0
    for i in range(d):
        for j in range(i + 1, d):
            if norms[i] > 0 and norms[j] > 0:
                out[k] = float(Mc[:, i] @ Mc[:, j]) / (norms[i] * norms[j])
            k += 1
    return out


def feature_length(schema: SchemaMetadata, feature_set: str) -> int:
    """Closed-form vector length; extraction output always matches it."""
    if feature_set == "naive":
        return 3 * schema.n_columns
    if feature_set == "hist":
        return sum(a.domain_size for a in schema.attributes)
    if feature_set == "corr":
        d = sum(len(a.categories) if a.is_categorical else 1 for a in schema.attributes)
        return d * (d - 1) // 2
    raise InvalidConfig(f"unknown feature set {feature_set!r}")


def extract(dataset: Dataset, feature_set: str) -> np.ndarray:
    if feature_set == "naive":
        return f_naive(dataset)
    if feature_set == "hist":
        return f_hist(dataset)
    if feature_set == "corr":
        return f_corr(dataset)
    raise InvalidConfig(f"unknown feature set {feature_set!r}")
