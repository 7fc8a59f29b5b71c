"""Dataset ingestion, standardization, synthetic generation and feature bounds."""

import csv
from dataclasses import dataclass

import numpy as np


class CsvFormatError(ValueError):
    """CSV could not be parsed; message carries the row/column location."""


@dataclass(frozen=True, eq=False)
class Dataset:
    """Dense design matrix plus labels. Immutable after construction.

    Identity semantics (no value equality): instances key caches of
    derived arrays elsewhere in the package.
    """

    features: np.ndarray          # (n, p)
    labels: np.ndarray            # (n,)
    feature_names: tuple | None = None

    def __post_init__(self):
        X = np.ascontiguousarray(np.asarray(self.features, dtype=np.float64))
        y = np.asarray(self.labels, dtype=np.float64).ravel()
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise ValueError(f"features must be a non-empty 2-d matrix, got shape {X.shape}")
        if y.shape[0] != X.shape[0]:
            raise ValueError(f"labels length {y.shape[0]} != number of rows {X.shape[0]}")
        if not np.all(np.isfinite(X)) or not np.all(np.isfinite(y)):
            raise ValueError("features and labels must be finite")
        if self.feature_names is not None and len(self.feature_names) != X.shape[1]:
            raise ValueError("feature_names length must match number of columns")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)
        if self.feature_names is not None:
            object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def p(self):
        return self.features.shape[1]


@dataclass(frozen=True)
class StandardizationParams:
    """Per-column means and standard deviations used to standardize features."""

    means: np.ndarray
    stds: np.ndarray              # 1.0 substituted where the column is constant

    def __post_init__(self):
        object.__setattr__(self, "means", np.asarray(self.means, dtype=np.float64))
        object.__setattr__(self, "stds", np.asarray(self.stds, dtype=np.float64))
        if np.any(self.stds <= 0):
            raise ValueError("stds must be strictly positive")


@dataclass(frozen=True)
class FeatureBounds:
    """Per-column maximum absolute values."""

    max_abs: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.max_abs, dtype=np.float64)
        if np.any(m < 0):
            raise ValueError("max_abs must be nonnegative")
        object.__setattr__(self, "max_abs", m)


def load_csv(path, label_column):
    """Load a headered, comma-separated CSV into a Dataset.

    Parameters
    ----------
    path : str or Path
        File to read (UTF-8, '.' decimal point).
    label_column : int or str
        Column index or header name holding the labels; it is removed
        from the feature matrix.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvFormatError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if isinstance(label_column, int):
            label_idx = label_column
            if not 0 <= label_idx < len(header):
                raise CsvFormatError(
                    f"{path}: label column index {label_column} out of range "
                    f"for {len(header)} columns")
        else:
            try:
                label_idx = header.index(label_column)
            except ValueError:
                raise CsvFormatError(
                    f"{path}: label column {label_column!r} not found in header {header}"
                ) from None

        rows = []
        labels = []
        for row_no, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise CsvFormatError(
                    f"{path}: row {row_no} has {len(row)} cells, expected {len(header)}")
            values = []
            for col_no, cell in enumerate(row):
                try:
                    values.append(float(cell))
                except ValueError:
                    raise CsvFormatError(
                        f"{path}: row {row_no}, column {col_no + 1} "
                        f"({header[col_no]!r}): cannot parse {cell!r} as a number"
                    ) from None
            labels.append(values.pop(label_idx))
            rows.append(values)

    if not rows:
        raise CsvFormatError(f"{path}: no data rows")
    names = tuple(h for i, h in enumerate(header) if i != label_idx)
    return Dataset(np.array(rows), np.array(labels), feature_names=names)


def save_csv(dataset, path, label_name="y"):
    """Write a Dataset back to the CSV format accepted by load_csv.

    Values are written with repr precision so a load/save/load round trip
    is exact.
    """
    names = dataset.feature_names
    if names is None:
        names = tuple(f"x{j + 1}" for j in range(dataset.p))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(names) + [label_name])
        for i in range(dataset.n):
            writer.writerow([repr(float(v)) for v in dataset.features[i]]
                            + [repr(float(dataset.labels[i]))])


def standardize(dataset):
    """Center each feature column and scale it to unit population variance.

    Constant columns are centered and their std is recorded as 1. Labels
    are untouched. Returns (standardized dataset, StandardizationParams).
    """
    if dataset.n < 2:
        raise ValueError("standardize needs at least 2 rows")
    X = dataset.features
    means = X.mean(axis=0)
    stds = X.std(axis=0)          # population (1/n) variance
    stds = np.where(stds > 0, stds, 1.0)
    Z = (X - means) / stds
    out = Dataset(Z, dataset.labels, feature_names=dataset.feature_names)
    return out, StandardizationParams(means, stds)


def generate_sparse_lasso(n, p, k_active, label_noise_std=1.0, seed=0,
                          weight_scale=1.0, weight_dist="normal"):
    """Synthetic regression data: standard normal features, sparse true weights.

    Exactly ``k_active`` coordinates (chosen uniformly at random) carry
    nonzero weights: i.i.d. N(0, weight_scale^2) by default, or random
    signs times weight_scale with weight_dist="rademacher" (equal-magnitude
    actives give much tighter run-to-run replication spread). Labels are
    X @ w_true plus N(0, label_noise_std^2) noise. A pure function of its
    arguments, including the seed.

    Returns (Dataset, true_weights).
    """
    if k_active > p:
        raise ValueError(f"k_active={k_active} exceeds p={p}")
    if weight_dist not in ("normal", "rademacher"):
        raise ValueError(f"unknown weight_dist {weight_dist!r}")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    w = np.zeros(p)
    if k_active > 0:
        active = rng.choice(p, size=k_active, replace=False)
        if weight_dist == "normal":
            w[active] = weight_scale * rng.standard_normal(k_active)
        else:
            w[active] = weight_scale * rng.choice([-1.0, 1.0], size=k_active)
    y = X @ w
    if label_noise_std > 0:
        y = y + label_noise_std * rng.standard_normal(n)
    return Dataset(X, y), w


def feature_bounds(dataset):
    """Per-column max |X[i, j]| as a FeatureBounds."""
    return FeatureBounds(np.abs(dataset.features).max(axis=0))
