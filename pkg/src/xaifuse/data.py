"""Dataset ingestion, cleaning, labeling, balancing, splitting, and synthesis.

All operations are pure: they take a Dataset and return a new one, leaving
the input untouched. Row matrices are float64 with NaN as the missing-value
sentinel until `clean` removes affected rows.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .seeding import rng_for


class DataError(Exception):
    """Raised for unusable input data (missing files, bad headers, empty sets)."""


# Raw label ids that may appear in vehicle-trace exports: 0 is benign, the
# rest are distinct misbehavior modes (constant position, constant offset,
# random position, random offset, eventual stop).
VEREMI_LABEL_ROSTER = (0, 1, 2, 4, 8, 16)
VEREMI_LABEL_NAMES = {
    0: "benign",
    1: "constant",
    2: "constant_offset",
    4: "random",
    8: "random_offset",
    16: "eventual_stop",
}

VEREMI_FEATURES = ("pos_x", "pos_y", "pos_z", "spd_x", "spd_y", "spd_z")

# Per-sensor normal operating ranges for the ten on-vehicle checks.
# Binary sensors report 1 when the check passes; continuous sensors are
# in-range when lower <= value <= upper.
SENSOR_RANGES: dict[str, tuple[float, float] | None] = {
    "Formality": (1.0, 10.0),
    "Location": None,
    "Frequency": (1.0, 10.0),
    "Speed": (50.0, 90.0),
    "Correlation": None,
    "Lane Alignment": (1.0, 3.0),
    "Headway Time": (0.3, 0.95),
    "Protocol": (1.0, 10000.0),
    "Plausibility": (50.0, 200.0),
    "Consistency": None,
}

SENSOR_FEATURES = tuple(SENSOR_RANGES)


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered feature names plus the label column identifier."""

    feature_names: tuple[str, ...]
    label_column: str = "label"

    def __post_init__(self) -> None:
        names = tuple(self.feature_names)
        object.__setattr__(self, "feature_names", names)
        if len(set(names)) != len(names):
            raise DataError("feature names must be unique")
        if self.label_column in names:
            raise DataError("label column must not be a feature")

    @property
    def feature_count(self) -> int:
        return len(self.feature_names)

    def index_of(self, name: str) -> int:
        try:
            return self.feature_names.index(name)
        except ValueError:
            raise DataError(f"unknown feature: {name!r}") from None


VEREMI_SCHEMA = FeatureSchema(VEREMI_FEATURES, label_column="attackerType")
SENSOR_SCHEMA = FeatureSchema(SENSOR_FEATURES, label_column="label")


@dataclass(frozen=True)
class Dataset:
    """Immutable table of feature rows with integer class labels."""

    schema: FeatureSchema
    rows: np.ndarray
    labels: np.ndarray

    def __post_init__(self) -> None:
        rows = np.asarray(self.rows, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if rows.ndim != 2 or rows.shape[1] != self.schema.feature_count:
            raise DataError(
                f"row matrix has shape {rows.shape}, expected "
                f"(n, {self.schema.feature_count})"
            )
        if labels.shape != (rows.shape[0],):
            raise DataError("rows and labels must have equal length")
        rows = rows.copy()
        labels = labels.copy()
        rows.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "labels", labels)

    @property
    def n_rows(self) -> int:
        return self.rows.shape[0]

    @property
    def class_counts(self) -> dict[int, int]:
        values, counts = np.unique(self.labels, return_counts=True)
        return {int(v): int(c) for v, c in zip(values, counts)}

    def select(self, indices: np.ndarray) -> "Dataset":
        return Dataset(self.schema, self.rows[indices], self.labels[indices])

    def project(self, feature_names: list[str] | tuple[str, ...]) -> "Dataset":
        """Dataset restricted to the named feature columns, in the given order."""
        if not feature_names:
            raise DataError("feature list must not be empty")
        cols = [self.schema.index_of(name) for name in feature_names]
        schema = FeatureSchema(tuple(feature_names), self.schema.label_column)
        return Dataset(schema, self.rows[:, cols], self.labels)


@dataclass(frozen=True)
class ScalerParams:
    """Per-feature train-set mean and population standard deviation."""

    mean: np.ndarray
    sd: np.ndarray
    constant_columns: tuple[int, ...] = ()

    def transform(self, rows: np.ndarray) -> np.ndarray:
        sd = np.where(self.sd > 0, self.sd, 1.0)
        return (rows - self.mean) / sd


@dataclass(frozen=True)
class SamplerConfig:
    seed: int
    train_fraction: float = 0.7

    def __post_init__(self) -> None:
        if not 0.0 < self.train_fraction < 1.0:
            raise DataError("train_fraction must lie strictly between 0 and 1")


def load_csv(path: str | Path, schema: FeatureSchema) -> Dataset:
    """Load a comma-separated export whose header matches the schema.

    Header order does not matter; columns are reordered to schema order.
    Empty or non-numeric cells become NaN sentinels for `clean` to remove.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"empty file: {path}") from None
        header = [h.strip() for h in header]
        expected = set(schema.feature_names) | {schema.label_column}
        if set(header) != expected:
            missing = sorted(expected - set(header))
            extra = sorted(set(header) - expected)
            raise DataError(
                f"header mismatch in {path}: missing={missing} unexpected={extra}"
            )
        col_of = {name: i for i, name in enumerate(header)}
        feat_cols = [col_of[name] for name in schema.feature_names]
        label_col = col_of[schema.label_column]

        rows: list[list[float]] = []
        labels: list[int] = []
        for record in reader:
            if not record:
                continue
            row = []
            for c in feat_cols:
                cell = record[c].strip() if c < len(record) else ""
                try:
                    row.append(float(cell))
                except ValueError:
                    row.append(np.nan)
            cell = record[label_col].strip() if label_col < len(record) else ""
            try:
                label = int(float(cell))
            except ValueError:
                # Unreadable label marks the whole row for removal.
                label = 0
                row = [np.nan] * len(feat_cols)
            rows.append(row)
            labels.append(label)
    if not rows:
        raise DataError(f"no data rows in {path}")
    return Dataset(schema, np.asarray(rows, dtype=np.float64), np.asarray(labels))


def save_csv(dataset: Dataset, path: str | Path) -> None:
    """Write a dataset in the same format `load_csv` reads."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(dataset.schema.feature_names) + [dataset.schema.label_column])
        for row, label in zip(dataset.rows, dataset.labels):
            writer.writerow([repr(float(v)) for v in row] + [int(label)])


def clean(dataset: Dataset) -> Dataset:
    """Drop rows with missing cells, then exact duplicate (row, label) pairs.

    The first occurrence of each duplicate group survives and relative
    order is preserved.
    """
    complete = ~np.isnan(dataset.rows).any(axis=1)
    rows = dataset.rows[complete]
    labels = dataset.labels[complete]
    if rows.shape[0] == 0:
        raise DataError("all rows removed during cleaning")
    combined = np.column_stack([rows, labels.astype(np.float64)])
    _, first = np.unique(combined, axis=0, return_index=True)
    keep = np.sort(first)
    return Dataset(dataset.schema, rows[keep], labels[keep])


def map_labels(dataset: Dataset, mode: str) -> Dataset:
    """Collapse raw labels to {0,1} (binary) or validate-and-keep (multiclass)."""
    if mode not in ("binary", "multiclass"):
        raise DataError(f"unknown label mode: {mode!r}")
    raw = dataset.labels
    allowed = set(VEREMI_LABEL_ROSTER)
    unknown = sorted(set(int(v) for v in np.unique(raw)) - allowed)
    if unknown:
        raise DataError(f"unknown raw label values: {unknown}")
    if mode == "binary":
        labels = (raw != 0).astype(np.int64)
    else:
        labels = raw
    return Dataset(dataset.schema, dataset.rows, labels)


def undersample(dataset: Dataset, seed: int) -> Dataset:
    """Randomly delete majority-class rows until every class matches the minority.

    Deletion is uniform without replacement per class; survivors keep their
    original order. Deterministic for a fixed seed.
    """
    counts = dataset.class_counts
    if len(counts) < 2:
        raise DataError("undersampling needs at least two classes")
    target = min(counts.values())
    rng = rng_for(seed, "undersample")
    keep: list[np.ndarray] = []
    for cls in sorted(counts):
        idx = np.nonzero(dataset.labels == cls)[0]
        if len(idx) > target:
            idx = idx[rng.choice(len(idx), size=target, replace=False)]
        keep.append(idx)
    order = np.sort(np.concatenate(keep))
    return dataset.select(order)


def split_and_scale(
    dataset: Dataset, cfg: SamplerConfig
) -> tuple[Dataset, Dataset, ScalerParams]:
    """Stratified seeded train/test split followed by train-fit standardization.

    Both partitions come back already transformed to (x - mean) / sd with
    population-sd statistics fit on the train rows only. Constant columns
    pass through unscaled and are reported in ScalerParams.constant_columns.
    """
    if dataset.n_rows < 10:
        raise DataError("need at least 10 rows to split")
    rng = rng_for(cfg.seed, "split")
    train_idx: list[np.ndarray] = []
    test_idx: list[np.ndarray] = []
    for cls in sorted(dataset.class_counts):
        idx = np.nonzero(dataset.labels == cls)[0]
        if len(idx) < 2:
            raise DataError(f"class {cls} has fewer than 2 rows, cannot stratify")
        perm = idx[rng.permutation(len(idx))]
        n_train = int(round(len(idx) * cfg.train_fraction))
        n_train = min(max(n_train, 1), len(idx) - 1)
        train_idx.append(perm[:n_train])
        test_idx.append(perm[n_train:])
    train_rows = np.sort(np.concatenate(train_idx))
    test_rows = np.sort(np.concatenate(test_idx))

    x_train = dataset.rows[train_rows]
    mean = x_train.mean(axis=0)
    sd = x_train.std(axis=0)  # population convention (divide by n)
    constant = tuple(int(j) for j in np.nonzero(sd == 0)[0])
    scaler = ScalerParams(mean=mean, sd=sd, constant_columns=constant)

    train = Dataset(dataset.schema, scaler.transform(x_train), dataset.labels[train_rows])
    test = Dataset(
        dataset.schema, scaler.transform(dataset.rows[test_rows]), dataset.labels[test_rows]
    )
    return train, test, scaler


def sensor_range_violations(rows: np.ndarray) -> np.ndarray:
    """Count, per row, how many of the ten sensor checks fail.

    Continuous sensors fail outside [lower, upper]; binary sensors fail
    when the reported check value is not 1.
    """
    rows = np.asarray(rows, dtype=np.float64)
    violations = np.zeros(rows.shape[0], dtype=np.int64)
    for j, name in enumerate(SENSOR_FEATURES):
        bounds = SENSOR_RANGES[name]
        col = rows[:, j]
        if bounds is None:
            violations += (col != 1.0).astype(np.int64)
        else:
            lo, hi = bounds
            violations += ((col < lo) | (col > hi)).astype(np.int64)
    return violations


def generate_sensor_dataset(
    n: int,
    anomaly_fraction: float,
    seed: int,
    violable_features: tuple[str, ...] | list[str] | None = None,
) -> Dataset:
    """Synthesize an n-row ten-sensor dataset with a planted anomaly fraction.

    Benign rows draw every continuous sensor uniformly inside its normal
    range and report 1 on the binary checks. Each anomalous row picks a
    seeded nonempty subset of `violable_features` (default: all ten) and
    violates each picked sensor: continuous values land outside the range
    by 10%..100% of the range width, binary checks flip to 0. Labels are
    1 exactly when at least one check fails.
    """
    if n < 2:
        raise DataError("need n >= 2")
    n_anom = int(round(n * anomaly_fraction))
    if n_anom <= 0 or n_anom >= n:
        raise DataError(
            f"anomaly fraction {anomaly_fraction} leaves no rows in one class at n={n}"
        )
    if violable_features is None:
        violable = list(SENSOR_FEATURES)
    else:
        violable = list(violable_features)
        for name in violable:
            if name not in SENSOR_RANGES:
                raise DataError(f"unknown sensor feature: {name!r}")
        if not violable:
            raise DataError("violable_features must be nonempty")

    rng = rng_for(seed, "sensor-generate")
    p = len(SENSOR_FEATURES)
    rows = np.empty((n, p), dtype=np.float64)
    for j, name in enumerate(SENSOR_FEATURES):
        bounds = SENSOR_RANGES[name]
        if bounds is None:
            rows[:, j] = 1.0
        else:
            lo, hi = bounds
            rows[:, j] = rng.uniform(lo, hi, size=n)

    labels = np.zeros(n, dtype=np.int64)
    anom_rows = rng.choice(n, size=n_anom, replace=False)
    labels[anom_rows] = 1
    violable_idx = np.array([SENSOR_FEATURES.index(f) for f in violable])
    for i in anom_rows:
        k = int(rng.integers(1, len(violable_idx) + 1))
        picked = rng.choice(violable_idx, size=k, replace=False)
        for j in picked:
            bounds = SENSOR_RANGES[SENSOR_FEATURES[j]]
            if bounds is None:
                rows[i, j] = 0.0
            else:
                lo, hi = bounds
                width = hi - lo
                offset = rng.uniform(0.1 * width, width)
                if rng.random() < 0.5:
                    rows[i, j] = lo - offset
                else:
                    rows[i, j] = hi + offset
    return Dataset(SENSOR_SCHEMA, rows, labels)
