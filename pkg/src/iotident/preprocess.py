"""Null handling, leakage-free session splitting, scaling, class balancing.

Splitting happens at session granularity: every row of a session lands
on exactly one side, so a device's power cycle can never leak between
train and test. All randomized steps take an explicit seed and are
exactly reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .base import Estimator
from .errors import (AllRowsDropped, DataError, EmptyClass,
                     InsufficientSessions, NotFitted)
from .features import (BINARY, CATEGORICAL, NUMERIC, FeatureSchema,
                       categorical_code, categorical_name)


@dataclass
class FeatureMatrix:
    """Row-aligned feature values, missing mask, labels and provenance.

    ``values`` stores numeric columns raw, binary columns as 0/1 and
    categorical columns as integer codes; ``missing`` flags entries whose
    statistic was undefined for that flow.
    """

    schema: FeatureSchema
    values: np.ndarray        # (n, k) float64
    missing: np.ndarray       # (n, k) bool
    labels: np.ndarray        # (n,) str
    session_ids: np.ndarray   # (n,) str
    flow_indices: np.ndarray  # (n,) int64
    window_s: float = 0.0

    def __post_init__(self):
        n = self.values.shape[0]
        for arr in (self.missing, self.labels, self.session_ids, self.flow_indices):
            if arr.shape[0] != n:
                raise DataError("feature matrix arrays are not row-aligned")
        if self.values.shape[1] != len(self.schema.columns):
            raise DataError("value width does not match schema")

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    def column_index(self, name: str) -> int:
        return self.schema.names.index(name)

    def column(self, name: str):
        i = self.column_index(name)
        return self.values[:, i], self.missing[:, i]

    def take(self, indices) -> "FeatureMatrix":
        indices = np.asarray(indices)
        return FeatureMatrix(self.schema, self.values[indices],
                             self.missing[indices], self.labels[indices],
                             self.session_ids[indices], self.flow_indices[indices],
                             self.window_s)

    def select_columns(self, names) -> "FeatureMatrix":
        idx = [self.column_index(n) for n in names]
        return FeatureMatrix(self.schema.subset(names), self.values[:, idx],
                             self.missing[:, idx], self.labels, self.session_ids,
                             self.flow_indices, self.window_s)

    def value_at(self, row: int, name: str):
        """Decode one cell back to its Python-level value (None when missing)."""
        i = self.column_index(name)
        if self.missing[row, i]:
            return None
        spec = self.schema.columns[i]
        raw = self.values[row, i]
        if spec.kind == CATEGORICAL:
            return categorical_name(name, int(raw))
        if spec.kind == BINARY:
            return bool(raw)
        return float(raw)


def matrix_from_vectors(schema: FeatureSchema, vectors, labels,
                        window_s: float = 0.0) -> FeatureMatrix:
    """Encode FeatureVector rows into a numeric matrix under ``schema``."""
    n, k = len(vectors), len(schema.columns)
    values = np.zeros((n, k), dtype=np.float64)
    missing = np.zeros((n, k), dtype=bool)
    for i, vec in enumerate(vectors):
        for j, spec in enumerate(schema.columns):
            v = vec.values[spec.name]
            if v is None:
                missing[i, j] = True
            elif spec.kind == CATEGORICAL:
                values[i, j] = categorical_code(spec.name, v)
            else:
                values[i, j] = float(v)
    return FeatureMatrix(
        schema, values, missing,
        labels=np.asarray(list(labels), dtype=object),
        session_ids=np.asarray([v.session_id for v in vectors], dtype=object),
        flow_indices=np.asarray([v.flow_index for v in vectors], dtype=np.int64),
        window_s=window_s)


def concat_matrices(matrices) -> FeatureMatrix:
    matrices = list(matrices)
    head = matrices[0]
    for m in matrices[1:]:
        if m.schema.names != head.schema.names:
            raise DataError("cannot concatenate matrices with different schemas")
    return FeatureMatrix(
        head.schema,
        np.concatenate([m.values for m in matrices]),
        np.concatenate([m.missing for m in matrices]),
        np.concatenate([m.labels for m in matrices]),
        np.concatenate([m.session_ids for m in matrices]),
        np.concatenate([m.flow_indices for m in matrices]),
        head.window_s)


def drop_nulls(matrix: FeatureMatrix):
    """Remove rows with a Missing value in any numeric column.

    Returns ``(clean_matrix, per_column_drop_counts)``. Raises
    AllRowsDropped when nothing survives a non-empty input.
    """
    numeric = [i for i, c in enumerate(matrix.schema.columns) if c.kind == NUMERIC]
    bad = matrix.missing[:, numeric].any(axis=1) if numeric else \
        np.zeros(matrix.n_rows, dtype=bool)
    counts = {}
    for i in numeric:
        n = int(matrix.missing[:, i].sum())
        if n:
            counts[matrix.schema.columns[i].name] = n
    kept = matrix.take(np.flatnonzero(~bad))
    if matrix.n_rows and kept.n_rows == 0:
        raise AllRowsDropped(
            "null removal dropped every row; "
            f"per-column missing counts: {counts}")
    return kept, counts


@dataclass(frozen=True)
class SplitAssignment:
    train_sessions: frozenset
    test_sessions: frozenset
    seed: int

    def side(self, session_id: str) -> str:
        if session_id in self.train_sessions:
            return "train"
        if session_id in self.test_sessions:
            return "test"
        raise KeyError(session_id)


def split_sessions(session_labels: dict, train_fraction: float, seed: int) -> SplitAssignment:
    """Stratified session-level split from a ``session_id -> device_label`` map.

    Within each device, session ids are shuffled deterministically and the
    first ``ceil(fraction * n)`` go to train. Reproducible from the session
    set, the seed and the fraction alone.
    """
    if not (0 < train_fraction < 1):
        raise DataError(f"train_fraction must be in (0, 1), got {train_fraction}")
    by_label: dict[str, list[str]] = {}
    for sid, label in session_labels.items():
        by_label.setdefault(label, []).append(sid)
    rng = np.random.default_rng(seed)
    train, test = set(), set()
    for label in sorted(by_label):
        sids = sorted(by_label[label])
        if len(sids) < 2:
            raise InsufficientSessions(
                f"device {label!r} has {len(sids)} session(s); need >= 2 to split")
        order = rng.permutation(len(sids))
        n_train = math.ceil(train_fraction * len(sids))
        for rank, idx in enumerate(order):
            (train if rank < n_train else test).add(sids[idx])
    return SplitAssignment(frozenset(train), frozenset(test), seed)


def session_split(matrix: FeatureMatrix, train_fraction: float, seed: int) -> SplitAssignment:
    pairs = {}
    for sid, label in zip(matrix.session_ids, matrix.labels):
        if pairs.setdefault(sid, label) != label:
            raise DataError(f"session {sid!r} carries two device labels")
    return split_sessions(pairs, train_fraction, seed)


def apply_split(matrix: FeatureMatrix, split: SplitAssignment):
    """Partition matrix rows into (train, test) by session id."""
    sides = np.asarray([sid in split.train_sessions for sid in matrix.session_ids])
    return matrix.take(np.flatnonzero(sides)), matrix.take(np.flatnonzero(~sides))


def format_split(split: SplitAssignment) -> str:
    lines = [f"# seed={split.seed}"]
    for sid in sorted(split.train_sessions):
        lines.append(f"{sid}\ttrain")
    for sid in sorted(split.test_sessions):
        lines.append(f"{sid}\ttest")
    return "".join(line + "\n" for line in lines)


def parse_split(text: str) -> SplitAssignment:
    train, test = set(), set()
    seed = 0
    for line in text.splitlines():
        if line.startswith("# seed="):
            seed = int(line.split("=", 1)[1])
            continue
        if not line.strip():
            continue
        sid, side = line.split("\t")
        (train if side == "train" else test).add(sid)
    return SplitAssignment(frozenset(train), frozenset(test), seed)


class Scaler(Estimator):
    """Z-score for numeric columns, one-hot for categoricals, binaries pass through.

    Statistics come from the training rows only. Constant columns map to
    zero; Missing numeric entries fill with the training mean (zero after
    scaling), which keeps single-packet flows classifiable at inference.
    Categories unseen in training one-hot to all zeros.
    """

    def fit(self, matrix: FeatureMatrix):
        self.schema_ = matrix.schema
        self.means_ = {}
        self.stds_ = {}
        self.fill_values_ = {}
        self.categories_ = {}
        for i, spec in enumerate(matrix.schema.columns):
            col = matrix.values[:, i]
            miss = matrix.missing[:, i]
            if spec.kind == NUMERIC:
                present = col[~miss]
                if present.size == 0:
                    mean, std = 0.0, 0.0
                else:
                    mean = float(present.mean())
                    std = float(present.std())
                self.means_[spec.name] = mean
                self.stds_[spec.name] = std
                self.fill_values_[spec.name] = mean
            elif spec.kind == CATEGORICAL:
                self.categories_[spec.name] = sorted(int(v) for v in set(col))
        self.feature_names_out_ = self._output_names()
        return self

    def _output_names(self):
        names = []
        for spec in self.schema_.columns:
            if spec.kind == CATEGORICAL:
                names.extend(
                    f"{spec.name}={categorical_name(spec.name, code)}"
                    for code in self.categories_[spec.name])
            else:
                names.append(spec.name)
        return tuple(names)

    def transform(self, matrix: FeatureMatrix) -> np.ndarray:
        if not hasattr(self, "schema_"):
            raise NotFitted("Scaler.transform called before fit")
        if matrix.schema.names != self.schema_.names:
            raise DataError("matrix schema does not match the fitted scaler")
        blocks = []
        for i, spec in enumerate(self.schema_.columns):
            col = matrix.values[:, i].copy()
            miss = matrix.missing[:, i]
            if spec.kind == NUMERIC:
                col[miss] = self.fill_values_[spec.name]
                std = self.stds_[spec.name]
                if std == 0.0:
                    blocks.append(np.zeros_like(col))
                else:
                    blocks.append((col - self.means_[spec.name]) / std)
            elif spec.kind == CATEGORICAL:
                for code in self.categories_[spec.name]:
                    blocks.append((col == code).astype(np.float64))
            else:
                blocks.append(col)
        return np.column_stack(blocks) if blocks else np.zeros((matrix.n_rows, 0))

    def fit_transform(self, matrix: FeatureMatrix) -> np.ndarray:
        return self.fit(matrix).transform(matrix)


def fit_scaler(matrix: FeatureMatrix) -> Scaler:
    return Scaler().fit(matrix)


def apply_scaler(scaler: Scaler, matrix: FeatureMatrix) -> np.ndarray:
    return scaler.transform(matrix)


def oversample_indices(labels, seed: int) -> np.ndarray:
    """Row indices that balance every class up to the majority count.

    Original rows come first in input order, then duplicates per class in
    sorted class order, sampled with replacement from that class's own rows.
    """
    labels = np.asarray(labels)
    if labels.size == 0:
        raise EmptyClass("no rows to balance")
    classes, counts = np.unique(labels, return_counts=True)
    majority = int(counts.max())
    rng = np.random.default_rng(seed)
    extra = []
    for cls, count in zip(classes, counts):
        if count == 0:
            raise EmptyClass(f"class {cls!r} has no rows")
        need = majority - int(count)
        if need:
            own = np.flatnonzero(labels == cls)
            extra.append(own[rng.integers(0, own.size, need)])
    if not extra:
        return np.arange(labels.size)
    return np.concatenate([np.arange(labels.size)] + extra)


def oversample_balance(matrix: FeatureMatrix, seed: int) -> FeatureMatrix:
    """Duplicate minority-class rows until all device classes match the majority."""
    return matrix.take(oversample_indices(matrix.labels, seed))
