"""Data-driven feature validation: the four removal criteria.

Columns are dropped, in order, when they are (L) declared linear
combinations verified against the data, (C) Pearson-correlated at
|r| >= 0.9 with an earlier kept column, (V) effectively constant, or
(D) a declared derived overlap of a surviving feature. Each removal
carries machine-checkable evidence. Categorical and binary columns are
exempt from the correlation and variance stages.

The correlation scan walks columns in canonical schema order (the v1
catalogue order), not physical matrix order, so removal membership is
invariant under column permutation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .base import Estimator
from .errors import DataError, InsufficientRows, NotFitted, SumMismatch
from .features import FULL_SCHEMA_V1, NUMERIC
from .preprocess import FeatureMatrix

CORRELATION_THRESHOLD = 0.9
VARIANCE_EPSILON = 1e-8

# child column -> parent columns whose row-wise sum it must equal
LINEAR_SUM_RULES = {
    "pkts_tot": ("pkts_fwd", "pkts_bwd"),
    "bytes_tot": ("bytes_fwd", "bytes_bwd"),
}

# derived column -> surviving feature it overlaps with
DERIVED_OVERLAP_RULES = {
    "down_up_byte_ratio": "down_up_pkt_ratio",
}

_CANONICAL_ORDER = {name: i for i, name in enumerate(FULL_SCHEMA_V1.names)}


@dataclass(frozen=True)
class Removal:
    feature: str
    reason: str        # L | C | V | D
    evidence: str


@dataclass
class PruneReport:
    removed: list[Removal] = field(default_factory=list)
    kept: tuple[str, ...] = ()

    @property
    def removed_names(self) -> tuple[str, ...]:
        return tuple(r.feature for r in self.removed)

    def reason_of(self, feature: str) -> str | None:
        for r in self.removed:
            if r.feature == feature:
                return r.reason
        return None

    def render(self) -> str:
        lines = ["feature validation report", ""]
        lines.append(f"removed ({len(self.removed)}):")
        for r in self.removed:
            lines.append(f"  [{r.reason}] {r.feature}: {r.evidence}")
        lines.append("")
        lines.append(f"kept ({len(self.kept)}):")
        for name in self.kept:
            lines.append(f"  {name}")
        return "".join(line + "\n" for line in lines)

    def to_dict(self) -> dict:
        return {
            "removed": [[r.feature, r.reason, r.evidence] for r in self.removed],
            "kept": list(self.kept),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PruneReport":
        return cls([Removal(*entry) for entry in data["removed"]],
                   tuple(data["kept"]))


def _numeric_names(matrix: FeatureMatrix):
    return [c.name for c in matrix.schema.columns if c.kind == NUMERIC]


def _scan_order(names):
    return sorted(names, key=lambda n: (_CANONICAL_ORDER.get(n, len(_CANONICAL_ORDER)), n))


def prune_linear_combinations(matrix: FeatureMatrix,
                              rules=None) -> list[Removal]:
    """Drop declared sum columns after verifying the sum holds on every row."""
    if matrix.n_rows < 2:
        raise InsufficientRows("linear-combination check needs >= 2 rows")
    rules = LINEAR_SUM_RULES if rules is None else rules
    names = set(matrix.schema.names)
    removals = []
    for child in sorted(rules, key=lambda n: _CANONICAL_ORDER.get(n, 0)):
        parents = rules[child]
        if child not in names or any(p not in names for p in parents):
            continue
        child_col, child_miss = matrix.column(child)
        total = np.zeros(matrix.n_rows)
        miss_any = child_miss.copy()
        for p in parents:
            col, miss = matrix.column(p)
            total += col
            miss_any |= miss
        rows = ~miss_any
        if not np.array_equal(child_col[rows], total[rows]):
            bad = int(np.flatnonzero(child_col[rows] != total[rows])[0])
            raise SumMismatch(
                f"{child} != {' + '.join(parents)} (first bad row {bad})")
        removals.append(Removal(child, "L", f"= {' + '.join(parents)} on all rows"))
    return removals


def prune_correlated(matrix: FeatureMatrix,
                     threshold: float = CORRELATION_THRESHOLD) -> list[Removal]:
    """Greedy keep-first scan: drop a column correlated |r| >= threshold
    with any earlier kept column."""
    if matrix.n_rows < 3:
        raise InsufficientRows("correlation check needs >= 3 rows")
    columns = _scan_order(_numeric_names(matrix))
    data = {}
    for name in columns:
        col, miss = matrix.column(name)
        if miss.any():
            raise DataError(
                f"column {name} still has Missing values; drop nulls first")
        data[name] = col
    stds = {name: data[name].std() for name in columns}
    kept: list[str] = []
    removals = []
    for name in columns:
        partner = None
        if stds[name] > 0:
            for other in kept:
                if stds[other] == 0:
                    continue  # r undefined; constants fall to the variance stage
                r = float(np.corrcoef(data[other], data[name])[0, 1])
                if abs(r) >= threshold:
                    partner = (other, r)
                    break
        if partner is None:
            kept.append(name)
        else:
            removals.append(Removal(name, "C",
                                    f"|r|={abs(partner[1]):.4f} with {partner[0]}"))
    return removals


def prune_low_variance(matrix: FeatureMatrix,
                       epsilon: float = VARIANCE_EPSILON) -> list[Removal]:
    """Drop numeric columns whose raw variance is <= epsilon."""
    if matrix.n_rows < 2:
        raise InsufficientRows("variance check needs >= 2 rows")
    removals = []
    for name in _scan_order(_numeric_names(matrix)):
        col, miss = matrix.column(name)
        var = float(col[~miss].var()) if (~miss).any() else 0.0
        if var <= epsilon:
            removals.append(Removal(name, "V", f"variance={var:.3g}"))
    return removals


def prune_derived(schema_names, rules=None) -> list[Removal]:
    """Drop declared derived-overlap columns; table-driven, no data needed."""
    rules = DERIVED_OVERLAP_RULES if rules is None else rules
    names = set(schema_names)
    removals = []
    for derived in sorted(rules, key=lambda n: _CANONICAL_ORDER.get(n, 0)):
        if derived in names:
            removals.append(Removal(derived, "D", f"derivable from {rules[derived]}"))
    return removals


class FeatureValidator(Estimator):
    """Runs the four stages in order on a training matrix; replays on any matrix.

    Fit on training data only; ``transform`` selects the surviving columns
    so the same report can be applied to held-out data without refitting.
    """

    def __init__(self, correlation_threshold=CORRELATION_THRESHOLD,
                 variance_epsilon=VARIANCE_EPSILON,
                 linear_rules=None, derived_rules=None):
        self.correlation_threshold = correlation_threshold
        self.variance_epsilon = variance_epsilon
        self.linear_rules = linear_rules
        self.derived_rules = derived_rules

    def fit(self, matrix: FeatureMatrix):
        removed: list[Removal] = []

        def survivors():
            gone = {r.feature for r in removed}
            return [n for n in matrix.schema.names if n not in gone]

        removed += prune_linear_combinations(matrix, self.linear_rules)
        removed += prune_correlated(matrix.select_columns(survivors()),
                                    self.correlation_threshold)
        removed += prune_low_variance(matrix.select_columns(survivors()),
                                      self.variance_epsilon)
        removed += prune_derived(survivors(), self.derived_rules)
        self.report_ = PruneReport(removed, tuple(survivors()))
        return self

    def transform(self, matrix: FeatureMatrix) -> FeatureMatrix:
        if not hasattr(self, "report_"):
            raise NotFitted("FeatureValidator.transform called before fit")
        return matrix.select_columns(self.report_.kept)

    def fit_transform(self, matrix: FeatureMatrix) -> FeatureMatrix:
        return self.fit(matrix).transform(matrix)


def validate_features(matrix: FeatureMatrix) -> PruneReport:
    """Full L -> C -> V -> D pipeline with default thresholds."""
    return FeatureValidator().fit(matrix).report_
