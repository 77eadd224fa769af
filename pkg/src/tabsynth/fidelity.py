"""Shape and Trend fidelity scores between a real and a synthetic table.

Shape scores each column's marginal: numeric columns by the complement of
the empirical-CDF sup-distance, categorical/textual columns by the
complement of total variation distance. Trend scores each column pair:
numeric-numeric by correlation-difference similarity, pairs involving
categories by similarity of joint contingency distributions with numeric
sides discretized into quantile bins fixed from the real table.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations

import numpy as np

from .errors import (
    DegenerateColumnError,
    EmptySampleError,
    NoCommonColumnsError,
    NoPairsError,
)
from .table import DataType, Table

TREND_QUANTILE_BINS = 10


@dataclass
class FidelityReport:
    shape: float
    trend: float
    per_column_shape: dict
    per_pair_trend: dict
    excluded_columns: list = field(default_factory=list)
    excluded_pairs: list = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {
            "shape": self.shape,
            "trend": self.trend,
            "per_column_shape": self.per_column_shape,
            "per_pair_trend": {f"{a}|{b}": v for (a, b), v in self.per_pair_trend.items()},
            "excluded_columns": self.excluded_columns,
            "excluded_pairs": [
                {"pair": list(p), "reason": r} for p, r in self.excluded_pairs
            ],
        }


def ks_statistic(a, b) -> float:
    """Sup distance between the two empirical CDFs, in [0, 1]."""
    a = np.asarray(list(a), dtype=float)
    b = np.asarray(list(b), dtype=float)
    if a.size == 0 or b.size == 0:
        raise EmptySampleError("ks_statistic needs non-empty samples")
    if not (np.isfinite(a).all() and np.isfinite(b).all()):
        raise EmptySampleError("ks_statistic needs finite values")
    a_sorted = np.sort(a)
    b_sorted = np.sort(b)
    grid = np.union1d(a_sorted, b_sorted)
    cdf_a = np.searchsorted(a_sorted, grid, side="right") / a.size
    cdf_b = np.searchsorted(b_sorted, grid, side="right") / b.size
    return float(np.max(np.abs(cdf_a - cdf_b)))


def tv_distance(a, b) -> float:
    """Half the L1 distance between category frequency vectors, in [0, 1]."""
    a = list(a)
    b = list(b)
    if not a or not b:
        raise EmptySampleError("tv_distance needs non-empty samples")
    ca, cb = Counter(a), Counter(b)
    na, nb = len(a), len(b)
    total = Fraction(0)
    for cat in set(ca) | set(cb):
        total += abs(Fraction(ca.get(cat, 0), na) - Fraction(cb.get(cat, 0), nb))
    return float(total / 2)


def _column_values(table: Table, name: str, dtype: DataType) -> list:
    values = [v for v in table.column(name) if v is not None]
    if dtype is DataType.NUMERICAL:
        return [float(v) for v in values]
    return [str(v) for v in values]


def shape_score(real: Table, synth: Table):
    """Per-column marginal similarity, 0-100; mean over scored columns.

    Columns present in real but absent from synth score 0 and are listed as
    excluded; columns empty on either side are excluded without a score.
    """
    synth_cols = set(synth.column_names)
    per_column: dict[str, float] = {}
    excluded: list[dict] = []
    for col in real.schema:
        if col.name not in synth_cols:
            per_column[col.name] = 0.0
            excluded.append({"column": col.name, "reason": "missing from synthetic"})
            continue
        rv = _column_values(real, col.name, col.dtype)
        sv = _column_values(synth, col.name, col.dtype)
        if not rv or not sv:
            excluded.append({"column": col.name, "reason": "no non-missing values"})
            continue
        if col.dtype is DataType.NUMERICAL:
            score = 100.0 * (1.0 - ks_statistic(rv, sv))
        else:
            score = 100.0 * (1.0 - tv_distance(rv, sv))
        per_column[col.name] = score
    if not per_column:
        raise NoCommonColumnsError("no scorable columns shared by real and synthetic")
    shape = float(np.mean(list(per_column.values())))
    return per_column, shape, excluded


def quantile_bin_edges(values, n_bins: int = TREND_QUANTILE_BINS) -> np.ndarray:
    """Interior bin edges from quantiles of the real column, ties merged."""
    arr = np.asarray(list(values), dtype=float)
    qs = np.linspace(0, 1, n_bins + 1)[1:-1]
    return np.unique(np.quantile(arr, qs))


def _discretize(values, edges: np.ndarray) -> list[int]:
    arr = np.asarray(list(values), dtype=float)
    return np.searchsorted(edges, arr, side="right").tolist()


def pairwise_association(x, y, kinds: tuple, bin_edges: tuple = (None, None)):
    """Association representation for one column pair.

    Numeric-numeric: Pearson correlation (float). Any pair involving a
    categorical/textual column: the joint distribution over category labels,
    numeric sides discretized with the supplied bin edges.
    """
    kx, ky = kinds
    if len(x) != len(y) or len(x) == 0:
        raise EmptySampleError("pairwise_association needs aligned non-empty columns")
    if kx is DataType.NUMERICAL and ky is DataType.NUMERICAL:
        xv = np.asarray(list(x), dtype=float)
        yv = np.asarray(list(y), dtype=float)
        if np.std(xv) == 0 or np.std(yv) == 0:
            raise DegenerateColumnError("zero-variance numeric column in pair")
        return float(np.corrcoef(xv, yv)[0, 1])
    xl = _discretize(x, bin_edges[0]) if kx is DataType.NUMERICAL else [str(v) for v in x]
    yl = _discretize(y, bin_edges[1]) if ky is DataType.NUMERICAL else [str(v) for v in y]
    n = len(xl)
    joint = Counter(zip(xl, yl))
    return {k: v / n for k, v in joint.items()}


def _joint_tvd(pa: dict, pb: dict) -> float:
    total = 0.0
    for k in set(pa) | set(pb):
        total += abs(pa.get(k, 0.0) - pb.get(k, 0.0))
    return total / 2.0


def _pair_values(table: Table, a: str, b: str):
    ia, ib = table.column_index(a), table.column_index(b)
    xs, ys = [], []
    for row in table.rows:
        if row[ia] is not None and row[ib] is not None:
            xs.append(row[ia])
            ys.append(row[ib])
    return xs, ys


def trend_score(real: Table, synth: Table):
    """Per-pair association similarity, 0-100; mean over scored pairs."""
    synth_cols = set(synth.column_names)
    common = [c for c in real.schema if c.name in synth_cols]
    if len(common) < 2:
        raise NoPairsError("need at least two common columns for trend")

    per_pair: dict[tuple, float] = {}
    excluded: list[tuple] = []
    for ca, cb in combinations(common, 2):
        pair = (ca.name, cb.name)
        rx, ry = _pair_values(real, ca.name, cb.name)
        sx, sy = _pair_values(synth, ca.name, cb.name)
        if not rx or not sx:
            excluded.append((pair, "no jointly non-missing rows"))
            continue
        kinds = (ca.dtype, cb.dtype)
        edges = (
            quantile_bin_edges(rx) if ca.dtype is DataType.NUMERICAL else None,
            quantile_bin_edges(ry) if cb.dtype is DataType.NUMERICAL else None,
        )
        try:
            assoc_r = pairwise_association(rx, ry, kinds, edges)
            assoc_s = pairwise_association(sx, sy, kinds, edges)
        except DegenerateColumnError:
            excluded.append((pair, "zero-variance numeric column"))
            continue
        if isinstance(assoc_r, float):
            score = 100.0 * (1.0 - abs(assoc_r - assoc_s) / 2.0)
        else:
            score = 100.0 * (1.0 - _joint_tvd(assoc_r, assoc_s))
        per_pair[pair] = score

    if not per_pair:
        raise NoPairsError("no scorable column pairs")
    trend = float(np.mean(list(per_pair.values())))
    return per_pair, trend, excluded


def fidelity_report(real: Table, synth: Table) -> FidelityReport:
    per_column, shape, excluded_cols = shape_score(real, synth)
    try:
        per_pair, trend, excluded_pairs = trend_score(real, synth)
    except NoPairsError:
        per_pair, trend, excluded_pairs = {}, float("nan"), []
    return FidelityReport(
        shape=shape,
        trend=trend,
        per_column_shape=per_column,
        per_pair_trend=per_pair,
        excluded_columns=excluded_cols,
        excluded_pairs=excluded_pairs,
    )


def pool_tables(schema, tables: list[Table]) -> Table | None:
    """Concatenate parsed tables (sharing one schema) into a single table."""
    rows = []
    for t in tables:
        rows.extend(t.rows)
    if not rows:
        return None
    return Table(tuple(schema), tuple(rows))
