"""Sparse feature-by-day count matrix: accumulation, min-count filtering,
and correlation-ranked top-K selection.
"""

from __future__ import annotations

from pathlib import Path
from typing import Callable, Iterable, Optional

import numpy as np

from .errors import UndefinedScoreError
from .textnorm import FeatureId

Scorer = Callable[[np.ndarray, np.ndarray], float]


class CountMatrix:
    """Map of FeatureId -> daily count vector over a fixed day range.

    Rows are stored sparsely (day -> count) and materialized densely on
    demand. Feature order is canonical (sorted FeatureId) everywhere a
    row ordering is exposed.
    """

    def __init__(self, days: int):
        if days < 1:
            raise ValueError("day count must be positive")
        self.days = days
        self._rows: dict[FeatureId, dict[int, int]] = {}

    def __len__(self) -> int:
        return len(self._rows)

    def __contains__(self, fid: FeatureId) -> bool:
        return fid in self._rows

    def add(self, fid: FeatureId, day: int, count: int = 1) -> None:
        if not 0 <= day < self.days:
            raise ValueError(f"day {day} outside [0, {self.days})")
        if count < 0:
            raise ValueError("counts are non-negative")
        row = self._rows.setdefault(fid, {})
        row[day] = row.get(day, 0) + count

    def set_row(self, fid: FeatureId, values: Iterable[int]) -> None:
        dense = list(values)
        if len(dense) != self.days:
            raise ValueError("row length does not match day count")
        self._rows[fid] = {d: int(v) for d, v in enumerate(dense) if v}

    def feature_ids(self) -> list[FeatureId]:
        return sorted(self._rows)

    def row(self, fid: FeatureId) -> np.ndarray:
        dense = np.zeros(self.days, dtype=np.int64)
        for day, count in self._rows[fid].items():
            dense[day] = count
        return dense

    def row_max(self, fid: FeatureId) -> int:
        cells = self._rows[fid]
        return max(cells.values()) if cells else 0

    def to_array(self, order: Optional[list[FeatureId]] = None) -> np.ndarray:
        """Dense float matrix with rows in the given (or canonical) order."""
        if order is None:
            order = self.feature_ids()
        out = np.zeros((len(order), self.days), dtype=np.float64)
        for i, fid in enumerate(order):
            for day, count in self._rows[fid].items():
                out[i, day] = count
        return out

    def total_mass(self) -> int:
        return sum(sum(r.values()) for r in self._rows.values())

    def restrict(self, keep: Iterable[FeatureId]) -> "CountMatrix":
        out = CountMatrix(self.days)
        for fid in keep:
            out._rows[fid] = dict(self._rows[fid])
        return out

    def write_tsv(self, path: Path) -> None:
        """One row per line: feature-id<TAB>comma-separated counts."""
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for fid in self.feature_ids():
                counts = ",".join(str(v) for v in self.row(fid))
                fh.write(f"{fid.render()}\t{counts}\n")

    @classmethod
    def read_tsv(cls, path: Path) -> "CountMatrix":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        matrix: Optional[CountMatrix] = None
        for line in lines:
            if not line.strip():
                continue
            rendered, counts = line.split("\t")
            values = [int(v) for v in counts.split(",")]
            if matrix is None:
                matrix = cls(len(values))
            matrix.set_row(FeatureId.parse(rendered), values)
        if matrix is None:
            raise ValueError(f"{path}: empty count matrix checkpoint")
        return matrix


def accumulate(stream: Iterable[tuple[int, dict]], days: int) -> CountMatrix:
    """Sum per-tweet feature multisets into daily totals.

    The stream yields (day ordinal, FeatureId multiset) pairs; the result
    does not depend on stream order.
    """
    matrix = CountMatrix(days)
    for day, features in stream:
        for fid, count in features.items():
            matrix.add(fid, day, count)
    return matrix


def filter_min_count(matrix: CountMatrix, threshold: int) -> CountMatrix:
    """Keep features that reach `threshold` on at least one day."""
    if threshold < 0:
        raise ValueError("threshold must be >= 0")
    keep = [f for f in matrix.feature_ids() if matrix.row_max(f) >= threshold]
    return matrix.restrict(keep)


def select_top_k(
    matrix: CountMatrix,
    gsr: np.ndarray,
    scorer: Scorer,
    k: int,
    absolute: bool = False,
) -> tuple[CountMatrix, list[tuple[FeatureId, Optional[float]]]]:
    """Pick the K features scoring highest against the event series.

    Undefined scores (zero variance) rank below every real score; ties
    break lexicographically by FeatureId. Fewer than K features means
    all are returned, ranked. With `absolute`, ranking uses |score| but
    the reported score keeps its sign.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if matrix.days != len(gsr):
        raise ValueError("count matrix and event series length mismatch")
    scored: list[tuple[float, FeatureId, Optional[float]]] = []
    for fid in matrix.feature_ids():
        try:
            value = scorer(matrix.row(fid).astype(np.float64), gsr)
            rank_key = abs(value) if absolute else value
            scored.append((-rank_key, fid, value))
        except UndefinedScoreError:
            scored.append((np.inf, fid, None))
    scored.sort(key=lambda item: (item[0], item[1]))
    selected = scored[:k]
    ranked = [(fid, value) for _, fid, value in selected]
    return matrix.restrict(fid for fid, _ in ranked), ranked


def write_scores(scores: list[tuple[FeatureId, Optional[float]]], path: Path) -> None:
    """CSV dump `feature,score`; an absent score is an empty field."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("feature,score\n")
        for fid, value in scores:
            rendered = repr(value) if value is not None else ""
            fh.write(f"{fid.render()},{rendered}\n")


def read_scores(path: Path) -> list[tuple[FeatureId, Optional[float]]]:
    out: list[tuple[FeatureId, Optional[float]]] = []
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    for line in lines[1:]:
        if not line.strip():
            continue
        rendered, value = line.rsplit(",", 1)
        out.append((FeatureId.parse(rendered), float(value) if value else None))
    return out
