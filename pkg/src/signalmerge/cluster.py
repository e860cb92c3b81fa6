"""Multi-restart Lloyd k-means over feature representations, medoid
lookup construction, raw-signal cluster merging, and before/after
rescoring.

Points are handled internally in canonical (lexicographic row) order so
results do not depend on input row permutation: the random-partition
initialization, all tie-breaks, and every floating-point summation see
the points in the same order either way.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .counts import CountMatrix
from .errors import UndefinedScoreError
from .textnorm import FeatureId

INIT_SCHEMES = ("partition", "plusplus")


@dataclass(frozen=True)
class KMeansConfig:
    k: int = 2000
    runs: int = 50
    max_iter: int = 35
    seed: int = 0
    rank: Optional[int] = None
    weight_by_sigma: bool = False
    init: str = "partition"

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.init not in INIT_SCHEMES:
            raise ValueError(f"init must be one of {INIT_SCHEMES}")
        if self.rank is not None and self.rank < 1:
            raise ValueError("rank must be >= 1 when given")


@dataclass
class Clustering:
    """Result of the best restart: per-point cluster ids, cluster means,
    the within-cluster sum of squared distances, and the per-iteration
    objective trace of every run (for monotonicity checks)."""

    assignment: np.ndarray
    means: np.ndarray
    objective: float
    run_histories: list[list[float]] = field(default_factory=list)
    best_run: int = 0


@dataclass
class ClusterLookup:
    """Member feature -> medoid feature map plus the membership lists."""

    medoid_of: dict[FeatureId, FeatureId]
    members_of: dict[FeatureId, list[FeatureId]]

    def write_tsv(self, path: Path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for member in sorted(self.medoid_of):
                fh.write(f"{member.render()}\t{self.medoid_of[member].render()}\n")

    @classmethod
    def read_tsv(cls, path: Path) -> "ClusterLookup":
        medoid_of: dict[FeatureId, FeatureId] = {}
        members_of: dict[FeatureId, list[FeatureId]] = {}
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            member_s, medoid_s = line.split("\t")
            member = FeatureId.parse(member_s)
            medoid = FeatureId.parse(medoid_s)
            medoid_of[member] = medoid
            members_of.setdefault(medoid, []).append(member)
        for members in members_of.values():
            members.sort()
        return cls(medoid_of, members_of)


def _squared_distances(points: np.ndarray, means: np.ndarray) -> np.ndarray:
    d2 = (
        (points * points).sum(axis=1)[:, None]
        - 2.0 * (points @ means.T)
        + (means * means).sum(axis=1)[None, :]
    )
    return np.maximum(d2, 0.0)


def _group_means(points: np.ndarray, labels: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    sums = np.zeros((k, points.shape[1]))
    np.add.at(sums, labels, points)
    counts = np.bincount(labels, minlength=k)
    means = np.zeros_like(sums)
    occupied = counts > 0
    means[occupied] = sums[occupied] / counts[occupied, None]
    return means, counts


def _repair_empty(points: np.ndarray, labels: np.ndarray, k: int) -> np.ndarray:
    """Reseed each empty cluster with the point farthest from its own
    mean, drawing only from clusters that keep at least one member."""
    while True:
        means, counts = _group_means(points, labels, k)
        empty = np.flatnonzero(counts == 0)
        if len(empty) == 0:
            return labels
        d2 = ((points - means[labels]) ** 2).sum(axis=1)
        d2[counts[labels] < 2] = -1.0
        candidate = int(np.argmax(d2))
        if d2[candidate] < 0:
            raise RuntimeError("cannot repair empty cluster")
        labels[candidate] = empty[0]


def _init_labels(points: np.ndarray, k: int, rng: np.random.Generator, scheme: str) -> np.ndarray:
    m = len(points)
    if scheme == "partition":
        return rng.integers(0, k, size=m)
    centers = [int(rng.integers(m))]
    d2 = ((points - points[centers[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = float(d2.sum())
        if total == 0.0:
            centers.append(int(rng.integers(m)))
        else:
            centers.append(int(rng.choice(m, p=d2 / total)))
        d2 = np.minimum(d2, ((points - points[centers[-1]]) ** 2).sum(axis=1))
    return np.argmin(_squared_distances(points, points[centers]), axis=1)


def _lloyd(points: np.ndarray, k: int, max_iter: int, rng: np.random.Generator, scheme: str):
    labels = _repair_empty(points, _init_labels(points, k, rng, scheme), k)
    means, _ = _group_means(points, labels, k)
    history = [float(((points - means[labels]) ** 2).sum())]
    for _ in range(max_iter):
        new_labels = np.argmin(_squared_distances(points, means), axis=1)
        if np.array_equal(new_labels, labels):
            break
        labels = _repair_empty(points, new_labels, k)
        means, _ = _group_means(points, labels, k)
        history.append(float(((points - means[labels]) ** 2).sum()))
    return labels, means, history


def kmeans(points: np.ndarray, cfg: KMeansConfig) -> Clustering:
    """Best-of-restarts Lloyd clustering.

    Each restart draws an independent RNG stream from (seed, run index),
    initializes by random partitioning (or k-means++ when configured),
    and alternates nearest-mean assignment with mean updates until the
    assignment is stable or max_iter is hit. Nearest-mean ties go to the
    lowest cluster id; empty clusters are reseeded with the farthest
    point. The run with the lowest objective wins, ties to the lowest
    run index.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] < 1:
        raise ValueError("points must be a 2-D matrix")
    if not np.isfinite(points).all():
        raise ValueError("points contain non-finite entries")
    m = len(points)
    if cfg.k > m:
        raise ValueError(f"k={cfg.k} exceeds the number of points ({m})")

    canonical = np.lexsort(points.T[::-1])
    ordered = points[canonical]

    best: Optional[tuple[float, int, np.ndarray, np.ndarray]] = None
    histories: list[list[float]] = []
    for run in range(cfg.runs):
        rng = np.random.default_rng([cfg.seed, run])
        labels, means, history = _lloyd(ordered, cfg.k, cfg.max_iter, rng, cfg.init)
        histories.append(history)
        objective = history[-1]
        if best is None or objective < best[0]:
            best = (objective, run, labels, means)

    objective, best_run, labels, means = best
    assignment = np.empty(m, dtype=np.int64)
    assignment[canonical] = labels
    return Clustering(
        assignment=assignment,
        means=means,
        objective=objective,
        run_histories=histories,
        best_run=best_run,
    )


def build_lookup(
    clustering: Clustering,
    feature_order: list[FeatureId],
    points: np.ndarray,
) -> ClusterLookup:
    """Pick each cluster's medoid (member nearest the cluster mean, ties
    by FeatureId) and map every member to it."""
    points = np.asarray(points, dtype=np.float64)
    if len(feature_order) != len(points) or len(points) != len(clustering.assignment):
        raise ValueError("clustering, points and feature order must align")
    medoid_of: dict[FeatureId, FeatureId] = {}
    members_of: dict[FeatureId, list[FeatureId]] = {}
    for cluster_id in np.unique(clustering.assignment):
        member_idx = np.flatnonzero(clustering.assignment == cluster_id)
        d2 = ((points[member_idx] - clustering.means[cluster_id]) ** 2).sum(axis=1)
        medoid = min(
            (float(d2[j]), feature_order[i]) for j, i in enumerate(member_idx)
        )[1]
        members = sorted(feature_order[i] for i in member_idx)
        members_of[medoid] = members
        for member in members:
            medoid_of[member] = medoid
    return ClusterLookup(medoid_of, members_of)


@dataclass
class MergeResult:
    """Summed medoid rows plus the untouched member rows."""

    merged: CountMatrix
    members: CountMatrix
    lookup: ClusterLookup


def merge_cluster_vectors(matrix: CountMatrix, lookup: ClusterLookup) -> MergeResult:
    """Sum the raw member count rows of each cluster into its medoid row.

    The merged matrix holds one row per medoid; original member rows are
    carried unchanged in a companion view so non-medoid scores are not
    affected downstream.
    """
    for member in lookup.medoid_of:
        if member not in matrix:
            raise KeyError(f"lookup references unknown feature {member}")
    merged = CountMatrix(matrix.days)
    members_view = CountMatrix(matrix.days)
    for medoid, members in lookup.members_of.items():
        total = np.zeros(matrix.days, dtype=np.int64)
        for member in members:
            row = matrix.row(member)
            total += row
            members_view.set_row(member, row)
        merged.set_row(medoid, total)
    return MergeResult(merged=merged, members=members_view, lookup=lookup)


@dataclass
class BeforeAfterRow:
    medoid: FeatureId
    members: int
    before: Optional[float]
    after: Optional[float]


def recorrelate(
    result: MergeResult,
    gsr: np.ndarray,
    scorer: Callable,
) -> list[BeforeAfterRow]:
    """Score each medoid's original row (before) and merged row (after)."""
    if result.merged.days != len(gsr):
        raise ValueError("merged matrix and event series length mismatch")
    gsr_f = np.asarray(gsr, dtype=np.float64)

    def score(row: np.ndarray) -> Optional[float]:
        try:
            return scorer(row.astype(np.float64), gsr_f)
        except UndefinedScoreError:
            return None

    rows = []
    for medoid in result.merged.feature_ids():
        rows.append(
            BeforeAfterRow(
                medoid=medoid,
                members=len(result.lookup.members_of[medoid]),
                before=score(result.members.row(medoid)),
                after=score(result.merged.row(medoid)),
            )
        )
    return rows
