"""Association measures between two equal-length series: Pearson,
Spearman, Kendall tau-b, distance correlation, and binned mutual
information, plus row-wise application to a whole count matrix.

Scores that do not exist (zero-variance input for the rank/moment
measures) raise UndefinedScoreError; ranking policy for such rows lives
with the callers.
"""

from __future__ import annotations

import math
from functools import partial
from typing import Callable, Optional

import numpy as np

from .counts import CountMatrix
from .errors import UndefinedScoreError
from .textnorm import FeatureId

METRIC_IDS = ("pearson", "spearman", "kendall", "dcor", "mi")

DEFAULT_MI_BINS = 16


def _pair(x, y) -> tuple[np.ndarray, np.ndarray]:
    xa = np.asarray(x, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    if xa.ndim != 1 or ya.ndim != 1:
        raise ValueError("series must be one-dimensional")
    if len(xa) != len(ya):
        raise ValueError(f"series length mismatch: {len(xa)} vs {len(ya)}")
    if len(xa) < 2:
        raise ValueError("series need at least two observations")
    return xa, ya


def pearson(x, y) -> float:
    """Product-moment correlation in [-1, 1]."""
    xa, ya = _pair(x, y)
    xc = xa - xa.mean()
    yc = ya - ya.mean()
    vx = float(xc @ xc)
    vy = float(yc @ yc)
    if vx == 0.0 or vy == 0.0:
        raise UndefinedScoreError("zero variance input")
    r = float(xc @ yc) / math.sqrt(vx * vy)
    return max(-1.0, min(1.0, r))


def _midranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties assigned the group average."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), dtype=np.float64)
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(x, y) -> float:
    """Pearson correlation of midrank transforms."""
    xa, ya = _pair(x, y)
    return pearson(_midranks(xa), _midranks(ya))


def _merge_count_inversions(values: list[float]) -> int:
    """Strict inversion count (pairs i<j with values[i] > values[j])."""
    n = len(values)
    if n < 2:
        return 0
    work = list(values)
    buffer = [0.0] * n
    inversions = 0
    width = 1
    while width < n:
        for lo in range(0, n, 2 * width):
            mid = min(lo + width, n)
            hi = min(lo + 2 * width, n)
            i, j, k = lo, mid, lo
            while i < mid and j < hi:
                if work[j] < work[i]:
                    inversions += mid - i
                    buffer[k] = work[j]
                    j += 1
                else:
                    buffer[k] = work[i]
                    i += 1
                k += 1
            buffer[k:hi] = work[i:mid] if i < mid else work[j:hi]
        work, buffer = buffer, work
        width *= 2
    return inversions


def _tie_term(sorted_values) -> int:
    """Sum of t*(t-1)/2 over runs of equal values."""
    total = 0
    run = 1
    for prev, cur in zip(sorted_values, sorted_values[1:]):
        if cur == prev:
            run += 1
        else:
            total += run * (run - 1) // 2
            run = 1
    total += run * (run - 1) // 2
    return total


def kendall_tau(x, y) -> float:
    """Tie-corrected Kendall tau-b via merge-sort inversion counting.

    Agrees exactly with the all-pairs concordant/discordant definition:
    every tie bookkeeping term is an integer, and the final quotient is
    formed from the same integers the quadratic definition produces.
    """
    xa, ya = _pair(x, y)
    n = len(xa)
    order = sorted(range(n), key=lambda i: (xa[i], ya[i]))
    xs = [float(xa[i]) for i in order]
    ys = [float(ya[i]) for i in order]
    tot = n * (n - 1) // 2
    xtie = _tie_term(xs)
    ytie = _tie_term(sorted(ys))
    ntie = _tie_term(list(zip(xs, ys)))
    if tot == xtie or tot == ytie:
        raise UndefinedScoreError("a series is entirely tied")
    discordant = _merge_count_inversions(ys)
    con_minus_dis = tot - xtie - ytie + ntie - 2 * discordant
    tau = con_minus_dis / math.sqrt((tot - xtie) * (tot - ytie))
    return max(-1.0, min(1.0, tau))


def _centered_distances(values: np.ndarray) -> np.ndarray:
    d = np.abs(values[:, None] - values[None, :])
    return d - d.mean(axis=0)[None, :] - d.mean(axis=1)[:, None] + d.mean()


def distance_correlation(x, y) -> float:
    """Distance correlation (biased plug-in estimator), in [0, 1].

    Zero by convention when either series has zero distance variance.
    """
    xa, ya = _pair(x, y)
    a = _centered_distances(xa)
    b = _centered_distances(ya)
    dcov2 = float((a * b).mean())
    dvar_x = float((a * a).mean())
    dvar_y = float((b * b).mean())
    if dvar_x <= 0.0 or dvar_y <= 0.0:
        return 0.0
    r2 = max(0.0, dcov2) / math.sqrt(dvar_x * dvar_y)
    return min(1.0, math.sqrt(r2))


def _bin_indices(values: np.ndarray, bins: int) -> np.ndarray:
    lo = float(values.min())
    hi = float(values.max())
    if hi == lo:
        return np.zeros(len(values), dtype=np.int64)
    idx = ((values - lo) * bins / (hi - lo)).astype(np.int64)
    return np.minimum(idx, bins - 1)


def joint_histogram(x, y, bins: int) -> np.ndarray:
    """Joint counts over equal-width bins spanning each series' own range."""
    if bins < 2:
        raise ValueError("bins must be >= 2")
    xa, ya = _pair(x, y)
    counts = np.zeros((bins, bins), dtype=np.int64)
    np.add.at(counts, (_bin_indices(xa, bins), _bin_indices(ya, bins)), 1)
    return counts


def mutual_information(x, y, bins: int = DEFAULT_MI_BINS) -> float:
    """Histogram mutual information in bits.

    Each series is discretized into `bins` equal-width bins over its own
    range (a constant series occupies a single bin), and the plug-in
    estimate is summed over non-empty joint cells.
    """
    counts = joint_histogram(x, y, bins)
    n = int(counts.sum())
    row_sums = counts.sum(axis=1)
    col_sums = counts.sum(axis=0)
    total = 0.0
    for a in range(bins):
        for b in range(bins):
            c = int(counts[a, b])
            if c == 0:
                continue
            p_ab = c / n
            p_a = int(row_sums[a]) / n
            p_b = int(col_sums[b]) / n
            total += p_ab * math.log2(p_ab / (p_a * p_b))
    return max(0.0, total)


def make_scorer(metric: str, mi_bins: int = DEFAULT_MI_BINS) -> Callable:
    """Resolve a metric id to a two-series scoring callable."""
    if metric == "pearson":
        return pearson
    if metric == "spearman":
        return spearman
    if metric == "kendall":
        return kendall_tau
    if metric == "dcor":
        return distance_correlation
    if metric == "mi":
        return partial(mutual_information, bins=mi_bins)
    raise ValueError(f"unknown metric {metric!r}; expected one of {METRIC_IDS}")


def correlate_matrix(
    matrix: CountMatrix,
    gsr: np.ndarray,
    scorer: Callable,
) -> list[tuple[FeatureId, Optional[float]]]:
    """Score every row against the event series, canonical row order.

    Undefined scores surface as None rather than being coerced to a
    number.
    """
    if matrix.days != len(gsr):
        raise ValueError("count matrix and event series length mismatch")
    gsr_f = np.asarray(gsr, dtype=np.float64)
    out: list[tuple[FeatureId, Optional[float]]] = []
    for fid in matrix.feature_ids():
        try:
            out.append((fid, scorer(matrix.row(fid).astype(np.float64), gsr_f)))
        except UndefinedScoreError:
            out.append((fid, None))
    return out
