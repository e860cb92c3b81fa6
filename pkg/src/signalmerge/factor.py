"""Thin SVD of the feature/day matrix via a Jacobi eigendecomposition of
the Gram matrix on the smaller side.

The day count is small next to the feature count in real runs, so the
n x n (or m x m) Gram eigenproblem plus one matrix product is much
cheaper than bidiagonalizing the full matrix.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .textnorm import FeatureId

# Singular values below this fraction of the largest are zeroed and their
# long-side columns rebuilt by basis completion.
DEGENERATE_RATIO = 1e-10


@dataclass
class FactoredMatrix:
    """Thin SVD triple: x ~ u @ diag(sigma) @ vt.

    u has orthonormal columns (feature directions), vt orthonormal rows
    (day directions), sigma is non-increasing and non-negative.
    feature_order aligns u's rows with count-matrix rows when the input
    came from one. degenerate lists indices whose singular value was
    zeroed and whose u column was filled by basis completion.
    """

    u: np.ndarray
    sigma: np.ndarray
    vt: np.ndarray
    feature_order: Optional[list[FeatureId]] = None
    degenerate: tuple[int, ...] = ()

    @property
    def rank(self) -> int:
        return len(self.sigma)

    def reconstruct(self) -> np.ndarray:
        return self.u @ (self.sigma[:, None] * self.vt)


def jacobi_eigh(
    a: np.ndarray,
    tol: float = 1e-14,
    max_sweeps: int = 50,
) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns (eigenvalues descending, eigenvector columns). Sweeps stop
    when the off-diagonal Frobenius mass drops below tol times the total.
    """
    a = np.array(a, dtype=np.float64)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("matrix must be square")
    v = np.eye(n)
    if n == 1:
        return a[0, :1].copy(), v
    norm = float(np.linalg.norm(a))
    if norm == 0.0:
        return np.zeros(n), v
    for _ in range(max_sweeps):
        off = float(np.sqrt(np.sum(np.tril(a, -1) ** 2) * 2.0))
        if off <= tol * norm:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= tol * norm * 1e-2:
                    continue
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                if tau >= 0:
                    t = 1.0 / (tau + np.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = 0.0
                a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    eigenvalues = np.diag(a).copy()
    order = np.argsort(-eigenvalues, kind="stable")
    return eigenvalues[order], v[:, order]


def _orthonormalize(columns: np.ndarray, passes: int = 2) -> np.ndarray:
    """Modified Gram-Schmidt over columns, repeated for stability."""
    q = columns.copy()
    for _ in range(passes):
        for j in range(q.shape[1]):
            for i in range(j):
                q[:, j] -= (q[:, i] @ q[:, j]) * q[:, i]
            length = float(np.linalg.norm(q[:, j]))
            if length > 0.0:
                q[:, j] /= length
    return q


def _complete_basis(q: np.ndarray, columns: list[int]) -> None:
    """Fill the listed columns with unit vectors orthogonal to the rest."""
    m = q.shape[0]
    filled = [j for j in range(q.shape[1]) if j not in columns]
    for j in columns:
        for cand in range(m):
            v = np.zeros(m)
            v[cand] = 1.0
            for i in filled:
                v -= (q[:, i] @ v) * q[:, i]
            length = float(np.linalg.norm(v))
            if length > 0.5:
                q[:, j] = v / length
                filled.append(j)
                break
        else:
            raise RuntimeError("basis completion failed")


def svd(
    x: np.ndarray,
    feature_order: Optional[list[FeatureId]] = None,
) -> FactoredMatrix:
    """Thin SVD with a deterministic sign convention.

    The Gram matrix of the smaller side is eigendecomposed with Jacobi
    rotations; the long-side factor is recovered by projection and
    re-orthonormalized. Each u column is flipped so its largest-magnitude
    entry is positive. Near-zero singular values (below DEGENERATE_RATIO
    of the largest) are zeroed and flagged.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
        raise ValueError("input must be a non-empty 2-D matrix")
    if not np.isfinite(x).all():
        raise ValueError("input contains non-finite entries")
    if feature_order is not None and len(feature_order) != x.shape[0]:
        raise ValueError("feature_order length must match row count")
    m, n = x.shape
    tall = m >= n
    gram = x.T @ x if tall else x @ x.T
    eigenvalues, w = jacobi_eigh(gram)
    sigma = np.sqrt(np.maximum(eigenvalues, 0.0))
    r = len(sigma)

    cutoff = DEGENERATE_RATIO * (sigma[0] if sigma[0] > 0 else 1.0)
    degenerate = [i for i in range(r) if sigma[i] < cutoff]
    live = [i for i in range(r) if sigma[i] >= cutoff]
    sigma[degenerate] = 0.0

    long_side = np.zeros(((m if tall else n), r))
    base = x if tall else x.T
    for i in live:
        long_side[:, i] = base @ w[:, i] / sigma[i]
    long_side[:, live] = _orthonormalize(long_side[:, live])
    if degenerate:
        _complete_basis(long_side, degenerate)

    if tall:
        u, vt = long_side, w.T
    else:
        u, vt = w, long_side.T

    for i in range(r):
        pivot = int(np.argmax(np.abs(u[:, i])))
        if u[pivot, i] < 0:
            u[:, i] = -u[:, i]
            vt[i, :] = -vt[i, :]
    return FactoredMatrix(
        u=u,
        sigma=sigma,
        vt=vt,
        feature_order=list(feature_order) if feature_order is not None else None,
        degenerate=tuple(degenerate),
    )


def truncate(f: FactoredMatrix, r_keep: int) -> FactoredMatrix:
    """Keep the leading r_keep singular triples."""
    if not 1 <= r_keep <= f.rank:
        raise ValueError(f"r_keep must be in [1, {f.rank}], got {r_keep}")
    return FactoredMatrix(
        u=f.u[:, :r_keep].copy(),
        sigma=f.sigma[:r_keep].copy(),
        vt=f.vt[:r_keep, :].copy(),
        feature_order=list(f.feature_order) if f.feature_order is not None else None,
        degenerate=tuple(i for i in f.degenerate if i < r_keep),
    )


def _fmt_row(values: np.ndarray) -> str:
    return " ".join(repr(float(v)) for v in values)


def write_factors(f: FactoredMatrix, path: Path) -> None:
    """Text checkpoint: shape header, feature ids, then U, sigma, Vt rows.

    Floats are written with repr so the round trip is exact.
    """
    m, r = f.u.shape
    n = f.vt.shape[1]
    order = f.feature_order or []
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{m}\t{n}\t{r}\t{len(order)}\t{','.join(map(str, f.degenerate))}\n")
        for fid in order:
            fh.write(fid.render() + "\n")
        for i in range(m):
            fh.write(_fmt_row(f.u[i]) + "\n")
        fh.write(_fmt_row(f.sigma) + "\n")
        for i in range(r):
            fh.write(_fmt_row(f.vt[i]) + "\n")


def read_factors(path: Path) -> FactoredMatrix:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    m, n, r, n_order, degenerate_csv = lines[0].split("\t")
    m, n, r, n_order = int(m), int(n), int(r), int(n_order)
    degenerate = tuple(int(v) for v in degenerate_csv.split(",") if v)
    pos = 1
    order: Optional[list[FeatureId]] = None
    if n_order:
        order = [FeatureId.parse(line) for line in lines[pos : pos + n_order]]
        pos += n_order
    u = np.array([[float(v) for v in lines[pos + i].split()] for i in range(m)])
    pos += m
    sigma = np.array([float(v) for v in lines[pos].split()])
    pos += 1
    vt = np.array([[float(v) for v in lines[pos + i].split()] for i in range(r)])
    return FactoredMatrix(u=u, sigma=sigma, vt=vt, feature_order=order, degenerate=degenerate)
