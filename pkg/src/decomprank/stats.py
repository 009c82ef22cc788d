"""Nonparametric comparison of ranking methods and PCA of instance features."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2, rankdata


@dataclass
class ComparisonTable:
    """Selected scores: one row per instance, one column per method."""

    methods: list
    instances: list
    scores: np.ndarray

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=float)
        if self.scores.shape != (len(self.instances), len(self.methods)):
            raise ValueError("score matrix shape does not match labels")
        if not np.all(np.isfinite(self.scores)):
            raise ValueError("comparison table has missing cells")

    @property
    def n(self) -> int:
        return len(self.instances)

    @property
    def k(self) -> int:
        return len(self.methods)

    def column(self, method) -> int:
        return self.methods.index(method)

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(",".join(["instance", *self.methods]) + "\n")
            for name, row in zip(self.instances, self.scores):
                fh.write(",".join([str(name), *(repr(float(v)) for v in row)]) + "\n")


def mean_ranks(table: ComparisonTable) -> np.ndarray:
    """Average per-instance rank of every method (lowest score ranks 1)."""
    ranks = np.vstack([rankdata(row, method="average") for row in table.scores])
    return ranks.mean(axis=0)


def friedman_from_ranks(R, n: int) -> float:
    R = np.asarray(R, dtype=float)
    k = len(R)
    return 12.0 * n / (k * (k + 1)) * (float(np.sum(R**2)) - k * (k + 1) ** 2 / 4.0)


def friedman_statistic(table: ComparisonTable) -> tuple[float, float]:
    """Friedman ``F_f`` and its chi-square (k - 1 dof) upper-tail p-value."""
    if table.n < 2 or table.k < 2:
        raise ValueError("Friedman test needs at least two instances and two methods")
    ff = friedman_from_ranks(mean_ranks(table), table.n)
    ff = max(ff, 0.0) if abs(ff) < 1e-12 else ff
    return ff, float(chi2.sf(ff, table.k - 1))


def aligned_ranks(table: ComparisonTable) -> np.ndarray:
    """Mean Friedman aligned rank per method."""
    aligned = table.scores - table.scores.mean(axis=1, keepdims=True)
    r = rankdata(aligned.ravel(), method="average").reshape(aligned.shape)
    return r.mean(axis=0)


def normal_cdf(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def aligned_rank_z(r_control: float, r_other: float, k: int, n: int) -> float:
    return (r_control - r_other) / math.sqrt(k * (n + 1) / 6.0)


def aligned_rank_pairwise(table: ComparisonTable, control, comparison, sided: int = 2) -> tuple[float, float]:
    """Aligned-rank z of ``control`` against ``comparison`` and its p-value.

    ``sided=2`` gives ``erfc(|z| / sqrt 2)``; ``sided=1`` gives ``Phi(z)``,
    the probability of a control rank this low or lower.
    """
    if sided not in (1, 2):
        raise ValueError("sided must be 1 or 2")
    R = aligned_ranks(table)
    z = aligned_rank_z(R[table.column(control)], R[table.column(comparison)], table.k, table.n)
    if sided == 2:
        return z, math.erfc(abs(z) / math.sqrt(2.0))
    return z, normal_cdf(z)


# -- PCA -------------------------------------------------------------------------


@dataclass
class PcaResult:
    components: np.ndarray
    explained_variance_ratio: np.ndarray
    projected: np.ndarray
    eigenvalues: np.ndarray
    kept_columns: list


def jacobi_eigh(S, tol: float = 1e-10, max_sweeps: int = 100):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Iterates until the off-diagonal Frobenius norm is at most ``tol``.
    Returns ``(values, vectors)`` with ``vectors[:, i]`` paired to
    ``values[i]``, unsorted.
    """
    A = np.array(S, dtype=float)
    p = A.shape[0]
    V = np.eye(p)
    for _ in range(max_sweeps):
        off = float(np.linalg.norm(A - np.diag(np.diag(A))))
        if off <= tol:
            break
        for i in range(p - 1):
            for j in range(i + 1, p):
                if abs(A[i, j]) < 1e-300:
                    continue
                theta = (A[j, j] - A[i, i]) / (2.0 * A[i, j])
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                J = np.eye(p)
                J[i, i] = J[j, j] = c
                J[i, j] = s
                J[j, i] = -s
                A = J.T @ A @ J
                V = V @ J
    return np.diag(A).copy(), V


def pca(features, n_components: int | None = None) -> PcaResult:
    """PCA of standardised columns; zero-variance columns are dropped.

    Components are sorted by decreasing eigenvalue and each is signed so
    its largest-magnitude entry is positive.
    """
    X = np.atleast_2d(np.asarray(features, dtype=float))
    if X.shape[0] < 2:
        raise ValueError("PCA needs at least two rows")
    sd = X.std(axis=0)
    keep = [j for j in range(X.shape[1]) if sd[j] > 1e-12]
    if not keep:
        raise ValueError("every feature column is constant")
    Z = (X[:, keep] - X[:, keep].mean(axis=0)) / sd[keep]
    cov = Z.T @ Z / Z.shape[0]
    vals, vecs = jacobi_eigh(cov)
    order = sorted(range(len(vals)), key=lambda i: (-vals[i], i))
    vals = np.clip(vals[order], 0.0, None)
    vecs = vecs[:, order]
    for i in range(vecs.shape[1]):
        j = int(np.argmax(np.abs(vecs[:, i])))
        if vecs[j, i] < 0:
            vecs[:, i] = -vecs[:, i]
    total = vals.sum()
    ratio = vals / total if total > 0 else np.zeros_like(vals)
    if n_components is not None:
        vals, vecs, ratio = vals[:n_components], vecs[:, :n_components], ratio[:n_components]
    return PcaResult(vecs.T.copy(), ratio, Z @ vecs, vals, keep)
