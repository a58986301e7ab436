"""Principal component analysis for 2-D visualization, cluster space and
the data-modeling stage of drift detection.

Each feature is standardized to unit variance before the eigendecomposition
(telemetry features mix units: IOPS, milliseconds, percentages), so the
decomposed matrix is the feature correlation matrix. Zero-variance features
pass through with scale 1. The eigensolver is a cyclic Jacobi sweep with a
fixed rotation order, which makes a fit bit-reproducible for identical
input; component orientation follows a fixed sign convention.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InsufficientData, InvalidDimension, InvalidRank

__all__ = ["PcaModel", "fit_pca", "transform"]

_ORTHO_TOL = 1e-8


@dataclass(frozen=True)
class PcaModel:
    """Fitted centering/scaling vectors plus ordered orthonormal components.

    components has shape (k, d), rows ordered by descending explained
    variance. total_variance is the trace of the decomposed covariance,
    i.e. the sum over all d eigenvalues, kept so variance ratios remain
    computable when k < d.
    """

    mean: np.ndarray
    scale: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray
    k: int
    total_variance: float

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    @property
    def explained_variance_ratio(self) -> np.ndarray:
        if self.total_variance <= 0.0:
            return np.zeros_like(self.explained_variance)
        return self.explained_variance / self.total_variance

    def validate(self) -> None:
        gram = self.components @ self.components.T
        if not np.allclose(gram, np.eye(self.k), atol=_ORTHO_TOL):
            raise ValueError("components are not orthonormal")
        if np.any(np.diff(self.explained_variance) > 1e-12):
            raise ValueError("explained_variance must be non-increasing")

    def to_json_dict(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "scale": self.scale.tolist(),
            "components": self.components.tolist(),
            "explained_variance": self.explained_variance.tolist(),
            "k": self.k,
            "total_variance": self.total_variance,
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "PcaModel":
        model = cls(
            mean=np.asarray(obj["mean"], dtype=float),
            scale=np.asarray(obj["scale"], dtype=float),
            components=np.asarray(obj["components"], dtype=float),
            explained_variance=np.asarray(obj["explained_variance"], dtype=float),
            k=int(obj["k"]),
            total_variance=float(obj["total_variance"]),
        )
        model.validate()
        return model

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict()), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "PcaModel":
        return cls.from_json_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _jacobi_eigh(S: np.ndarray, max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Fixed sweep order (p < q ascending) and a fixed convergence rule keep
    the result deterministic. Returns (eigenvalues, eigenvectors) with
    eigenvectors in columns, unsorted.
    """
    A = np.array((S + S.T) / 2.0, dtype=float)
    d = A.shape[0]
    V = np.eye(d)
    if d == 1:
        return np.array([A[0, 0]]), V
    norm = np.linalg.norm(A)
    tol = 1e-14 * max(1.0, norm)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.tril(A, -1) ** 2) * 2.0)
        if off <= tol:
            break
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = A[p, q]
                if abs(apq) <= tol / d:
                    continue
                tau = (A[q, q] - A[p, p]) / (2.0 * apq)
                if tau >= 0:
                    t = 1.0 / (tau + np.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                col_p, col_q = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * col_p - s * col_q
                A[:, q] = s * col_p + c * col_q
                row_p, row_q = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * row_p - s * row_q
                A[q, :] = s * row_p + c * row_q
                vp, vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    return np.diag(A).copy(), V


def _orient(vec: np.ndarray) -> np.ndarray:
    """Fix sign so the largest-magnitude coordinate is positive (first
    such coordinate on exact magnitude ties)."""
    j = int(np.argmax(np.abs(vec)))
    return -vec if vec[j] < 0 else vec


def _order_components(
    eigenvalues: np.ndarray, vectors: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Sort descending by eigenvalue; order degenerate ties by the
    lexicographic order of the sign-oriented vectors."""
    oriented = np.stack([_orient(vectors[:, i]) for i in range(vectors.shape[1])])
    idx = sorted(
        range(len(eigenvalues)),
        key=lambda i: (-eigenvalues[i], tuple(oriented[i])),
    )
    tie_tol = 1e-12 * max(1.0, float(np.max(np.abs(eigenvalues), initial=0.0)))
    # regroup near-equal eigenvalues so the lexicographic tie rule also
    # covers ties that differ only by rounding noise
    ordered: list[int] = []
    i = 0
    while i < len(idx):
        j = i
        while j + 1 < len(idx) and abs(eigenvalues[idx[j + 1]] - eigenvalues[idx[i]]) <= tie_tol:
            j += 1
        group = sorted(idx[i : j + 1], key=lambda g: tuple(oriented[g]))
        ordered.extend(group)
        i = j + 1
    return eigenvalues[ordered], oriented[ordered]


def fit_pca(X: np.ndarray, k: int) -> PcaModel:
    """Fit a k-component PCA on standardized features.

    explained_variance holds the top-k eigenvalues of the correlation-like
    covariance of the standardized, centered data. Raises InsufficientData
    for n < 2 and InvalidRank for k outside [1, min(n, d)].
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise InvalidDimension(f"expected 2-D matrix, got shape {X.shape}")
    n, d = X.shape
    if n < 2:
        raise InsufficientData(f"need at least 2 rows, got {n}")
    if not 1 <= k <= min(n, d):
        raise InvalidRank(f"k={k} outside [1, {min(n, d)}]")
    mean = X.mean(axis=0)
    std = X.std(axis=0, ddof=1)
    scale = np.where(std == 0.0, 1.0, std)
    Z = (X - mean) / scale
    cov = Z.T @ Z / (n - 1)
    eigenvalues, vectors = _jacobi_eigh(cov)
    eigenvalues, components = _order_components(eigenvalues, vectors)
    explained = np.maximum(eigenvalues[:k], 0.0)
    model = PcaModel(
        mean=mean,
        scale=scale,
        components=components[:k],
        explained_variance=explained,
        k=k,
        total_variance=float(np.trace(cov)),
    )
    model.validate()
    return model


def transform(model: PcaModel, X: np.ndarray) -> np.ndarray:
    """Project rows into component space: components . ((x - mean) / scale).

    A 1-D input of length d is treated as a single row; output is always
    (n, k).
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.ndim != 2 or X.shape[1] != model.dim:
        raise InvalidDimension(
            f"expected row dimension {model.dim}, got shape {X.shape}"
        )
    Z = (X - model.mean) / model.scale
    return Z @ model.components.T
