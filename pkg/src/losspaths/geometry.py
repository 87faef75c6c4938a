"""Solution-set geometry: kernel PCA, L2 shell statistics, component stats.

kPCA here follows the usual recipe: build the kernel matrix, double-center
it, eigen-decompose, and keep eigenvectors scaled so that
lambda * (alpha . alpha) = 1. Projections of new points center the kernel
vector against the stored fit-time means, which makes the projection of a fit
point coincide with its fit score.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

EIGENVALUE_FLOOR = 1e-12


@dataclass(frozen=True)
class KernelKind:
    """linear | polynomial(degree, offset) | rbf(bandwidth = 2 sigma^2)."""

    kind: str
    degree: int = 2
    offset: float = 1.0
    bandwidth: float = 1.0

    def __post_init__(self):
        if self.kind not in ("linear", "polynomial", "rbf"):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "polynomial" and self.degree < 1:
            raise ValueError("polynomial degree must be >= 1")
        if self.kind == "rbf" and self.bandwidth <= 0:
            raise ValueError("rbf bandwidth must be positive")


def linear_kernel():
    return KernelKind("linear")


def polynomial_kernel(degree, offset=1.0):
    return KernelKind("polynomial", degree=degree, offset=offset)


def rbf_kernel(bandwidth):
    """RBF kernel exp(-|x - x'|^2 / bandwidth); bandwidth is 2 sigma^2."""
    return KernelKind("rbf", bandwidth=bandwidth)


def _as_points(points):
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2:
        raise ValueError("points must be a 2-D array (N, dim)")
    return pts


def kernel_matrix(points, kind):
    """The N x N Gram matrix K_ij = k(x_i, x_j); symmetric by construction."""
    X = _as_points(points)
    G = X @ X.T
    if kind.kind == "linear":
        K = G
    elif kind.kind == "polynomial":
        K = (G + kind.offset) ** kind.degree
    else:
        sq = np.diag(G).copy()
        d2 = sq[:, None] + sq[None, :] - 2.0 * G
        np.clip(d2, 0.0, None, out=d2)
        np.fill_diagonal(d2, 0.0)
        K = np.exp(-d2 / kind.bandwidth)
    return (K + K.T) / 2.0


def kernel_vector(points, x, kind):
    """k(x, x_i) against every fit point, as a length-N vector."""
    X = _as_points(points)
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (X.shape[1],):
        raise ValueError(f"point has dim {x.size}, fit points have dim {X.shape[1]}")
    if kind.kind == "linear":
        return X @ x
    if kind.kind == "polynomial":
        return (X @ x + kind.offset) ** kind.degree
    d2 = np.sum((X - x) ** 2, axis=1)
    return np.exp(-d2 / kind.bandwidth)


def center_kernel(K):
    """Double centering: K - 1K - K1 + 1K1 with 1 the matrix of 1/N entries.

    Rows and columns of the result sum to zero (within roundoff), which is
    the kernel-space statement of mean-zero features.
    """
    K = np.asarray(K, dtype=np.float64)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ValueError("kernel matrix must be square")
    row = K.mean(axis=1, keepdims=True)
    col = K.mean(axis=0, keepdims=True)
    return K - row - col + K.mean()


@dataclass
class KpcaModel:
    points: np.ndarray       # fit points (N, dim)
    kind: KernelKind
    eigenvalues: np.ndarray  # descending, all > EIGENVALUE_FLOOR
    alphas: np.ndarray       # (N, k), columns scaled so lambda*|alpha|^2 = 1
    row_means: np.ndarray    # uncentered-K row means, needed to project
    grand_mean: float
    fit_scores: np.ndarray   # (N, k) projections of the fit points


def kpca_fit(points, kind, n_components):
    """Eigen-decompose the centered kernel matrix and keep the top components.

    Eigenvectors get a deterministic sign (first non-negligible entry made
    positive) so repeated fits agree; requesting more components than there
    are above-floor eigenvalues is an error.
    """
    X = _as_points(points)
    if X.shape[0] < 2:
        raise ValueError("kPCA needs at least two points")
    K = kernel_matrix(X, kind)
    Kc = center_kernel(K)
    eigvals, eigvecs = np.linalg.eigh(Kc)
    order = np.argsort(-eigvals, kind="stable")
    eigvals = eigvals[order]
    eigvecs = eigvecs[:, order]
    keep = eigvals > EIGENVALUE_FLOOR
    if n_components > int(keep.sum()):
        raise ValueError(
            f"requested {n_components} components, only {int(keep.sum())} "
            f"eigenvalues exceed {EIGENVALUE_FLOOR}"
        )
    lam = eigvals[:n_components]
    V = eigvecs[:, :n_components]
    for k in range(V.shape[1]):
        col = V[:, k]
        nz = np.flatnonzero(np.abs(col) > 1e-9)
        if nz.size and col[nz[0]] < 0:
            V[:, k] = -col
    alphas = V / np.sqrt(lam)
    fit_scores = V * np.sqrt(lam)
    return KpcaModel(
        points=X.copy(),
        kind=kind,
        eigenvalues=lam,
        alphas=alphas,
        row_means=K.mean(axis=1),
        grand_mean=float(K.mean()),
        fit_scores=fit_scores,
    )


def kpca_project(model, x):
    """Component scores of a new point: alpha . (centered kernel vector)."""
    k = kernel_vector(model.points, x, model.kind)
    kc = k - model.row_means - k.mean() + model.grand_mean
    return kc @ model.alphas


# ---------------------------------------------------------------------------
# L2 shell statistics
# ---------------------------------------------------------------------------

@dataclass
class ShellStats:
    """Distances of two solution sets from their common origin.

    The origin is the midpoint of the two centroids, so both centroids sit at
    exactly the same distance from it (centroid_distance, computed once from
    the half-difference).
    """

    centroid_a: np.ndarray
    centroid_b: np.ndarray
    origin: np.ndarray
    centroid_distance: float
    distances_a: np.ndarray
    distances_b: np.ndarray

    def summary(self):
        return {
            "centroid_distance": float(self.centroid_distance),
            "mean_a": float(self.distances_a.mean()),
            "mean_b": float(self.distances_b.mean()),
            "median_a": float(np.median(self.distances_a)),
            "median_b": float(np.median(self.distances_b)),
        }


def shell_stats(set_a, set_b):
    """Centroids, common origin, and per-vector |omega - origin| distances."""
    A = _as_points(set_a)
    B = _as_points(set_b)
    if A.shape[1] != B.shape[1]:
        raise ValueError("solution sets have mismatched dimensions")
    if A.shape[0] == 0 or B.shape[0] == 0:
        raise ValueError("solution sets must be nonempty")
    ca = A.mean(axis=0)
    cb = B.mean(axis=0)
    origin = 0.5 * (ca + cb)
    half = 0.5 * (ca - cb)
    return ShellStats(
        centroid_a=ca,
        centroid_b=cb,
        origin=origin,
        centroid_distance=float(np.linalg.norm(half)),
        distances_a=np.linalg.norm(A - origin, axis=1),
        distances_b=np.linalg.norm(B - origin, axis=1),
    )


def component_stats(sets):
    """Per-set (mu, sigma) of all weight components pooled into one vector.

    sets maps a label to a list of parameter vectors; each set's vectors are
    concatenated and summarized by their scalar mean and population std.
    """
    out = {}
    for label, vectors in sets.items():
        if len(vectors) == 0:
            raise ValueError(f"set {label!r} is empty")
        W = np.concatenate([np.asarray(v, dtype=np.float64).ravel() for v in vectors])
        out[label] = (float(W.mean()), float(W.std()))
    return out
