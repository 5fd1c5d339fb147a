"""Radial basis function interpolation of vector-valued scattered data.

Centers are normalized to the unit box (taken from explicit bounds when
given, otherwise from the centers' bounding box) before distances are
measured.  No polynomial tail is used.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .linalg import SingularMatrixError, solve_linear

FAMILIES = ("multiquadric", "gaussian", "thin-plate")

# default-shape conditioning guard
COND_LIMIT = 1e8
_MAX_SHARPEN = 80


class RbfError(ValueError):
    pass


@dataclass(frozen=True)
class RbfKernel:
    family: str = "multiquadric"
    epsilon: float | None = None  # None: 1 / mean pairwise center distance

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise RbfError(f"unknown kernel family {self.family!r}; choose from {FAMILIES}")
        if self.epsilon is not None and not self.epsilon > 0:
            raise RbfError(f"shape parameter must be positive, got {self.epsilon}")

    def __call__(self, r: np.ndarray, epsilon: float) -> np.ndarray:
        if self.family == "multiquadric":
            return np.sqrt(1.0 + (epsilon * r) ** 2)
        if self.family == "gaussian":
            return np.exp(-((epsilon * r) ** 2))
        # r^2 log r, continuous extension 0 at r = 0
        with np.errstate(divide="ignore", invalid="ignore"):
            out = r * r * np.log(r)
        return np.where(r > 0, out, 0.0)


@dataclass(frozen=True)
class RbfInterpolant:
    centers: np.ndarray  # (N, d), original coordinates
    weights: np.ndarray  # (N, q)
    kernel: RbfKernel
    epsilon: float
    regularization: float
    box: np.ndarray  # (d, 2) normalization box

    @property
    def dim(self) -> int:
        return self.centers.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.weights.shape[1]

    def normalize(self, x: np.ndarray) -> np.ndarray:
        lo, hi = self.box[:, 0], self.box[:, 1]
        return (x - lo) / (hi - lo)

    def __call__(self, query) -> np.ndarray:
        return rbf_eval(self, query)

    def outside_box(self, query) -> bool:
        u = self.normalize(np.asarray(query, dtype=np.float64))
        return bool(np.any((u < 0) | (u > 1)))


def _box(centers: np.ndarray, box) -> np.ndarray:
    if box is not None:
        box = np.asarray(box, dtype=np.float64).reshape(-1, 2)
        if box.shape[0] != centers.shape[1]:
            raise RbfError(f"normalization box has {box.shape[0]} rows for {centers.shape[1]}-D centers")
        return box.copy()
    lo = centers.min(axis=0)
    hi = centers.max(axis=0)
    flat = hi <= lo
    hi = np.where(flat, lo + 1.0, hi)
    return np.stack([lo, hi], axis=1)


def _guarded_shape(kernel: RbfKernel, D: np.ndarray, eps: float) -> tuple[float, np.ndarray]:
    """Sharpen the default shape parameter until ``cond(K) <= COND_LIMIT``.

    Nearly flat kernels on clustered centers give weights so large that
    float64 evaluation can no longer reproduce the samples; each step
    multiplies ``eps`` by 1.5.
    """
    K = kernel(D, eps)
    for _ in range(_MAX_SHARPEN):
        if D.shape[0] == 1 or np.linalg.cond(K) <= COND_LIMIT:
            break
        eps *= 1.5
        K = kernel(D, eps)
    return eps, K


def kernel_matrix(kernel: RbfKernel, a: np.ndarray, b: np.ndarray, epsilon: float) -> np.ndarray:
    return kernel(cdist(a, b), epsilon)


def rbf_fit(
    centers,
    values,
    kernel: RbfKernel | None = None,
    regularization: float | None = None,
    box=None,
) -> RbfInterpolant:
    """Solve ``(K + reg I) w = values`` for the interpolation weights.

    ``regularization=None`` applies the default ridge
    ``1e-12 * trace(K) / N``; pass ``0.0`` for exact interpolation.
    """
    kernel = kernel or RbfKernel()
    centers = np.asarray(centers, dtype=np.float64)
    if centers.ndim == 1:
        centers = centers[:, None]
    values = np.asarray(values, dtype=np.float64)
    if values.ndim == 1:
        values = values[:, None]
    N = centers.shape[0]
    if N < 1:
        raise RbfError("need at least one center")
    if values.shape[0] != N:
        raise RbfError(f"{values.shape[0]} value rows for {N} centers")
    if not np.all(np.isfinite(values)) or not np.all(np.isfinite(centers)):
        raise RbfError("centers and values must be finite")
    box = _box(centers, box)
    lo, hi = box[:, 0], box[:, 1]
    u = (centers - lo) / (hi - lo)
    D = cdist(u, u)
    if N > 1:
        off = D[np.triu_indices(N, 1)]
        if off.min() <= 0:
            i, j = np.argwhere(np.triu(D == 0, 1))[0]
            raise RbfError(f"duplicate centers {int(i)} and {int(j)}")
        mean_dist = float(off.mean())
    else:
        mean_dist = 1.0
    if kernel.epsilon is not None or kernel.family == "thin-plate":
        eps = kernel.epsilon if kernel.epsilon is not None else 1.0
        K = kernel(D, eps)
    else:
        eps, K = _guarded_shape(kernel, D, 1.0 / mean_dist)
    K = 0.5 * (K + K.T)
    if regularization is None:
        trace = float(np.trace(K))
        regularization = 1e-12 * trace / N if trace > 0 else 1e-12
    if regularization < 0:
        raise RbfError("regularization must be non-negative")
    A = K + regularization * np.eye(N)
    try:
        w = solve_linear(A, values, refine=2)
    except SingularMatrixError as exc:
        raise SingularMatrixError(f"{exc}; consider a positive regularization") from None
    # C order so reloaded models evaluate through the same BLAS path
    return RbfInterpolant(centers.copy(), np.ascontiguousarray(w), kernel, eps, float(regularization), box)


def rbf_eval(s: RbfInterpolant, query) -> np.ndarray:
    """Evaluate at one query (``(d,)`` -> ``(q,)``) or many (``(M, d)`` -> ``(M, q)``)."""
    q = np.asarray(query, dtype=np.float64)
    single = q.ndim == 1
    q2 = q.reshape(1, -1) if single else q
    if q2.shape[1] != s.dim:
        raise RbfError(f"query has dimension {q2.shape[1]}, interpolant expects {s.dim}")
    u = s.normalize(q2)
    uc = s.normalize(s.centers)
    out = s.kernel(cdist(u, uc), s.epsilon) @ s.weights
    return out[0] if single else out
