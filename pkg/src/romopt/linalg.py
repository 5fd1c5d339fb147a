"""Dense kernels for DMD, POD and RBF systems.

Thin wrappers over LAPACK (via numpy/scipy) that pin down the conventions
the rest of the package relies on: deterministic singular-vector signs,
rank selection by count or energy, eigenvalue ordering and explicit
singularity detection.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg


class LinalgError(ValueError):
    pass


class SingularMatrixError(LinalgError):
    pass


@dataclass(frozen=True)
class TruncatedSvd:
    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray
    # all singular values of the input, before truncation
    full_sigma: np.ndarray

    @property
    def rank(self) -> int:
        return self.sigma.size

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.sigma) @ self.v.T


def _check_finite(a: np.ndarray, what: str = "matrix") -> None:
    if not np.all(np.isfinite(a)):
        raise LinalgError(f"{what} has non-finite entries")


def select_rank(sigma: np.ndarray, rank: int | float) -> int:
    """Resolve a rank policy against a spectrum.

    An ``int`` is a fixed rank.  A ``float`` in ``(0, 1]`` is an energy
    threshold: the smallest ``r`` with ``sum(s[:r]**2) >= e * sum(s**2)``.
    """
    if isinstance(rank, (bool, np.bool_)):
        raise LinalgError("rank must be an integer or an energy fraction")
    if isinstance(rank, (int, np.integer)):
        r = int(rank)
        if r < 1:
            raise LinalgError(f"rank must be >= 1, got {r}")
        if r > sigma.size:
            raise LinalgError(f"rank {r} exceeds the matrix dimension {sigma.size}")
        return r
    e = float(rank)
    if not 0.0 < e <= 1.0:
        raise LinalgError(f"energy threshold must lie in (0, 1], got {e}")
    energy = np.cumsum(sigma**2)
    if energy[-1] == 0:
        return 1
    r = int(np.searchsorted(energy, e * energy[-1] * (1 - 1e-15), side="left")) + 1
    return min(r, sigma.size)


def truncated_svd(a: np.ndarray, rank: int | float) -> TruncatedSvd:
    """Best rank-``r`` factorization ``a ~ u diag(sigma) v^T``.

    Signs are fixed so that the largest-magnitude entry of each column of
    ``u`` is positive, which makes the output reproducible run to run.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise LinalgError("truncated_svd expects a 2-D array")
    _check_finite(a)
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    r = select_rank(s, rank)
    u = u[:, :r].copy()
    v = vt[:r].T.copy()
    pivot = np.argmax(np.abs(u), axis=0)
    signs = np.sign(u[pivot, np.arange(r)])
    signs[signs == 0] = 1.0
    u *= signs
    v *= signs
    return TruncatedSvd(u, s[:r].copy(), v, s)


def eig_dense(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenpairs sorted by descending modulus, then descending real part,
    then descending imaginary part."""
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise LinalgError(f"eig_dense needs a square matrix, got shape {a.shape}")
    _check_finite(a)
    try:
        lam, w = np.linalg.eig(a)
    except np.linalg.LinAlgError as exc:
        raise LinalgError(f"eigen-iteration did not converge: {exc}") from None
    lam = lam.astype(np.complex128)
    w = w.astype(np.complex128)
    order = np.lexsort((-lam.imag, -lam.real, -np.round(np.abs(lam), 13)))
    return lam[order], w[:, order]


def pseudo_inverse_apply(x: np.ndarray, y: np.ndarray, rcond: float = 1e-12) -> np.ndarray:
    """Return ``y @ pinv(x)`` through the SVD of ``x``, dropping singular
    values below ``rcond * sigma_1``."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y)
    if x.ndim != 2 or y.ndim != 2 or y.shape[1] != x.shape[1]:
        raise LinalgError(f"shape mismatch: y {y.shape} cannot multiply pinv of x {x.shape}")
    _check_finite(x)
    u, s, vt = np.linalg.svd(x, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return np.zeros((y.shape[0], x.shape[0]), dtype=y.dtype)
    keep = s > rcond * s[0]
    # y pinv(x) = (y V) diag(1/s) U^T
    return ((y @ vt[keep].T) / s[keep]) @ u[:, keep].T


def solve_linear(a: np.ndarray, b: np.ndarray, pivot_tol: float = 1e-14, refine: int = 0) -> np.ndarray:
    """Solve ``a x = b`` by pivoted LU; raise on a vanishing pivot.

    ``refine`` extra steps of iterative refinement reuse the factors.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise LinalgError(f"solve_linear needs a square matrix, got shape {a.shape}")
    if b.shape[0] != a.shape[0]:
        raise LinalgError(f"right-hand side has {b.shape[0]} rows, matrix has {a.shape[0]}")
    _check_finite(a)
    _check_finite(b, "right-hand side")
    norm = np.linalg.norm(a, ord=np.inf)
    with warnings.catch_warnings():
        # an exactly zero pivot is reported below as SingularMatrixError
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(a, check_finite=False)
    diag = np.abs(np.diag(lu))
    if norm == 0 or diag.min() < pivot_tol * norm:
        raise SingularMatrixError(
            f"matrix is numerically singular (smallest pivot {diag.min():.3e}, norm {norm:.3e})"
        )
    x = scipy.linalg.lu_solve((lu, piv), b, check_finite=False)
    for _ in range(refine):
        x = x + scipy.linalg.lu_solve((lu, piv), b - a @ x, check_finite=False)
    return x
