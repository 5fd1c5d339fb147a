"""POD with interpolation: a non-intrusive parametric reduced model.

Training states are (optionally) mean-centered, compressed with a
truncated SVD, and the modal coefficients of every sample are
interpolated over the parameter box with a single vector-valued RBF.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import binio
from .linalg import truncated_svd
from .rbf import RbfInterpolant, RbfKernel, rbf_eval, rbf_fit

DEFAULT_RANK = 0.999


class RomError(ValueError):
    pass


@dataclass(frozen=True)
class ParametricSnapshotSet:
    params: np.ndarray  # (N_s, m)
    states: np.ndarray  # (n, N_s)
    layout: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        params = np.atleast_2d(np.asarray(self.params, dtype=np.float64))
        states = np.asarray(self.states, dtype=np.float64)
        if states.ndim != 2 or params.shape[0] != states.shape[1]:
            raise RomError(f"{params.shape[0]} parameter rows for {states.shape[1]} state columns")
        _, first, counts = np.unique(params, axis=0, return_index=True, return_counts=True)
        if (counts > 1).any():
            dup = params[first[np.argmax(counts > 1)]]
            raise RomError(f"duplicate parameter point {dup.tolist()}")
        object.__setattr__(self, "params", params)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "layout", tuple(tuple(x) for x in self.layout))

    @property
    def n_samples(self) -> int:
        return self.params.shape[0]

    def append(self, mu, state) -> "ParametricSnapshotSet":
        return ParametricSnapshotSet(
            np.vstack([self.params, np.asarray(mu, dtype=np.float64).reshape(1, -1)]),
            np.hstack([self.states, np.asarray(state, dtype=np.float64).reshape(-1, 1)]),
            self.layout,
        )


@dataclass(frozen=True)
class RomModel:
    mean: np.ndarray
    basis: np.ndarray
    singular_values: np.ndarray
    coeff_interpolant: RbfInterpolant
    layout: tuple[tuple[str, str], ...] = ()
    all_singular_values: np.ndarray = field(default_factory=lambda: np.zeros(0))
    provenance: dict = field(default_factory=dict)

    @property
    def rank(self) -> int:
        return self.basis.shape[1]

    @property
    def dim(self) -> int:
        return self.coeff_interpolant.dim

    def predict(self, mu) -> np.ndarray:
        return predict(self, mu)

    def to_bytes(self) -> bytes:
        s = self.coeff_interpolant
        header = {
            "kind": "rom",
            "m": s.dim,
            "n": int(self.mean.size),
            "r": self.rank,
            "layout": [list(x) for x in self.layout],
            "kernel": s.kernel.family,
            "epsilon": s.epsilon,
            "epsilon_fixed": s.kernel.epsilon is not None,
            "lambda_reg": s.regularization,
            "energy": pod_energy(self).tolist(),
            "provenance": self.provenance,
        }
        return binio.dumps(
            header,
            {
                "mean": self.mean,
                "basis": self.basis,
                "singular_values": self.singular_values,
                "all_singular_values": self.all_singular_values,
                "centers": s.centers,
                "weights": s.weights,
                "box": s.box,
            },
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> "RomModel":
        header, a = binio.loads(data)
        if header.get("kind") != "rom":
            raise binio.ContainerError("container does not hold a reduced model")
        kernel = RbfKernel(header["kernel"], header["epsilon"] if header["epsilon_fixed"] else None)
        interp = RbfInterpolant(a["centers"], a["weights"], kernel, header["epsilon"], header["lambda_reg"], a["box"])
        return cls(
            a["mean"],
            a["basis"],
            a["singular_values"],
            interp,
            tuple(tuple(x) for x in header["layout"]),
            a["all_singular_values"],
            header.get("provenance", {}),
        )

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "RomModel":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


def build_rom(
    snapshots: ParametricSnapshotSet,
    rank: int | float = DEFAULT_RANK,
    kernel: RbfKernel | None = None,
    regularization: float | None = None,
    box=None,
    center: bool = True,
    provenance: dict | None = None,
) -> RomModel:
    """Fit the POD basis and the coefficient interpolant.

    ``box`` (``(m, 2)`` bounds) normalizes parameters for the RBF; it
    defaults to the bounding box of the training parameters.
    """
    N = snapshots.n_samples
    if N < 2:
        raise RomError(f"need at least two samples, got {N}")
    if isinstance(rank, (int, np.integer)) and not isinstance(rank, bool):
        if rank > N:
            raise RomError(f"rank {rank} exceeds the number of samples {N}")
        if rank < 1:
            raise RomError("rank must be at least 1")
    X = snapshots.states
    mean = X.mean(axis=1) if center else np.zeros(X.shape[0])
    Xc = X - mean[:, None]
    if not np.any(Xc):
        # every snapshot equals the mean: a single null mode keeps shapes valid
        basis = np.zeros((X.shape[0], 1))
        basis[0, 0] = 1.0
        sigma = np.zeros(1)
        full = np.zeros(min(X.shape))
    else:
        svd = truncated_svd(Xc, rank)
        basis, sigma, full = svd.u, svd.sigma, svd.full_sigma
    coeffs = basis.T @ Xc  # (r, N)
    interp = rbf_fit(snapshots.params, coeffs.T, kernel or RbfKernel(), regularization, box)
    basis = np.ascontiguousarray(basis)
    return RomModel(mean, basis, sigma, interp, snapshots.layout, full, dict(provenance or {}))


def predict(model: RomModel, mu) -> np.ndarray:
    mu = np.asarray(mu, dtype=np.float64)
    if mu.shape[-1] != model.dim:
        raise RomError(f"parameter has dimension {mu.shape[-1]}, model expects {model.dim}")
    coeffs = rbf_eval(model.coeff_interpolant, mu)
    if coeffs.ndim == 1:
        return model.mean + model.basis @ coeffs
    return model.mean[:, None] + model.basis @ coeffs.T


def modal_coefficients(model: RomModel, states: np.ndarray) -> np.ndarray:
    return model.basis.T @ (np.asarray(states) - model.mean[:, None])


def pod_energy(model_or_sigma) -> np.ndarray:
    """Cumulative energy fractions ``cumsum(s^2) / sum(s^2)``.

    Accepts a model (uses its full training spectrum) or a spectrum array.
    """
    if isinstance(model_or_sigma, RomModel):
        sigma = model_or_sigma.all_singular_values
        if sigma.size == 0:
            sigma = model_or_sigma.singular_values
    else:
        sigma = np.asarray(model_or_sigma, dtype=np.float64)
    e = np.cumsum(sigma**2)
    if e.size == 0 or e[-1] == 0:
        return np.ones_like(e)
    out = e / e[-1]
    out[-1] = 1.0
    return out
