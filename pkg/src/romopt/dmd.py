"""Exact dynamic mode decomposition of equispaced snapshot series.

The fit follows the standard projected construction: the snapshot pairs
``X = [x_1 .. x_{m-1}]`` and ``Y = [x_2 .. x_m]`` are reduced with a
truncated SVD of ``X``, the small operator ``U* Y V S^-1`` is
eigendecomposed and the exact modes are lifted back through ``Y V S^-1 W``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import binio
from .linalg import eig_dense, truncated_svd

log = logging.getLogger(__name__)

DEFAULT_RANK = 0.9999
DEFAULT_ETA = 1e-4


class DmdError(ValueError):
    pass


@dataclass(frozen=True)
class SnapshotSeries:
    states: np.ndarray  # (n, m), one column per time step
    t0: float
    dt: float

    def __post_init__(self):
        states = np.asarray(self.states, dtype=np.float64)
        if states.ndim != 2:
            raise DmdError("snapshot states must be a 2-D array (n, m)")
        if states.shape[1] < 3:
            raise DmdError(f"need at least 3 snapshots, got {states.shape[1]}")
        if not self.dt > 0:
            raise DmdError(f"time step must be positive, got {self.dt}")
        if not np.all(np.isfinite(states)):
            col = int(np.flatnonzero(~np.isfinite(states).all(axis=0))[0])
            raise DmdError(f"snapshot {col} has non-finite entries")
        states.flags.writeable = False
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "dt", float(self.dt))

    @classmethod
    def from_times(cls, states: np.ndarray, times) -> "SnapshotSeries":
        """Build from explicit sample times, rejecting non-equispaced input."""
        times = np.asarray(times, dtype=np.float64)
        steps = np.diff(times)
        if steps.size == 0 or not np.allclose(steps, steps[0], rtol=1e-9, atol=0):
            raise DmdError("snapshot times are not equispaced")
        return cls(states, times[0], float(steps.mean()))

    @property
    def count(self) -> int:
        return self.states.shape[1]

    @property
    def t_end(self) -> float:
        return self.t0 + (self.count - 1) * self.dt

    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.count)


@dataclass(frozen=True)
class DmdModel:
    modes: np.ndarray  # (n, r) complex
    eigenvalues: np.ndarray  # (r,) discrete-time
    amplitudes: np.ndarray  # (r,)
    t0: float
    dt: float
    t_end: float
    residual: float = 0.0
    singular_values: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def rank(self) -> int:
        return self.eigenvalues.size

    def dynamics(self, t, mask: np.ndarray | None = None) -> np.ndarray:
        k = (np.atleast_1d(np.asarray(t, dtype=np.float64)) - self.t0) / self.dt
        lam = self.eigenvalues if mask is None else self.eigenvalues[mask]
        b = self.amplitudes if mask is None else self.amplitudes[mask]
        return (lam[:, None] ** k[None, :]) * b[:, None]

    def growth_rates(self) -> np.ndarray:
        """Continuous-time eigenvalues ``log(lambda) / dt``."""
        return np.log(self.eigenvalues.astype(np.complex128)) / self.dt

    # -- serialization -----------------------------------------------------

    def to_bytes(self) -> bytes:
        header = {
            "kind": "dmd",
            "rank": self.rank,
            "n": int(self.modes.shape[0]),
            "t0": self.t0,
            "dt": self.dt,
            "t_end": self.t_end,
            "residual": self.residual,
            "eigenvalues": [[float(z.real), float(z.imag)] for z in self.eigenvalues],
        }
        return binio.dumps(
            header,
            {
                "modes": self.modes.astype(np.complex128),
                "amplitudes": self.amplitudes.astype(np.complex128),
                "singular_values": self.singular_values,
            },
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> "DmdModel":
        header, arrays = binio.loads(data)
        if header.get("kind") != "dmd":
            raise binio.ContainerError("container does not hold a DMD model")
        lam = np.array([complex(re, im) for re, im in header["eigenvalues"]], dtype=np.complex128)
        return cls(
            arrays["modes"],
            lam,
            arrays["amplitudes"],
            header["t0"],
            header["dt"],
            header["t_end"],
            header["residual"],
            arrays["singular_values"],
        )

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "DmdModel":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


def fit_dmd(series: SnapshotSeries, rank: int | float = DEFAULT_RANK) -> DmdModel:
    """Fit exact DMD; ``rank`` is a fixed count or an energy fraction."""
    states = series.states
    X = states[:, :-1]
    Y = states[:, 1:]
    m = states.shape[1]
    if isinstance(rank, (int, np.integer)) and not isinstance(rank, bool) and rank > m - 1:
        raise DmdError(f"rank {rank} exceeds the number of snapshot pairs {m - 1}")
    if not np.any(X):
        raise DmdError("snapshot matrix X is identically zero")
    svd = truncated_svd(X, rank)
    keep = svd.sigma > 1e-14 * svd.sigma[0]
    if not keep.all():
        log.debug("dropping %d numerically zero singular values", int((~keep).sum()))
    U, S, V = svd.u[:, keep], svd.sigma[keep], svd.v[:, keep]
    YVS = (Y @ V) / S
    A_tilde = U.T @ YVS
    lam, W = eig_dense(A_tilde)
    Phi = YVS @ W
    b, *_ = np.linalg.lstsq(Phi, states[:, 0].astype(np.complex128), rcond=None)
    model = DmdModel(Phi, lam, b, series.t0, series.dt, series.t_end, 0.0, svd.full_sigma)
    recon = reconstruct(model, series.times())
    norms = np.linalg.norm(states, axis=0)
    norms[norms == 0] = 1.0
    residual = float(np.max(np.linalg.norm(recon - states, axis=0) / norms))
    return DmdModel(Phi, lam, b, series.t0, series.dt, series.t_end, residual, svd.full_sigma)


def reconstruct(model: DmdModel, t) -> np.ndarray:
    """Real part of the modal expansion at time(s) ``t``.

    A scalar ``t`` gives an ``(n,)`` state; an array gives ``(n, len(t))``.
    """
    scalar = np.ndim(t) == 0
    if np.any(np.asarray(t) > model.t_end + 1e-9 * model.dt):
        log.debug("extrapolating DMD past the training window end t=%g", model.t_end)
    x = (model.modes @ model.dynamics(t)).real
    return x[:, 0] if scalar else x


def stable_mask(model: DmdModel, eta: float = DEFAULT_ETA, policy: str = "stable") -> np.ndarray:
    """Modes kept for regime forecasting.

    ``"stable"`` keeps every mode with ``|lambda| <= 1 + eta``; ``"fixed-point"``
    keeps only modes with ``|lambda - 1| <= eta``.
    """
    lam = model.eigenvalues
    if policy == "stable":
        return np.abs(lam) <= 1.0 + eta
    if policy == "fixed-point":
        return np.abs(lam - 1.0) <= eta
    raise DmdError(f"unknown regime policy {policy!r}")


def regime_state(
    model: DmdModel,
    horizon: float | None = None,
    eta: float = DEFAULT_ETA,
    policy: str = "stable",
) -> np.ndarray:
    """Forecast the long-time state using only non-growing modes.

    ``horizon`` defaults to ``t0`` plus ten training-window lengths.
    """
    if horizon is None:
        horizon = default_horizon(model)
    if horizon < model.t_end - 1e-9 * model.dt:
        raise DmdError(f"horizon {horizon} precedes the end of the training window {model.t_end}")
    mask = stable_mask(model, eta, policy)
    if not mask.any():
        raise DmdError("no stable dynamics: every DMD mode is growing")
    dropped = np.flatnonzero(~mask)
    if dropped.size:
        log.info("regime forecast excludes %d unstable mode(s): |lambda| = %s",
                 dropped.size, np.abs(model.eigenvalues[dropped]))
    return (model.modes[:, mask] @ model.dynamics(horizon, mask)).real[:, 0]


def default_horizon(model: DmdModel) -> float:
    return model.t0 + 10.0 * (model.t_end - model.t0)


def excluded_modes(model: DmdModel, eta: float = DEFAULT_ETA, policy: str = "stable") -> np.ndarray:
    return np.flatnonzero(~stable_mask(model, eta, policy))


def hankel(values: np.ndarray, delay: int) -> np.ndarray:
    """Delay-embed a scalar series into a ``delay x (len - delay + 1)`` matrix."""
    values = np.asarray(values, dtype=np.float64).reshape(-1)
    if not 1 <= delay < values.size - 1:
        raise DmdError(f"delay {delay} incompatible with series of length {values.size}")
    cols = values.size - delay + 1
    return np.stack([values[i : i + cols] for i in range(delay)])


def scalar_regime(
    values,
    t0: float,
    dt: float,
    delay: int | None = None,
    rank: int | float = 1.0 - 1e-10,
    horizon: float | None = None,
    eta: float = DEFAULT_ETA,
) -> float:
    """Regime value of a scalar time series (e.g. integrated resistance)
    via DMD on its delay embedding."""
    values = np.asarray(values, dtype=np.float64)
    if delay is None:
        delay = values.size // 2
    H = hankel(values, delay)
    model = fit_dmd(SnapshotSeries(H, t0, dt), rank)
    if horizon is None:
        horizon = t0 + 10.0 * (dt * (values.size - 1))
    return float(regime_state(model, horizon, eta)[0])
