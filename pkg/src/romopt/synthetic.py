"""Synthetic hull-like geometry and closed-form flow fields.

The hull is an ellipsoid with a Gaussian bulb protrusion at the bow,
triangulated through an equiangular cube-to-sphere map (six structured
patches, no polar singularities).  The bow points along ``+x``; the hull
advances in ``+x``.

Regime fields are closed-form in the deformed vertex positions ``X`` and
the parameter ``mu``::

    p_inf(X, mu)   = q * (cp(X) + Q(mu) * s(X))
    tau_inf(X, mu) = -q * cf(X) * (1 + kappa * Q(mu)) * e_x

where ``q = rho U^2 / 2`` and ``Q`` is a positive-definite quadratic with
its minimum at ``mu_center``.  Transients add three damped oscillations
with fixed rates and spatial profiles seeded from ``seed``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ffd import Dof, FfdLattice, FfdParameterization
from .mesh import SCALAR, VECTOR3, Field, TriMesh

# ---------------------------------------------------------------------------
# geometry


@dataclass(frozen=True)
class HullShape:
    half_length: float = 5.0
    half_beam: float = 1.0
    half_depth: float = 0.8
    bulb_height: float = 0.08
    bulb_width: float = 0.35
    bulb_direction: tuple[float, float, float] = (1.0, 0.0, -0.35)

    def surface(self, s: np.ndarray) -> np.ndarray:
        """Map unit-sphere directions ``(N, 3)`` onto the hull surface."""
        d = np.asarray(self.bulb_direction, dtype=np.float64)
        d = d / np.linalg.norm(d)
        bump = 1.0 + self.bulb_height * np.exp(-np.sum((s - d) ** 2, axis=1) / self.bulb_width**2)
        scale = np.array([self.half_length, self.half_beam, self.half_depth])
        return s * scale * bump[:, None]


# (fixed axis, sign) per cube face; the other two axes follow cyclically so
# that (u, v, outward) is right-handed
_FACES = [(0, 1), (0, -1), (1, 1), (1, -1), (2, 1), (2, -1)]


def _face_axes(axis: int, sign: int) -> tuple[int, int]:
    a, b = (axis + 1) % 3, (axis + 2) % 3
    return (a, b) if sign > 0 else (b, a)


def cube_point(axis: int, sign: int, xi: np.ndarray, eta: np.ndarray) -> np.ndarray:
    """Equiangular cube point for face coordinates in ``[-1, 1]``."""
    a, b = _face_axes(axis, sign)
    c = np.zeros(np.broadcast(xi, eta).shape + (3,))
    c[..., axis] = sign
    c[..., a] = np.tan(0.25 * np.pi * xi)
    c[..., b] = np.tan(0.25 * np.pi * eta)
    return c


def hull_point(shape: HullShape, axis: int, sign: int, xi, eta) -> np.ndarray:
    c = cube_point(axis, sign, np.asarray(xi, dtype=np.float64), np.asarray(eta, dtype=np.float64))
    flat = c.reshape(-1, 3)
    s = flat / np.linalg.norm(flat, axis=1, keepdims=True)
    return shape.surface(s).reshape(c.shape)


def make_hull(resolution: int = 16, shape: HullShape | None = None) -> TriMesh:
    """Closed, outward-oriented triangulation with ``12 * resolution**2`` faces."""
    shape = shape or HullShape()
    N = int(resolution)
    if N < 1:
        raise ValueError("resolution must be >= 1")
    index: dict[tuple[int, int, int], int] = {}
    keys: list[tuple[int, int, int]] = []
    faces = []
    for axis, sign in _FACES:
        a, b = _face_axes(axis, sign)
        ids = np.empty((N + 1, N + 1), dtype=np.int64)
        for i in range(N + 1):
            for j in range(N + 1):
                key = [0, 0, 0]
                key[axis] = N if sign > 0 else 0
                key[a] = i
                key[b] = j
                # integer lattice on [0, N]^3 makes shared patch edges coincide exactly
                k = tuple(key)
                if k not in index:
                    index[k] = len(keys)
                    keys.append(k)
                ids[i, j] = index[k]
        for i in range(N):
            for j in range(N):
                v00, v10, v01, v11 = ids[i, j], ids[i + 1, j], ids[i, j + 1], ids[i + 1, j + 1]
                faces.append((v00, v10, v11))
                faces.append((v00, v11, v01))
    lattice = np.array(keys, dtype=np.float64)
    cube = lattice * (2.0 / N) - 1.0
    # equiangular warp per component; the fixed axis stays at +-1
    warped = np.tan(0.25 * np.pi * cube)
    s = warped / np.linalg.norm(warped, axis=1, keepdims=True)
    return TriMesh(shape.surface(s), np.array(faces, dtype=np.int64))


def hull_quadrature(shape: HullShape, integrand, order: int = 48, h: float = 1e-6) -> np.ndarray:
    """Integrate ``integrand(X, n_dA)`` over the smooth hull surface.

    Tensor Gauss-Legendre on each cube patch with the surface Jacobian from
    central differences, independent of any triangulation.  ``integrand``
    receives points ``(M, 3)`` and area-weighted outward normals ``(M, 3)``
    (per unit parameter area) and returns ``(M,)`` or ``(M, k)`` values.
    """
    x, w = np.polynomial.legendre.leggauss(order)
    XI, ETA = np.meshgrid(x, x, indexing="ij")
    W = np.outer(w, w).reshape(-1)
    total = 0.0
    for axis, sign in _FACES:
        xi, eta = XI.reshape(-1), ETA.reshape(-1)
        P = hull_point(shape, axis, sign, xi, eta)
        dxi = (hull_point(shape, axis, sign, xi + h, eta) - hull_point(shape, axis, sign, xi - h, eta)) / (2 * h)
        deta = (hull_point(shape, axis, sign, xi, eta + h) - hull_point(shape, axis, sign, xi, eta - h)) / (2 * h)
        ndA = np.cross(dxi, deta)
        vals = np.asarray(integrand(P, ndA))
        total = total + np.tensordot(W, vals, axes=(0, 0))
    return np.asarray(total)


# ---------------------------------------------------------------------------
# parameterization used by the fixture study


def bow_parameterization(half_width: float = 0.1) -> FfdParameterization:
    """Five-parameter lattice around the bow.

    The box cuts the hull only through its aft face ``x = 3.2``, where all
    control points stay fixed, so the deformation is continuous there.
    """
    lattice = FfdLattice([3.2, -1.2, -1.0], np.diag([2.8, 2.4, 2.0]), (4, 3, 4))
    ex, ez = (1.0, 0.0, 0.0), (0.0, 0.0, 1.0)
    dofs = (
        Dof((2, 1, 1), ex),
        Dof((2, 1, 2), ex),
        Dof((1, 1, 1), ex),
        Dof((2, 1, 1), ez),
        Dof((1, 1, 2), ez),
    )
    bounds = [[-half_width, half_width]] * len(dofs)
    return FfdParameterization(lattice, dofs, bounds)


# ---------------------------------------------------------------------------
# fields

FIELD_LAYOUT = (("p", SCALAR), ("tau", VECTOR3))

_DEFAULT_CENTER = (0.03, -0.025, 0.04, -0.05, 0.02)


def _default_center(m: int) -> np.ndarray:
    if m <= len(_DEFAULT_CENTER):
        return np.array(_DEFAULT_CENTER[:m])
    extra = [0.03 * np.cos(1.7 * i + 0.4) for i in range(len(_DEFAULT_CENTER), m)]
    return np.array(list(_DEFAULT_CENTER) + extra)


@dataclass
class SyntheticFlow:
    """Closed-form regime and transient fields on a (deformed) hull."""

    rho: float = 1025.0
    speed: float = 1.981
    mu_center: np.ndarray | None = None
    mu_scale: float = 0.1
    coupling: float = 0.3
    kappa: float = 0.5
    rates: tuple[float, ...] = (0.15, 0.2, 0.3)
    frequencies: tuple[float, ...] = (0.6, 1.1, 1.7)
    amplitudes: tuple[float, ...] = (0.3, 0.2, 0.15)
    t_ref: float = 40.0
    seed: int = 0
    _profiles: dict = field(default_factory=dict, repr=False)

    @property
    def dynamic_pressure(self) -> float:
        return 0.5 * self.rho * self.speed**2

    def center(self, m: int) -> np.ndarray:
        if self.mu_center is None:
            return _default_center(m)
        c = np.asarray(self.mu_center, dtype=np.float64)
        if c.size != m:
            raise ValueError(f"mu_center has {c.size} entries for a {m}-parameter study")
        return c

    def quadratic(self, mu) -> float:
        """Positive-definite quadratic ``Q(mu)`` driving the bulb pressure."""
        mu = np.asarray(mu, dtype=np.float64).reshape(-1)
        m = mu.size
        if m == 0:
            return 0.0
        d = (mu - self.center(m)) / self.mu_scale
        M = np.eye(m)
        for i in range(m - 1):
            M[i, i + 1] = M[i + 1, i] = 0.5 * self.coupling * (-1) ** i
        return float(d @ M @ d)

    @staticmethod
    def cp(X: np.ndarray) -> np.ndarray:
        x, z = X[:, 0], X[:, 2]
        stagnation = np.exp(-(((x - 5.2) / 0.9) ** 2))
        shoulder = -0.35 * np.exp(-(((x - 2.5) / 1.5) ** 2)) * (1.0 + 0.3 * z)
        stern = 0.15 * np.exp(-(((x + 4.8) / 1.0) ** 2))
        return stagnation + shoulder + stern

    @staticmethod
    def bulb_weight(X: np.ndarray) -> np.ndarray:
        x, z = X[:, 0], X[:, 2]
        return np.exp(-(((x - 5.0) / 0.7) ** 2) - ((z + 0.3) / 0.5) ** 2)

    @staticmethod
    def friction(X: np.ndarray) -> np.ndarray:
        return 0.003 * (1.0 + 0.2 * X[:, 0] / 5.0)

    def regime_fields(self, X: np.ndarray, mu) -> tuple[np.ndarray, np.ndarray]:
        q = self.dynamic_pressure
        Q = self.quadratic(mu)
        p = q * (self.cp(X) + Q * self.bulb_weight(X))
        tau = np.zeros_like(X)
        tau[:, 0] = -q * self.friction(X) * (1.0 + self.kappa * Q)
        return p, tau

    def regime_state(self, X: np.ndarray, mu) -> np.ndarray:
        p, tau = self.regime_fields(X, mu)
        return np.concatenate([p, tau.reshape(-1)])

    def _wave(self, X: np.ndarray, j: int, which: int) -> np.ndarray:
        key = (j, which)
        if key not in self._profiles:
            rng = np.random.default_rng([self.seed, j, which])
            k = rng.normal(size=3) * np.array([0.6, 1.5, 1.5])
            self._profiles[key] = (k, rng.uniform(0, 2 * np.pi), rng.normal(size=3))
        k, phase, tdir = self._profiles[key]
        return np.sin(X @ k + phase), tdir

    def transient_profiles(self, X: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
        """``(a_j, b_j)`` state-vector profiles for each damped oscillation."""
        q = self.dynamic_pressure
        out = []
        for j, alpha in enumerate(self.amplitudes):
            pair = []
            for which in (0, 1):
                w, tdir = self._wave(X, j, which)
                p = q * alpha * w
                tau = q * 0.003 * alpha * w[:, None] * tdir[None, :]
                pair.append(np.concatenate([p, tau.reshape(-1)]))
            out.append(tuple(pair))
        return out

    def state(self, X: np.ndarray, mu, t: np.ndarray) -> np.ndarray:
        """Closed-form state at times ``t``; returns ``(n, len(t))``."""
        t = np.atleast_1d(np.asarray(t, dtype=np.float64))
        base = self.regime_state(X, mu)
        out = np.repeat(base[:, None], t.size, axis=1)
        for (a, b), g, w in zip(self.transient_profiles(X), self.rates, self.frequencies):
            env = np.exp(-g * (t - self.t_ref))
            out += a[:, None] * (env * np.cos(w * t))[None, :] + b[:, None] * (env * np.sin(w * t))[None, :]
        return out

    def fields_on(self, mesh: TriMesh, mu) -> TriMesh:
        p, tau = self.regime_fields(mesh.vertices, mu)
        return mesh.with_fields(Field("p", SCALAR, p), Field("tau", VECTOR3, tau))
