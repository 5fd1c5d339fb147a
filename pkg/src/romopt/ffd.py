"""Free-form deformation with a trivariate Bernstein (Bezier) lattice.

A point is mapped affinely into the unit cube of the lattice, blended
against the displaced control grid and mapped back.  Points whose
reference coordinates fall outside ``[0, 1]^3`` are left untouched.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import comb
from pathlib import Path
from typing import Sequence

import numpy as np

from .mesh import TriMesh


class FfdError(ValueError):
    pass


def bernstein_basis(degree: int, t: float) -> np.ndarray:
    """All ``degree + 1`` Bernstein polynomials of the given degree at ``t``."""
    if degree < 0:
        raise FfdError("degree must be non-negative")
    if not 0.0 <= t <= 1.0:
        raise FfdError(f"Bernstein parameter {t} outside [0, 1]")
    return _bernstein(degree, np.array([t], dtype=np.float64))[0]


def _bernstein(degree: int, t: np.ndarray) -> np.ndarray:
    """Vectorized basis, shape ``(len(t), degree + 1)``."""
    i = np.arange(degree + 1)
    coef = np.array([comb(degree, k) for k in i], dtype=np.float64)
    t = t[:, None]
    return coef * t**i * (1.0 - t) ** (degree - i)


@dataclass(frozen=True)
class FfdLattice:
    origin: np.ndarray
    axes: np.ndarray  # rows are the three box edges
    dims: tuple[int, int, int]
    displacements: np.ndarray = None  # (l, m, n, 3), lattice-local

    def __post_init__(self):
        origin = np.asarray(self.origin, dtype=np.float64).reshape(3)
        axes = np.asarray(self.axes, dtype=np.float64).reshape(3, 3)
        dims = tuple(int(d) for d in self.dims)
        if len(dims) != 3 or min(dims) < 2:
            raise FfdError(f"lattice dims must be three integers >= 2, got {self.dims}")
        scale = np.max(np.linalg.norm(axes, axis=1))
        if scale == 0 or abs(np.linalg.det(axes)) <= 1e-12 * scale**3:
            raise FfdError("lattice axes are singular")
        if self.displacements is None:
            disp = np.zeros(dims + (3,))
        else:
            disp = np.asarray(self.displacements, dtype=np.float64)
            if disp.size != 3 * dims[0] * dims[1] * dims[2]:
                raise FfdError(f"expected {dims[0] * dims[1] * dims[2]} displacement vectors, got {disp.size // 3}")
            disp = disp.reshape(dims + (3,))
        for name, arr in (("origin", origin), ("axes", axes), ("displacements", disp)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "dims", dims)

    def to_reference(self, p: np.ndarray) -> np.ndarray:
        """Affine map into lattice coordinates; accepts ``(3,)`` or ``(N, 3)``."""
        p = np.asarray(p, dtype=np.float64)
        return np.linalg.solve(self.axes.T, (p - self.origin).T).T

    def from_reference(self, s: np.ndarray) -> np.ndarray:
        return self.origin + np.asarray(s, dtype=np.float64) @ self.axes

    def control_points(self) -> np.ndarray:
        """Displaced control points in physical space, shape ``(l, m, n, 3)``."""
        grids = np.meshgrid(*(np.linspace(0.0, 1.0, d) for d in self.dims), indexing="ij")
        ref = np.stack(grids, axis=-1) + self.displacements
        return self.from_reference(ref.reshape(-1, 3)).reshape(ref.shape)

    def with_displacements(self, displacements: np.ndarray) -> "FfdLattice":
        return FfdLattice(self.origin, self.axes, self.dims, displacements)

    def deform_points(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64)
        out = points.copy()
        stu = self.to_reference(points)
        inside = np.all((stu >= 0.0) & (stu <= 1.0), axis=1)
        if not inside.any() or not self.displacements.any():
            return out
        s = stu[inside]
        l, m, n = self.dims
        bs = _bernstein(l - 1, s[:, 0])
        bt = _bernstein(m - 1, s[:, 1])
        bu = _bernstein(n - 1, s[:, 2])
        # sum B_i B_j B_k P0_ijk reproduces s exactly (linear precision), so
        # only the displacement blend needs evaluating
        shift = np.einsum("pi,pj,pk,ijkc->pc", bs, bt, bu, self.displacements)
        out[inside] = self.from_reference(s + shift)
        return out


def deform_point(lattice: FfdLattice, p) -> np.ndarray:
    return lattice.deform_points(np.asarray(p, dtype=np.float64).reshape(1, 3))[0]


def to_reference(lattice: FfdLattice, p) -> np.ndarray:
    return lattice.to_reference(p)


def from_reference(lattice: FfdLattice, s) -> np.ndarray:
    return lattice.from_reference(s)


@dataclass(frozen=True)
class Dof:
    index: tuple[int, int, int]
    direction: tuple[float, float, float]


@dataclass(frozen=True)
class FfdParameterization:
    """Maps a parameter vector onto control-point displacements.

    Component ``c`` of ``mu`` moves control point ``dof_map[c].index`` by
    ``mu[c] * dof_map[c].direction`` in lattice-local coordinates.
    """

    lattice: FfdLattice
    dof_map: tuple[Dof, ...]
    bounds: np.ndarray  # (m, 2)
    strict: bool = False

    def __post_init__(self):
        dofs = tuple(
            d if isinstance(d, Dof) else Dof(tuple(d[0]), tuple(d[1])) for d in self.dof_map
        )
        seen = set()
        for d in dofs:
            if len(d.index) != 3 or any(not 0 <= i < n for i, n in zip(d.index, self.lattice.dims)):
                raise FfdError(f"control index {d.index} outside lattice dims {self.lattice.dims}")
            norm = np.linalg.norm(d.direction)
            if abs(norm - 1.0) > 1e-9:
                raise FfdError(f"dof direction {d.direction} is not a unit vector")
            key = (tuple(d.index), tuple(np.round(d.direction, 12)))
            if key in seen:
                raise FfdError(f"repeated dof {d.index} along {d.direction}")
            seen.add(key)
        bounds = np.asarray(self.bounds, dtype=np.float64).reshape(-1, 2)
        if len(bounds) != len(dofs):
            raise FfdError(f"{len(bounds)} bounds for {len(dofs)} parameters")
        if np.any(bounds[:, 0] >= bounds[:, 1]):
            raise FfdError("each bound needs low < high")
        bounds.flags.writeable = False
        object.__setattr__(self, "dof_map", dofs)
        object.__setattr__(self, "bounds", bounds)

    @property
    def dim(self) -> int:
        return len(self.dof_map)

    def apply_params(self, mu, strict: bool | None = None) -> FfdLattice:
        mu = np.asarray(mu, dtype=np.float64).reshape(-1)
        if mu.size != self.dim:
            raise FfdError(f"parameter vector has {mu.size} entries, expected {self.dim}")
        strict = self.strict if strict is None else strict
        if strict:
            lo, hi = self.bounds[:, 0], self.bounds[:, 1]
            out = np.flatnonzero((mu < lo) | (mu > hi))
            if out.size:
                c = int(out[0])
                raise FfdError(f"mu[{c}] = {mu[c]} outside [{lo[c]}, {hi[c]}]")
        disp = np.zeros(self.lattice.dims + (3,))
        for value, dof in zip(mu, self.dof_map):
            disp[dof.index] += value * np.asarray(dof.direction)
        return self.lattice.with_displacements(disp)

    def deform_mesh(self, mesh: TriMesh, mu) -> TriMesh:
        lattice = self.apply_params(mu)
        return mesh.with_vertices(lattice.deform_points(mesh.vertices))

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "origin": self.lattice.origin.tolist(),
            "axes": self.lattice.axes.tolist(),
            "dims": list(self.lattice.dims),
            "dof_map": [
                {"i": d.index[0], "j": d.index[1], "k": d.index[2], "dir": list(map(float, d.direction))}
                for d in self.dof_map
            ],
            "bounds": self.bounds.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict, strict: bool = False) -> "FfdParameterization":
        known = {"origin", "axes", "dims", "dof_map", "bounds"}
        unknown = set(doc) - known
        if unknown:
            raise FfdError(f"unknown keys in parameterization: {sorted(unknown)}")
        missing = known - set(doc)
        if missing:
            raise FfdError(f"missing keys in parameterization: {sorted(missing)}")
        lattice = FfdLattice(doc["origin"], doc["axes"], tuple(doc["dims"]))
        dofs = tuple(Dof((int(e["i"]), int(e["j"]), int(e["k"])), tuple(map(float, e["dir"]))) for e in doc["dof_map"])
        return cls(lattice, dofs, doc["bounds"], strict=strict)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path, strict: bool = False) -> "FfdParameterization":
        return cls.from_dict(json.loads(Path(path).read_text()), strict=strict)


def apply_params(param: FfdParameterization, mu, strict: bool | None = None) -> FfdLattice:
    return param.apply_params(mu, strict=strict)


def deform_mesh(param: FfdParameterization, mesh: TriMesh, mu) -> TriMesh:
    return param.deform_mesh(mesh, mu)


def box_parameterization(
    lo: Sequence[float],
    hi: Sequence[float],
    dims: Sequence[int],
    dofs: Sequence[tuple[tuple[int, int, int], Sequence[float]]],
    bounds: Sequence[Sequence[float]],
) -> FfdParameterization:
    """Axis-aligned lattice spanning the box ``[lo, hi]``."""
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    lattice = FfdLattice(lo, np.diag(hi - lo), tuple(dims))
    return FfdParameterization(lattice, tuple(Dof(tuple(i), tuple(map(float, d))) for i, d in dofs), bounds)
