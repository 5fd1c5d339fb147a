"""Full-order model boundary.

The high-fidelity solver is a black box that, given a deformed surface
mesh and a parameter point, returns an equispaced series of surface
fields.  Two synthetic solvers are bundled for desk-scale work, and
exported runs from an external code are read back with
:func:`ingest_external`.  Resistance is the surface integral of pressure
and wall traction projected on the motion direction.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .dmd import SnapshotSeries
from .mesh import SCALAR, VECTOR3, Field, MeshError, TriMesh, layout_width, read_fields_csv, write_fields_csv
from .synthetic import FIELD_LAYOUT, SyntheticFlow

log = logging.getLogger(__name__)

GRAVITY = 9.81


class FomError(RuntimeError):
    pass


class ResistanceError(ValueError):
    pass


@dataclass(frozen=True)
class FlowConditions:
    speed: float
    density: float
    reference_area: float
    froude: float | None = None

    def __post_init__(self):
        for name in ("speed", "density", "reference_area"):
            if not getattr(self, name) > 0:
                raise ValueError(f"flow {name} must be positive")

    @property
    def dynamic_pressure(self) -> float:
        return 0.5 * self.density * self.speed**2

    @classmethod
    def from_froude(cls, froude: float, length: float, density: float, reference_area: float) -> "FlowConditions":
        return cls(froude * math.sqrt(GRAVITY * length), density, reference_area, froude)


@dataclass(frozen=True)
class FomRequest:
    mesh: TriMesh
    mu: np.ndarray
    t_start: float
    t_end: float
    count: int
    fields: tuple[str, ...] = ("p", "tau")

    def __post_init__(self):
        if not self.t_start < self.t_end:
            raise FomError(f"time window needs t_start < t_end, got ({self.t_start}, {self.t_end})")
        if self.count < 3:
            raise FomError(f"need at least 3 snapshots, got {self.count}")
        object.__setattr__(self, "mu", np.asarray(self.mu, dtype=np.float64).reshape(-1))
        object.__setattr__(self, "fields", tuple(self.fields))

    @property
    def dt(self) -> float:
        return (self.t_end - self.t_start) / (self.count - 1)

    def times(self) -> np.ndarray:
        return self.t_start + self.dt * np.arange(self.count)


@dataclass(frozen=True)
class FomResult:
    series: SnapshotSeries
    layout: tuple[tuple[str, str], ...]
    metadata: dict = field(default_factory=dict)


Solver = Callable[[FomRequest], FomResult]


def _select_layout(fields: Sequence[str]) -> tuple[tuple[str, str], ...]:
    kinds = dict(FIELD_LAYOUT)
    missing = [f for f in fields if f not in kinds]
    if missing:
        raise FomError(f"synthetic solvers provide fields {list(kinds)}, not {missing}")
    return tuple((f, kinds[f]) for f in fields)


def _subset(state: np.ndarray, V: int, fields: Sequence[str]) -> np.ndarray:
    """Restrict full (p, tau) states to the requested fields, in order."""
    offsets = {}
    pos = 0
    for name, kind in FIELD_LAYOUT:
        w = V * layout_width([(name, kind)])
        offsets[name] = slice(pos, pos + w)
        pos += w
    return np.concatenate([state[offsets[f]] for f in fields], axis=0)


@dataclass
class SyntheticSolver:
    """Synthetic stand-in for the flow solver.

    ``steady=True`` returns the regime fields at every time step.
    """

    flow: SyntheticFlow = field(default_factory=SyntheticFlow)
    steady: bool = False
    noise: float = 0.0
    name: str = "synthetic-lti"

    def __call__(self, request: FomRequest) -> FomResult:
        X = request.mesh.vertices
        t = request.times()
        if self.steady:
            base = self.flow.regime_state(X, request.mu)
            states = np.repeat(base[:, None], t.size, axis=1)
        else:
            states = self.flow.state(X, request.mu, t)
        if self.noise:
            rng = np.random.default_rng([self.flow.seed, *np.frombuffer(request.mu.tobytes(), dtype=np.uint32).tolist()])
            states = states + self.noise * self.flow.dynamic_pressure * rng.standard_normal(states.shape)
        states = _subset(states, request.mesh.n_vertices, request.fields)
        meta = {
            "solver": self.name,
            "speed": self.flow.speed,
            "density": self.flow.rho,
            "seed": self.flow.seed,
        }
        return FomResult(SnapshotSeries(states, request.t_start, request.dt), _select_layout(request.fields), meta)

    def regime(self, mesh: TriMesh, mu, fields: Sequence[str] = ("p", "tau")) -> np.ndarray:
        """Analytic long-time limit on ``mesh``."""
        return _subset(self.flow.regime_state(mesh.vertices, mu), mesh.n_vertices, fields)


def synthetic_lti_fom(mesh: TriMesh, mu, window: tuple[float, float, int], flow: SyntheticFlow | None = None) -> FomResult:
    request = FomRequest(mesh, mu, *window)
    return SyntheticSolver(flow or SyntheticFlow())(request)


class SolverRegistry:
    """Solver id -> callable; read-only once populated."""

    def __init__(self, solvers: Mapping[str, Solver] | None = None):
        self._solvers = dict(solvers or {})

    def register(self, solver_id: str, solver: Solver) -> None:
        if solver_id in self._solvers:
            raise FomError(f"solver {solver_id!r} already registered")
        self._solvers[solver_id] = solver

    def __contains__(self, solver_id: str) -> bool:
        return solver_id in self._solvers

    def __getitem__(self, solver_id: str) -> Solver:
        try:
            return self._solvers[solver_id]
        except KeyError:
            raise FomError(f"unknown solver {solver_id!r}; registered: {sorted(self._solvers)}") from None

    def ids(self) -> list[str]:
        return sorted(self._solvers)


def default_registry(seed: int = 0) -> SolverRegistry:
    flow = SyntheticFlow(seed=seed)
    return SolverRegistry(
        {
            "synthetic-lti": SyntheticSolver(flow, steady=False, name="synthetic-lti"),
            "synthetic-steady": SyntheticSolver(flow, steady=True, name="synthetic-steady"),
        }
    )


def run_fom(solver_id: str, request: FomRequest, registry: SolverRegistry | None = None) -> FomResult:
    registry = registry or default_registry()
    solver = registry[solver_id]
    try:
        result = solver(request)
    except FomError:
        raise
    except Exception as exc:
        raise FomError(f"solver {solver_id!r} failed: {type(exc).__name__}: {exc}") from exc
    if result.series.count != request.count:
        raise FomError(f"solver {solver_id!r} returned {result.series.count} snapshots, {request.count} requested")
    return result


# ---------------------------------------------------------------------------
# export / ingest


def export_series(result: FomResult, directory, n_vertices: int) -> None:
    """Write ``manifest.json`` and ``step_0000.csv`` ... into ``directory``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    series = result.series
    manifest = {
        "t0": series.t0,
        "dt": series.dt,
        "count": series.count,
        "fields": [{"name": n, "kind": k} for n, k in result.layout],
        "vertex_count": n_vertices,
    }
    (d / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    for k in range(series.count):
        write_fields_csv(d / f"step_{k:04d}.csv", _split(series.states[:, k], result.layout, n_vertices))


def _split(state: np.ndarray, layout, V: int) -> list[Field]:
    out = []
    pos = 0
    for name, kind in layout:
        w = V * layout_width([(name, kind)])
        out.append(Field(name, kind, state[pos : pos + w]))
        pos += w
    return out


def ingest_external(directory, mesh: TriMesh) -> FomResult:
    """Read an exported run, validating it against ``mesh``."""
    d = Path(directory)
    mpath = d / "manifest.json"
    if not mpath.exists():
        raise FomError(f"{mpath}: manifest missing")
    try:
        manifest = json.loads(mpath.read_text())
        t0, dt, count = float(manifest["t0"]), float(manifest["dt"]), int(manifest["count"])
        layout = tuple((f["name"], f["kind"]) for f in manifest["fields"])
        V = int(manifest["vertex_count"])
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise FomError(f"{mpath}: invalid manifest ({exc})") from None
    if V != mesh.n_vertices:
        raise FomError(f"{mpath}: vertex_count {V} does not match mesh ({mesh.n_vertices} vertices)")
    for _, kind in layout:
        if kind not in (SCALAR, VECTOR3):
            raise FomError(f"{mpath}: unknown field kind {kind!r}")
    steps = sorted(p.name for p in d.glob("step_*.csv"))
    if len(steps) != count:
        expected = {f"step_{k:04d}.csv" for k in range(count)}
        missing = sorted(expected - set(steps))
        extra = sorted(set(steps) - expected)
        detail = f"missing {missing[0]}" if missing else f"unexpected {extra[0]}"
        raise FomError(f"{d}: manifest lists {count} steps, found {len(steps)} ({detail})")
    columns = []
    for k in range(count):
        path = d / f"step_{k:04d}.csv"
        if not path.exists():
            raise FomError(f"{d}: missing step file {path.name}")
        try:
            fields = read_fields_csv(path, layout, V)
        except MeshError as exc:
            raise FomError(str(exc)) from None
        columns.append(np.concatenate([f.flat for f in fields]))
    series = SnapshotSeries(np.stack(columns, axis=1), t0, dt)
    return FomResult(series, layout, {"solver": "external", "source": str(d)})


def external_solver(template: str) -> Solver:
    """Solver that reads pre-exported runs from ``template.format(mu=...)``,
    where ``mu`` is the underscore-joined repr of the parameter values."""

    def solve(request: FomRequest) -> FomResult:
        tag = "_".join(repr(float(x)) for x in request.mu)
        return ingest_external(template.format(mu=tag), request.mesh)

    return solve


# ---------------------------------------------------------------------------
# resistance


def force_vector(mesh: TriMesh, pressure: str = "p", shear: str | None = "tau") -> np.ndarray:
    """Integrated surface force ``sum_f (-p_f n_f + tau_f) A_f``."""
    if pressure not in mesh.fields:
        raise ResistanceError(f"mesh has no pressure field {pressure!r}")
    if shear is not None and shear not in mesh.fields:
        raise ResistanceError(f"mesh has no shear field {shear!r}")
    normals, areas = mesh.face_geometry()
    bad = np.flatnonzero(areas < 1e-16)
    if bad.size:
        raise ResistanceError(f"degenerate face(s) with area < 1e-16: {bad[:10].tolist()}")
    f = mesh.faces
    p = mesh.fields[pressure].values
    p_face = (p[f[:, 0]] + p[f[:, 1]] + p[f[:, 2]]) / 3.0
    force = -(p_face * areas) @ normals
    if shear is not None:
        tau = mesh.fields[shear].values
        tau_face = (tau[f[:, 0]] + tau[f[:, 1]] + tau[f[:, 2]]) / 3.0
        force = force + areas @ tau_face
    return force


def integrate_resistance(
    mesh: TriMesh,
    flow: FlowConditions | None = None,
    direction=(1.0, 0.0, 0.0),
    pressure: str = "p",
    shear: str | None = "tau",
) -> float:
    """Resistance in newtons: ``-F . direction``, positive when the surface
    force opposes motion along ``direction``.

    ``flow`` is accepted for coefficient reporting and does not change the
    dimensional result.
    """
    d = np.asarray(direction, dtype=np.float64)
    if abs(np.linalg.norm(d) - 1.0) > 1e-9:
        raise ResistanceError(f"direction {d.tolist()} is not a unit vector")
    return float(-force_vector(mesh, pressure, shear) @ d)


def resistance_coefficient(resistance: float, flow: FlowConditions) -> float:
    return resistance / (flow.dynamic_pressure * flow.reference_area)
