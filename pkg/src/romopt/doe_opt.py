"""Design of experiments and surrogate-based box-constrained minimization.

The optimizer is a fit / minimize / infill loop: an RBF surrogate is fit
to every true evaluation so far, minimized by multi-start coordinate
search, and the true objective is evaluated at the surrogate minimizer.
The returned optimum is always a true evaluation.
"""

from __future__ import annotations

import csv
import itertools
import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.stats import qmc

from .linalg import SingularMatrixError
from .rbf import RbfKernel, rbf_eval, rbf_fit

log = logging.getLogger(__name__)

MAX_DOE_POINTS = 4096


class OptimizationError(RuntimeError):
    pass


def _as_box(box) -> np.ndarray:
    box = np.asarray(box, dtype=np.float64).reshape(-1, 2)
    if np.any(box[:, 0] >= box[:, 1]):
        raise ValueError("box needs low < high in every component")
    return box


@dataclass(frozen=True)
class DoePlan:
    box: np.ndarray
    vertex_points: np.ndarray  # (2^m, m)
    interior_points: np.ndarray  # (K, m)
    seed: int

    @property
    def points(self) -> np.ndarray:
        return np.vstack([self.vertex_points, self.interior_points])

    def __len__(self) -> int:
        return len(self.vertex_points) + len(self.interior_points)

    def to_dict(self) -> dict:
        return {
            "box": self.box.tolist(),
            "seed": self.seed,
            "samples": [
                {"index": i, "kind": "vertex" if i < len(self.vertex_points) else "interior", "mu": mu.tolist()}
                for i, mu in enumerate(self.points)
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "DoePlan":
        box = np.asarray(doc["box"], dtype=np.float64)
        samples = sorted(doc["samples"], key=lambda s: s["index"])
        pts = np.array([s["mu"] for s in samples], dtype=np.float64).reshape(-1, box.shape[0])
        nv = sum(1 for s in samples if s["kind"] == "vertex")
        return cls(box, pts[:nv], pts[nv:], int(doc["seed"]))


def make_doe(box, m: int | None = None, K: int = 0, seed: int = 0, cap: int = MAX_DOE_POINTS) -> DoePlan:
    """All ``2^m`` box corners plus ``K`` scrambled-Halton interior points."""
    box = _as_box(box)
    if m is None:
        m = box.shape[0]
    if m < 1 or m != box.shape[0]:
        raise ValueError(f"parameter dimension {m} does not match box with {box.shape[0]} rows")
    if K < 0:
        raise ValueError("K must be non-negative")
    if 2**m + K > cap:
        raise ValueError(f"DOE of {2**m} corners + {K} interior points exceeds the cap of {cap}")
    lo, hi = box[:, 0], box[:, 1]
    corners = np.array(list(itertools.product(*zip(lo, hi))), dtype=np.float64)
    interior = np.zeros((0, m))
    if K:
        sampler = qmc.Halton(d=m, scramble=True, seed=seed)
        chosen: list[np.ndarray] = []
        seen = set()
        while len(chosen) < K:
            for u in sampler.random(K - len(chosen)):
                # strictly interior and distinct
                if np.any(u <= 0.0) or np.any(u >= 1.0):
                    continue
                x = lo + (hi - lo) * u
                if np.any(x <= lo) or np.any(x >= hi):
                    continue
                key = x.tobytes()
                if key in seen:
                    continue
                seen.add(key)
                chosen.append(x)
        interior = np.array(chosen)
    return DoePlan(box, corners, interior, int(seed))


# ---------------------------------------------------------------------------
# surrogate minimization


@dataclass
class Evaluation:
    mu: list[float]
    f: float | None
    kind: str
    ok: bool = True
    wall_time: float | None = None


@dataclass
class SurrogateResult:
    mu: np.ndarray
    f: float
    trace: list[Evaluation]
    iterations: int
    converged: bool
    flat: bool = False

    def best_so_far(self) -> np.ndarray:
        vals = np.array([e.f if e.ok else np.inf for e in self.trace])
        return np.minimum.accumulate(vals)


def coordinate_search(fun, x0, box: np.ndarray, step: float = 0.1, min_step: float = 1e-7, max_iter: int = 2000) -> tuple[np.ndarray, float]:
    """Compass search along coordinate axes inside the box.

    ``fun`` takes an ``(M, m)`` batch.  Steps are fractions of each box width.
    """
    lo, hi = box[:, 0], box[:, 1]
    width = hi - lo
    x = np.clip(np.asarray(x0, dtype=np.float64), lo, hi)
    fx = float(fun(x[None, :])[0])
    m = x.size
    h = step
    for _ in range(max_iter):
        if h < min_step:
            break
        trial = np.repeat(x[None, :], 2 * m, axis=0)
        idx = np.arange(m)
        trial[idx, idx] += h * width
        trial[m + idx, idx] -= h * width
        trial = np.clip(trial, lo, hi)
        ft = fun(trial)
        k = int(np.argmin(ft))
        if ft[k] < fx:
            x, fx = trial[k], float(ft[k])
        else:
            h *= 0.5
    return x, fx


def optimize_surrogate(
    objective: Callable[[np.ndarray], float],
    box,
    budget: int = 200,
    tol: float = 1e-3,
    seed: int = 0,
    n_interior: int | None = None,
    stall: int = 3,
    n_best_starts: int = 3,
    n_random_starts: int = 5,
    kernel: RbfKernel | None = None,
    initial: np.ndarray | None = None,
    extra_points: Sequence[tuple[np.ndarray, str]] = (),
    record_timing: bool = False,
) -> SurrogateResult:
    """Minimize ``objective`` over ``box`` with an RBF surrogate.

    The initial design is ``initial`` if given, else corners plus
    ``n_interior`` Halton points (default ``2 * m + 2``).  ``extra_points``
    are evaluated before the design with their own trace kind.  Stops when
    the best value improves by less than ``tol * (f_max - f_min)`` over the
    design for ``stall`` consecutive infills, or when ``budget`` true
    evaluations have been spent.
    """
    box = _as_box(box)
    m = box.shape[0]
    lo, hi = box[:, 0], box[:, 1]
    diameter = float(np.linalg.norm(hi - lo))
    kernel = kernel or RbfKernel("multiquadric")
    rng = np.random.default_rng(seed)
    if initial is None:
        K = 2 * m + 2 if n_interior is None else n_interior
        initial = make_doe(box, m, K, seed).points
    initial = np.asarray(initial, dtype=np.float64)
    if budget < len(initial) + len(extra_points):
        raise OptimizationError(f"budget {budget} is smaller than the initial design ({len(initial)} points)")

    trace: list[Evaluation] = []
    X: list[np.ndarray] = []
    F: list[float] = []

    def evaluate(mu: np.ndarray, kind: str) -> None:
        mu = np.clip(np.asarray(mu, dtype=np.float64), lo, hi)
        start = time.perf_counter()
        try:
            f = float(objective(mu))
        except (ArithmeticError, ValueError) as exc:
            log.warning("objective raised at %s: %s", mu.tolist(), exc)
            f = float("nan")
        wall = time.perf_counter() - start if record_timing else None
        ok = bool(np.isfinite(f))
        if not ok:
            log.warning("objective non-finite at %s; point excluded", mu.tolist())
        trace.append(Evaluation(mu.tolist(), f if ok else None, kind, ok, wall))
        if ok and not any(np.array_equal(mu, x) for x in X):
            X.append(mu)
            F.append(f)

    for mu, kind in extra_points:
        evaluate(mu, kind)
    for mu in initial:
        evaluate(mu, "doe")
    if not F:
        raise OptimizationError("every initial design evaluation failed")
    f_range = max(F) - min(F)
    threshold = max(tol * f_range, 1e-15 * max(1.0, abs(min(F))))
    if f_range <= 1e-12 * max(1.0, abs(max(F))):
        best = int(np.argmin(F))
        return SurrogateResult(X[best], F[best], trace, 0, True, flat=True)

    iterations = 0
    stalled = 0
    converged = False
    min_sep = 1e-9 * diameter
    while len(trace) < budget:
        iterations += 1
        Xa = np.array(X)
        Fa = np.array(F)
        try:
            surrogate = rbf_fit(Xa, Fa, kernel, 0.0, box)
        except SingularMatrixError:
            surrogate = rbf_fit(Xa, Fa, kernel, None, box)

        def sfun(batch, s=surrogate):
            return rbf_eval(s, batch)[:, 0]

        order = np.argsort(Fa, kind="stable")
        starts = [Xa[i] for i in order[:n_best_starts]]
        starts += list(lo + (hi - lo) * rng.random((n_random_starts, m)))
        candidates = sorted((coordinate_search(sfun, s, box) for s in starts), key=lambda c: c[1])
        infill = None
        for x, _ in candidates:
            if np.min(np.linalg.norm(Xa - x, axis=1)) > min_sep:
                infill = x
                break
        kind = "infill"
        if infill is None:
            # surrogate minimum already sampled: explore the emptiest region
            pool = lo + (hi - lo) * rng.random((512, m))
            dist = np.min(np.linalg.norm(pool[:, None, :] - Xa[None, :, :], axis=2), axis=1)
            infill = pool[int(np.argmax(dist))]
            kind = "explore"
        previous = min(F)
        evaluate(infill, kind)
        improvement = previous - min(F)
        stalled = stalled + 1 if improvement < threshold else 0
        if stalled >= stall:
            converged = True
            break
    best = int(np.argmin(F))
    return SurrogateResult(X[best], F[best], trace, iterations, converged)


# ---------------------------------------------------------------------------
# reduced-model resistance optimization


@dataclass
class OptimizationReport:
    mu_opt: list[float]
    resistance_opt: float
    baseline_mu: list[float]
    baseline_resistance: float
    percent_change: float
    iterations: int
    evaluations: int
    converged: bool
    flat_objective: bool
    trace: list[dict] = field(default_factory=list)
    settings: dict = field(default_factory=dict)
    flags: list[str] = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    @property
    def percent_reduction(self) -> float:
        return -self.percent_change

    def to_dict(self) -> dict:
        d = asdict(self)
        d["percent_reduction"] = self.percent_reduction
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    def write_trace_csv(self, path) -> None:
        m = len(self.mu_opt)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["eval", "kind", "ok", "f", "best_so_far", *[f"mu_{i}" for i in range(m)]])
            best = float("inf")
            for i, row in enumerate(self.trace):
                if row["ok"]:
                    best = min(best, row["f"])
                w.writerow([i, row["kind"], int(row["ok"]), repr(row["f"]) if row["ok"] else "", repr(best), *map(repr, row["mu"])])


@dataclass(frozen=True)
class OptimizerSettings:
    budget: int = 200
    tol: float = 1e-3
    stall: int = 3
    seed: int = 0
    n_interior: int | None = None
    n_best_starts: int = 3
    n_random_starts: int = 5
    record_timing: bool = False


def rom_resistance_objective(rom, param, base_mesh, flow=None, direction=(1.0, 0.0, 0.0)):
    """``mu -> resistance`` of the ROM-predicted fields on the ``mu``-deformed mesh.

    Deformed meshes are cached by the exact bytes of ``mu``.
    """
    from .fom import integrate_resistance
    from .mesh import StateVector, unflatten_fields
    from .rom import predict

    names = [n for n, _ in rom.layout]
    if "p" not in names or "tau" not in names:
        raise OptimizationError(f"reduced model layout {names} lacks the 'p' and 'tau' fields")
    cache: dict[bytes, object] = {}

    def objective(mu) -> float:
        mu = np.asarray(mu, dtype=np.float64)
        key = mu.tobytes()
        mesh = cache.get(key)
        if mesh is None:
            mesh = param.deform_mesh(base_mesh, mu)
            cache[key] = mesh
        state = StateVector(predict(rom, mu), rom.layout)
        return integrate_resistance(unflatten_fields(mesh, state), flow, direction)

    return objective


def optimize_rom_resistance(rom, param, base_mesh, flow=None, settings: OptimizerSettings | None = None, direction=(1.0, 0.0, 0.0)) -> OptimizationReport:
    settings = settings or OptimizerSettings()
    objective = rom_resistance_objective(rom, param, base_mesh, flow, direction)
    box = param.bounds
    baseline_mu = np.zeros(param.dim)
    result = optimize_surrogate(
        objective,
        box,
        budget=settings.budget,
        tol=settings.tol,
        seed=settings.seed,
        n_interior=settings.n_interior,
        stall=settings.stall,
        n_best_starts=settings.n_best_starts,
        n_random_starts=settings.n_random_starts,
        kernel=RbfKernel("multiquadric"),
        extra_points=[(baseline_mu, "baseline")],
        record_timing=settings.record_timing,
    )
    baseline = next(e for e in result.trace if e.kind == "baseline")
    if not baseline.ok:
        raise OptimizationError("reduced model resistance is non-finite at the baseline mu = 0")
    flags = []
    mu_opt, f_opt = result.mu, result.f
    if result.flat:
        flags.append("flat objective")
        mu_opt, f_opt = baseline_mu, baseline.f
    pct = 100.0 * (f_opt - baseline.f) / abs(baseline.f) if baseline.f else 0.0
    return OptimizationReport(
        mu_opt=[float(x) for x in mu_opt],
        resistance_opt=float(f_opt),
        baseline_mu=baseline_mu.tolist(),
        baseline_resistance=float(baseline.f),
        percent_change=float(pct),
        iterations=result.iterations,
        evaluations=len(result.trace),
        converged=result.converged,
        flat_objective=result.flat,
        trace=[asdict(e) for e in result.trace],
        settings=asdict(settings),
        flags=flags,
    )
