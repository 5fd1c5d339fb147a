"""Offline and online phases over a workspace directory.

Workspace layout::

    doe.json
    sample_<idx>/   mu.json deformed.stl series/ dmd.bin regime.csv
                    resistance.json status.json
    rom.bin         reduced model with provenance
    report.json     optimization report (+ trace.csv)
    validation.json full-order check at a parameter point

``status.json`` is written last and records a SHA-256 of every other
file in the sample directory, which is what ``check`` verifies.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .config import StudyConfig
from .dmd import DmdModel, excluded_modes, fit_dmd, regime_state, scalar_regime
from .doe_opt import DoePlan, OptimizerSettings, make_doe, optimize_rom_resistance, rom_resistance_objective
from .ffd import FfdParameterization
from .fom import (
    FlowConditions,
    FomRequest,
    SolverRegistry,
    SyntheticSolver,
    export_series,
    external_solver,
    integrate_resistance,
    resistance_coefficient,
    run_fom,
)
from .mesh import Field, StateVector, TriMesh, load_stl, read_fields_csv, save_stl, unflatten_fields, write_fields_csv
from .rbf import RbfKernel
from .rom import ParametricSnapshotSet, RomModel, build_rom, pod_energy, predict
from .synthetic import FIELD_LAYOUT, SyntheticFlow

log = logging.getLogger(__name__)

SAMPLE_FILES = ("mu.json", "deformed.stl", "dmd.bin", "regime.csv", "resistance.json")


class PipelineError(RuntimeError):
    pass


class DatabaseError(PipelineError):
    pass


def _sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_json(path: Path, doc) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    os.replace(tmp, path)


def _read_json(path: Path):
    return json.loads(Path(path).read_text())


# ---------------------------------------------------------------------------
# study context


@dataclass
class Study:
    """Loaded inputs shared by every command."""

    config: StudyConfig
    base_mesh: TriMesh
    param: FfdParameterization
    registry: SolverRegistry
    flow: FlowConditions

    @classmethod
    def load(cls, config: StudyConfig) -> "Study":
        mesh = load_stl(config.base_mesh)
        param = FfdParameterization.load(config.parameterization)
        fs = config.flow
        flow = FlowConditions(fs.speed, fs.density, fs.reference_area, fs.froude)
        return cls(config, mesh, param, build_registry(config), flow)

    @property
    def workspace(self) -> Path:
        return self.config.workspace

    @property
    def layout(self) -> tuple[tuple[str, str], ...]:
        kinds = dict(FIELD_LAYOUT)
        return tuple((f, kinds.get(f, "scalar")) for f in self.config.fields)

    def sample_dir(self, name: str) -> Path:
        return self.workspace / name


def build_registry(config: StudyConfig) -> SolverRegistry:
    spec = config.solver
    if spec.kind == "external":
        template = spec.template
        if not Path(template).is_absolute() and config.source is not None:
            template = str(config.source.parent / template)
        solver = external_solver(template)
    else:
        flow = SyntheticFlow(rho=config.flow.density, speed=config.flow.speed, seed=spec.seed)
        solver = SyntheticSolver(flow, steady=spec.kind == "synthetic-steady", noise=spec.noise, name=spec.kind)
    return SolverRegistry({spec.id: solver})


def sample_name(index: int) -> str:
    return f"sample_{index}"


def parse_range(text: str | None, count: int) -> list[int]:
    """``"a..b"`` (inclusive), ``"a"`` or ``None`` for all samples."""
    if text is None:
        return list(range(count))
    text = text.strip()
    if ".." in text:
        a, b = text.split("..", 1)
        lo = int(a) if a else 0
        hi = int(b) if b else count - 1
    else:
        lo = hi = int(text)
    if lo < 0 or hi >= count or lo > hi:
        raise PipelineError(f"sample range {text!r} outside 0..{count - 1}")
    return list(range(lo, hi + 1))


# ---------------------------------------------------------------------------
# sample


def read_samples(workspace: Path) -> list[dict]:
    path = Path(workspace) / "doe.json"
    if not path.exists():
        raise DatabaseError(f"{path} not found; run 'sample' first")
    return sorted(_read_json(path)["samples"], key=lambda s: s["index"])


def cmd_sample(study: Study) -> DoePlan:
    cfg = study.config
    plan = make_doe(study.param.bounds, study.param.dim, cfg.doe_interior, cfg.doe_seed)
    study.workspace.mkdir(parents=True, exist_ok=True)
    _write_json(study.workspace / "doe.json", plan.to_dict())
    return plan


# ---------------------------------------------------------------------------
# offline


@dataclass
class SampleOutcome:
    index: int
    status: str  # complete | skipped | failed
    error: str | None = None


def simulate(study: Study, mu: np.ndarray):
    """Deform, run the full-order model and fit DMD at ``mu``.

    Returns ``(deformed_mesh, fom_result, dmd_model, regime_vector)``.
    """
    cfg = study.config
    mesh = study.param.deform_mesh(study.base_mesh, mu)
    request = FomRequest(mesh, mu, cfg.t_start, cfg.t_end, cfg.count, cfg.fields)
    result = run_fom(cfg.solver.id, request, study.registry)
    model = fit_dmd(result.series, cfg.dmd.rank)
    regime = regime_state(model, cfg.dmd.horizon, cfg.dmd.eta, cfg.dmd.policy)
    return mesh, result, model, regime


def resistance_of(study: Study, mesh: TriMesh, state: np.ndarray) -> tuple[float, list[float]]:
    from .fom import force_vector

    m = unflatten_fields(mesh, StateVector(state, study.layout))
    d = np.asarray(study.config.flow.direction)
    return integrate_resistance(m, study.flow, d), force_vector(m).tolist()


def _scalar_estimate(study: Study, mesh: TriMesh, result) -> float:
    s = result.series
    vals = [resistance_of(study, mesh, s.states[:, k])[0] for k in range(s.count)]
    return scalar_regime(vals, s.t0, s.dt, eta=study.config.dmd.eta)


def write_sample(study: Study, index: int, mu: np.ndarray) -> None:
    d = study.sample_dir(sample_name(index))
    d.mkdir(parents=True, exist_ok=True)
    status_path = d / "status.json"
    if status_path.exists():
        status_path.unlink()
    mesh, result, model, regime = simulate(study, mu)
    _write_json(d / "mu.json", {"index": index, "mu": [float(x) for x in mu]})
    save_stl(mesh, d / "deformed.stl", "binary")
    export_series(result, d / "series", mesh.n_vertices)
    model.save(d / "dmd.bin")
    regime_mesh = unflatten_fields(mesh, StateVector(regime, study.layout))
    write_fields_csv(d / "regime.csv", [regime_mesh.fields[n] for n, _ in study.layout])
    R, force = resistance_of(study, mesh, regime)
    info = {
        "resistance": R,
        "force": force,
        "coefficient": resistance_coefficient(R, study.flow),
        "dmd_rank": model.rank,
        "dmd_residual": model.residual,
        "excluded_modes": int(excluded_modes(model, study.config.dmd.eta, study.config.dmd.policy).size),
        "solver": result.metadata.get("solver"),
    }
    if study.config.dmd.scalar_check:
        info["resistance_scalar_dmd"] = _scalar_estimate(study, mesh, result)
    _write_json(d / "resistance.json", info)
    files = {name: _sha256(d / name) for name in SAMPLE_FILES}
    files.update({f"series/{p.name}": _sha256(p) for p in sorted((d / "series").iterdir())})
    _write_json(status_path, {"status": "complete", "files": files})


def sample_complete(d: Path) -> bool:
    path = d / "status.json"
    if not path.exists():
        return False
    try:
        return _read_json(path).get("status") == "complete"
    except (json.JSONDecodeError, OSError):
        return False


def _offline_one(config: StudyConfig, index: int, mu: list[float]) -> SampleOutcome:
    study = Study.load(config)
    d = study.sample_dir(sample_name(index))
    if sample_complete(d):
        return SampleOutcome(index, "skipped")
    try:
        write_sample(study, index, np.asarray(mu, dtype=np.float64))
    except Exception as exc:  # isolated per sample
        log.error("sample %d failed: %s", index, exc)
        d.mkdir(parents=True, exist_ok=True)
        _write_json(d / "status.json", {"status": "failed", "error": f"{type(exc).__name__}: {exc}"})
        return SampleOutcome(index, "failed", str(exc))
    return SampleOutcome(index, "complete")


def cmd_offline(study: Study, samples: str | None = None, jobs: int = 1) -> list[SampleOutcome]:
    entries = read_samples(study.workspace)
    chosen = parse_range(samples, len(entries))
    work = [(entries[i]["index"], entries[i]["mu"]) for i in chosen]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_offline_one, study.config, i, mu) for i, mu in work]
            outcomes = [f.result() for f in futures]
    else:
        outcomes = [_offline_one(study.config, i, mu) for i, mu in work]
    return outcomes


# ---------------------------------------------------------------------------
# reduced model


def load_snapshot_set(study: Study) -> tuple[ParametricSnapshotSet, dict[str, str]]:
    entries = read_samples(study.workspace)
    missing = [sample_name(e["index"]) for e in entries if not sample_complete(study.sample_dir(sample_name(e["index"])))]
    if missing:
        raise DatabaseError(f"incomplete database; missing or failed samples: {', '.join(missing)}")
    params, states, hashes = [], [], {}
    V = study.base_mesh.n_vertices
    for e in entries:
        name = sample_name(e["index"])
        path = study.sample_dir(name) / "regime.csv"
        fields = read_fields_csv(path, study.layout, V)
        params.append(e["mu"])
        states.append(np.concatenate([f.flat for f in fields]))
        hashes[name] = _sha256(path)
    return ParametricSnapshotSet(np.array(params), np.stack(states, axis=1), study.layout), hashes


def rom_from_set(study: Study, snaps: ParametricSnapshotSet, hashes: dict[str, str]) -> RomModel:
    r = study.config.rom
    return build_rom(
        snaps,
        r.rank,
        RbfKernel(r.kernel, r.epsilon),
        r.lambda_reg,
        box=study.param.bounds,
        center=r.center,
        provenance={"config_hash": study.config.rom_hash(), "samples": hashes},
    )


def cmd_build_rom(study: Study) -> RomModel:
    snaps, hashes = load_snapshot_set(study)
    rom = rom_from_set(study, snaps, hashes)
    rom.save(study.workspace / "rom.bin")
    return rom


def load_rom(study: Study) -> RomModel:
    path = study.workspace / "rom.bin"
    if not path.exists():
        raise DatabaseError(f"{path} not found; run 'build-rom' first")
    rom = RomModel.load(path)
    expected = study.config.rom_hash()
    got = rom.provenance.get("config_hash")
    if got != expected:
        raise PipelineError(
            f"{path} was built from a different configuration (hash {got}, current {expected}); rebuild it"
        )
    return rom


# ---------------------------------------------------------------------------
# online


def optimizer_settings(config: StudyConfig) -> OptimizerSettings:
    o = config.optimizer
    return OptimizerSettings(o.budget, o.tol, o.stall, o.seed, o.interior, o.best_starts, o.random_starts, o.record_timing)


def cmd_optimize(study: Study):
    rom = load_rom(study)
    report = optimize_rom_resistance(
        rom, study.param, study.base_mesh, study.flow, optimizer_settings(study.config), study.config.flow.direction
    )
    report.provenance = {
        "config_hash": rom.provenance["config_hash"],
        "full_config_hash": study.config.full_hash(),
        "rom_sha256": _sha256(study.workspace / "rom.bin"),
        "epsilon": rom.coeff_interpolant.epsilon,
        "rom_rank": rom.rank,
    }
    report.save(study.workspace / "report.json")
    report.write_trace_csv(study.workspace / "trace.csv")
    return report


def rom_resistance(study: Study, rom: RomModel, mu) -> float:
    return rom_resistance_objective(rom, study.param, study.base_mesh, study.flow, study.config.flow.direction)(mu)


def cmd_validate(study: Study, mu: Sequence[float] | None = None, enrich: bool = False) -> dict:
    rom = load_rom(study)
    if mu is None:
        rpath = study.workspace / "report.json"
        if not rpath.exists():
            raise DatabaseError(f"no parameter given and {rpath} not found")
        report = _read_json(rpath)
        if report.get("provenance", {}).get("config_hash") != rom.provenance.get("config_hash"):
            raise PipelineError(f"{rpath} config hash does not match rom.bin; re-run 'optimize'")
        mu = report["mu_opt"]
    mu = np.asarray(mu, dtype=np.float64)
    if mu.size != study.param.dim:
        raise PipelineError(f"parameter has {mu.size} entries, study has {study.param.dim}")
    mesh, _, model, regime = simulate(study, mu)
    fom_R, _ = resistance_of(study, mesh, regime)
    rom_R = rom_resistance(study, rom, mu)
    out = {
        "mu": mu.tolist(),
        "resistance_fom": fom_R,
        "resistance_rom": rom_R,
        "relative_error": abs(rom_R - fom_R) / abs(fom_R),
        "dmd_rank": model.rank,
        "config_hash": rom.provenance.get("config_hash"),
    }
    if enrich:
        entries = read_samples(study.workspace)
        index = max(e["index"] for e in entries) + 1
        write_sample(study, index, mu)
        doc = _read_json(study.workspace / "doe.json")
        doc["samples"].append({"index": index, "kind": "enrichment", "mu": mu.tolist()})
        _write_json(study.workspace / "doe.json", doc)
        rebuilt = cmd_build_rom(study)
        after = rom_resistance(study, rebuilt, mu)
        out["enrichment"] = {
            "sample": sample_name(index),
            "resistance_rom_after": after,
            "relative_error_after": abs(after - fom_R) / abs(fom_R),
        }
    _write_json(study.workspace / "validation.json", out)
    return out


# ---------------------------------------------------------------------------
# check and plot data


def cmd_check(study: Study) -> list[str]:
    """Return a list of problems, each naming the offending path."""
    ws = study.workspace
    problems = []
    try:
        entries = read_samples(ws)
    except (DatabaseError, json.JSONDecodeError, KeyError) as exc:
        return [f"{ws / 'doe.json'}: {exc}"]
    hashes = {}
    for e in entries:
        name = sample_name(e["index"])
        d = ws / name
        status_path = d / "status.json"
        if not d.is_dir():
            problems.append(f"{d}: missing sample directory")
            continue
        if not status_path.exists():
            problems.append(f"{status_path}: missing (sample incomplete)")
            continue
        try:
            status = _read_json(status_path)
        except json.JSONDecodeError:
            problems.append(f"{status_path}: corrupt JSON")
            continue
        if status.get("status") != "complete":
            problems.append(f"{status_path}: status {status.get('status')!r} ({status.get('error', '')})")
            continue
        for rel, digest in sorted(status.get("files", {}).items()):
            p = d / rel
            if not p.exists():
                problems.append(f"{p}: missing")
            elif _sha256(p) != digest:
                problems.append(f"{p}: checksum mismatch (corrupt or modified)")
        if (d / "regime.csv").exists():
            hashes[name] = _sha256(d / "regime.csv")
    rom_path = ws / "rom.bin"
    if rom_path.exists():
        try:
            rom = RomModel.load(rom_path)
        except Exception as exc:
            problems.append(f"{rom_path}: unreadable ({exc})")
        else:
            prov = rom.provenance
            if prov.get("config_hash") != study.config.rom_hash():
                problems.append(f"{rom_path}: built from a different configuration")
            for name, digest in prov.get("samples", {}).items():
                if name in hashes and hashes[name] != digest:
                    problems.append(f"{rom_path}: stale, {name}/regime.csv changed since build")
                elif name not in hashes:
                    problems.append(f"{rom_path}: references {name}, which is not a complete sample")
            report_path = ws / "report.json"
            if report_path.exists():
                try:
                    rh = _read_json(report_path).get("provenance", {}).get("config_hash")
                except json.JSONDecodeError:
                    problems.append(f"{report_path}: corrupt JSON")
                else:
                    if rh != prov.get("config_hash"):
                        problems.append(f"{report_path}: config hash does not match rom.bin")
    return problems


def spectrum_rows(study: Study) -> list[dict]:
    rows = []
    for e in read_samples(study.workspace):
        name = sample_name(e["index"])
        path = study.sample_dir(name) / "dmd.bin"
        if not path.exists():
            continue
        model = DmdModel.load(path)
        excl = set(excluded_modes(model, study.config.dmd.eta, study.config.dmd.policy).tolist())
        for k, lam in enumerate(model.eigenvalues):
            rows.append(
                {
                    "sample": name,
                    "mode": k,
                    "re": float(lam.real),
                    "im": float(lam.imag),
                    "abs": float(abs(lam)),
                    "amplitude": float(abs(model.amplitudes[k])),
                    "excluded": int(k in excl),
                }
            )
    if not rows:
        raise DatabaseError(f"no DMD models found under {study.workspace}")
    return rows


def energy_rows(study: Study) -> list[dict]:
    rom = load_rom(study)
    sigma = rom.all_singular_values
    energy = pod_energy(rom)
    return [
        {"mode": k + 1, "sigma": float(s), "cumulative_energy": float(e), "retained": int(k < rom.rank)}
        for k, (s, e) in enumerate(zip(sigma, energy))
    ]


def write_rows_csv(path: Path, rows: Iterable[dict]) -> None:
    import csv

    rows = list(rows)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
