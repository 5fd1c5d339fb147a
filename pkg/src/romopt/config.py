"""Study configuration: an INI file with a fixed schema.

Unknown sections or keys are errors.  Relative paths resolve against the
directory holding the config file.  Solver registry entries live in
``[solver:<id>]`` sections; ``[study] solver`` selects one.  Example::

    [study]
    base_mesh = hull.stl
    parameterization = ffd.json
    workspace = workspace
    solver = synthetic-lti

    [solver:synthetic-lti]
    kind = synthetic-lti
    seed = 0

    [window]
    t_start = 50
    t_end = 60
    count = 20
"""

from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path


class ConfigError(ValueError):
    pass


SOLVER_KINDS = ("synthetic-lti", "synthetic-steady", "external")


@dataclass(frozen=True)
class SolverSpec:
    id: str
    kind: str
    seed: int = 0
    noise: float = 0.0
    template: str | None = None


@dataclass(frozen=True)
class DmdSettings:
    rank: int | float = 0.9999
    eta: float = 1e-4
    horizon: float | None = None
    policy: str = "stable"
    scalar_check: bool = False


@dataclass(frozen=True)
class RomSettings:
    rank: int | float = 0.999
    kernel: str = "multiquadric"
    epsilon: float | None = None
    lambda_reg: float | None = None
    center: bool = True


@dataclass(frozen=True)
class OptSettings:
    budget: int = 200
    tol: float = 1e-3
    stall: int = 3
    seed: int = 0
    interior: int | None = None
    best_starts: int = 3
    random_starts: int = 5
    record_timing: bool = False


@dataclass(frozen=True)
class FlowSettings:
    speed: float = 1.981
    density: float = 1025.0
    reference_area: float = 1.0
    froude: float | None = 0.2
    direction: tuple[float, float, float] = (1.0, 0.0, 0.0)


@dataclass(frozen=True)
class StudyConfig:
    base_mesh: Path
    parameterization: Path
    workspace: Path
    solver: SolverSpec
    fields: tuple[str, ...] = ("p", "tau")
    t_start: float = 50.0
    t_end: float = 60.0
    count: int = 20
    doe_interior: int = 30
    doe_seed: int = 0
    dmd: DmdSettings = field(default_factory=DmdSettings)
    rom: RomSettings = field(default_factory=RomSettings)
    optimizer: OptSettings = field(default_factory=OptSettings)
    flow: FlowSettings = field(default_factory=FlowSettings)
    source: Path | None = None

    def offline_dict(self) -> dict:
        """Settings that determine the snapshot database and reduced model."""
        return {
            "base_mesh": _file_digest(self.base_mesh),
            "parameterization": _file_digest(self.parameterization),
            "solver": asdict(self.solver),
            "fields": list(self.fields),
            "window": [self.t_start, self.t_end, self.count],
            "doe": [self.doe_interior, self.doe_seed],
            "dmd": asdict(self.dmd),
            "rom": asdict(self.rom),
            "flow": _jsonable(asdict(self.flow)),
        }

    def rom_hash(self) -> str:
        return _digest(self.offline_dict())

    def full_hash(self) -> str:
        d = self.offline_dict()
        d["optimizer"] = asdict(self.optimizer)
        return _digest(d)

    def with_overrides(self, workspace=None, seed=None) -> "StudyConfig":
        cfg = self
        if workspace is not None:
            cfg = replace(cfg, workspace=Path(workspace).resolve())
        if seed is not None:
            cfg = replace(cfg, doe_seed=int(seed), optimizer=replace(cfg.optimizer, seed=int(seed)))
        return cfg


def _jsonable(d):
    return json.loads(json.dumps(d, default=list))


def _digest(obj) -> str:
    raw = json.dumps(_jsonable(obj), sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(raw).hexdigest()


def _file_digest(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# ---------------------------------------------------------------------------
# parsing

_SCHEMA = {
    "study": {"base_mesh", "parameterization", "workspace", "solver", "fields"},
    "window": {"t_start", "t_end", "count"},
    "doe": {"interior", "seed"},
    "dmd": {"rank", "eta", "horizon", "policy", "scalar_check"},
    "rom": {"rank", "kernel", "epsilon", "lambda_reg", "center"},
    "optimizer": {"budget", "tol", "stall", "seed", "interior", "best_starts", "random_starts", "record_timing"},
    "flow": {"speed", "density", "reference_area", "froude", "direction"},
}
_SOLVER_KEYS = {"kind", "seed", "noise", "template"}


class _Section:
    def __init__(self, name: str, items: dict):
        self.name = name
        self.items = items

    def _raw(self, key):
        v = self.items.get(key)
        return None if v is None or v.strip() == "" else v.strip()

    def _fail(self, key, value, what):
        raise ConfigError(f"[{self.name}] {key} = {value!r}: expected {what}")

    def str(self, key, default=None):
        v = self._raw(key)
        return default if v is None else v

    def int(self, key, default=None, lo=None):
        v = self._raw(key)
        if v is None:
            return default
        try:
            out = int(v)
        except ValueError:
            self._fail(key, v, "an integer")
        if lo is not None and out < lo:
            self._fail(key, v, f"an integer >= {lo}")
        return out

    def float(self, key, default=None, positive=False):
        v = self._raw(key)
        if v is None:
            return default
        try:
            out = float(v)
        except ValueError:
            self._fail(key, v, "a number")
        if positive and not out > 0:
            self._fail(key, v, "a positive number")
        return out

    def bool(self, key, default=False):
        v = self._raw(key)
        if v is None:
            return default
        low = v.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        self._fail(key, v, "a boolean")

    def rank(self, key, default):
        """Integer rank or an energy fraction in (0, 1]."""
        v = self._raw(key)
        if v is None:
            return default
        try:
            return int(v)
        except ValueError:
            pass
        try:
            e = float(v)
        except ValueError:
            self._fail(key, v, "an integer rank or an energy fraction")
        if not 0 < e <= 1:
            self._fail(key, v, "an energy fraction in (0, 1]")
        return e

    def list(self, key, default):
        v = self._raw(key)
        if v is None:
            return default
        return tuple(x.strip() for x in v.split(",") if x.strip())


def load_config(path) -> StudyConfig:
    path = Path(path).resolve()
    if not path.exists():
        raise ConfigError(f"config file {path} not found")
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    parser.optionxform = str
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse_config(parser, path.parent, source=path)


def parse_config(parser: configparser.ConfigParser, root: Path, source: Path | None = None) -> StudyConfig:
    sections = {}
    solvers = {}
    for name in parser.sections():
        items = dict(parser.items(name))
        if name.startswith("solver:"):
            sid = name.split(":", 1)[1].strip()
            unknown = set(items) - _SOLVER_KEYS
            if unknown:
                raise ConfigError(f"[{name}] unknown key(s): {sorted(unknown)}")
            solvers[sid] = _Section(name, items)
            continue
        if name not in _SCHEMA:
            raise ConfigError(f"unknown section [{name}]")
        unknown = set(items) - _SCHEMA[name]
        if unknown:
            raise ConfigError(f"[{name}] unknown key(s): {sorted(unknown)}")
        sections[name] = _Section(name, items)
    get = lambda n: sections.get(n, _Section(n, {}))  # noqa: E731

    study = get("study")
    for key in ("base_mesh", "parameterization"):
        if study.str(key) is None:
            raise ConfigError(f"[study] {key} is required")

    def resolve(p):
        p = Path(p)
        return (p if p.is_absolute() else root / p).resolve()

    base_mesh = resolve(study.str("base_mesh"))
    param = resolve(study.str("parameterization"))
    for key, p in (("base_mesh", base_mesh), ("parameterization", param)):
        if not p.exists():
            raise ConfigError(f"[study] {key}: file {p} does not exist")
    workspace = resolve(study.str("workspace", "workspace"))

    solver_id = study.str("solver", "synthetic-lti")
    if solver_id in solvers:
        s = solvers[solver_id]
        kind = s.str("kind", solver_id)
        spec = SolverSpec(solver_id, kind, s.int("seed", 0), s.float("noise", 0.0), s.str("template"))
    elif solver_id in ("synthetic-lti", "synthetic-steady"):
        spec = SolverSpec(solver_id, solver_id)
    else:
        raise ConfigError(f"[study] solver {solver_id!r} has no [solver:{solver_id}] section")
    if spec.kind not in SOLVER_KINDS:
        raise ConfigError(f"[solver:{solver_id}] kind {spec.kind!r}: expected one of {SOLVER_KINDS}")
    if spec.kind == "external" and not spec.template:
        raise ConfigError(f"[solver:{solver_id}] external solvers need a template path")

    win = get("window")
    t_start = win.float("t_start", 50.0)
    t_end = win.float("t_end", 60.0)
    count = win.int("count", 20, lo=3)
    if not t_start < t_end:
        raise ConfigError(f"[window] needs t_start < t_end, got {t_start} and {t_end}")

    doe = get("doe")
    d = get("dmd")
    policy = d.str("policy", "stable")
    if policy not in ("stable", "fixed-point"):
        raise ConfigError(f"[dmd] policy = {policy!r}: expected 'stable' or 'fixed-point'")
    dmd = DmdSettings(
        d.rank("rank", 0.9999),
        d.float("eta", 1e-4),
        d.float("horizon"),
        policy,
        d.bool("scalar_check", False),
    )
    r = get("rom")
    kernel = r.str("kernel", "multiquadric")
    if kernel not in ("multiquadric", "gaussian", "thin-plate"):
        raise ConfigError(f"[rom] kernel = {kernel!r}: expected multiquadric, gaussian or thin-plate")
    lam = r.float("lambda_reg")
    if lam is not None and lam < 0:
        raise ConfigError("[rom] lambda_reg must be non-negative")
    rom = RomSettings(r.rank("rank", 0.999), kernel, r.float("epsilon", positive=True), lam, r.bool("center", True))
    o = get("optimizer")
    opt = OptSettings(
        o.int("budget", 200, lo=1),
        o.float("tol", 1e-3, positive=True),
        o.int("stall", 3, lo=1),
        o.int("seed", 0),
        o.int("interior", None, lo=0),
        o.int("best_starts", 3, lo=0),
        o.int("random_starts", 5, lo=0),
        o.bool("record_timing", False),
    )
    f = get("flow")
    direction = f.list("direction", ("1", "0", "0"))
    try:
        direction = tuple(float(x) for x in direction)
    except ValueError:
        raise ConfigError(f"[flow] direction = {direction!r}: expected three numbers") from None
    if len(direction) != 3:
        raise ConfigError("[flow] direction needs three components")
    flow = FlowSettings(
        f.float("speed", 1.981, positive=True),
        f.float("density", 1025.0, positive=True),
        f.float("reference_area", 1.0, positive=True),
        f.float("froude", 0.2),
        direction,
    )
    return StudyConfig(
        base_mesh=base_mesh,
        parameterization=param,
        workspace=workspace,
        solver=spec,
        fields=study.list("fields", ("p", "tau")),
        t_start=t_start,
        t_end=t_end,
        count=count,
        doe_interior=doe.int("interior", 30, lo=0),
        doe_seed=doe.int("seed", 0),
        dmd=dmd,
        rom=rom,
        optimizer=opt,
        flow=flow,
        source=source,
    )


def render_config(sections: dict[str, dict]) -> str:
    """Serialize ``{section: {key: value}}`` in the INI dialect read above."""
    out = []
    for name, items in sections.items():
        out.append(f"[{name}]")
        for k, v in items.items():
            if isinstance(v, (list, tuple)):
                v = ", ".join(str(x) for x in v)
            out.append(f"{k} = {'' if v is None else v}")
        out.append("")
    return "\n".join(out)
