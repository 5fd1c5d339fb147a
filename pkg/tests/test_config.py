import pytest

from romopt.config import ConfigError, load_config
from romopt.fixture import FIXTURE_CONFIG, write_fixture


def test_fixture_config_values(tmp_path):
    cfg = load_config(write_fixture(tmp_path))
    assert cfg.base_mesh == (tmp_path / "hull.stl").resolve()
    assert cfg.workspace == (tmp_path / "workspace").resolve()
    assert (cfg.t_start, cfg.t_end, cfg.count) == (50.0, 60.0, 20)
    assert cfg.doe_interior == 30
    assert cfg.dmd.rank == 0.9999999999
    assert cfg.rom.epsilon == 0.25 and cfg.rom.kernel == "multiquadric"
    assert cfg.flow.direction == (1.0, 0.0, 0.0)
    assert cfg.solver.kind == "synthetic-lti"


def _with(tmp_path, **sections):
    return write_fixture(tmp_path, resolution=2, overrides=sections)


@pytest.mark.parametrize(
    "section, items, message",
    [
        ("study", {"colour": "red"}, "unknown key"),
        ("bogus", {"a": 1}, "unknown section"),
        ("window", {"t_start": 60, "t_end": 50}, "t_start < t_end"),
        ("window", {"count": "many"}, "integer"),
        ("dmd", {"rank": 1.5}, "energy fraction"),
        ("dmd", {"policy": "random"}, "policy"),
        ("rom", {"kernel": "cubic"}, "kernel"),
        ("rom", {"lambda_reg": -1}, "lambda_reg"),
        ("flow", {"direction": "1, 0"}, "three"),
        ("study", {"solver": "openfoam-live"}, "openfoam-live"),
        ("solver:synthetic-lti", {"kind": "magic"}, "kind"),
    ],
)
def test_invalid_configs(tmp_path, section, items, message):
    path = _with(tmp_path, **{section: items})
    with pytest.raises(ConfigError, match=message):
        load_config(path)


def test_external_solver_needs_template(tmp_path):
    path = _with(tmp_path, **{"study": {"solver": "ext"}, "solver:ext": {"kind": "external"}})
    with pytest.raises(ConfigError, match="template"):
        load_config(path)


def test_hashes(tmp_path):
    a = load_config(write_fixture(tmp_path / "a", resolution=2))
    b = load_config(write_fixture(tmp_path / "b", resolution=2, overrides={"optimizer": {"budget": 50}}))
    c = load_config(write_fixture(tmp_path / "c", resolution=2, overrides={"rom": {"epsilon": 0.3}}))
    # workspace location and optimizer settings do not affect the offline hash
    assert a.rom_hash() == b.rom_hash()
    assert a.full_hash() != b.full_hash()
    assert a.rom_hash() != c.rom_hash()
    assert a.with_overrides(workspace=tmp_path / "elsewhere").rom_hash() == a.rom_hash()


def test_seed_override(tmp_path):
    cfg = load_config(write_fixture(tmp_path, resolution=2)).with_overrides(seed=9)
    assert cfg.doe_seed == 9 and cfg.optimizer.seed == 9


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.cfg")


def test_fixture_table_is_complete():
    assert {"study", "window", "doe", "dmd", "rom", "optimizer", "flow"} <= set(FIXTURE_CONFIG)
