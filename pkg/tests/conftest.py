import numpy as np
import pytest
from hypothesis import settings

from romopt.mesh import TriMesh

# same examples every run
settings.register_profile("repro", derandomize=True, database=None)
settings.load_profile("repro")

CUBE_V = np.array(
    [[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0], [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1]],
    dtype=np.float64,
)
# outward winding
CUBE_F = np.array(
    [
        [0, 2, 1], [0, 3, 2],
        [4, 5, 6], [4, 6, 7],
        [0, 1, 5], [0, 5, 4],
        [1, 2, 6], [1, 6, 5],
        [2, 3, 7], [2, 7, 6],
        [3, 0, 4], [3, 4, 7],
    ]
)


@pytest.fixture
def cube():
    return TriMesh(CUBE_V, CUBE_F)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# ---------------------------------------------------------------------------
# fixture study, run once per session


class StudyRun:
    def __init__(self, root):
        import time

        from romopt import pipeline
        from romopt.config import load_config
        from romopt.fixture import write_fixture

        self.root = root
        self.config_path = write_fixture(root)
        self.config = load_config(self.config_path)
        start = time.perf_counter()
        self.study = pipeline.Study.load(self.config)
        self.plan = pipeline.cmd_sample(self.study)
        self.outcomes = pipeline.cmd_offline(self.study, jobs=2)
        self.rom = pipeline.cmd_build_rom(self.study)
        self.report = pipeline.cmd_optimize(self.study)
        self.validation = pipeline.cmd_validate(self.study)
        self.elapsed = time.perf_counter() - start
        self.workspace = self.study.workspace


def light_copy(workspace, dest, skip=()):
    """Copy what build-rom and validate read: doe.json, each sample's
    status.json and regime.csv, rom.bin and report.json."""
    import shutil
    from pathlib import Path

    workspace, dest = Path(workspace), Path(dest)
    dest.mkdir(parents=True)
    for name in ("doe.json", "rom.bin", "report.json"):
        if (workspace / name).exists():
            shutil.copy2(workspace / name, dest / name)
    for d in sorted(workspace.glob("sample_*")):
        if d.name in skip:
            continue
        (dest / d.name).mkdir()
        for name in ("status.json", "regime.csv"):
            shutil.copy2(d / name, dest / d.name / name)
    return dest


@pytest.fixture(scope="session")
def fixture_study(tmp_path_factory):
    return StudyRun(tmp_path_factory.mktemp("fixture_study"))
