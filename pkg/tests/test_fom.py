import json

import numpy as np
import pytest

from romopt.dmd import fit_dmd, regime_state
from romopt.fom import (
    FlowConditions,
    FomError,
    FomRequest,
    ResistanceError,
    SolverRegistry,
    SyntheticSolver,
    default_registry,
    export_series,
    external_solver,
    force_vector,
    ingest_external,
    integrate_resistance,
    resistance_coefficient,
    run_fom,
)
from romopt.mesh import Field, TriMesh
from romopt.synthetic import HullShape, SyntheticFlow, hull_quadrature, make_hull

MU = np.array([0.02, -0.01, 0.05, 0.0, -0.03])


@pytest.fixture(scope="module")
def hull():
    return make_hull(8)


def test_lti_contract(hull):
    res = run_fom("synthetic-lti", FomRequest(hull, MU, 50.0, 60.0, 20))
    assert res.series.states.shape == (4 * hull.n_vertices, 20)
    assert res.series.dt == pytest.approx(10.0 / 19.0)
    assert res.layout == (("p", "scalar"), ("tau", "vector3"))


def test_field_subset(hull):
    res = run_fom("synthetic-lti", FomRequest(hull, MU, 50.0, 60.0, 5, ("p",)))
    assert res.series.states.shape[0] == hull.n_vertices
    with pytest.raises(FomError):
        run_fom("synthetic-lti", FomRequest(hull, MU, 50.0, 60.0, 5, ("q",)))


def test_unknown_solver(hull):
    with pytest.raises(FomError, match="openfoam-live"):
        run_fom("openfoam-live", FomRequest(hull, MU, 0.0, 1.0, 3))


def test_request_validation(hull):
    with pytest.raises(FomError):
        FomRequest(hull, MU, 1.0, 1.0, 5)
    with pytest.raises(FomError):
        FomRequest(hull, MU, 0.0, 1.0, 2)


def test_steady_columns_identical(hull):
    res = run_fom("synthetic-steady", FomRequest(hull, MU, 50.0, 60.0, 6))
    s = res.series.states
    assert np.max(np.abs(s - s[:, :1])) <= 1e-12 * np.max(np.abs(s))


def test_closed_form_and_limit(hull):
    flow = SyntheticFlow()
    X = hull.vertices
    t = np.array([52.5])
    got = flow.state(X, MU, t)[:, 0]
    p, tau = flow.regime_fields(X, MU)
    expect = np.concatenate([p, tau.reshape(-1)])
    for (a, b), g, w in zip(flow.transient_profiles(X), flow.rates, flow.frequencies):
        e = np.exp(-g * (52.5 - flow.t_ref))
        expect = expect + e * (np.cos(w * 52.5) * a + np.sin(w * 52.5) * b)
    assert np.max(np.abs(got - expect)) <= 1e-12 * np.max(np.abs(expect))
    far = flow.state(X, MU, np.array([1e4]))[:, 0]
    assert np.array_equal(far, flow.regime_state(X, MU))


def test_dmd_recovers_regime(hull):
    res = run_fom("synthetic-lti", FomRequest(hull, MU, 50.0, 60.0, 20))
    model = fit_dmd(res.series, 0.9999999999)
    x = regime_state(model)
    exact = SyntheticSolver().regime(hull, MU)
    assert np.linalg.norm(x - exact) <= 1e-5 * np.linalg.norm(exact)


def test_noise_is_seeded(hull):
    solver = SyntheticSolver(SyntheticFlow(seed=3), noise=1e-3)
    req = FomRequest(hull, MU, 50.0, 60.0, 4)
    assert np.array_equal(solver(req).series.states, solver(req).series.states)


def test_registry():
    reg = default_registry()
    assert reg.ids() == ["synthetic-lti", "synthetic-steady"]
    with pytest.raises(FomError):
        reg.register("synthetic-lti", SyntheticSolver())
    reg2 = SolverRegistry()
    reg2.register("x", SyntheticSolver())
    assert "x" in reg2


def test_solver_exceptions_wrapped(hull):
    def boom(request):
        raise RuntimeError("diverged")

    with pytest.raises(FomError, match="diverged"):
        run_fom("b", FomRequest(hull, MU, 0.0, 1.0, 3), SolverRegistry({"b": boom}))


def _export(hull, tmp_path, count=20):
    res = run_fom("synthetic-lti", FomRequest(hull, MU, 50.0, 60.0, count))
    export_series(res, tmp_path / "run", hull.n_vertices)
    return res, tmp_path / "run"


def test_export_ingest_round_trip(hull, tmp_path):
    res, d = _export(hull, tmp_path)
    back = ingest_external(d, hull)
    assert back.series.count == 20
    assert np.array_equal(back.series.states, res.series.states)
    assert back.series.t0 == res.series.t0 and back.series.dt == res.series.dt


def test_ingest_missing_step(hull, tmp_path):
    _, d = _export(hull, tmp_path, 5)
    (d / "step_0003.csv").unlink()
    with pytest.raises(FomError, match="step_0003"):
        ingest_external(d, hull)


def test_ingest_nan_names_vertex(hull, tmp_path):
    _, d = _export(hull, tmp_path, 4)
    path = d / "step_0002.csv"
    lines = path.read_text().splitlines()
    cols = lines[6].split(",")
    cols[1] = "nan"
    lines[6] = ",".join(cols)
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(FomError, match="vertex 5"):
        ingest_external(d, hull)


def test_ingest_vertex_count_mismatch(hull, tmp_path):
    _, d = _export(hull, tmp_path, 3)
    with pytest.raises(FomError, match="vertex_count"):
        ingest_external(d, make_hull(4))


def test_external_solver_template(hull, tmp_path):
    res = run_fom("synthetic-steady", FomRequest(hull, MU, 0.0, 1.0, 3))
    tag = "_".join(repr(float(x)) for x in MU)
    export_series(res, tmp_path / f"run_{tag}", hull.n_vertices)
    solver = external_solver(str(tmp_path / "run_{mu}"))
    out = run_fom("ext", FomRequest(hull, MU, 0.0, 1.0, 3), SolverRegistry({"ext": solver}))
    assert np.array_equal(out.series.states, res.series.states)
    manifest = json.loads((tmp_path / f"run_{tag}" / "manifest.json").read_text())
    assert manifest["count"] == 3


def test_constant_pressure_null_force():
    m = make_hull(8)
    _, areas = m.face_geometry()
    p = Field("p", "scalar", np.full(m.n_vertices, 1234.5))
    F = force_vector(m.with_fields(p), shear=None)
    assert np.linalg.norm(F) <= 1e-10 * 1234.5 * areas.sum()


def test_flat_plate_pA():
    m = TriMesh([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], [[0, 1, 2], [0, 2, 3]])
    m = m.with_fields(Field("p", "scalar", np.full(4, 100.0)))
    F = force_vector(m, shear=None)
    assert np.array_equal(F, [0.0, 0.0, -100.0])
    # force opposes +z, so resistance along +z is +100 N
    assert integrate_resistance(m, direction=(0, 0, 1), shear=None) == 100.0


def test_resistance_errors():
    m = TriMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 2]])
    with pytest.raises(ResistanceError):
        integrate_resistance(m)
    m = m.with_fields(Field("p", "scalar", np.zeros(3)))
    with pytest.raises(ResistanceError):
        integrate_resistance(m, direction=(2, 0, 0), shear=None)


def test_coefficient():
    flow = FlowConditions(2.0, 1000.0, 3.0)
    assert resistance_coefficient(6000.0, flow) == pytest.approx(1.0)
    assert FlowConditions.from_froude(0.2, 10.0, 1025.0, 1.0).speed == pytest.approx(0.2 * np.sqrt(98.1))


def _quadrature_resistance(mu):
    flow = SyntheticFlow()

    def integrand(X, ndA):
        p, tau = flow.regime_fields(X, mu)
        return -p[:, None] * ndA + tau * np.linalg.norm(ndA, axis=1)[:, None]

    return -float(hull_quadrature(HullShape(), integrand, order=64)[0])


def test_steady_resistance_matches_quadrature():
    exact = _quadrature_resistance(np.zeros(5))
    m = SyntheticFlow().fields_on(make_hull(64), np.zeros(5))
    assert abs(integrate_resistance(m) - exact) <= 1e-3 * exact


def test_quadrature_oracle_converged():
    a = _quadrature_resistance(np.zeros(5))
    flow = SyntheticFlow()

    def integrand(X, ndA):
        p, tau = flow.regime_fields(X, np.zeros(5))
        return -p[:, None] * ndA + tau * np.linalg.norm(ndA, axis=1)[:, None]

    b = -float(hull_quadrature(HullShape(), integrand, order=96)[0])
    assert abs(a - b) <= 1e-9 * abs(a)
