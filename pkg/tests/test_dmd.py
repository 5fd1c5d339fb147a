import numpy as np
import pytest

from romopt.dmd import (
    DmdError,
    DmdModel,
    SnapshotSeries,
    default_horizon,
    fit_dmd,
    hankel,
    reconstruct,
    regime_state,
    scalar_regime,
    stable_mask,
)


def _embedded_diag(rng, n=10, m=12):
    q, _ = np.linalg.qr(rng.standard_normal((n, 2)))
    A = q @ np.diag([0.9, 0.5]) @ q.T
    x0 = q @ np.array([1.0, 2.0])
    states = np.empty((n, m))
    states[:, 0] = x0
    for k in range(1, m):
        states[:, k] = A @ states[:, k - 1]
    return A, x0, SnapshotSeries(states, 0.0, 1.0)


def test_series_validation():
    with pytest.raises(DmdError):
        SnapshotSeries(np.ones((3, 2)), 0.0, 1.0)
    with pytest.raises(DmdError):
        SnapshotSeries(np.ones((3, 4)), 0.0, 0.0)
    bad = np.ones((3, 4))
    bad[1, 2] = np.inf
    with pytest.raises(DmdError):
        SnapshotSeries(bad, 0.0, 1.0)
    with pytest.raises(DmdError):
        SnapshotSeries.from_times(np.ones((2, 4)), [0.0, 1.0, 2.5, 3.0])


def test_linear_system_eigenvalues(rng):
    _, _, series = _embedded_diag(rng)
    model = fit_dmd(series, 2)
    assert np.allclose(np.sort(model.eigenvalues.real), [0.5, 0.9], atol=1e-8)
    assert np.allclose(model.eigenvalues.imag, 0, atol=1e-8)


def test_constant_series():
    c = np.array([1.0, -2.0, 3.0, 0.5])
    series = SnapshotSeries(np.repeat(c[:, None], 6, axis=1), 0.0, 0.5)
    model = fit_dmd(series, 1)
    assert abs(model.eigenvalues[0] - 1.0) <= 1e-10
    assert np.allclose(reconstruct(model, 17.3), c, atol=1e-10)
    assert np.array_equal(regime_state(model), regime_state(model))
    assert np.allclose(regime_state(model), c, atol=1e-12)


def test_geometric_sequence(rng):
    v = rng.standard_normal(5)
    states = np.outer(v, 0.8 ** np.arange(8))
    model = fit_dmd(SnapshotSeries(states, 0.0, 1.0), 1)
    assert abs(model.eigenvalues[0] - 0.8) <= 1e-10


def test_reconstruction_at_t0_within_residual(rng):
    _, x0, series = _embedded_diag(rng)
    model = fit_dmd(series, 2)
    err = np.linalg.norm(reconstruct(model, 0.0) - x0) / np.linalg.norm(x0)
    assert err <= max(model.residual, 1e-14)


def test_extrapolation(rng):
    A, x0, series = _embedded_diag(rng)
    model = fit_dmd(series, 2)
    exact = np.linalg.matrix_power(A, 20) @ x0
    got = reconstruct(model, 20.0)
    assert np.linalg.norm(got - exact) <= 1e-6 * np.linalg.norm(exact)


def test_regime_of_decaying_transient(rng):
    c, d = rng.standard_normal(6), rng.standard_normal(6)
    states = c[:, None] + np.outer(d, 0.7 ** np.arange(15))
    model = fit_dmd(SnapshotSeries(states, 0.0, 1.0), 2)
    x = regime_state(model, horizon=100.0)
    assert np.linalg.norm(x - c) <= 1e-6 * np.linalg.norm(c)


def test_growing_series_has_no_stable_dynamics(rng):
    states = np.outer(rng.standard_normal(4), 1.2 ** np.arange(10))
    model = fit_dmd(SnapshotSeries(states, 0.0, 1.0), 1)
    with pytest.raises(DmdError, match="no stable dynamics"):
        regime_state(model, eta=0.01)


def test_regime_policies(rng):
    c, d = rng.standard_normal(6), rng.standard_normal(6)
    states = c[:, None] + np.outer(d, 0.7 ** np.arange(15))
    model = fit_dmd(SnapshotSeries(states, 0.0, 1.0), 2)
    assert stable_mask(model, policy="fixed-point").sum() == 1
    x = regime_state(model, horizon=100.0, policy="fixed-point")
    assert np.linalg.norm(x - c) <= 1e-6 * np.linalg.norm(c)
    with pytest.raises(DmdError):
        stable_mask(model, policy="bogus")


def test_horizon_rules(rng):
    _, _, series = _embedded_diag(rng)
    model = fit_dmd(series, 2)
    assert default_horizon(model) == pytest.approx(110.0)
    with pytest.raises(DmdError):
        regime_state(model, horizon=5.0)


def test_rank_limits(rng):
    _, _, series = _embedded_diag(rng)
    with pytest.raises(DmdError):
        fit_dmd(series, 12)
    with pytest.raises(DmdError):
        fit_dmd(SnapshotSeries(np.zeros((3, 5)), 0.0, 1.0), 1)


def test_serialization_round_trip(rng, tmp_path):
    _, _, series = _embedded_diag(rng)
    model = fit_dmd(series, 2)
    path = tmp_path / "m.bin"
    model.save(path)
    back = DmdModel.load(path)
    assert np.array_equal(back.modes, model.modes)
    assert np.array_equal(back.eigenvalues, model.eigenvalues)
    assert np.array_equal(back.amplitudes, model.amplitudes)
    assert back.to_bytes() == model.to_bytes()


def test_deterministic_fit(rng):
    _, _, series = _embedded_diag(rng)
    assert fit_dmd(series, 2).to_bytes() == fit_dmd(series, 2).to_bytes()


def test_hankel_and_scalar_regime():
    H = hankel(np.arange(6.0), 3)
    assert H.shape == (3, 4)
    assert np.array_equal(H[:, 0], [0, 1, 2])
    k = np.arange(20)
    values = 5.0 + 2.0 * 0.8**k * np.cos(0.9 * k) - 0.7**k
    assert scalar_regime(values, 0.0, 1.0) == pytest.approx(5.0, rel=1e-8)
