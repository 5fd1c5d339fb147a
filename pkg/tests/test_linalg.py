import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from romopt.linalg import (
    LinalgError,
    SingularMatrixError,
    eig_dense,
    pseudo_inverse_apply,
    select_rank,
    solve_linear,
    truncated_svd,
)


def test_svd_identity():
    s = truncated_svd(np.eye(3), 3)
    assert np.allclose(s.sigma, [1, 1, 1])


def test_svd_rank_one(rng):
    x, y = rng.standard_normal(30), rng.standard_normal(12)
    a = np.outer(x, y)
    s = truncated_svd(a, 1)
    assert np.linalg.norm(a - s.reconstruct()) <= 1e-12 * np.linalg.norm(a)


def test_svd_against_gram_oracle(rng):
    a = rng.standard_normal((40, 15))
    s = truncated_svd(a, 15)
    assert np.linalg.norm(a - s.reconstruct()) <= 1e-10 * np.linalg.norm(a)
    gram = np.sort(np.linalg.eigvalsh(a.T @ a))[::-1]
    assert np.allclose(s.sigma, np.sqrt(gram), rtol=1e-10)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 30), st.integers(2, 12), st.integers(0, 2**31))
def test_svd_invariants(n, m, seed):
    a = np.random.default_rng(seed).standard_normal((n, m))
    r = min(n, m)
    s = truncated_svd(a, r)
    assert np.allclose(s.u.T @ s.u, np.eye(r), atol=1e-10)
    assert np.allclose(s.v.T @ s.v, np.eye(r), atol=1e-10)
    assert np.all(np.diff(s.sigma) <= 0) and np.all(s.sigma >= 0)


def test_svd_deterministic_signs(rng):
    a = rng.standard_normal((20, 6))
    s1, s2 = truncated_svd(a, 4), truncated_svd(a.copy(), 4)
    assert np.array_equal(s1.u, s2.u)
    assert np.all(s1.u[np.argmax(np.abs(s1.u), axis=0), range(4)] > 0)


def test_select_rank_energy():
    sigma = np.array([3.0, 2.0, 1.0])
    assert select_rank(sigma, 9 / 14) == 1
    assert select_rank(sigma, 0.9) == 2
    assert select_rank(sigma, 1.0) == 3
    with pytest.raises(LinalgError):
        select_rank(sigma, 4)
    with pytest.raises(LinalgError):
        select_rank(sigma, 1.5)


def test_svd_rejects_non_finite():
    with pytest.raises(LinalgError):
        truncated_svd(np.array([[1.0, np.nan]]), 1)


def test_eig_small():
    lam, _ = eig_dense(np.diag([2.0, -1.0]))
    assert np.allclose(lam, [2, -1])
    lam, _ = eig_dense(np.array([[0.0, -1.0], [1.0, 0.0]]))
    assert np.allclose(sorted(lam, key=lambda z: z.imag), [-1j, 1j])


def test_eig_constructed_spectrum(rng):
    d = rng.uniform(-3, 3, 8)
    p = rng.standard_normal((8, 8))
    a = p @ np.diag(d) @ np.linalg.inv(p)
    lam, w = eig_dense(a)
    assert np.allclose(np.sort(lam.real), np.sort(d), atol=1e-8)
    assert np.allclose(lam.imag, 0, atol=1e-8)
    assert np.allclose(a @ w, w * lam, atol=1e-8)


def test_pinv_cases(rng):
    q, _ = np.linalg.qr(rng.standard_normal((5, 5)))
    y = rng.standard_normal((3, 5))
    assert np.allclose(pseudo_inverse_apply(q, y), y @ q.T)
    assert np.allclose(pseudo_inverse_apply(np.eye(5), y), y)
    x = rng.standard_normal((10, 4))
    y = rng.standard_normal((6, 4))
    a = pseudo_inverse_apply(x, y)
    assert np.linalg.norm(a @ x - y) <= 1e-9 * np.linalg.norm(y)


def test_solve_cases(rng):
    b = rng.standard_normal(4)
    assert np.allclose(solve_linear(np.eye(4), b), b)
    assert np.allclose(solve_linear(np.diag([2.0, 4.0]), [2.0, 8.0]), [1.0, 2.0])
    L = rng.standard_normal((20, 20))
    a = L.T @ L
    b = rng.standard_normal(20)
    x = solve_linear(a, b)
    assert np.linalg.norm(a @ x - b) <= 1e-10 * np.linalg.norm(b)


def test_solve_singular():
    with pytest.raises(SingularMatrixError):
        solve_linear(np.array([[1.0, 2.0], [2.0, 4.0]]), [1.0, 2.0])
