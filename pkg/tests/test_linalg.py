import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.sparse import csr_matrix, diags

from tcieti.linalg import (DenseFactor, FactorizationError, SparseFactor, cg_lanczos_condition,
                           estimate_condition, lanczos, pcg)


def spd(n, seed, cond=100.0):
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return (q * np.geomspace(1, cond, n)) @ q.T


def test_one_by_one_factor():
    f = SparseFactor(csr_matrix([[2.0]]))
    assert not f.singular
    assert f.solve(np.array([3.0]))[0] == pytest.approx(1.5)


def test_singular_detection_and_pivot():
    lap = diags([-np.ones(4), 2 * np.ones(5), -np.ones(4)], [-1, 0, 1]).tolil()
    lap[0, 0] = lap[4, 4] = 1.0
    with pytest.raises(FactorizationError) as exc:
        SparseFactor(lap.tocsr(), owner=7)
    assert exc.value.owner == 7
    f = SparseFactor(lap.tocsr(), tolerant=True)
    assert f.singular
    b = np.array([1.0, -1, 0, 0, 0])
    x = f.solve(b)
    assert np.allclose(lap @ x, b)


def test_dense_factor_singular():
    with pytest.raises(FactorizationError):
        DenseFactor(np.ones((2, 2)))
    assert DenseFactor(np.zeros((0, 0))).n == 0


def test_pcg_identity_and_zero_rhs():
    b = np.arange(1.0, 6.0)
    r = pcg(lambda x: x, b)
    assert r.iterations == 1 and np.allclose(r.x, b)
    r = pcg(lambda x: x, np.zeros(4))
    assert r.iterations == 0 and not r.x.any()


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 25), st.integers(0, 1000))
def test_pcg_energy_monotone_and_accurate(n, seed):
    A = spd(n, seed)
    b = np.random.default_rng(seed).standard_normal(n)
    M = np.diag(1 / np.diag(A))
    r = pcg(lambda x: A @ x, b, lambda x: M @ x, tol=1e-10)
    assert r.converged
    assert np.all(np.diff(r.energy) <= 1e-12 * max(1.0, abs(r.energy[-1])))
    assert np.allclose(r.x, np.linalg.solve(A, b), rtol=1e-6, atol=1e-8)


def test_pcg_maxiter_failure():
    A = spd(30, 1, 1e6)
    r = pcg(lambda x: A @ x, np.ones(30), tol=1e-14, maxiter=3)
    assert not r.converged and r.iterations == 3


def test_cg_lanczos_matches_spectrum():
    A = spd(12, 5, 50.0)
    r = pcg(lambda x: A @ x, np.random.default_rng(0).standard_normal(12), tol=1e-14, maxiter=12)
    kappa, lo, hi = cg_lanczos_condition(r.alphas, r.betas)
    assert kappa == pytest.approx(50.0, rel=1e-6)


def test_estimate_condition_examples():
    assert estimate_condition(lambda x: x, 10) == pytest.approx(1.0, abs=1e-10)
    d = np.array([1.0, 10.0])
    assert estimate_condition(lambda x: d * x, 2) == pytest.approx(10.0, abs=1e-6)
    A = spd(40, 3, 1e3)
    Ai = np.linalg.inv(A)
    assert estimate_condition(lambda x: A @ x, 40, lambda x: Ai @ x) == pytest.approx(1e3, rel=1e-6)


def test_estimate_condition_failures():
    assert estimate_condition(lambda x: np.full_like(x, np.nan), 3) is None
    d = np.array([-1.0, 1.0, 2.0])
    assert estimate_condition(lambda x: d * x, 3) is None
    assert cg_lanczos_condition([1.0, -1.0], [0.5, 0.5]) is None


def test_lanczos_ritz_values():
    d = np.arange(1.0, 9.0)
    ritz = lanczos(lambda x: d * x, 8, steps=8)
    assert np.allclose(np.sort(ritz), d)
