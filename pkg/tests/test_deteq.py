import warnings

import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings, strategies as st
from scipy.optimize import brentq

from esn_rmt import deteq
from esn_rmt.closedform import mc_closed
from esn_rmt.ensembles import MatrixSpec, sample_connectivity, sample_input_weights
from esn_rmt.esn import ConvergenceError, InputSeries, gram_family, input_toeplitz
from esn_rmt.kernels import lag_sums


def haar(n, sigma=0.9, seed=0):
    return sample_connectivity(MatrixSpec("haar", n, sigma=sigma), seed)


# ---------------------------------------------------------------- Toeplitz helpers


def test_kernel_trace_dense_and_toeplitz():
    B = np.arange(9.0).reshape(3, 3)
    assert deteq.kernel_trace(B, 1) == pytest.approx((1 + 5) / 3)
    assert deteq.kernel_trace(B, -2) == pytest.approx(6 / 3)
    k = deteq.ToeplitzKernel([2.0, 0.5], 4)
    assert deteq.kernel_trace(k, 1) == pytest.approx(deteq.kernel_trace(k.dense(), 1))
    with pytest.raises(ValueError):
        deteq.kernel_trace(B, 3)
    assert k.to_dict() == {0: 2.0, 1: 0.5}
    np.testing.assert_array_equal(k.dense(1.0), sla.toeplitz([3.0, 0.5, 0, 0]))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31), T=st.integers(2, 60))
def test_inverse_lag_sums_exact_path(seed, T):
    rng = np.random.default_rng(seed)
    col = np.zeros(T)
    q = min(T, 5)
    col[:q] = rng.uniform(-0.2, 0.2, q)
    col[0] = 1.0 + np.abs(col[1:]).sum()
    inv = np.linalg.inv(sla.toeplitz(col))
    np.testing.assert_allclose(deteq.inverse_lag_sums(col), lag_sums(inv), atol=1e-10)
    np.testing.assert_allclose(deteq.toeplitz_inverse(col), inv, atol=1e-10)


def test_circulant_path_is_close_in_the_bulk():
    T = 400
    col = np.zeros(T)
    col[:3] = [2.0, 0.5, 0.2]
    exact = deteq.inverse_lag_sums(col)
    fast = deteq.inverse_lag_sums(col, "circulant_fast")
    np.testing.assert_allclose(fast[:10], exact[:10], rtol=0.02)


def test_non_positive_toeplitz_rejected():
    # [[1, 2], [2, 1]] has a negative leading entry in its inverse
    with pytest.raises(ConvergenceError):
        deteq.inverse_lag_sums(np.array([1.0, 2.0]))
    with pytest.raises(ConvergenceError):
        deteq.toeplitz_inverse(np.array([1.0, 2.0]))


# ---------------------------------------------------------------- lag engine


@pytest.mark.parametrize("kind", ["gaussian_iid", "wigner", "haar"])
def test_lag_engine_backends_against_direct_sums(kind):
    n, T = 15, 30
    W = sample_connectivity(MatrixSpec(kind, n, sigma=0.7), 3)
    g = gram_family(W)
    rng = np.random.default_rng(0)
    G = rng.standard_normal((n, n))
    t = rng.standard_normal(T)
    for backend in ("powers", "eigen"):
        eng = deteq.LagEngine(g, T, backend)
        Q = eng.Q
        Y = [np.linalg.matrix_power(W, q) @ g.S0 for q in range(Q + 1)]
        np.testing.assert_allclose(eng.traces(G), [np.trace(Yq @ G) for Yq in Y], atol=1e-9)
        direct = sum(t[q] * (Y[q] + Y[q].T) for q in range(Q + 1)) - t[0] * g.S0
        np.testing.assert_allclose(eng.combine(t), direct, atol=1e-9)


# ---------------------------------------------------------------- fixed points


@pytest.mark.parametrize("n,T", [(20, 50), (60, 30)])
def test_pair_with_zero_connectivity(n, T):
    pair = deteq.solve_pair(np.zeros((n, n)), T)
    c = n / T
    expect = c / (1 - c) if c < 1 else c - 1
    assert pair.kernel.lag(0) == pytest.approx(expect, rel=1e-9)
    rt = 1 - c if c < 1 else 1 / (c - 1)
    np.testing.assert_allclose(pair.Rt, rt * np.eye(n), rtol=1e-9)


def test_regularized_scalar_oracle():
    n, T, eta2, gamma = 30, 60, 0.3, 0.2
    c = n / T
    rng = np.random.default_rng(1)
    A = rng.standard_normal((n, T)) * 0.1
    gk = deteq.solve_regularized(np.zeros((n, n)), A, eta2, gamma)
    k = brentq(lambda k: k - c / (gamma + eta2 / (1 + eta2 * k)), 0, 100)
    assert gk.kernel.lag(0) == pytest.approx(k, rel=1e-9)
    assert gk.Qbar.shape == (n, n) and gk.Qtbar.shape == (T, T)
    with pytest.raises(ValueError):
        deteq.solve_regularized(np.zeros((2, 2)), A[:2], eta2, 0.0)


def test_pair_haar_against_closed_forms():
    n, T = 200, 400
    c = 0.5
    pair = deteq.solve_pair(haar(n), T)
    assert pair.kernel.lag(0) == pytest.approx(c / (1 - c), rel=0.05)
    rel = np.linalg.norm(pair.Rt - (1 - c) * pair.gram.S0) / np.linalg.norm((1 - c) * pair.gram.S0)
    assert rel < 0.05
    second = deteq.solve_second_order(pair)
    assert second.kernel.lag(0) == pytest.approx(c / (1 - c) ** 3, rel=0.05)


def test_pair_backends_agree():
    W = sample_connectivity(MatrixSpec("gaussian_iid", 40, sigma=0.8), 2)
    a = deteq.solve_pair(W, 100, deteq.SolverSettings(lag_backend="powers"))
    b = deteq.solve_pair(W, 100, deteq.SolverSettings(lag_backend="eigen"))
    np.testing.assert_allclose(a.kernel.values, b.kernel.values, atol=1e-9)


def test_pair_reports_non_convergence():
    W = sample_connectivity(MatrixSpec("gaussian_iid", 40, sigma=0.8), 2)
    with pytest.raises(ConvergenceError):
        deteq.solve_pair(W, 100, deteq.SolverSettings(max_iter=2, anderson_depth=0))


def test_pair_regime_checks():
    with pytest.raises(ValueError):
        deteq.solve_pair(np.zeros((10, 10)), 10)
    with pytest.raises(ValueError):
        deteq.solve_pair(np.zeros((10, 10)), 20, regime="c_gt_1")


def test_second_order_zero_source_and_validation():
    pair = deteq.solve_pair(haar(10), 20)
    second = deteq.solve_second_order(pair, np.zeros((10, 10)))
    assert not np.any(second.kernel.values) and not np.any(second.Gt)
    with pytest.raises(ValueError):
        deteq.solve_second_order(pair, np.triu(np.ones((10, 10))))


def test_solver_settings_validation():
    for bad in (dict(tol=0), dict(max_iter=0), dict(damping=1.0), dict(toeplitz_path="x"),
                dict(lag_backend="x"), dict(anderson_depth=-1)):
        with pytest.raises(ValueError):
            deteq.SolverSettings(**bad)


# ---------------------------------------------------------------- errors


def _problem(n, T, seed=0, kind="haar"):
    rng = np.random.default_rng(seed)
    W = sample_connectivity(MatrixSpec(kind, n, sigma=0.9), seed)
    m = sample_input_weights(n, seed=seed + 1)
    u = InputSeries(rng.standard_normal(2 * T - 1), T - 1)
    u_hat = InputSeries(rng.standard_normal(2 * T - 1), T - 1)
    r = np.roll(u.window(), 1)
    r_hat = np.roll(u_hat.window(), 1)
    return W, m, input_toeplitz(u), input_toeplitz(u_hat), r, r_hat


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 1000))
def test_train_mse_deteq_nondecreasing_in_noise(seed):
    W, m, U, _, r, _ = _problem(20, 40, seed)
    pair = deteq.solve_pair(W, 40)
    grid = np.logspace(-4, 1, 12)
    vals = [deteq.train_mse_deteq(pair, W, m, U, r, e) for e in grid]
    assert np.all(np.diff(vals) >= -1e-12)


def test_train_mse_zero_for_wide_networks():
    W, m, U, _, r, _ = _problem(60, 30)
    pair = deteq.solve_pair(W, 30)
    assert deteq.train_mse_deteq(pair, W, m, U, r, 0.1) == 0.0


def test_c0_form_continuous_with_generic_path():
    n, T = 3, 600
    W, m, U, U_hat, r, r_hat = _problem(n, T)
    pair = deteq.solve_pair(W, T)
    generic = deteq.test_mse_deteq(pair, None, W, m, U, U_hat, r, r_hat, 0.1, use_c0=False)
    c0 = deteq.test_mse_deteq(pair, None, W, m, U, U_hat, r, r_hat, 0.1, use_c0=True)
    assert c0 == pytest.approx(generic, rel=0.05)


def test_test_mse_shape_check():
    W, m, U, U_hat, r, r_hat = _problem(10, 20)
    pair = deteq.solve_pair(W, 20)
    with pytest.raises(ValueError):
        deteq.test_mse_deteq(pair, None, W, m, U, U_hat, r, r_hat[:-1], 0.1)


# ---------------------------------------------------------------- memory capacity


def test_memory_capacity_haar_matches_closed_form():
    n, T = 400, 800
    W = haar(n)
    pair = deteq.solve_pair(W, T)
    m = sample_input_weights(n, seed=1)
    taus = np.arange(4)
    mc = deteq.memory_capacity(pair, W, m, taus)
    np.testing.assert_allclose(mc, mc_closed("haar", 0.5, taus, sigma=0.9), rtol=0.05)
    assert deteq.memory_capacity(pair, W, m, 2) == pytest.approx(0.24932, rel=0.05)


def test_memory_capacity_sample_profile_flags_instability():
    n, T = 100, 200
    W = haar(n)
    pair = deteq.solve_pair(W, T)
    m = sample_input_weights(n, seed=1)
    with pytest.raises(ConvergenceError):
        deteq.memory_capacity(pair, W, m, 0, profile="sample", eta2_probe=1e-10)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        value = deteq.memory_capacity(pair, W, m, 0, profile="sample", eta2_probe=1e-10, strict=False)
    assert value > 0 and caught


def test_memory_capacity_decreases_with_delay():
    W = haar(100)
    pair = deteq.solve_pair(W, 200)
    mc, rel = deteq.memory_curve(pair, W, None, np.arange(8))
    # n = 100 is too small for the vanishing-noise limit to settle, only the ordering is checked
    assert np.all(np.diff(mc) < 0) and np.all(rel >= 0)


def test_memory_capacity_argument_checks():
    W = haar(20)
    pair = deteq.solve_pair(W, 40)
    with pytest.raises(ValueError):
        deteq.memory_capacity(pair, W, None, 40)
    with pytest.raises(ValueError):
        deteq.memory_capacity(pair, W, None, 0, profile="other")
    wide = deteq.solve_pair(haar(40), 20)
    with pytest.raises(ValueError):
        deteq.memory_capacity(wide, haar(40), None, 0)


def test_trace_memory_matrix_haar_is_diagonal():
    W = haar(200, sigma=0.8)
    pair = deteq.solve_pair(W, 400)
    D = deteq.trace_memory_matrix(pair, W)
    expect = (1 - 0.64) * 0.64 ** np.arange(6) / 0.5
    np.testing.assert_allclose(np.diag(D)[:6], expect, rtol=0.05)
    off = D[:6, :6] - np.diag(np.diag(D[:6, :6]))
    assert np.abs(off).max() < 0.02
