import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from esn_rmt import kernels
from esn_rmt import _kernels_py as py

compiled = kernels.compiled_backend
needs_compiled = pytest.mark.skipif(compiled is None, reason="compiled extension not built")

finite = st.floats(-2.0, 2.0, allow_nan=False, allow_infinity=False)


def spd_toeplitz_column(rng, T):
    decay = rng.uniform(0.1, 0.8)
    col = rng.uniform(-1, 1) * decay ** np.arange(T)
    col[0] = 1.0 + np.sum(np.abs(col[1:])) * 2  # diagonal dominance
    return col


# ---------------------------------------------------------------- oracles for the fallback


def test_lag_sums_matches_loop():
    B = np.arange(16.0).reshape(4, 4)
    expect = [sum(B[i, i + q] for i in range(4 - q)) for q in range(4)]
    np.testing.assert_allclose(kernels.lag_sums(B), expect)


@pytest.mark.parametrize("T", [1, 2, 7, 64])
def test_gohberg_semencul_inverse_matches_dense(T):
    rng = np.random.default_rng(T)
    col = spd_toeplitz_column(rng, T)
    dense_inv = np.linalg.inv(sla.toeplitz(col))
    x = dense_inv[:, 0]
    np.testing.assert_allclose(py.toeplitz_inverse_dense(x), dense_inv, atol=1e-10)
    np.testing.assert_allclose(py.gs_lag_sums(x), py.lag_sums(dense_inv), atol=1e-10)


def test_power_moments_and_poly_eval_direct():
    rng = np.random.default_rng(1)
    lam = rng.uniform(-0.9, 0.9, 5) + 1j * rng.uniform(-0.3, 0.3, 5)
    d = rng.standard_normal(5) + 0j
    mom = kernels.power_moments(lam, d, 6)
    np.testing.assert_allclose(mom, [np.sum(d * lam**q) for q in range(7)])
    t = rng.standard_normal(4)
    np.testing.assert_allclose(kernels.poly_eval(t, lam), np.polyval(t[::-1], lam))


def test_reservoir_states_recursion():
    rng = np.random.default_rng(2)
    W = 0.3 * rng.standard_normal((3, 3))
    m = rng.standard_normal(3)
    drive = rng.standard_normal(5)
    noise = rng.standard_normal((5, 3))
    x = np.ones(3)
    rows = []
    for s in range(5):
        x = W @ x + m * drive[s] + noise[s]
        rows.append(x)
    np.testing.assert_allclose(kernels.reservoir_states(W, m, drive, noise, np.ones(3)), rows)


def test_mackey_glass_equilibrium_is_fixed():
    # beta / gamma = 2 makes x = 1 an equilibrium of the delay equation
    hist = np.ones(171)
    out = kernels.mackey_glass_rk4(500, 0.1, 0.2, 0.1, 10.0, 170, hist)
    np.testing.assert_allclose(out, 1.0, atol=1e-14)


def test_mackey_glass_history_length_checked():
    with pytest.raises(ValueError):
        py.mackey_glass_rk4(10, 0.1, 0.2, 0.1, 10.0, 5, np.ones(3))


def test_numpy_fastpaths_used_for_vectorised_kernels():
    assert kernels.gs_lag_sums is py.gs_lag_sums
    assert kernels.poly_eval is py.poly_eval


# ---------------------------------------------------------------- compiled vs fallback


@needs_compiled
@settings(max_examples=40, deadline=None)
@given(B=arrays(float, st.tuples(st.integers(1, 12), st.integers(1, 12)).map(lambda s: (s[0], s[0])),
                elements=finite))
def test_lag_sums_backends_agree(B):
    np.testing.assert_allclose(compiled.lag_sums(B), py.lag_sums(B), atol=1e-12)


@needs_compiled
@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), T=st.integers(1, 40))
def test_toeplitz_kernels_backends_agree(seed, T):
    rng = np.random.default_rng(seed)
    x = np.linalg.inv(sla.toeplitz(spd_toeplitz_column(rng, T)))[:, 0]
    np.testing.assert_allclose(compiled.toeplitz_inverse_dense(x), py.toeplitz_inverse_dense(x), atol=1e-10)
    np.testing.assert_allclose(compiled.gs_lag_sums(x), py.gs_lag_sums(x), atol=1e-9)


@needs_compiled
@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), k=st.integers(1, 20), qmax=st.integers(0, 30))
def test_spectral_kernels_backends_agree(seed, k, qmax):
    rng = np.random.default_rng(seed)
    lam = 0.95 * rng.uniform(-1, 1, k) + 0.3j * rng.uniform(-1, 1, k)
    d = rng.standard_normal(k) + 1j * rng.standard_normal(k)
    np.testing.assert_allclose(compiled.power_moments(lam, d, qmax), py.power_moments(lam, d, qmax),
                               rtol=1e-12, atol=1e-12)
    t = rng.standard_normal(qmax + 1)
    np.testing.assert_allclose(compiled.poly_eval(t, lam), py.poly_eval(t, lam), rtol=1e-12, atol=1e-12)


@needs_compiled
@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 8), steps=st.integers(1, 30))
def test_reservoir_states_backends_agree(seed, n, steps):
    rng = np.random.default_rng(seed)
    W = 0.9 * rng.standard_normal((n, n)) / np.sqrt(n)
    args = (W, rng.standard_normal(n), rng.standard_normal(steps), rng.standard_normal((steps, n)),
            rng.standard_normal(n))
    np.testing.assert_allclose(compiled.reservoir_states(*args), py.reservoir_states(*args), atol=1e-12)


@needs_compiled
@settings(max_examples=15, deadline=None)
@given(x0=st.floats(0.5, 1.5), delay=st.integers(1, 200))
def test_mackey_glass_backends_agree(x0, delay):
    hist = np.full(delay + 1, x0)
    a = compiled.mackey_glass_rk4(300, 0.1, 0.2, 0.1, 10.0, delay, hist)
    b = py.mackey_glass_rk4(300, 0.1, 0.2, 0.1, 10.0, delay, hist)
    np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-13)


def test_pure_python_switch(monkeypatch):
    import importlib

    monkeypatch.setenv("ESN_RMT_PURE_PYTHON", "1")
    mod = importlib.reload(kernels)
    try:
        assert mod.BACKEND == "python"
        assert mod.compiled_backend is None
    finally:
        monkeypatch.delenv("ESN_RMT_PURE_PYTHON")
        importlib.reload(kernels)
