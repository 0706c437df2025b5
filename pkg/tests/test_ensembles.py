import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from esn_rmt.ensembles import (
    MatrixSpec,
    SpectralMeasure,
    check_stability,
    haar_orthogonal,
    multi_memory_block_sizes,
    sample_connectivity,
    sample_input_weights,
    spectral_stats,
)

THREE_MODES = ((0.99, 0.01), (0.9, 0.1), (0.5, 0.89))


def test_same_seed_same_matrix():
    spec = MatrixSpec("gaussian_iid", 30, sigma=0.9)
    np.testing.assert_array_equal(sample_connectivity(spec, 4), sample_connectivity(spec, 4))
    assert not np.array_equal(sample_connectivity(spec, 4), sample_connectivity(spec, 5))


def test_spec_seed_used_when_none_given():
    spec = MatrixSpec("haar", 10, sigma=0.5, seed=11)
    np.testing.assert_array_equal(sample_connectivity(spec), sample_connectivity(spec, 11))


@settings(max_examples=20, deadline=None)
@given(n=st.integers(2, 40), seed=st.integers(0, 2**31))
def test_haar_is_orthogonal(n, seed):
    O = haar_orthogonal(n, np.random.default_rng(seed))
    np.testing.assert_allclose(O @ O.T, np.eye(n), atol=1e-12)


def test_haar_scaled_singular_values():
    W = sample_connectivity(MatrixSpec("haar", 50, sigma=0.7), 0)
    np.testing.assert_allclose(np.linalg.svd(W, compute_uv=False), 0.7, atol=1e-12)


def test_haar_first_column_is_uniform_on_sphere():
    # E[O_11^2] = 1/n for Haar; a sign-uncorrected QR would still pass this but not the next line
    rng = np.random.default_rng(0)
    n = 3
    draws = np.array([haar_orthogonal(n, rng)[:, 0] for _ in range(4000)])
    np.testing.assert_allclose((draws**2).mean(axis=0), 1 / n, atol=0.02)
    np.testing.assert_allclose(draws.mean(axis=0), 0.0, atol=0.03)


@pytest.mark.parametrize("kind", ["gaussian_iid", "wigner"])
def test_random_ensembles_have_radius_near_sigma(kind):
    W = sample_connectivity(MatrixSpec(kind, 600, sigma=0.9), 3)
    rho, _ = spectral_stats(W)
    assert abs(rho - 0.9) < 0.05


def test_wigner_is_symmetric_with_scaled_entries():
    n = 400
    W = sample_connectivity(MatrixSpec("wigner", n, sigma=0.9), 1)
    np.testing.assert_array_equal(W, W.T)
    off = W[np.triu_indices(n, 1)]
    assert abs(off.std() - 0.9 / (2 * math.sqrt(n))) < 0.03 * 0.9 / (2 * math.sqrt(n))


def test_multi_memory_blocks():
    n = 200
    W = sample_connectivity(MatrixSpec("multi_memory", n, modes=THREE_MODES), 2)
    sizes = multi_memory_block_sizes(THREE_MODES, n)
    assert sizes == [2, 20, 178]
    sv = np.sort(np.linalg.svd(W, compute_uv=False))
    expect = np.sort(np.repeat([0.99, 0.9, 0.5], sizes))
    np.testing.assert_allclose(sv, expect, atol=1e-12)
    assert not np.any(W[:2, 2:]) and not np.any(W[2:22, 22:])


def test_multi_memory_empty_block_rejected():
    with pytest.raises(ValueError):
        multi_memory_block_sizes(((0.9, 0.001), (0.5, 0.999)), 50)


@settings(max_examples=50, deadline=None)
@given(fracs=st.lists(st.floats(0.05, 1.0), min_size=1, max_size=4), n=st.integers(20, 500))
def test_block_sizes_sum_to_n(fracs, n):
    total = sum(fracs)
    modes = [(0.5, f / total) for f in fracs]
    sizes = multi_memory_block_sizes(modes, n)
    assert sum(sizes) == n
    assert all(abs(s - c * n) < 1 for s, (_, c) in zip(sizes, modes))


def test_projection_has_two_point_spectrum():
    W = sample_connectivity(MatrixSpec("projection", 41, sigma=0.6), 0)
    np.testing.assert_allclose(W @ W, 0.36 * np.eye(41), atol=1e-12)
    vals = np.linalg.eigvalsh(W)
    assert np.sum(vals > 0) == 21


def test_user_matrix_roundtrip_and_validation():
    M = np.diag([0.1, 0.2])
    spec = MatrixSpec("user", 2, matrix=M)
    np.testing.assert_array_equal(sample_connectivity(spec), M)
    assert MatrixSpec.from_dict(spec.to_dict()).kind == "user"
    with pytest.raises(ValueError):
        MatrixSpec("user", 3, matrix=M)
    with pytest.raises(ValueError):
        MatrixSpec("user", 2, matrix=np.array([[np.nan, 0], [0, 0]]))


@pytest.mark.parametrize("kwargs", [
    dict(kind="haar", n=10, sigma=1.0),
    dict(kind="haar", n=10),
    dict(kind="wigner", n=1, sigma=0.5),
    dict(kind="multi_memory", n=10, modes=((0.5, 0.6),)),
    dict(kind="multi_memory", n=10, modes=((1.2, 1.0),)),
    dict(kind="bogus", n=10, sigma=0.5),
])
def test_invalid_specs(kwargs):
    with pytest.raises(ValueError):
        MatrixSpec(**kwargs)


def test_from_dict_modes():
    spec = MatrixSpec.from_dict({"kind": "multi_memory", "n": 100,
                                 "modes": [{"sigma": s, "fraction": c} for s, c in THREE_MODES]})
    assert spec.modes == THREE_MODES


def test_check_stability():
    with pytest.raises(ValueError):
        check_stability(np.diag([1.0, 0.2]))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        rho, norm = check_stability(np.array([[0.5, 3.0], [0.0, 0.5]]))
    assert rho == pytest.approx(0.5) and norm > 1
    assert any(issubclass(w.category, RuntimeWarning) for w in caught)


@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 60), seed=st.integers(0, 2**31))
def test_input_weights_unit_norm(n, seed):
    m = sample_input_weights(n, seed=seed)
    assert np.linalg.norm(m) == pytest.approx(1.0, abs=1e-12)


def test_eigvec_input_weights():
    W = sample_connectivity(MatrixSpec("wigner", 30, sigma=0.8), 0)
    m = sample_input_weights(30, "eigvec_of", W=W)
    lam = m @ W @ m
    np.testing.assert_allclose(W @ m, lam * m, atol=1e-12)
    assert abs(lam) == pytest.approx(spectral_stats(W)[0])
    with pytest.raises(ValueError):
        sample_input_weights(2, "eigvec_of", W=np.array([[0.0, -0.5], [0.5, 0.0]]))
    with pytest.raises(ValueError):
        sample_input_weights(3, "eigvec_of")


def test_semicircle_quadrature_moments():
    t, w = SpectralMeasure.semicircle(0.9).quadrature(128)
    # moments of the semicircle on [-s, s]: s^2/4, 2 s^4/16, 5 s^6/64
    s = 0.9
    for k, expect in [(0, 1.0), (2, s**2 / 4), (4, 2 * s**4 / 16), (6, 5 * s**6 / 64), (3, 0.0)]:
        assert np.sum(w * t**k) == pytest.approx(expect, abs=1e-14)


def test_measure_symmetry_flags():
    assert SpectralMeasure.two_point(0.5).is_symmetric
    assert SpectralMeasure.discrete([-0.3, 0.3], [0.5, 0.5]).is_symmetric
    assert not SpectralMeasure.discrete([-0.3, 0.5], [0.5, 0.5]).is_symmetric
    with pytest.raises(ValueError):
        SpectralMeasure.discrete([0.2], [0.9])
