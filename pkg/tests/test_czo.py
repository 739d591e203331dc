import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dyadicw.czo import (
    ANTIDIAGONAL,
    ODD,
    ROOT,
    MatrixKernel,
    czo_apply,
    czo_matrix,
    inverse_difference_kernel,
    kernel_from_config,
    pairing,
    root_kernel_pairing_oracle,
    t1_cancellation,
    t1_values,
    weak_boundedness_table,
    weighted_growth,
)
from dyadicw.dyadic import DyadicCube, VectorField
from dyadicw.errors import ConfigError, DimensionError, ResolutionError
from dyadicw.weights import identity_weight, make_power_weight


def direct_odd(f, A, eps):
    """Double loop over cell pairs with midpoint offsets outside the truncation."""
    N, n = f.shape
    h = 1.0 / N
    out = np.zeros((N, n))
    for j in range(N):
        for k in range(N):
            if abs(j - k) * h > eps * (1 + 1e-12):
                out[j] += A @ f[k] / (j - k)
    return out


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(3, 7), st.integers(1, 3))
def test_apply_matches_direct_sum(seed, L, m):
    rng = np.random.default_rng(seed)
    f = rng.standard_normal((1 << L, 2))
    A = rng.standard_normal((2, 2))
    eps = m * 2.0 ** -L
    got = czo_apply(MatrixKernel(ODD, A), VectorField(f), eps).samples
    ref = direct_odd(f, A, eps)
    assert np.abs(got - ref).max() <= 1e-10 * max(1.0, np.abs(ref).max())


@pytest.mark.parametrize("profile", [ODD, ROOT])
def test_apply_matches_dense_matrix(profile):
    rng = np.random.default_rng(0)
    k = MatrixKernel(profile, rng.standard_normal((2, 2)))
    f = rng.standard_normal((64, 2))
    T = czo_matrix(k, 6)
    assert np.allclose(czo_apply(k, VectorField(f)).samples, T @ f @ k.A.T, atol=1e-11)


def test_odd_matrix_is_antisymmetric_and_root_symmetric():
    T = czo_matrix(inverse_difference_kernel(), 6)
    assert np.array_equal(T, -T.T)
    R = czo_matrix(MatrixKernel(ROOT), 6)
    assert np.allclose(R, R.T, atol=1e-15)


def test_root_stencil_integrates_the_profile():
    # row sums of the exact cell-pair integrals equal h^{-1} int_cell int_0^1 |x-y|^{-1/2}
    L = 7
    h = 2.0 ** -L
    c = MatrixKernel(ROOT).stencil(L)
    row = np.convolve(np.ones(1 << L), c)[(1 << L) - 1:2 * (1 << L) - 1]
    a = np.arange(1 << L) * h
    b = a + h
    # int_a^b (2 sqrt(x) + 2 sqrt(1-x)) dx
    F = lambda x: (4 / 3) * (x ** 1.5 - (1 - x) ** 1.5)
    assert np.allclose(row, (F(b) - F(a)) / h, rtol=1e-10)


def test_truncation_validation():
    k = inverse_difference_kernel()
    with pytest.raises(ResolutionError):
        k.stencil(6, 0.5 * 2.0 ** -6)
    with pytest.raises(ResolutionError):
        k.stencil(6, -1.0)
    assert np.count_nonzero(MatrixKernel(ROOT).stencil(6, 0.0)) == 127
    with pytest.raises(DimensionError):
        czo_apply(k, VectorField(np.zeros((8, 3))))


def test_kernel_config():
    k = kernel_from_config(None)
    assert k.profile == ODD and np.array_equal(k.A, ANTIDIAGONAL)
    assert kernel_from_config({"profile": ROOT, "A": [[2.0]]}).dim == 1
    with pytest.raises(ConfigError):
        kernel_from_config({"profile": "gauss"})
    with pytest.raises(ConfigError):
        kernel_from_config({"A": "x"})
    with pytest.raises(ConfigError):
        kernel_from_config({"B": 1})
    with pytest.raises(DimensionError):
        MatrixKernel(ODD, np.ones((2, 3)))


def test_t1_value_equals_eps():
    k = inverse_difference_kernel()
    rows, fit = t1_cancellation(k, range(6, 13))
    for r in rows:
        # one unmatched offset on each side leaves 2h = eps, up to the tail
        assert r.value == pytest.approx(r.eps, rel=1e-9)
        assert r.continuum == pytest.approx(r.eps, rel=0.05)
    assert fit.slope == pytest.approx(1.0, abs=1e-6)
    assert fit.reliable
    with pytest.raises(ConfigError):
        t1_cancellation(MatrixKernel(ROOT), [6])
    with pytest.raises(ResolutionError):
        t1_cancellation(k, [2])


def test_t1_profile_tracks_log_away_from_edges():
    L = 12
    h = 2.0 ** -L
    v = t1_values(inverse_difference_kernel(), L)
    x = (np.arange(1 << L) + 0.5) * h
    inner = (x > 0.1) & (x < 0.9)
    assert np.abs(v[inner] - np.abs(np.log((1 - x[inner]) / x[inner]))).max() <= 1e-2


def test_weak_boundedness_odd_vanishes():
    rows = weak_boundedness_table(inverse_difference_kernel(), 12, 10)
    assert [r.level for r in rows] == list(range(11))
    assert max(r.value for r in rows) <= 1e-12
    assert rows[-1].cubes == 16
    with pytest.raises(ResolutionError):
        weak_boundedness_table(inverse_difference_kernel(), 8, 7)


@pytest.mark.parametrize("level", [0, 2, 5])
def test_root_pairing_matches_oracle(level):
    A = np.array([[1.0, 2.0], [0.0, 1.0]])
    k = MatrixKernel(ROOT, A)
    P = pairing(k, DyadicCube(level, 0), 12)
    got = np.linalg.norm(P, 2) * 2.0 ** level
    assert got == pytest.approx(root_kernel_pairing_oracle(level, A), rel=1e-9)
    rows = weak_boundedness_table(k, 10, 6)
    for r in rows:
        assert r.value == pytest.approx(root_kernel_pairing_oracle(r.level, A), rel=1e-9)


def test_scalar_regime_is_bounded():
    # Hilbert-transform-like output on unweighted L^2 for Haar functions
    W = identity_weight(2, 16)
    g = weighted_growth(inverse_difference_kernel(np.eye(2)), W, 2.0, range(2, 13), family="haar")
    assert max(g.ratios) < np.pi
    # Haar functions a few cells wide lose part of their output to the 2h truncation
    assert all(b <= a * 1.01 for a, b in zip(g.ratios, g.ratios[1:]))


def test_weighted_growth_is_positive_near_haar_rate():
    W = make_power_weight(0.3, -0.3, 2.0, 18)
    g = weighted_growth(inverse_difference_kernel(), W, 2.0, range(4, 13))
    assert g.fit.slope > 0
    assert abs(g.fit.slope - 0.3) <= 0.25 * 0.3
    assert set(g.witness) <= {0, 1}


def test_weighted_growth_validation():
    W = make_power_weight(0.3, -0.3, 2.0, 10)
    k = inverse_difference_kernel()
    with pytest.raises(ResolutionError):
        weighted_growth(k, W, 2.0, [7])
    with pytest.raises(ConfigError):
        weighted_growth(k, W, 2.0, [4], family="sine")
    with pytest.raises(DimensionError):
        weighted_growth(MatrixKernel(ODD, np.eye(3)), W, 2.0, [4])
