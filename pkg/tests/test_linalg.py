import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dyadicw.errors import NotSPDError
from dyadicw.linalg import (
    NormBallSample,
    check_spd,
    det_norm_bound_check,
    john_batch,
    john_ellipsoid,
    john_fit,
    khachiyan_mvee,
    mvee,
    op_norm,
    sample_norm_ball,
    sphere_directions,
    spd_power,
    sym_eig,
)

seeds = st.integers(0, 2**32 - 1)


def random_spd(rng, n, cond=50.0):
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    w = np.exp(rng.uniform(0, np.log(cond), n))
    return (Q * w) @ Q.T


def test_spd_power_examples():
    assert np.allclose(spd_power(np.eye(3), 0.37), np.eye(3))
    assert np.allclose(spd_power(np.diag([4.0, 9.0]), 0.5), np.diag([2.0, 3.0]), atol=1e-14)
    M = random_spd(np.random.default_rng(0), 3)
    R = spd_power(M, 1 / 3)
    assert np.abs(R @ R @ R - M).max() <= 1e-9 * np.abs(M).max()
    assert np.array_equal(spd_power(M, 1), M)


@settings(max_examples=60, deadline=None)
@given(seeds, st.integers(1, 4), st.floats(-2, 2), st.floats(-2, 2))
def test_spd_power_group_law(seed, n, s, t):
    M = random_spd(np.random.default_rng(seed), n)
    lhs = spd_power(M, s + t)
    rhs = spd_power(M, s) @ spd_power(M, t)
    assert np.abs(lhs - rhs).max() <= 1e-9 * np.abs(lhs).max()


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(1, 4), st.floats(0.2, 3))
def test_spd_power_inverse_composition(seed, n, t):
    M = random_spd(np.random.default_rng(seed), n)
    back = spd_power(spd_power(M, t), 1 / t)
    assert np.abs(back - M).max() <= 1e-9 * np.abs(M).max()


def test_spd_validation():
    with pytest.raises(NotSPDError):
        check_spd(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(NotSPDError):
        spd_power(np.diag([1.0, -1.0]), 0.5)
    with pytest.raises(NotSPDError):
        check_spd(np.ones((2, 3)))


def test_sym_eig_matches_lapack():
    rng = np.random.default_rng(1)
    A = np.array([random_spd(rng, 3) for _ in range(20)])
    w, Q = sym_eig(A)
    assert np.allclose(w, np.linalg.eigvalsh(A), rtol=1e-12)
    assert np.allclose(np.einsum("bij,bj,bkj->bik", Q, w, Q), A, atol=1e-11)


def test_op_norm_examples():
    assert op_norm(np.eye(2)) == pytest.approx(1.0)
    assert op_norm(np.array([[0.0, 1.0], [1.0, 0.0]])) == pytest.approx(1.0)
    assert op_norm(np.diag([-3.0, 2.0])) == pytest.approx(3.0)


@given(seeds, st.sampled_from([2, 3]))
def test_op_norm_submultiplicative_and_unitary(seed, n):
    rng = np.random.default_rng(seed)
    A, B = rng.standard_normal((2, n, n))
    assert op_norm(A @ B) <= op_norm(A) * op_norm(B) * (1 + 1e-12)
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    assert op_norm(Q @ A) == pytest.approx(op_norm(A), rel=1e-12)


def test_det_norm_examples():
    assert det_norm_bound_check(np.eye(2), 1.0)
    assert det_norm_bound_check(np.diag([1.0, 2.0]), 2.0)
    assert not det_norm_bound_check(np.diag([1.0, 3.0]), 2.0)
    with pytest.raises(ValueError):
        det_norm_bound_check(np.eye(2), -1.0)


def expanding_matrices(rng, count):
    """Matrices with every singular value >= 1, paired with delta = |det A|."""
    for _ in range(count):
        n = int(rng.integers(1, 5))
        U, _ = np.linalg.qr(rng.standard_normal((n, n)))
        V, _ = np.linalg.qr(rng.standard_normal((n, n)))
        s = 1.0 + rng.exponential(1.0, n) * (rng.random(n) < 0.7)
        A = (U * s) @ V.T
        yield A, abs(np.linalg.det(A))


def test_det_norm_randomized_1000():
    rng = np.random.default_rng(2)
    assert all(det_norm_bound_check(A, d) for A, d in expanding_matrices(rng, 1000))


@settings(max_examples=200)
@given(seeds)
def test_det_norm_property(seed):
    for A, d in expanding_matrices(np.random.default_rng(seed), 5):
        assert det_norm_bound_check(A, d)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_sphere_directions(n):
    E = sphere_directions(n, 64)
    assert np.allclose(np.linalg.norm(E, axis=1), 1.0, atol=1e-12)
    # closed under negation
    for e in E:
        assert np.min(np.linalg.norm(E + e, axis=1)) <= 1e-12


def test_norm_ball_validation():
    with pytest.raises(ValueError):
        NormBallSample(2, np.array([[1.0, 0.0]]), np.array([0.0]))
    with pytest.raises(ValueError):
        NormBallSample(2, np.array([[2.0, 0.0]]), np.array([1.0]))
    with pytest.raises(ValueError):
        sample_norm_ball(lambda E: np.where(E[:, 0] > 0.99, 0.0, 1.0), 2, 16)


def test_john_euclidean_and_ellipsoidal():
    V = john_ellipsoid(lambda E: np.linalg.norm(E, axis=1), 2)
    assert np.abs(V - np.sqrt(2) * np.eye(2)).max() <= 0.02 * np.sqrt(2)
    D = np.diag([2.0, 3.0])
    V = john_ellipsoid(lambda E: np.linalg.norm(E @ D.T, axis=1), 2)
    assert np.abs(V / np.sqrt(2) - D).max() <= 0.02 * 3


def test_john_scalar_is_exact():
    fit = john_fit(lambda E: 1.7 * np.abs(E[:, 0]), 1)
    assert fit.V_tight[0, 0] == pytest.approx(1.7, rel=1e-12)


@pytest.mark.parametrize("q", [1.0, 1.5, 4.0, np.inf])
@pytest.mark.parametrize("n", [2, 3])
def test_john_sandwich(q, n):
    rng = np.random.default_rng(3)
    A = np.eye(n) + 0.3 * rng.standard_normal((n, n))

    def rho(E):
        return np.linalg.norm(E @ A.T, ord=q, axis=1)

    fit = john_fit(rho, n, m=256 if n == 2 else 400)
    E = fit.sample.directions
    r = rho(E)
    for V in (fit.V_tight, fit.V):
        ratio = np.linalg.norm(E @ V.T, axis=1) / r
        assert ratio.min() >= 1 - 1e-6
        assert ratio.max() <= np.sqrt(n) + 0.05


def test_john_needs_enough_directions():
    with pytest.raises(ValueError):
        john_fit(lambda E: np.linalg.norm(E, axis=1), 3, m=16)


@settings(max_examples=15, deadline=None)
@given(seeds, st.sampled_from([2, 3]))
def test_barrier_mvee_matches_khachiyan(seed, n):
    rng = np.random.default_rng(seed)
    pts = rng.standard_normal((40, n)) * rng.uniform(0.3, 3.0, n)
    a = mvee(pts, tol=1e-9)
    b = khachiyan_mvee(pts, tol=1e-9)
    # same ellipsoid: equal shape matrices U^T U
    Sa, Sb = a.U.T @ a.U, b.U.T @ b.U
    assert np.abs(Sa - Sb).max() <= 1e-3 * np.abs(Sb).max()
    for fit in (a, b):
        assert np.linalg.norm(pts @ fit.U.T, axis=1).max() <= 1 + 1e-9


def test_khachiyan_away_step_keeps_weights_valid():
    # many interior points force away steps with y^T X^{-1} y < 1
    rng = np.random.default_rng(7)
    pts = np.vstack([np.diag([3.0, 0.5]), 0.05 * rng.standard_normal((60, 2))])
    fit = khachiyan_mvee(pts, tol=1e-10)
    assert np.allclose(fit.U.T @ fit.U, np.diag([1 / 9, 4.0]), rtol=1e-8)


def test_mvee_unknown_method():
    with pytest.raises(ValueError):
        mvee(np.eye(2), method="nope")


def test_john_batch_agrees_with_single_fits():
    rng = np.random.default_rng(4)
    E = sphere_directions(2, 256)[:128]
    mats = [np.eye(2) + 0.4 * rng.standard_normal((2, 2)) for _ in range(5)]
    vals = np.array([np.linalg.norm(E @ M.T, ord=3, axis=1) for M in mats])
    Vb, ratio, _ = john_batch(vals, E)
    for i, M in enumerate(mats):
        single = john_fit(lambda D: np.linalg.norm(D @ M.T, ord=3, axis=1), 2).V_tight
        assert np.allclose(Vb[i], single, rtol=1e-4, atol=1e-6)
    assert np.all((ratio >= 1) & (ratio <= np.sqrt(2) + 0.05))
