import threading

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from dyadicw.dyadic import DyadicCube, iter_cubes
from dyadicw.errors import AdmissibilityError, ConfigError, ResolutionError
from dyadicw.linalg import half_directions, op_norm, spd_power
from dyadicw.weights import (
    EXACT_P2,
    JOHN,
    MatrixWeight,
    ap_characteristic_integral,
    ap_characteristic_reducing,
    ap_integral_profile,
    ap_profile,
    avg_inverse_root,
    dual_reducing_operator,
    dual_weight,
    identity_weight,
    make_power_weight,
    make_rotated_weight,
    make_scalar_weight,
    power_cell_averages,
    reducing_operator,
    reducing_pair,
    reducing_table,
    weight_from_config,
    weight_power_field,
)

admissible = st.floats(-0.45, 0.45)


def quad_average(gamma, a, b):
    if a == 0:
        val, _ = integrate.quad(lambda x: 1.0, 0, b, weight="alg", wvar=(gamma, 0), epsabs=0, epsrel=1e-13)
    else:
        val, _ = integrate.quad(lambda x: x ** gamma, a, b, epsabs=0, epsrel=1e-13)
    return val / (b - a)


@pytest.mark.parametrize("gamma", [-0.9, -0.3, 0.3, 1.5])
def test_cell_averages_match_quadrature(gamma):
    L = 6
    got = power_cell_averages(gamma, L)
    h = 2.0 ** -L
    ref = np.array([quad_average(gamma, k * h, (k + 1) * h) for k in range(1 << L)])
    assert np.abs(got / ref - 1).max() <= 1e-10


def test_cell_averages_far_from_origin_keep_precision():
    L = 22
    k = (1 << L) - 1
    h = 2.0 ** -L
    got = power_cell_averages(0.3, L)[k]
    assert got == pytest.approx(quad_average(0.3, k * h, 1.0), rel=1e-12)


def test_power_weight_examples():
    W = make_power_weight(0.0, 0.0, 2.0, 5)
    assert np.allclose(W.cells, np.eye(2))
    # x itself is outside the admissible box (-1 < -1 fails) but its cell averages are exact
    assert power_cell_averages(1.0, 1) == pytest.approx([0.25, 0.75], rel=1e-14)


def test_power_weight_admissibility():
    make_power_weight(0.3, -0.3, 2.0, 4)
    with pytest.raises(AdmissibilityError, match="p - 1"):
        make_power_weight(1.2, 0.0, 2.0, 4)
    with pytest.raises(AdmissibilityError, match="-1 <"):
        make_power_weight(0.0, 1.5, 3.0, 4)
    with pytest.raises(ValueError):
        make_power_weight(0.1, 0.1, 1.0, 4)
    with pytest.raises(ResolutionError):
        make_power_weight(0.1, 0.1, 2.0, 25)
    # x^{-1} is not integrable, so w = x is rejected at p = 2
    with pytest.raises(AdmissibilityError):
        make_scalar_weight(1.0, 2.0, 4)


@settings(max_examples=30, deadline=None)
@given(st.floats(1.2, 4.0), st.floats(-2.0, 3.0), st.floats(-2.0, 3.0))
def test_admissibility_box(p, a, b):
    inside = all(-1 < s * g < p - 1 for g in (a, b) for s in (1, -1))
    if inside:
        W = make_power_weight(a, b, p, 3)
        assert np.all(np.linalg.eigvalsh(W.cells) > 0)
    else:
        with pytest.raises(AdmissibilityError):
            make_power_weight(a, b, p, 3)


def test_rotation_examples():
    W = make_power_weight(0.3, -0.2, 2.0, 6)
    assert np.allclose(make_rotated_weight(W, 0.0).cells, W.cells)
    R = make_rotated_weight(W, np.pi / 2).cells
    assert np.allclose(R[:, 0, 0], W.cells[:, 1, 1])
    assert np.allclose(R[:, 1, 1], W.cells[:, 0, 0])
    assert np.allclose(R[:, 0, 1], 0, atol=1e-15)


@settings(max_examples=15, deadline=None)
@given(admissible, admissible, st.floats(0, 2 * np.pi))
def test_rotation_preserves_a2(a, b, theta):
    W = make_power_weight(a, b, 2.0, 10)
    base = ap_characteristic_reducing(W, 2.0, 8)
    rot = ap_characteristic_reducing(make_rotated_weight(W, theta), 2.0, 8)
    assert rot == pytest.approx(base, rel=1e-8)


def test_weight_power_field_examples():
    W = make_power_weight(0.3, -0.4, 2.0, 6)
    assert np.allclose(weight_power_field(W, 1.0).samples, W.cells, rtol=1e-12)
    assert np.allclose(weight_power_field(W, 0.0).samples, np.eye(2))
    half = weight_power_field(W, 0.5).samples
    assert np.allclose(half[:, 0, 0], np.sqrt(W.cells[:, 0, 0]), rtol=1e-12)
    assert np.allclose(half[:, 1, 1], np.sqrt(W.cells[:, 1, 1]), rtol=1e-12)


@settings(max_examples=25, deadline=None)
@given(admissible, admissible, st.floats(0, 3), st.sampled_from([-1.5, -0.5, 0.25, 1 / 3, 2.0]))
def test_power_field_roundtrip(a, b, theta, t):
    W = make_rotated_weight(make_power_weight(a, b, 2.0, 6), theta)
    back = spd_power(weight_power_field(W, t).samples, 1 / t)
    assert np.abs(back - W.cells).max() <= 1e-9 * np.abs(W.cells).max()


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_identity_reducing_operators(p):
    W = identity_weight(2, 8)
    for cube in (DyadicCube.root(), DyadicCube(3, 5), DyadicCube(6, 0)):
        assert np.allclose(reducing_operator(W, cube, p), np.eye(2), atol=1e-8)
        assert np.allclose(dual_reducing_operator(W, cube, p), np.eye(2), atol=1e-8)


def test_p2_reducing_is_root_of_average():
    rng = np.random.default_rng(0)
    G = rng.standard_normal((1 << 6, 2, 2))
    W = MatrixWeight(G @ np.swapaxes(G, 1, 2) + 0.1 * np.eye(2))
    for cube in iter_cubes(4):
        avg = W.cells[cube.cells(6)].mean(axis=0)
        w, Q = np.linalg.eigh(avg)
        ref = (Q * np.sqrt(w)) @ Q.T
        assert np.abs(reducing_operator(W, cube, 2.0) - ref).max() <= 1e-10
        pair = reducing_pair(W, cube, 2.0)
        assert pair.exactness == EXACT_P2
        inv = np.linalg.inv(W.cells[cube.cells(6)]).mean(axis=0)
        w, Q = np.linalg.eigh(inv)
        assert np.abs(pair.V_dual - (Q * np.sqrt(w)) @ Q.T).max() <= 1e-10


def test_scalar_reducing_examples():
    W = make_scalar_weight(1.0, 3.0, 10)
    V = reducing_operator(W, DyadicCube.root(), 3.0)
    assert V[0, 0] == pytest.approx(0.5 ** (1 / 3), rel=1e-12)
    assert V[0, 0] == pytest.approx(0.79370, abs=1e-5)


def test_dual_p2_diagonal():
    W = make_power_weight(0.3, -0.2, 2.0, 8)
    I = DyadicCube(2, 1)
    sl = I.cells(8)
    ref = np.diag(np.sqrt((1 / W.cells[sl][:, [0, 1], [0, 1]]).mean(axis=0)))
    assert np.allclose(dual_reducing_operator(W, I, 2.0), ref, rtol=1e-12, atol=1e-15)


def jensen_gap_constant(terms=10**6):
    """C with sum_k h / avg_k(x^{1/2}) = 2 - C h^{1/2} + o(h^{1/2}), in cell units."""
    k = np.arange(terms, dtype=float)
    exact = 2 * (np.sqrt(k + 1) - np.sqrt(k))
    avg = (2 / 3) * ((k + 1) ** 1.5 - k ** 1.5)
    head = np.sum(exact - 1 / avg)
    # summand ~ k^{-5/2} / 48; add the integral tail
    return head + (2 / 3) * terms ** -1.5 / 48


def test_dual_root_sqrt_weight_discretization():
    # the continuum value sqrt(2) is approached at rate h^{1/2} because the
    # power is taken of cell averages
    C = jensen_gap_constant()
    for L in (12, 16, 20):
        W = make_scalar_weight(0.5, 2.0, L)
        v = dual_reducing_operator(W, DyadicCube.root(), 2.0)[0, 0]
        gap = (np.sqrt(2) - v) / 2.0 ** (-L / 2)
        assert gap == pytest.approx(C / (2 * np.sqrt(2)), rel=2e-3)


def test_avg_inverse_root_examples():
    W = identity_weight(2, 6)
    assert np.allclose(avg_inverse_root(W, DyadicCube(2, 1), 3.0), np.eye(2))
    W = make_scalar_weight(0.5, 2.0, 20)
    assert avg_inverse_root(W, DyadicCube.root(), 2.0)[0, 0] == pytest.approx(4 / 3, rel=1e-5)


@pytest.mark.parametrize("p", [2.0, 3.0])
def test_holder_half_of_inverse_root_equivalence(p):
    W = make_rotated_weight(make_power_weight(0.3, -0.3, p, 12), 0.4)
    E = half_directions(2)
    worst = 0.0
    for cube in iter_cubes(6):
        lhs = np.linalg.norm(E @ avg_inverse_root(W, cube, p).T, axis=1)
        rhs = np.linalg.norm(E @ dual_reducing_operator(W, cube, p).T, axis=1)
        assert np.all(lhs <= (1 + 1e-8) * rhs)
        worst = max(worst, (rhs / lhs).max())
    assert np.isfinite(worst)


def scalar_a2_oracle(gamma, L, depth):
    """Max over dyadic I of (m_I w)(m_I w^{-1}) for cell-averaged x**gamma, by direct loops."""
    h = 2.0 ** -L
    cells = np.array([quad_average(gamma, k * h, (k + 1) * h) for k in range(1 << L)])
    best, arg = 0.0, None
    for j in range(depth + 1):
        per = 1 << (L - j)
        for k in range(1 << j):
            c = cells[k * per:(k + 1) * per]
            v = c.mean() * (1 / c).mean()
            if v > best:
                best, arg = v, (j, k)
    return best, arg


def test_scalar_a2_matches_oracle():
    W = make_scalar_weight(0.5, 2.0, 10)
    ref, arg = scalar_a2_oracle(0.5, 10, 8)
    prof = ap_profile(W, 2.0, 8)
    assert prof.value == pytest.approx(np.sqrt(ref), rel=1e-6)
    assert ap_characteristic_reducing(W, 2.0, 8) == pytest.approx(ref, rel=1e-6)
    # every leftmost interval has the continuum value 4/3; cell averaging
    # lowers the deep ones most, so the maximiser is leftmost and agrees
    assert arg[1] == 0 and prof.argmax == DyadicCube(*arg)
    assert prof.per_level[0] == pytest.approx(prof.value, rel=1e-12)
    # p = 2 and n = 1: the integral form is the same product of averages
    ref6, _ = scalar_a2_oracle(0.5, 10, 6)
    assert ap_characteristic_integral(W, 2.0, 6) == pytest.approx(ref6, rel=1e-6)


def test_diagonal_decoupling():
    # in the continuum x^{0.3} and x^{-0.3} have equal A_2 products; with cell
    # averages they differ slightly and the diagonal weight takes the larger
    D = make_power_weight(0.3, -0.3, 2.0, 10)
    vals = [ap_characteristic_reducing(make_scalar_weight(g, 2.0, 10), 2.0, 8) for g in (0.3, -0.3)]
    assert ap_characteristic_reducing(D, 2.0, 8) == pytest.approx(max(vals), rel=1e-10)
    assert vals[0] == pytest.approx(vals[1], rel=1e-3)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_identity_characteristic_is_one(p):
    W = identity_weight(2, 10)
    prof = ap_profile(W, p, 8)
    assert np.allclose(prof.per_level, 1.0, atol=1e-12)
    assert ap_characteristic_integral(W, p, 6) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=10, deadline=None)
@given(admissible, admissible, st.floats(0, 3), st.sampled_from([1.5, 2.0, 3.0]))
def test_vv_dual_at_least_one_and_monotone(a, b, theta, p):
    a, b = a * min(1, p - 1), b * min(1, p - 1)
    W = make_rotated_weight(make_power_weight(a, b, p, 10), theta)
    Vt = reducing_table(W, p, 8)
    Vd = reducing_table(W, p, 8, dual=True)
    norms = op_norm(np.einsum("kij,kjl->kil", Vt.V, Vd.V))
    assert norms.min() >= 1 - 1e-8
    run = ap_profile(W, p, 8).running
    assert np.all(np.diff(run) >= 0)


def test_p2_john_path_within_sandwich():
    W = make_rotated_weight(make_power_weight(0.3, -0.3, 2.0, 10), 0.7)
    exact = reducing_table(W, 2.0, 6)
    john = reducing_table(W, 2.0, 6, method="john")
    assert john.exactness == JOHN
    E = half_directions(2)
    a = np.linalg.norm(np.einsum("kij,mj->kmi", exact.V, E), axis=2)
    b = np.linalg.norm(np.einsum("kij,mj->kmi", john.V, E), axis=2)
    r = b / a
    assert r.min() >= 1 - 1e-6 and r.max() <= np.sqrt(2) + 1e-6


@pytest.mark.parametrize("p", [2.0, 3.0])
def test_integral_form_within_4_pow_p(p):
    W = make_power_weight(0.3, -0.3, p, 10)
    red = ap_characteristic_reducing(W, p, 6)
    integ = ap_characteristic_integral(W, p, 6)
    assert red / 4 ** p <= integ <= red * 4 ** p
    assert len(ap_integral_profile(W, p, 4)) == 5


def test_dual_weight_examples():
    W = identity_weight(2, 4)
    assert np.allclose(dual_weight(W, 3.0).cells, np.eye(2))
    W = make_power_weight(0.3, -0.2, 2.0, 6)
    assert np.allclose(dual_weight(W, 2.0).cells, np.linalg.inv(W.cells), rtol=1e-12)
    D = dual_weight(make_power_weight(0.3, -0.2, 3.0, 6), 3.0)
    assert D.params["exponents"] == pytest.approx([0.3 * (1 - 1.5), -0.2 * (1 - 1.5)])
    # the dual exponents sit inside the box for p' = 3/2
    for g in D.params["exponents"]:
        assert -1 < g < 0.5 and -1 < -g < 0.5


@pytest.mark.parametrize("p", [1.5, 3.0])
def test_dual_weight_involution_and_operator_swap(p):
    pp = p / (p - 1)
    W = make_rotated_weight(make_power_weight(0.2, -0.3, p, 10), 0.5)
    D = dual_weight(W, p)
    assert np.abs(dual_weight(D, pp).cells - W.cells).max() <= 1e-8
    a = reducing_table(D, pp, 6).V
    b = reducing_table(W, p, 6, dual=True).V
    # same norm evaluated through two power chains; differences come from the fit tolerance
    assert np.abs(a - b).max() <= 1e-5 * np.abs(b).max()
    assert np.isfinite(ap_characteristic_reducing(D, pp, 6))


def test_reducing_depth_guard():
    W = make_power_weight(0.3, -0.3, 3.0, 8)
    with pytest.raises(ResolutionError):
        reducing_operator(W, DyadicCube(7, 0), 3.0)
    with pytest.raises(ResolutionError):
        ap_characteristic_reducing(W, 3.0, 7)
    reducing_operator(W, DyadicCube(6, 0), 3.0)


def test_weight_from_config():
    W = weight_from_config({"family": "rotated_power", "exponents": [0.3, -0.3], "theta": 0.2, "resolution": 5})
    assert W.resolution == 5 and W.sampler_tag == "rotated_power_diag"
    assert weight_from_config({"family": "scalar", "exponents": [0.5]}, L=4).dim == 1
    for bad in ({}, {"family": "spiral"}, {"family": "scalar", "exponents": [0.1, 0.2]},
                {"family": "rotated_power", "exponents": [0.1, 0.1]}):
        with pytest.raises(ConfigError):
            weight_from_config(bad)


def test_memo_is_write_once_under_threads():
    W = make_power_weight(0.3, -0.3, 3.0, 10)
    cube = DyadicCube(4, 3)
    out = [None] * 8

    def work(i):
        out[i] = reducing_operator(W, cube, 3.0)

    threads = [threading.Thread(target=work, args=(i,)) for i in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    for V in out[1:]:
        assert np.allclose(V, out[0], rtol=1e-12)
