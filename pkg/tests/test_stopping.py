import numpy as np
import pytest

from dyadicw.dyadic import DyadicCube, VectorField, haar_transform
from dyadicw.errors import ResolutionError
from dyadicw.stopping import (
    build_tree,
    decay_csv,
    decay_report,
    delta_projection,
    recipe_constants,
    stopping_children,
)
from dyadicw.weights import identity_weight, make_power_weight, make_rotated_weight

ROOT = DyadicCube.root()


def sqrt_spd(M):
    w, Q = np.linalg.eigh(M)
    return np.einsum("...ij,...j,...kj->...ik", Q, np.sqrt(w), Q)


def p2_reducing_by_cube(W, depth):
    """{(level, k): (m_I W)^{1/2}} from direct cell slices."""
    L = W.resolution
    out = {}
    for j in range(depth + 1):
        blocks = W.cells.reshape(1 << j, 1 << (L - j), 2, 2).mean(axis=1)
        for k, V in enumerate(sqrt_spd(blocks)):
            out[(j, k)] = V
    return out


def brute_stopping_children(V, I, lam, cutoff):
    """Maximal violators below I by checking every descendant and its ancestors."""
    j0, k0 = I
    VIinv = np.linalg.inv(V[I])
    bad = {}
    for r in range(1, cutoff - j0 + 1):
        for k in range((k0 << r), (k0 + 1) << r):
            J = (j0 + r, k)
            a = np.linalg.norm(V[J] @ VIinv, 2) ** 2
            b = np.linalg.norm(np.linalg.inv(V[J]) @ V[I], 2) ** 2
            bad[J] = a > lam or b > lam
    out = set()
    for (j, k), v in bad.items():
        if not v:
            continue
        if not any(bad[(j - s, k >> s)] for s in range(1, j - j0)):
            out.add(DyadicCube(j, k))
    return out


@pytest.fixture(scope="module")
def w03():
    return make_power_weight(0.3, -0.3, 2.0, 16)


@pytest.fixture(scope="module")
def v03(w03):
    return p2_reducing_by_cube(w03, 14)


def test_identity_has_no_stopping_cubes():
    W = identity_weight(2, 10)
    assert len(stopping_children(W, 3.0, ROOT, 1.5, 1.5, 8)) == 0
    tree = build_tree(W, 3.0, ROOT, 1.5, 1.5, cutoff=8)
    assert tree.generations == [[ROOT]]
    assert len(tree.families[1]) == (1 << 9) - 1
    assert all(r.ratio == 0 for r in decay_report(tree, 4)[1:])


def test_huge_thresholds_give_empty_set():
    W = make_power_weight(0.3, -0.3, 2.0, 14)
    assert len(stopping_children(W, 2.0, ROOT, 1e9, 1e9, 12)) == 0
    assert len(build_tree(W, 2.0, ROOT, 1e9, 1e9, cutoff=12).generations) == 1


def test_children_match_exhaustive_scan(w03, v03):
    got = stopping_children(w03, 2.0, ROOT, 4.0, 4.0, 14)
    ref = brute_stopping_children(v03, (0, 0), 4.0, 14)
    assert len(got) > 0
    assert set(got) == ref
    # the singular end of the weight drives the stopping: the leftmost cube of
    # its level is always among the stops
    deepest_left = min(got, key=lambda c: (c.index, c.level))
    assert deepest_left.index == 0


def test_tree_matches_iterated_children(w03, v03):
    cutoff = 14
    tree = build_tree(w03, 2.0, ROOT, 4.0, 4.0, cutoff=cutoff)
    gens = [{ROOT}]
    while True:
        nxt = set()
        for K in gens[-1]:
            if K.level < cutoff:
                nxt |= brute_stopping_children(v03, (K.level, K.index), 4.0, cutoff)
        if not nxt:
            break
        gens.append(nxt)
    assert [set(g) for g in tree.generations] == gens


def test_tree_invariants(w03):
    tree = build_tree(make_rotated_weight(w03, 0.3), 2.0, ROOT, 3.0, 3.0, cutoff=12)
    assert len(tree.generations) > 2
    for g in tree.generations[1:]:
        ivals = sorted((c.start, c.end) for c in g)
        assert all(a[1] <= b[0] for a, b in zip(ivals, ivals[1:]))
    # families partition the subtree
    total = sum(len(f) for f in tree.families)
    assert total == (1 << 13) - 1
    assert len(set().union(*map(set, tree.families))) == total
    measures = [tree.measure(j) for j in range(len(tree.generations))]
    assert all(a > b for a, b in zip(measures, measures[1:]))


def test_good_cube_bound(w03, v03):
    lam = 4.0
    tree = build_tree(w03, 2.0, ROOT, lam, lam, cutoff=14)
    tops = {}
    for j, gen in enumerate(tree.generations):
        for K in gen:
            tops[K] = j
    for j, fam in enumerate(tree.families):
        for J in fam:
            # governing stopping cube: nearest ancestor-or-self in generation j - 1
            K = J
            while not (K in tops and tops[K] == j - 1):
                K = K.parent()
            VJ, VK = v03[(J.level, J.index)], v03[(K.level, K.index)]
            assert np.linalg.norm(VJ @ np.linalg.inv(VK), 2) ** 2 <= lam * (1 + 1e-12)
            assert np.linalg.norm(np.linalg.inv(VJ) @ VK, 2) ** 2 <= lam * (1 + 1e-12)


def test_decay_report_and_csv(w03):
    tree = build_tree(w03, 2.0, ROOT, 4.0, 4.0, cutoff=14)
    rows = decay_report(tree, 8)
    assert len(rows) == 9 and rows[0].ratio == 1.0
    ratios = [r.ratio for r in rows]
    assert all(a >= b for a, b in zip(ratios, ratios[1:]))
    assert rows[-1].truncated
    text = decay_csv(rows)
    assert text.splitlines()[0] == "j,measure,ratio,bound_2_minus_j,truncated"
    assert len(text.splitlines()) == 10


def test_recipe_thresholds_give_decay():
    W = make_power_weight(0.3, -0.3, 2.0, 14)
    c = recipe_constants(W, 2.0, 12)
    assert c.C1 > 0 and c.C2 > 0 and c.lam1 >= 2 and c.lam2 >= 2
    tree = build_tree(W, 2.0, ROOT, c.lam1, c.lam2, cutoff=12)
    assert all(r.ok for r in decay_report(tree, 6) if not r.truncated)
    both = c.pooled(recipe_constants(make_power_weight(0.1, -0.1, 2.0, 14), 2.0, 12))
    assert both.C1 >= c.C1 and both.lam1 >= c.lam1 - 1e-12


def test_validation():
    W = make_power_weight(0.3, -0.3, 2.0, 10)
    with pytest.raises(ValueError):
        stopping_children(W, 2.0, ROOT, 1.0, 4.0, 8)
    with pytest.raises(ResolutionError):
        stopping_children(W, 2.0, DyadicCube(8, 0), 4.0, 4.0, 8)
    tree = build_tree(W, 2.0, ROOT, 4.0, 4.0, cutoff=8)
    with pytest.raises(IndexError):
        delta_projection(tree, VectorField(np.zeros(1 << 9)), len(tree.generations) + 1)


def test_delta_constant_and_identity():
    W = identity_weight(2, 10)
    tree = build_tree(W, 2.0, ROOT, 2.0, 2.0, cutoff=8)
    c = VectorField.constant([1.0, 2.0], 9)
    assert np.allclose(delta_projection(tree, c, 1).samples, 0)
    f = VectorField(np.random.default_rng(0).standard_normal((1 << 9, 2)))
    assert np.allclose(delta_projection(tree, f, 1).samples, f.samples - f.mean(), atol=1e-12)


def test_delta_partition_parseval(w03):
    tree = build_tree(w03, 2.0, ROOT, 4.0, 4.0, cutoff=14)
    L = 15
    f = np.random.default_rng(1).standard_normal((1 << L, 2))
    parts = [delta_projection(tree, VectorField(f), j).samples for j in range(1, len(tree.generations) + 1)]
    recon = sum(parts) + f.mean(axis=0)
    assert np.abs(recon - f).max() <= 1e-10
    energy = sum(np.mean(np.sum(d ** 2, axis=1)) for d in parts)
    ref = np.mean(np.sum((f - f.mean(axis=0)) ** 2, axis=1))
    assert energy == pytest.approx(ref, rel=1e-9)
    # disjoint Haar supports make the pieces orthogonal
    for a in range(len(parts)):
        for b in range(a + 1, len(parts)):
            assert abs(np.mean(np.sum(parts[a] * parts[b], axis=1))) <= 1e-12
    _, c = haar_transform(parts[0])
    assert np.count_nonzero(np.abs(c).sum(axis=1) > 1e-14) <= len(tree.families[1])
