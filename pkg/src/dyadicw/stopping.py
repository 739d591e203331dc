"""Stopping-time decomposition driven by reducing-operator ratios.

For a cube ``K`` the stopping children are the maximal ``J`` strictly inside
``K`` with ``||V_J V_K^{-1}||^p > lam1`` or ``||V_J^{-1} V_K||^{p'} > lam2``.
Iterating from a root gives generations of stopping cubes; the cubes governed
by a generation-``(j-1)`` cube (not inside any generation-``j`` cube) form the
family ``F^j``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .dyadic import DyadicCube, VectorField, haar_transform, inverse_haar, level_slice
from .errors import ResolutionError
from .linalg import op_norm
from .weights import MatrixWeight, ap_characteristic_reducing, conjugate_exponent, reducing_table


def _subtree_flat(root: DyadicCube, rel_depth: int) -> np.ndarray:
    """Absolute level-ordered indices of ``root``'s descendants, level-ordered locally."""
    out = []
    for r in range(rel_depth + 1):
        lev = root.level + r
        out.append((1 << lev) - 1 + (root.index << r) + np.arange(1 << r))
    return np.concatenate(out)


def _local_level(r: int) -> slice:
    return level_slice(r)


def _ratios(V: np.ndarray, Vinv: np.ndarray, J: np.ndarray, K: np.ndarray, p: float) -> tuple[np.ndarray, np.ndarray]:
    pp = conjugate_exponent(p)
    r1 = np.asarray(op_norm(np.einsum("kij,kjl->kil", V[J], Vinv[K]))) ** p
    r2 = np.asarray(op_norm(np.einsum("kij,kjl->kil", Vinv[J], V[K]))) ** pp
    return r1, r2


@dataclass(frozen=True)
class _Ops:
    V: np.ndarray  # local level-ordered V for the subtree
    Vinv: np.ndarray
    flat: np.ndarray  # local -> absolute flat index


def _subtree_ops(W: MatrixWeight, p: float, root: DyadicCube, cutoff: int) -> _Ops:
    if cutoff <= root.level:
        raise ResolutionError(f"cutoff {cutoff} must exceed the root level {root.level}")
    table = reducing_table(W, p, cutoff)
    flat = _subtree_flat(root, cutoff - root.level)

    def build():
        return np.linalg.inv(table.V)

    Vinv_all = W.memo(("Vinv", float(p), table.exactness, cutoff), build)
    return _Ops(table.V[flat], Vinv_all[flat], flat)


class StopSet(frozenset):
    """Frozen set of stopping cubes carrying a truncation flag."""

    truncated: bool = False

    def __new__(cls, cubes=(), truncated: bool = False):
        obj = super().__new__(cls, cubes)
        obj.truncated = bool(truncated)
        return obj


def _check_thresholds(lam1: float, lam2: float) -> None:
    if not (lam1 > 1 and lam2 > 1):
        raise ValueError(f"thresholds must exceed 1, got {lam1}, {lam2}")


def stopping_children(W: MatrixWeight, p: float, I: DyadicCube, lam1: float, lam2: float, cutoff: int) -> StopSet:
    """Maximal ``J`` strictly inside ``I`` (level <= cutoff) violating either threshold.

    The result's ``truncated`` flag is set when an unstopped descendant sits
    at the cutoff level, i.e. deeper stopping cubes may have been missed.
    """
    _check_thresholds(lam1, lam2)
    if I.level >= cutoff:
        raise ResolutionError(f"cube level {I.level} must be below the cutoff {cutoff}")
    ops = _subtree_ops(W, p, I, cutoff)
    R = cutoff - I.level
    alive = np.ones(1, dtype=bool)
    found: list[DyadicCube] = []
    for r in range(1, R + 1):
        sl = _local_level(r)
        J = np.arange(sl.start, sl.stop)
        par_alive = np.repeat(alive, 2)
        r1, r2 = _ratios(ops.V, ops.Vinv, J, np.zeros_like(J), p)
        stop = par_alive & ((r1 > lam1) | (r2 > lam2))
        for k in np.nonzero(stop)[0]:
            found.append(DyadicCube(I.level + r, (I.index << r) + int(k)))
        alive = par_alive & ~stop
    return StopSet(found, truncated=bool(alive.any()))


@dataclass(frozen=True, eq=False)
class StoppingTree:
    """Stopping generations and families of a root cube down to ``cutoff``.

    Attributes
    ----------
    generations : list of list of DyadicCube
        ``generations[0] == [root]``; ``generations[j]`` are the stopping cubes
        of generation ``j``.
    family_index : ndarray
        For every descendant of the root (local level order, level <= cutoff)
        the ``j`` with the cube in ``F^j``.
    truncated : list of bool
        ``truncated[j]`` is True when generation ``j`` may be incomplete: some
        cube of generation ``j`` sits at the cutoff, or some cube of generation
        ``j - 1`` has no more levels below it (before the cutoff) than the
        largest parent-to-child level gap observed anywhere in the tree, or
        generation ``j - 1`` is itself flagged.
    """

    root: DyadicCube
    lam1: float
    lam2: float
    p: float
    cutoff: int
    generations: list
    family_index: np.ndarray
    truncated: list
    _families: dict = field(default_factory=dict, repr=False)

    @property
    def depth(self) -> int:
        return self.cutoff - self.root.level

    def cube(self, local: int) -> DyadicCube:
        r = int(np.floor(np.log2(local + 1)))
        k = local - ((1 << r) - 1)
        return DyadicCube(self.root.level + r, (self.root.index << r) + k)

    def family_members(self, j: int) -> np.ndarray:
        """Local indices of ``F^j``."""
        return np.nonzero(self.family_index == j)[0]

    @property
    def families(self) -> list:
        """``families[j]`` lists the cubes of ``F^j`` (``families[0]`` is empty)."""
        if "all" not in self._families:
            count = int(self.family_index.max()) + 1 if self.family_index.size else 1
            fams = [[] for _ in range(max(count, len(self.generations) + 1))]
            for local, j in enumerate(self.family_index):
                fams[int(j)].append(self.cube(local))
            self._families["all"] = fams
        return self._families["all"]

    def measure(self, j: int) -> float:
        """``|union of generation j| / |root|``."""
        return float(sum(2.0 ** -(c.level - self.root.level) for c in self.generations[j]))


def build_tree(W: MatrixWeight, p: float, root: DyadicCube, lam1: float, lam2: float,
               max_generation: int = 64, cutoff: int | None = None) -> StoppingTree:
    """Build all stopping generations below ``root`` down to ``cutoff``.

    One top-down sweep: each cube ``J`` compares itself with the stopping cube
    ``K`` governing its parent and either becomes a stopping cube of the next
    generation or inherits ``K``.
    """
    _check_thresholds(lam1, lam2)
    if cutoff is None:
        cutoff = W.resolution - 2
    ops = _subtree_ops(W, p, root, cutoff)
    R = cutoff - root.level
    count = (1 << (R + 1)) - 1
    top = np.empty(count, dtype=np.int64)
    gen = np.empty(count, dtype=np.int64)  # generation of top[...]
    top[0] = 0
    gen[0] = 0
    gap = 0
    for r in range(1, R + 1):
        sl = _local_level(r)
        J = np.arange(sl.start, sl.stop)
        par = (J - 1) // 2
        K = top[par]
        gK = gen[par]
        r1, r2 = _ratios(ops.V, ops.Vinv, J, K, p)
        stop = ((r1 > lam1) | (r2 > lam2)) & (gK < max_generation)
        top[J] = np.where(stop, J, K)
        gen[J] = np.where(stop, gK + 1, gK)
        if stop.any():
            gap = max(gap, r - int(np.floor(np.log2(K[stop].min() + 1))))
    family = gen + 1
    is_stop = top == np.arange(count)
    is_stop[0] = False
    gmax = int(gen.max())
    generations = [[root]] + [[] for _ in range(gmax)]
    for local in np.nonzero(is_stop)[0]:
        r = int(np.floor(np.log2(local + 1)))
        k = int(local) - ((1 << r) - 1)
        generations[int(gen[local])].append(DyadicCube(root.level + r, (root.index << r) + k))
    truncated = [False]
    for j in range(1, gmax + 2):
        parents = generations[j - 1]
        short = any(cutoff - c.level <= gap for c in parents)
        at_cut = j < len(generations) and any(c.level == cutoff for c in generations[j])
        truncated.append(bool(short or at_cut or truncated[-1]))
    return StoppingTree(root, float(lam1), float(lam2), float(p), int(cutoff), generations, family, truncated)


# ---------------------------------------------------------------------------
# reports and projections


@dataclass(frozen=True)
class DecayRow:
    j: int
    measure: float
    ratio: float
    bound_2_minus_j: float
    truncated: bool

    @property
    def ok(self) -> bool:
        return self.ratio <= self.bound_2_minus_j


def decay_report(tree: StoppingTree, jmax: int | None = None) -> list[DecayRow]:
    """``|union J^j| / |root|`` per generation with the ``2^-j`` reference.

    Rows run to ``jmax`` when given (empty generations have ratio 0); flags
    past the last stored one repeat it.
    """
    root_len = tree.root.length
    last = len(tree.generations) - 1 if jmax is None else max(jmax, len(tree.generations) - 1)
    rows = []
    for j in range(last + 1):
        ratio = tree.measure(j) if j < len(tree.generations) else 0.0
        trunc = tree.truncated[min(j, len(tree.truncated) - 1)]
        rows.append(DecayRow(j, ratio * root_len, ratio, 2.0 ** -j, trunc))
    return rows


def decay_csv(rows: list[DecayRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["j", "measure", "ratio", "bound_2_minus_j", "truncated"])
    for r in rows:
        w.writerow([r.j, repr(r.measure), repr(r.ratio), repr(r.bound_2_minus_j), int(r.truncated)])
    return buf.getvalue()


def delta_projection(tree: StoppingTree, f: VectorField, j: int) -> VectorField:
    """``Delta_j f = sum_{I in F^j} f_I h_I``."""
    if not 1 <= j <= len(tree.generations):
        raise IndexError(f"generation {j} outside the built range")
    L = f.resolution
    if tree.root.level >= L:
        raise ResolutionError("field resolution must exceed the root level")
    mean, coeffs = haar_transform(f.samples)
    R = min(tree.depth, L - 1 - tree.root.level)
    keep = np.zeros(coeffs.shape[0], dtype=bool)
    members = tree.family_members(j)
    members = members[members < (1 << (R + 1)) - 1]
    keep[_subtree_flat(tree.root, R)[members]] = True
    masked = np.where(keep.reshape((-1,) + (1,) * (coeffs.ndim - 1)), coeffs, 0.0)
    return VectorField(inverse_haar(np.zeros_like(mean), masked, L))


# ---------------------------------------------------------------------------
# threshold recipe


@dataclass(frozen=True)
class RecipeConstants:
    """Measured constants behind the stopping thresholds.

    ``C1`` is ``max_I sup_{lam>1} lam |G_lam(I)| / int_I ||W^{1/p} V_I^{-1}||^p``
    where ``G_lam(I)`` are the maximal ``J`` strictly inside ``I`` with
    ``||V_J V_I^{-1}||^p > lam``; ``K1`` is
    ``max_I |I|^{-1} int_I ||W^{1/p} V_I^{-1}||^p``.  ``C2``, ``K2`` are the
    analogues for ``||V_J^{-1} V_I||^{p'}`` and ``||W^{-1/p} V_I||^{p'}``.
    """

    p: float
    cutoff: int
    C1: float
    K1: float
    C2: float
    K2: float
    ap: float
    safety: float = 4.0

    @property
    def C2_prime(self) -> float:
        return self.C2 * self.K2 / self.ap ** (conjugate_exponent(self.p) / self.p)

    @property
    def lam1(self) -> float:
        return max(self.safety * self.C1 * self.K1, 2.0)

    @property
    def lam2(self) -> float:
        return max(self.safety * self.C2_prime * self.ap ** (conjugate_exponent(self.p) / self.p), 2.0)

    def pooled(self, other: "RecipeConstants") -> "RecipeConstants":
        """Constants valid for both measurements (entrywise maxima)."""
        return RecipeConstants(self.p, max(self.cutoff, other.cutoff), max(self.C1, other.C1), max(self.K1, other.K1),
                               max(self.C2, other.C2), max(self.K2, other.K2), max(self.ap, other.ap), self.safety)


def _cell_integrals(F: np.ndarray, V: np.ndarray, q: float, level: int, chunk: int = 1 << 16) -> np.ndarray:
    # per level-`level` cube I: |I|^{-1} int_I ||F(x) V_I||^q over the cells of F
    nc = 1 << level
    per = F.shape[0] // nc
    out = np.empty(nc)
    rows = max(1, chunk // per)
    for s in range(0, nc, rows):
        e = min(nc, s + rows)
        prod = np.einsum("qcij,qjk->qcik", F[s * per:e * per].reshape(e - s, per, *F.shape[1:]), V[s:e])
        out[s:e] = (np.asarray(op_norm(prod)) ** q).mean(axis=1)
    return out


def _sup_level_measure(ratios: np.ndarray, cells_per: int, cell_len: float) -> np.ndarray:
    # ratios: (nI, cells) running maxima; returns per-I sup_{lam>1} lam |{r > lam}|
    srt = -np.sort(-ratios, axis=1)
    k = np.arange(1, srt.shape[1] + 1) * cell_len
    val = np.where(srt > 1.0, srt * k, 0.0)
    return val.max(axis=1)


def recipe_constants(W: MatrixWeight, p: float, cutoff: int, safety: float = 4.0) -> RecipeConstants:
    """Measure the threshold constants over every cube with level < cutoff."""
    pp = conjugate_exponent(p)
    table = reducing_table(W, p, cutoff)
    V = table.V
    Vinv = np.linalg.inv(V)
    Fp = np.asarray(W.power(1.0 / p))
    Fm = np.asarray(W.power(-1.0 / p))
    C1 = K1 = C2 = K2 = 0.0
    for i in range(cutoff):
        sl = level_slice(i)
        nI = 1 << i
        width = 1 << (cutoff - i)
        run1 = np.zeros((nI, 1))
        run2 = np.zeros((nI, 1))
        for s in range(i + 1, cutoff + 1):
            ss = level_slice(s)
            anc = np.repeat(np.arange(sl.start, sl.stop), 1 << (s - i))
            Jidx = np.arange(ss.start, ss.stop)
            r1 = np.asarray(op_norm(np.einsum("kij,kjl->kil", V[Jidx], Vinv[anc]))) ** p
            r2 = np.asarray(op_norm(np.einsum("kij,kjl->kil", Vinv[Jidx], V[anc]))) ** pp
            run1 = np.maximum(np.repeat(run1, 2, axis=1), r1.reshape(nI, -1))
            run2 = np.maximum(np.repeat(run2, 2, axis=1), r2.reshape(nI, -1))
        assert run1.shape[1] == width
        cell_len = 2.0 ** -cutoff
        sup1 = _sup_level_measure(run1, width, cell_len)
        sup2 = _sup_level_measure(run2, width, cell_len)
        avg1 = _cell_integrals(Fp, Vinv[sl], p, i)
        avg2 = _cell_integrals(Fm, V[sl], pp, i)
        length = 2.0 ** -i
        C1 = max(C1, float((sup1 / (avg1 * length)).max()))
        C2 = max(C2, float((sup2 / (avg2 * length)).max()))
        K1 = max(K1, float(avg1.max()))
        K2 = max(K2, float(avg2.max()))
    ap = ap_characteristic_reducing(W, p, cutoff)
    return RecipeConstants(float(p), int(cutoff), C1, K1, C2, K2, ap, safety)


def recipe_thresholds(W: MatrixWeight, p: float, cutoff: int, safety: float = 4.0) -> tuple[float, float]:
    """``(lam1, lam2)`` from measured constants with the given safety factor."""
    c = recipe_constants(W, p, cutoff, safety)
    return c.lam1, c.lam2


def smallest_working_scale(W: MatrixWeight, p: float, root: DyadicCube, lam1: float, lam2: float, cutoff: int,
                           jmax: int, steps: int = 24) -> float:
    """Smallest ``s`` in ``(0, 1]`` (bisection) for which ``(s lam1, s lam2)`` still decays like ``2^-j``.

    Thresholds are clipped below at ``1 + 1e-9``.  Returns ``inf`` if even the
    unscaled thresholds fail.
    """
    def passes(s):
        t = build_tree(W, p, root, max(s * lam1, 1 + 1e-9), max(s * lam2, 1 + 1e-9), cutoff=cutoff)
        return all(r.ok for r in decay_report(t, jmax) if r.j <= jmax)

    if not passes(1.0):
        return float("inf")
    lo, hi = 0.0, 1.0
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        if passes(mid):
            hi = mid
        else:
            lo = mid
    return hi
