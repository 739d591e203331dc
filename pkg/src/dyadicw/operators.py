"""Dyadic operators on piecewise-constant vector fields.

Paraproducts, Haar multipliers, constant weighted multipliers, the embedding
operator ``Pi_A``, weighted norms, and empirical operator-norm estimation.
All operators act on :class:`~dyadicw.dyadic.VectorField` values and return
fields at the input resolution.
"""

from __future__ import annotations

from collections.abc import Callable, Mapping
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import LinearOperator, svds

from .dyadic import (
    DyadicCube,
    MatrixSymbol,
    VectorField,
    all_means,
    haar_transform,
    inverse_haar,
    level_means,
    level_slice,
    lp_norm,
    n_cubes,
    square_function,
)
from .errors import DimensionError, NonlinearityError, ResolutionError
from .weights import MatrixWeight, conjugate_exponent, reducing_table


# ---------------------------------------------------------------------------
# matrix sequences


@dataclass(frozen=True, eq=False)
class MatrixSequence:
    """Matrices ``A_I`` for every cube with level <= max_level (zero elsewhere).

    ``coeffs`` is level-ordered with shape ``(2**(max_level+1) - 1, n, n)``.
    """

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if c.ndim != 3 or c.shape[1] != c.shape[2]:
            raise DimensionError(f"coefficients must be (cubes, n, n), got {c.shape}")
        D = int(np.log2(c.shape[0] + 1))
        if (1 << D) - 1 != c.shape[0]:
            raise ValueError("coefficient count must be 2**(max_level+1) - 1")
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    @property
    def dim(self) -> int:
        return self.coeffs.shape[1]

    @property
    def max_level(self) -> int:
        return int(np.log2(self.coeffs.shape[0] + 1)) - 1

    @classmethod
    def zeros(cls, n: int, max_level: int) -> "MatrixSequence":
        return cls(np.zeros((n_cubes(max_level), n, n)))

    @classmethod
    def constant(cls, M, max_level: int) -> "MatrixSequence":
        M = np.atleast_2d(np.asarray(M, dtype=float))
        return cls(np.broadcast_to(M, (n_cubes(max_level),) + M.shape))

    @classmethod
    def from_mapping(cls, entries: Mapping[DyadicCube, np.ndarray], n: int, max_level: int | None = None) -> "MatrixSequence":
        if max_level is None:
            max_level = max((c.level for c in entries), default=0)
        out = np.zeros((n_cubes(max_level), n, n))
        for cube, M in entries.items():
            if cube.level > max_level:
                raise ResolutionError(f"cube {cube} beyond max_level {max_level}")
            out[cube.flat] = M
        return cls(out)

    def at(self, cube: DyadicCube) -> np.ndarray:
        if cube.level > self.max_level:
            return np.zeros((self.dim, self.dim))
        return self.coeffs[cube.flat]

    def levels(self, count: int) -> np.ndarray:
        """Level-ordered coefficients for levels < count, zero-padded."""
        need = (1 << count) - 1
        if need <= self.coeffs.shape[0]:
            return self.coeffs[:need]
        out = np.zeros((need, self.dim, self.dim))
        out[: self.coeffs.shape[0]] = self.coeffs
        return out

    def truncate(self, depth: int) -> "MatrixSequence":
        """Entries on levels <= depth only."""
        return MatrixSequence(self.levels(depth + 1))

    def scale(self, sigma) -> "MatrixSequence":
        """Multiply by a scalar or by one scalar per cube."""
        s = np.asarray(sigma, dtype=float)
        if s.ndim == 1:
            s = s[:, None, None]
        return MatrixSequence(self.coeffs * s)

    def compose(self, other: "MatrixSequence") -> "MatrixSequence":
        """Cubewise product ``A_I A'_I``."""
        D = max(self.max_level, other.max_level) + 1
        return MatrixSequence(np.einsum("kij,kjl->kil", self.levels(D), other.levels(D)))

    def adjoint(self) -> "MatrixSequence":
        return MatrixSequence(np.swapaxes(self.coeffs, 1, 2))


def random_sequence(n: int, max_level: int, seed: int, scale: float = 1.0) -> MatrixSequence:
    """Carleson-normalized Gaussian sequence ``A_I = scale |I|^{1/2} G_I``.

    Each cube draws from its own child seed, so truncating to a smaller depth
    keeps the remaining entries unchanged.
    """
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    G = rng.standard_normal((n_cubes(max_level), n, n))
    lengths = np.concatenate([np.full(1 << j, 2.0 ** (-0.5 * j)) for j in range(max_level + 1)])
    return MatrixSequence(scale * G * lengths[:, None, None])


def weighted_random_sequence(W: MatrixWeight, p: float, max_level: int, seed: int,
                             scale: float = 1.0) -> MatrixSequence:
    """Gaussian sequence adapted to ``W``: ``A_I = scale |I|^{1/2} V_I^{-1} G_I V_I``.

    ``V_I A_I V_I^{-1}`` is then a plain Carleson-normalized Gaussian, so the
    weighted conditions stay of order one at every depth. The draws ``G_I``
    coincide with :func:`random_sequence` for the same seed.
    """
    V = reducing_table(W, p, max_level).V
    G = random_sequence(W.dim, max_level, seed, scale).coeffs
    return MatrixSequence(np.linalg.solve(V, G @ V))


# ---------------------------------------------------------------------------
# operators


def _check_dim(n_op: int, f: VectorField) -> None:
    if n_op != f.dim:
        raise DimensionError(f"operator acts on dimension {n_op}, field has dimension {f.dim}")


def _synth(coeffs: np.ndarray, L: int, n: int) -> VectorField:
    return VectorField(inverse_haar(np.zeros(n), coeffs, L))


def paraproduct_apply(B: MatrixSymbol, f: VectorField) -> VectorField:
    """``pi_B f = sum_I B_I (m_I f) h_I`` over levels below the resolution."""
    _check_dim(B.dim, f)
    if B.resolution != f.resolution:
        raise ResolutionError(f"symbol resolution {B.resolution} differs from field resolution {f.resolution}")
    L = f.resolution
    _, Bc = haar_transform(B.samples)
    means = all_means(f.samples, L - 1) if L else np.zeros((0, f.dim))
    return _synth(np.einsum("kij,kj->ki", Bc, means), L, f.dim)


def haar_multiplier_apply(A: MatrixSequence, f: VectorField) -> VectorField:
    """``T_A f = sum_I A_I f_I h_I``."""
    _check_dim(A.dim, f)
    L = f.resolution
    _, c = haar_transform(f.samples)
    return _synth(np.einsum("kij,kj->ki", A.levels(L), c), L, f.dim)


def _table_for(W: MatrixWeight, p: float, L: int, dual: bool = False):
    if L == 0:
        return np.zeros((0, W.dim, W.dim))
    return reducing_table(W, p, L - 1, dual=dual).V


def constant_multiplier(W: MatrixWeight, p: float, f: VectorField, mode: str = "V") -> VectorField:
    """Haar-diagonal multiplier by ``V_I``, ``V_I^{-1}`` or ``V_I'``.

    ``mode`` is one of ``"V"``, ``"V_inverse"``, ``"V_dual"``.
    """
    _check_dim(W.dim, f)
    L = f.resolution
    if mode == "V":
        M = _table_for(W, p, L)
    elif mode == "V_inverse":
        M = np.linalg.inv(_table_for(W, p, L)) if L else np.zeros((0, W.dim, W.dim))
    elif mode == "V_dual":
        M = _table_for(W, p, L, dual=True)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    _, c = haar_transform(f.samples)
    return _synth(np.einsum("kij,kj->ki", M, c), L, f.dim)


def _weight_cells(W: MatrixWeight, t: float, L: int) -> np.ndarray:
    """``W^t`` on the common grid ``max(L, W.resolution)``."""
    P = np.asarray(W.power(t))
    if L > W.resolution:
        P = np.repeat(P, 1 << (L - W.resolution), axis=0)
    return P


def _apply_cells(P: np.ndarray, f: VectorField) -> np.ndarray:
    Lc = int(np.log2(P.shape[0]))
    g = f.refine(Lc).samples if Lc > f.resolution else f.samples
    return np.einsum("cij,cj->ci", P, g)


def embedding_operator_apply(A: MatrixSequence, W: MatrixWeight, p: float, f: VectorField) -> VectorField:
    """``Pi_A f = sum_I V_I A_I m_I(W^{-1/p} f) h_I`` at the resolution of ``f``.

    The product ``W^{-1/p} f`` is formed on the finer of the two grids, so
    averages are exact for a weight finer than ``f``.
    """
    _check_dim(A.dim, f)
    _check_dim(W.dim, f)
    L = f.resolution
    if L == 0:
        return VectorField(np.zeros((1, f.dim)))
    g = _apply_cells(_weight_cells(W, -1.0 / p, L), f)
    m = all_means(g, L - 1)
    V = _table_for(W, p, L)
    c = np.einsum("kij,kjl,kl->ki", V, A.levels(L), m)
    return _synth(c, L, f.dim)


def embedding_operator_adjoint(A: MatrixSequence, W: MatrixWeight, p: float, g: VectorField) -> VectorField:
    """L^2 adjoint ``W^{-1/p} sum_I A_I^* V_I g_I chi_I / |I|``, returned at the resolution of ``g``."""
    _check_dim(A.dim, g)
    L = g.resolution
    n = g.dim
    if L == 0:
        return VectorField(np.zeros((1, n)))
    _, c = haar_transform(g.samples)
    V = _table_for(W, p, L)
    d = np.einsum("kji,kjl,kl->ki", A.levels(L), V, c)
    acc = np.zeros((1 << L, n))
    for j in range(L):
        acc += np.repeat(d[level_slice(j)] * 2.0 ** j, 1 << (L - j), axis=0)
    P = _weight_cells(W, -1.0 / p, L)
    Lc = int(np.log2(P.shape[0]))
    out = np.einsum("cij,cj->ci", P, np.repeat(acc, 1 << (Lc - L), axis=0))
    return VectorField(level_means(out, L))


def weighted_lp_norm(W: MatrixWeight, p: float, f: VectorField) -> float:
    """``(int |W^{1/p}(x) f(x)|^p dx)^{1/p}``, exact on the common grid."""
    _check_dim(W.dim, f)
    return lp_norm(_apply_cells(_weight_cells(W, 1.0 / p, f.resolution), f), p)


def triebel_lizorkin_norm(W: MatrixWeight, p: float, f: VectorField) -> float:
    """``|| (sum_I |V_I f_I|^2 |I|^{-1} chi_I)^{1/2} ||_{L^p}`` over levels below the resolution.

    The mean of ``f`` has no Haar term and does not contribute.
    """
    _check_dim(W.dim, f)
    L = f.resolution
    if L == 0:
        return 0.0
    S = square_function(f, _table_for(W, p, L), L)
    return float(np.mean(S ** p) ** (1.0 / p))


# ---------------------------------------------------------------------------
# operator norm estimation


@dataclass
class OperatorNormEstimate:
    """Certified lower bound for an operator norm with the input achieving it."""

    lower_bound: float
    strategy: str
    trials: int
    witness: dict
    witness_field: VectorField | None = field(default=None, repr=False)
    curve: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)
    p: float = 2.0

    def reevaluate(self, op: Callable[[VectorField], VectorField]) -> float:
        """Recompute ``||op w||_p / ||w||_p`` for the recorded witness."""
        if self.witness_field is None:
            return 0.0
        den = lp_norm(self.witness_field, self.p)
        return lp_norm(op(self.witness_field), self.p) / den if den > 0 else 0.0

    def to_dict(self) -> dict:
        return {"lower_bound": self.lower_bound, "strategy": self.strategy, "trials": self.trials, "witness": self.witness}


def check_linearity(op: Callable[[VectorField], VectorField], resolution: int, dim: int, seed: int = 0,
                    triples: int = 3, tol: float = 1e-8) -> None:
    """Spot-check ``op(a f + g) = a op(f) + op(g)``; raise :class:`NonlinearityError` otherwise."""
    rng = np.random.default_rng(seed)
    for _ in range(triples):
        f = VectorField(rng.standard_normal((1 << resolution, dim)))
        g = VectorField(rng.standard_normal((1 << resolution, dim)))
        a = float(rng.standard_normal())
        lhs = op(f * a + g).samples
        rhs = (op(f) * a + op(g)).samples
        scale = max(np.abs(lhs).max(), np.abs(rhs).max(), 1.0)
        if np.abs(lhs - rhs).max() > tol * scale:
            raise NonlinearityError(f"operator failed the linearity check (error {np.abs(lhs - rhs).max():.3e})")


def random_field(rng: np.random.Generator, resolution: int, dim: int) -> tuple[VectorField, str]:
    """One draw from a mixture of test-function shapes."""
    L = resolution
    kind = int(rng.integers(4))
    if kind == 0:
        return VectorField(rng.standard_normal((1 << L, dim))), "gaussian_cells"
    if kind == 1:
        # Haar expansion with level-decaying amplitude
        c = rng.standard_normal(((1 << L) - 1, dim))
        decay = np.concatenate([np.full(1 << j, 2.0 ** (-0.5 * j) * 0.8 ** j) for j in range(L)])
        return VectorField.from_haar(rng.standard_normal(dim), c * decay[:, None], L), "haar_series"
    j = int(rng.integers(0, L + 1))
    k = int(rng.integers(0, 1 << j))
    cube = DyadicCube(j, k)
    out = np.zeros((1 << L, dim))
    if kind == 2:
        out[cube.cells(L)] = rng.standard_normal(dim)
        return VectorField(out), f"indicator({j},{k})"
    # cluster of indicators near the left endpoint, where power weights are singular
    for _ in range(3):
        jj = int(rng.integers(0, L + 1))
        out[DyadicCube(jj, 0).cells(L)] += rng.standard_normal(dim)
    return VectorField(out), "left_cluster"


def structured_family(resolution: int, dim: int, max_level: int | None = None, weight: MatrixWeight | None = None,
                      p: float | None = None, matrices=()):
    """Indicators ``chi_J e_i``, Haar atoms ``h_J e_i`` and ``chi_J W^{-1/p'} M e_i``.

    Yields ``(field, description)`` pairs for every cube with level <= max_level.
    """
    L = resolution
    max_level = min(L - 1, 6) if max_level is None else max_level
    eye = np.eye(dim)
    Wm = None
    if weight is not None and matrices:
        if p is None:
            raise ValueError("weighted test functions need p")
        P = np.asarray(weight.power(-1.0 / conjugate_exponent(p)))
        Wm = level_means(P, L) if weight.resolution >= L else np.repeat(P, 1 << (L - weight.resolution), axis=0)
    for j in range(max_level + 1):
        for k in range(1 << j):
            cube = DyadicCube(j, k)
            sl = cube.cells(L)
            for i in range(dim):
                out = np.zeros((1 << L, dim))
                out[sl] = eye[i]
                yield VectorField(out), {"kind": "indicator", "cube": [j, k], "e": i}
                if j < L:
                    h = np.zeros((1 << L, dim))
                    half = (sl.stop - sl.start) // 2
                    h[sl.start:sl.start + half, i] = 1.0
                    h[sl.start + half:sl.stop, i] = -1.0
                    yield VectorField(h * 2.0 ** (0.5 * j)), {"kind": "haar", "cube": [j, k], "e": i}
                if Wm is not None:
                    for mi, M in enumerate(matrices):
                        out = np.zeros((1 << L, dim))
                        out[sl] = np.einsum("cab,b->ca", Wm[sl], np.asarray(M) @ eye[i])
                        yield VectorField(out), {"kind": "weighted_indicator", "cube": [j, k], "e": i, "matrix": mi}


def operator_norm_estimate(op: Callable[[VectorField], VectorField], p: float, strategy: str, *, resolution: int,
                           dim: int, trials: int = 200, seed: int = 0,
                           adjoint: Callable[[VectorField], VectorField] | None = None,
                           weight: MatrixWeight | None = None, matrices=(), max_level: int | None = None,
                           check: bool = True) -> OperatorNormEstimate:
    """Empirical lower bound for ``||op||_{L^p -> L^p}`` on fields at ``resolution``.

    Strategies
    ----------
    power_iteration_p2
        ``p = 2`` only: the largest singular value of the finite matrix,
        via ARPACK when an adjoint is supplied and a dense SVD otherwise.
    random_family
        Max ratio over ``trials`` seeded random inputs (one child seed per
        trial).
    structured_family
        Max ratio over indicators, Haar atoms and weighted indicators.
    """
    if check:
        check_linearity(op, resolution, dim, seed)
    L, n = resolution, dim
    N = (1 << L) * n

    def ratio(f: VectorField) -> float:
        den = lp_norm(f, p)
        return lp_norm(op(f), p) / den if den > 0 else 0.0

    if strategy == "power_iteration_p2":
        if p != 2:
            raise ValueError("power iteration estimates the L^2 norm only")

        def mv(x):
            return op(VectorField(x.reshape(1 << L, n))).samples.reshape(-1)

        if adjoint is not None and N > 64:
            def rmv(y):
                return adjoint(VectorField(y.reshape(1 << L, n))).samples.reshape(-1)

            lin = LinearOperator((N, N), matvec=mv, rmatvec=rmv, dtype=float)
            v0 = np.random.default_rng(seed).standard_normal(N)
            if not np.any(mv(v0)):
                # a random vector in the kernel means the operator is zero (almost surely)
                s, v = np.zeros(1), v0
            else:
                _, s, vt = svds(lin, k=1, tol=1e-12, v0=v0, maxiter=20 * N)
                v = vt[0]
        else:
            dense = np.stack([mv(e) for e in np.eye(N)], axis=1)
            _, s, vt = np.linalg.svd(dense)
            v = vt[0]
        wf = VectorField(v.reshape(1 << L, n))
        lb = ratio(wf)
        return OperatorNormEstimate(lb, strategy, 1, {"kind": "top_singular_vector", "sigma": float(s.max())}, wf,
                                    np.array([lb]), p)

    best, best_f, best_w = 0.0, None, {}
    curve = []
    if strategy == "random_family":
        children = np.random.SeedSequence(seed).spawn(trials)
        for t, ss in enumerate(children):
            f, desc = random_field(np.random.default_rng(ss), L, n)
            r = ratio(f)
            if r > best:
                best, best_f, best_w = r, f, {"kind": desc, "trial": t}
            curve.append(best)
    elif strategy == "structured_family":
        count = 0
        for f, desc in structured_family(L, n, max_level, weight, p, matrices):
            r = ratio(f)
            count += 1
            if r > best:
                best, best_f, best_w = r, f, desc
            curve.append(best)
        trials = count
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    return OperatorNormEstimate(best, strategy, trials, best_w, best_f, np.asarray(curve), p)


def best_estimate(*estimates: OperatorNormEstimate) -> OperatorNormEstimate:
    return max(estimates, key=lambda e: e.lower_bound)
