"""Carleson-type conditions, weighted BMO functionals and the Haar-multiplier criterion."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .dyadic import DyadicCube, MatrixSymbol, VectorField, all_means, level_slice, n_cubes
from .errors import DimensionError, ResolutionError
from .linalg import op_norm
from .operators import (
    MatrixSequence,
    OperatorNormEstimate,
    best_estimate,
    embedding_operator_adjoint,
    embedding_operator_apply,
    operator_norm_estimate,
)
from .weights import MatrixWeight, conjugate_exponent, reducing_table

P_GE_2 = "p_ge_2"
P_LE_2 = "p_le_2"


def branches_for(p: float) -> tuple[str, ...]:
    if p > 2:
        return (P_GE_2,)
    if p < 2:
        return (P_LE_2,)
    return (P_GE_2, P_LE_2)


def _mm(*mats):
    out = mats[0]
    for M in mats[1:]:
        out = np.einsum("...ij,...jk->...ik", out, M)
    return out


def _subtree_sums(T: np.ndarray, depth: int) -> np.ndarray:
    """``S_J = sum_{I subset J, level(I) <= depth} T_I`` for every J (level-ordered)."""
    S = np.array(T[: n_cubes(depth)], dtype=float)
    for j in range(depth - 1, -1, -1):
        sl, ch = level_slice(j), level_slice(j + 1)
        S[sl] += S[ch][0::2] + S[ch][1::2]
    return S


def _lengths(depth: int) -> np.ndarray:
    return np.concatenate([np.full(1 << j, 2.0 ** -j) for j in range(depth + 1)])


def carleson_b_terms(A: MatrixSequence, W: MatrixWeight, p: float, depth: int) -> np.ndarray:
    """``||V_I A_I V_I^{-1}||^2`` per cube with level <= depth."""
    V = reducing_table(W, p, depth).V
    return np.asarray(op_norm(_mm(V, A.levels(depth + 1), np.linalg.inv(V)))) ** 2


def carleson_b(A: MatrixSequence, W: MatrixWeight, p: float, depth: int) -> float:
    """``max_J |J|^{-1} sum_{I subset J} ||V_I A_I V_I^{-1}||^2`` over levels <= depth."""
    _check(A, W)
    S = _subtree_sums(carleson_b_terms(A, W, p, depth), depth)
    return float((S / _lengths(depth)).max())


@dataclass(frozen=True)
class CarlesonC:
    """Least constant in the matrix Carleson inequality and where it is attained."""

    value: float
    cube: DyadicCube
    branch: str


def carleson_c(A: MatrixSequence, W: MatrixWeight, p: float, depth: int, branch: str | None = None) -> CarlesonC:
    """``max_J lambda_max(V_J^{-1} (|J|^{-1} sum_{I subset J} A_I^* V_I^2 A_I) V_J^{-1})``.

    The ``p_le_2`` branch uses ``A_I (V_I')^2 A_I^*`` and ``V_J'``.  By default
    the branch follows ``p``; at ``p = 2`` pass ``branch`` to pick one.
    """
    _check(A, W)
    if branch is None:
        branch = branches_for(p)[0]
    Ad = A.levels(depth + 1)
    if branch == P_GE_2:
        V = reducing_table(W, p, depth).V
        T = _mm(np.swapaxes(Ad, 1, 2), V, V, Ad)
    elif branch == P_LE_2:
        V = reducing_table(W, p, depth, dual=True).V
        T = _mm(Ad, V, V, np.swapaxes(Ad, 1, 2))
    else:
        raise ValueError(f"unknown branch {branch!r}")
    S = _subtree_sums(T, depth) / _lengths(depth)[:, None, None]
    Vi = np.linalg.inv(V)
    G = _mm(Vi, S, Vi)
    G = 0.5 * (G + np.swapaxes(G, 1, 2))
    lam = np.linalg.eigvalsh(G)[:, -1]
    k = int(np.argmax(lam))
    return CarlesonC(float(max(lam[k], 0.0)), DyadicCube.from_flat(k), branch)


def _check(A: MatrixSequence, W: MatrixWeight) -> None:
    if A.dim != W.dim:
        raise DimensionError(f"sequence dimension {A.dim} differs from weight dimension {W.dim}")


# ---------------------------------------------------------------------------
# weighted BMO


def _symbol_on(B: MatrixSymbol, W: MatrixWeight) -> np.ndarray:
    if B.dim != W.dim:
        raise DimensionError(f"symbol dimension {B.dim} differs from weight dimension {W.dim}")
    if B.resolution > W.resolution:
        raise ResolutionError("symbol is finer than the weight")
    return B.refine(W.resolution).samples


def _oscillation(F: np.ndarray, Bs: np.ndarray, R: np.ndarray, q: float, depth: int, left: np.ndarray | None = None) -> np.ndarray:
    """Per cube ``|I|^{-1} int_I ||left_I F(x) (B(x) - m_I B) R_I||^q`` (level-ordered)."""
    ncell = Bs.shape[0]
    out = np.empty(n_cubes(depth))
    for j in range(depth + 1):
        sl = level_slice(j)
        per = ncell >> j
        mB = Bs.reshape(1 << j, per, *Bs.shape[1:]).mean(axis=1)
        D = Bs - np.repeat(mB, per, axis=0)
        M = _mm(D, np.repeat(R[sl], per, axis=0))
        if F is not None:
            M = _mm(F, M)
        if left is not None:
            M = _mm(np.repeat(left[sl], per, axis=0), M)
        vals = np.asarray(op_norm(M)) ** q
        out[sl] = vals.reshape(1 << j, per).mean(axis=1)
    return out


def bmo_w_branches(B: MatrixSymbol, W: MatrixWeight, p: float, depth: int) -> dict[str, float]:
    """Both weighted BMO functionals applicable at ``p``.

    ``p_ge_2``: ``sup_I |I|^{-1} int_I ||W^{1/p}(x)(B(x) - m_I B) V_I^{-1}||^p``;
    ``p_le_2``: ``sup_I |I|^{-1} int_I ||W^{-1/p}(x)(B^*(x) - m_I B^*) (V_I')^{-1}||^{p'}``.
    """
    if depth > W.resolution - 2:
        raise ResolutionError(f"depth {depth} needs weight resolution >= {depth + 2}")
    Bs = _symbol_on(B, W)
    out = {}
    for br in branches_for(p):
        if br == P_GE_2:
            V = reducing_table(W, p, depth).V
            vals = _oscillation(np.asarray(W.power(1.0 / p)), Bs, np.linalg.inv(V), p, depth)
        else:
            V = reducing_table(W, p, depth, dual=True).V
            Bstar = np.swapaxes(Bs, 1, 2)
            vals = _oscillation(np.asarray(W.power(-1.0 / p)), Bstar, np.linalg.inv(V), conjugate_exponent(p), depth)
        out[br] = float(vals.max())
    return out


def bmo_w_norm(B: MatrixSymbol, W: MatrixWeight, p: float, depth: int, branch: str | None = None) -> float:
    """Weighted BMO functional for the branch selected by ``p`` (``p_ge_2`` at p = 2 unless given)."""
    vals = bmo_w_branches(B, W, p, depth)
    return vals[branch or branches_for(p)[0]]


def bmo_wpq_norm(B: MatrixSymbol, W: MatrixWeight, p: float, q: float, depth: int) -> float:
    """``sup_I |I|^{-1} int_I ||V_I (B(x) - m_I B) V_I^{-1}||^q``."""
    if not q > 1:
        raise ValueError(f"q must exceed 1, got {q}")
    if depth > W.resolution - 2:
        raise ResolutionError(f"depth {depth} needs weight resolution >= {depth + 2}")
    Bs = _symbol_on(B, W)
    V = reducing_table(W, p, depth).V
    return float(_oscillation(None, Bs, np.linalg.inv(V), q, depth, left=V).max())


def dyadic_bmo2_from_haar(B: MatrixSymbol, depth: int) -> float:
    """``sup_J |J|^{-1} sum_{I subset J} ||B_I||^2`` (all levels below the resolution)."""
    from .dyadic import haar_transform

    _, c = haar_transform(B.samples)
    L = B.resolution
    T = np.asarray(op_norm(c)) ** 2
    S = _subtree_sums(T, L - 1)
    vals = S / _lengths(L - 1)
    return float(vals[: n_cubes(depth)].max())


# ---------------------------------------------------------------------------
# Haar multiplier criterion


@dataclass(frozen=True)
class HaarCriterion:
    """``max ||V_I A_I V_I^{-1}||`` and ``max ||V_I A_I V_I'||`` with per-level maxima."""

    value: float
    dual_value: float
    per_level: np.ndarray
    per_level_dual: np.ndarray

    def __float__(self) -> float:
        return self.value


def haar_criterion(A: MatrixSequence, W: MatrixWeight, p: float, depth: int) -> HaarCriterion:
    _check(A, W)
    V = reducing_table(W, p, depth).V
    Vd = reducing_table(W, p, depth, dual=True).V
    Ad = A.levels(depth + 1)
    t1 = np.asarray(op_norm(_mm(V, Ad, np.linalg.inv(V))))
    t2 = np.asarray(op_norm(_mm(V, Ad, Vd)))
    per1 = np.array([t1[level_slice(j)].max() for j in range(depth + 1)])
    per2 = np.array([t2[level_slice(j)].max() for j in range(depth + 1)])
    return HaarCriterion(float(per1.max()), float(per2.max()), per1, per2)


# ---------------------------------------------------------------------------
# equivalence report


@dataclass
class CarlesonReport:
    p: float
    depth: int
    cond_b: float
    cond_c: dict
    op_norm_a: OperatorNormEstimate
    ratios: dict
    branch: str
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "p": self.p,
            "depth": self.depth,
            "branch": self.branch,
            "cond_b": self.cond_b,
            "cond_c": self.cond_c,
            "op_norm_a": self.op_norm_a.to_dict(),
            "ratios": self.ratios,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, default=_jsonable)


def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, DyadicCube):
        return [o.level, o.index]
    raise TypeError(f"not serializable: {type(o)}")


def embedding_norm(A: MatrixSequence, W: MatrixWeight, p: float, depth: int, trials: int = 50, seed: int = 0) -> OperatorNormEstimate:
    """Lower bound for ``||Pi_A||_{L^p}`` with ``A`` truncated to ``depth``.

    Acts on fields at resolution ``depth + 1`` so every stored level has Haar
    support; ``p = 2`` uses the top singular value, other ``p`` the best of the
    random and structured families.
    """
    At = A.truncate(depth)
    L = depth + 1

    def op(f):
        return embedding_operator_apply(At, W, p, f)

    if p == 2:
        return operator_norm_estimate(op, 2, "power_iteration_p2", resolution=L, dim=A.dim, seed=seed,
                                      adjoint=lambda g: embedding_operator_adjoint(At, W, p, g))
    rnd = operator_norm_estimate(op, p, "random_family", resolution=L, dim=A.dim, trials=trials, seed=seed)
    st = operator_norm_estimate(op, p, "structured_family", resolution=L, dim=A.dim, check=False,
                                max_level=min(depth, 6))
    return best_estimate(rnd, st)


def equivalence_report(A: MatrixSequence, W: MatrixWeight, p: float, depth: int, trials: int = 50, seed: int = 0,
                       config: dict | None = None) -> CarlesonReport:
    """Condition (b), the branch conditions (c) and a norm estimate for ``Pi_A``, with pairwise ratios.

    Ratios compare squared norms: ``cond_b / cond_c``, ``||Pi_A||^2 / cond_b``
    and ``||Pi_A||^2 / cond_c``.
    """
    cb = carleson_b(A, W, p, depth)
    cc = {br: carleson_c(A, W, p, depth, br).value for br in branches_for(p)}
    est = embedding_norm(A, W, p, depth, trials, seed)
    a2 = est.lower_bound ** 2
    ratios = {}
    for br, v in cc.items():
        ratios[f"b_over_c[{br}]"] = _safe_ratio(cb, v)
        ratios[f"a2_over_c[{br}]"] = _safe_ratio(a2, v)
    ratios["a2_over_b"] = _safe_ratio(a2, cb)
    if len(cc) == 2:
        ratios["c_branch_ratio"] = _safe_ratio(cc[P_GE_2], cc[P_LE_2])
    branch = "both" if len(cc) == 2 else branches_for(p)[0]
    return CarlesonReport(float(p), int(depth), cb, cc, est, ratios, branch, dict(config or {}))


def _safe_ratio(a: float, b: float) -> float:
    if b == 0:
        return float("nan") if a == 0 else float("inf")
    return float(a / b)


def ratio_spread(ratios: dict) -> float:
    """``max(r, 1/r)`` over the finite ratios; the pairwise factor of a report."""
    vals = [v for v in ratios.values() if np.isfinite(v) and v > 0]
    return float(max(max(v, 1.0 / v) for v in vals)) if vals else float("nan")
