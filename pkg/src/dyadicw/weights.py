"""Matrix weights, reducing operators and A_p characteristics.

A :class:`MatrixWeight` stores per-cell averages of a closed-form SPD-valued
function on ``[0, 1)`` at resolution ``2**-L``.  Reducing operators are
computed either in closed form (``p = 2`` or ``n = 1``) or by fitting a John
ellipsoid to the norm ``e -> (m_I |W^{1/p} e|^p)^{1/p}``.
"""

from __future__ import annotations

import math
from collections.abc import Mapping
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import _kernels
from .dyadic import DyadicCube, MatrixSymbol, all_means, level_slice, n_cubes
from .errors import AdmissibilityError, ConfigError, ResolutionError
from .linalg import half_directions, john_batch, op_norm, spd_power

EXACT_P2 = "exact_p2"
EXACT_SCALAR = "exact_scalar"
JOHN = "john_approx"

DEFAULT_DIRECTIONS = 256
DEFAULT_TOL = 1e-7


def conjugate_exponent(p: float) -> float:
    if not p > 1:
        raise ValueError(f"p must exceed 1, got {p}")
    return p / (p - 1.0)


@dataclass(frozen=True, eq=False)
class MatrixWeight:
    """Piecewise-constant SPD-valued weight on ``[0, 1)``.

    Attributes
    ----------
    cells : ndarray (2**L, n, n)
        Cell averages of the generating closed form.
    sampler_tag : str
        Which closed form produced the cells.
    params : dict
        Family parameters (exponents, angle, ...) used for admissibility and
        dual-weight bookkeeping.
    """

    cells: np.ndarray
    sampler_tag: str = "custom"
    params: Mapping[str, Any] = field(default_factory=dict)
    _memo: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        c = np.array(self.cells, dtype=float)
        if c.ndim != 3 or c.shape[1] != c.shape[2]:
            raise ValueError(f"cells must have shape (2**L, n, n), got {c.shape}")
        L = int(round(math.log2(c.shape[0]))) if c.shape[0] else -1
        if L < 0 or (1 << L) != c.shape[0]:
            raise ResolutionError(f"cell count {c.shape[0]} is not a power of two")
        c = 0.5 * (c + np.swapaxes(c, 1, 2))
        if not np.all(np.linalg.eigvalsh(c)[:, 0] > 0):
            raise AdmissibilityError("weight is not positive definite on every cell")
        c.flags.writeable = False
        object.__setattr__(self, "cells", c)
        object.__setattr__(self, "params", dict(self.params))

    @property
    def dim(self) -> int:
        return self.cells.shape[1]

    @property
    def resolution(self) -> int:
        return int(round(math.log2(self.cells.shape[0])))

    def memo(self, key, factory):
        """Write-once cache; concurrent writers store identical values."""
        try:
            return self._memo[key]
        except KeyError:
            return self._memo.setdefault(key, factory())

    def power(self, t: float) -> np.ndarray:
        """Cellwise ``W^t`` as a read-only array."""
        def build():
            out = spd_power(self.cells, t, check=False)
            out.flags.writeable = False
            return out
        return self.memo(("power", float(t)), build)

    def means(self, t: float, depth: int) -> np.ndarray:
        """Level-ordered averages ``m_I(W^t)`` for all cubes with level <= depth."""
        return all_means(np.asarray(self.power(t)), depth)

    def describe(self) -> dict:
        return {"family": self.sampler_tag, "n": self.dim, "resolution": self.resolution, **self.params}


# ---------------------------------------------------------------------------
# constructors


def power_cell_averages(gamma: float, L: int) -> np.ndarray:
    """Exact averages of ``x**gamma`` over the cells ``[k h, (k+1) h)``, ``h = 2**-L``.

    Uses ``h**gamma ((k+1)**(g+1) - k**(g+1)) / (g+1)`` written with
    ``expm1``/``log1p`` so that cells far from the origin keep full relative
    accuracy.
    """
    if not gamma > -1:
        raise AdmissibilityError(f"x**{gamma} is not integrable at 0 (need exponent > -1)")
    k = np.arange(1 << L, dtype=float)
    g1 = gamma + 1.0
    out = np.empty_like(k)
    out[0] = 1.0 / g1
    kk = k[1:]
    out[1:] = np.exp(gamma * np.log(kk)) * kk * np.expm1(g1 * np.log1p(1.0 / kk)) / g1
    return out * 2.0 ** (-L * gamma)


def _check_box(exponents, p: float) -> None:
    for idx, g in enumerate(exponents):
        for sign, val in (("+", g), ("-", -g)):
            if not val > -1:
                raise AdmissibilityError(f"exponent #{idx} = {g!r} violates -1 < {sign}{g!r}")
            if not val < p - 1:
                raise AdmissibilityError(f"exponent #{idx} = {g!r} violates {sign}{g!r} < p - 1 = {p - 1!r}")


def make_power_weight(alpha: float, beta: float, p: float, L: int) -> MatrixWeight:
    """``W(x) = diag(x**alpha, x**beta)`` with exact cell averages.

    Raises
    ------
    AdmissibilityError
        Unless each of ``alpha, -alpha, beta, -beta`` lies in ``(-1, p - 1)``.
    """
    conjugate_exponent(p)
    if not 0 <= L <= 24:
        raise ResolutionError(f"resolution must be in [0, 24], got {L}")
    _check_box((alpha, beta), p)
    cells = np.zeros((1 << L, 2, 2))
    cells[:, 0, 0] = power_cell_averages(alpha, L)
    cells[:, 1, 1] = power_cell_averages(beta, L)
    return MatrixWeight(cells, "power_diag", {"exponents": [float(alpha), float(beta)], "p": float(p)})


def make_scalar_weight(gamma: float, p: float, L: int) -> MatrixWeight:
    """Scalar weight ``w(x) = x**gamma`` (n = 1); requires ``-1 < gamma < p - 1``."""
    conjugate_exponent(p)
    if not 0 <= L <= 24:
        raise ResolutionError(f"resolution must be in [0, 24], got {L}")
    if not -1 < gamma < p - 1:
        raise AdmissibilityError(f"scalar power weight needs -1 < {gamma!r} < p - 1 = {p - 1!r}")
    cells = power_cell_averages(gamma, L)[:, None, None]
    return MatrixWeight(cells, "scalar", {"exponents": [float(gamma)], "p": float(p)})


def identity_weight(n: int, L: int) -> MatrixWeight:
    return MatrixWeight(np.broadcast_to(np.eye(n), (1 << L, n, n)), "identity", {})


def rotation(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def make_rotated_weight(base: MatrixWeight, theta: float) -> MatrixWeight:
    """Conjugate a 2x2 weight cellwise: ``R^T W R``."""
    if base.dim != 2:
        raise ValueError("rotation is defined for 2x2 weights only")
    R = rotation(theta)
    cells = np.einsum("ji,cjk,kl->cil", R, base.cells, R)
    params = dict(base.params)
    params["theta"] = float(theta) + float(params.get("theta", 0.0))
    tag = base.sampler_tag if base.sampler_tag.startswith("rotated_") else "rotated_" + base.sampler_tag
    return MatrixWeight(cells, tag, params)


def weight_from_config(cfg: Mapping[str, Any], p: float | None = None, L: int | None = None) -> MatrixWeight:
    """Build a weight from ``{family, n, p, exponents, theta?, resolution}``.

    ``p`` and ``L`` override the corresponding config fields when given.
    """
    try:
        family = cfg["family"]
    except KeyError:
        raise ConfigError("weight config: missing field 'family'") from None
    p = float(cfg.get("p", 2.0) if p is None else p)
    L = int(cfg.get("resolution", 12) if L is None else L)
    ex = list(cfg.get("exponents", []))
    n = int(cfg.get("n", 2 if family != "scalar" else 1))
    if family == "identity":
        return identity_weight(n, L)
    if family == "scalar":
        if len(ex) != 1:
            raise ConfigError("weight config: 'exponents' must hold one value for family 'scalar'")
        return make_scalar_weight(ex[0], p, L)
    if family in ("power_diag", "rotated_power"):
        if len(ex) != 2 or n != 2:
            raise ConfigError(f"weight config: family {family!r} needs n=2 and two exponents")
        W = make_power_weight(ex[0], ex[1], p, L)
        if family == "rotated_power":
            if "theta" not in cfg:
                raise ConfigError("weight config: family 'rotated_power' needs 'theta'")
            W = make_rotated_weight(W, float(cfg["theta"]))
        return W
    raise ConfigError(f"weight config: unknown family {family!r}")


def weight_power_field(W: MatrixWeight, t: float) -> MatrixSymbol:
    """Cellwise spectral power ``W^t`` (power of the stored cell averages)."""
    return MatrixSymbol(np.array(W.power(t)))


def dual_weight(W: MatrixWeight, p: float) -> MatrixWeight:
    """``W^{1-p'}``, the weight paired with ``W`` for the conjugate exponent."""
    pp = conjugate_exponent(p)
    t = 1.0 - pp
    params = dict(W.params)
    if "exponents" in params:
        params["exponents"] = [g * t for g in params["exponents"]]
    params["p"] = pp
    tag = W.sampler_tag[5:-1] if W.sampler_tag.startswith("dual(") else f"dual({W.sampler_tag})"
    if W.sampler_tag == "identity":
        tag = "identity"
    return MatrixWeight(np.array(W.power(t)), tag, params)


# ---------------------------------------------------------------------------
# reducing operators


@dataclass(frozen=True)
class ReducingTable:
    """Reducing matrices for every cube with level <= depth (level-ordered).

    ``ratio[i]`` is the worst sampled ``|V e| / rho(e)`` for cube ``i`` (1 for
    closed-form entries).
    """

    V: np.ndarray
    ratio: np.ndarray
    exactness: str
    p: float
    depth: int

    def at(self, cube: DyadicCube) -> np.ndarray:
        if cube.level > self.depth:
            raise ResolutionError(f"table covers levels <= {self.depth}")
        return self.V[cube.flat]


@dataclass(frozen=True)
class ReducingPair:
    cube: DyadicCube
    V: np.ndarray
    V_dual: np.ndarray
    exactness: str
    sandwich_ratio: float


def _method(W: MatrixWeight, p: float, method: str) -> str:
    if method == "auto":
        if W.dim == 1:
            return EXACT_SCALAR
        if p == 2:
            return EXACT_P2
        return JOHN
    if method == "exact":
        if W.dim == 1:
            return EXACT_SCALAR
        if p == 2:
            return EXACT_P2
        raise ValueError("closed-form reducing operators need p = 2 or n = 1")
    if method == "john":
        return JOHN
    raise ValueError(f"unknown method {method!r}")


def _john_levels(P: np.ndarray, q: float, depth: int, m: int, tol: float) -> tuple[np.ndarray, np.ndarray]:
    # Fit every level <= depth from power sums taken at the finest admissible
    # level L - 2 and averaged upward, so each level's values do not depend on
    # the requested depth.
    n = P.shape[1]
    L = int(round(math.log2(P.shape[0])))
    base = L - 2
    E = half_directions(n, m)
    S = _kernels.power_sums(P, E, q, base)
    V = np.empty((n_cubes(depth), n, n))
    ratio = np.empty(n_cubes(depth))
    for j in range(base, -1, -1):
        if j <= depth:
            rho = S ** (1.0 / q)
            if not np.all(rho > 0) or not np.all(np.isfinite(rho)):
                raise AdmissibilityError("norm evaluator degenerate on some cube")
            Vj, rj, _ = john_batch(rho, E, tol)
            V[level_slice(j)] = Vj
            ratio[level_slice(j)] = rj
        if j:
            S = 0.5 * (S[0::2] + S[1::2])
    return V, ratio


def _check_depth(W: MatrixWeight, depth: int, exactness: str) -> None:
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    limit = W.resolution - 2 if exactness == JOHN else W.resolution
    if depth > limit:
        raise ResolutionError(
            f"cubes at level {depth} need resolution >= {depth + (W.resolution - limit)}, weight has {W.resolution}"
        )


def reducing_table(W: MatrixWeight, p: float, depth: int, dual: bool = False, method: str = "auto",
                   m: int = DEFAULT_DIRECTIONS, tol: float = DEFAULT_TOL) -> ReducingTable:
    """Reducing operators ``V_I`` (or ``V_I'`` when ``dual``) for all cubes to ``depth``.

    Exact paths: ``(m_I W)^{1/2}`` and ``(m_I W^{-1})^{1/2}`` at ``p = 2``;
    ``(m_I w)^{1/p}`` and ``(m_I w^{-p'/p})^{1/p'}`` for scalar weights.
    Otherwise the tight John matrix of ``rho_I(e) = (m_I |W^{1/p} e|^p)^{1/p}``
    (resp. ``W^{-1/p}`` with exponent ``p'``), scaled so that
    ``rho_I(e) <= |V_I e| <= ratio_I rho_I(e)`` on every sampled direction.
    """
    pp = conjugate_exponent(p)
    ex = _method(W, p, method)
    _check_depth(W, depth, ex)
    key = ("table", float(p), bool(dual), ex, int(m), float(tol))
    cached = W._memo.get(key)
    if cached is not None and cached.depth >= depth:
        if cached.depth == depth:
            return cached
        k = n_cubes(depth)
        return ReducingTable(cached.V[:k], cached.ratio[:k], ex, p, depth)

    if ex == EXACT_P2:
        V = spd_power(W.means(-1.0 if dual else 1.0, depth), 0.5, check=False)
        ratio = np.ones(V.shape[0])
    elif ex == EXACT_SCALAR:
        if dual:
            V = W.means(-pp / p, depth) ** (1.0 / pp)
        else:
            V = W.means(1.0, depth) ** (1.0 / p)
        ratio = np.ones(V.shape[0])
    else:
        P = np.asarray(W.power(-1.0 / p if dual else 1.0 / p))
        V, ratio = _john_levels(P, pp if dual else p, depth, m, tol)
    V.flags.writeable = False
    table = ReducingTable(V, ratio, ex, float(p), int(depth))
    W._memo[key] = table
    return table


def _single(W: MatrixWeight, cube: DyadicCube, p: float, dual: bool, method: str) -> tuple[np.ndarray, float, str]:
    ex = _method(W, p, method)
    _check_depth(W, cube.level, ex)
    cells = W.power(-1.0 / p if dual else 1.0 / p) if ex == JOHN else None
    pp = conjugate_exponent(p)

    def build():
        sl = cube.cells(W.resolution)
        if ex == EXACT_P2:
            return spd_power(np.asarray(W.power(-1.0 if dual else 1.0))[sl].mean(axis=0), 0.5, check=False), 1.0
        if ex == EXACT_SCALAR:
            if dual:
                return np.asarray(W.power(-pp / p))[sl].mean(axis=0) ** (1.0 / pp), 1.0
            return np.asarray(W.power(1.0))[sl].mean(axis=0) ** (1.0 / p), 1.0
        q = pp if dual else p
        E = half_directions(W.dim)
        S = _kernels.power_sums(np.asarray(cells)[sl], E, q, 0)
        V, r, _ = john_batch(S ** (1.0 / q), E, DEFAULT_TOL)
        return V[0], float(r[0])

    V, r = W.memo(("single", float(p), bool(dual), ex, cube), build)
    return V, r, ex


def reducing_operator(W: MatrixWeight, I: DyadicCube, p: float, method: str = "auto") -> np.ndarray:
    """``V_I`` for one cube; see :func:`reducing_table` for the construction."""
    return _single(W, I, p, False, method)[0]


def dual_reducing_operator(W: MatrixWeight, I: DyadicCube, p: float, method: str = "auto") -> np.ndarray:
    """``V_I'`` for one cube (``W^{-1/p}`` and exponent ``p'``)."""
    return _single(W, I, p, True, method)[0]


def reducing_pair(W: MatrixWeight, I: DyadicCube, p: float, method: str = "auto") -> ReducingPair:
    V, r1, ex = _single(W, I, p, False, method)
    Vd, r2, _ = _single(W, I, p, True, method)
    return ReducingPair(I, V, Vd, ex, max(r1, r2))


def avg_inverse_root(W: MatrixWeight, I: DyadicCube, p: float) -> np.ndarray:
    """``m_I(W^{-1/p})``."""
    if I.level > W.resolution:
        raise ResolutionError(f"cube level {I.level} exceeds resolution {W.resolution}")
    conjugate_exponent(p)
    return np.asarray(W.power(-1.0 / p))[I.cells(W.resolution)].mean(axis=0)


# ---------------------------------------------------------------------------
# A_p characteristics


@dataclass(frozen=True)
class ApProfile:
    """Per-level maxima of ``||V_I V_I'||`` and the overall characteristic.

    ``value`` is ``max ||V_I V_I'||``; ``value_p`` is its ``p``-th power.
    """

    p: float
    per_level: np.ndarray
    argmax: DyadicCube
    exactness: str

    @property
    def value(self) -> float:
        return float(self.per_level.max())

    @property
    def value_p(self) -> float:
        return self.value ** self.p

    @property
    def running(self) -> np.ndarray:
        """Characteristic as a function of depth (cumulative maximum)."""
        return np.maximum.accumulate(self.per_level)


def ap_profile(W: MatrixWeight, p: float, depth: int, method: str = "auto") -> ApProfile:
    """Reducing-operator characteristic with its per-level curve."""
    Vt = reducing_table(W, p, depth, False, method)
    Vd = reducing_table(W, p, depth, True, method)
    norms = np.asarray(op_norm(np.einsum("kij,kjl->kil", Vt.V, Vd.V)))
    per = np.array([norms[level_slice(j)].max() for j in range(depth + 1)])
    return ApProfile(float(p), per, DyadicCube.from_flat(int(np.argmax(norms))), Vt.exactness)


def ap_characteristic_reducing(W: MatrixWeight, p: float, depth: int, power: bool = True, method: str = "auto") -> float:
    """``max_{level(I) <= depth} ||V_I V_I'||`` raised to ``p`` (or not, with ``power=False``)."""
    if depth > W.resolution - 2:
        raise ResolutionError(f"depth {depth} needs resolution >= {depth + 2}, weight has {W.resolution}")
    prof = ap_profile(W, p, depth, method)
    return prof.value_p if power else prof.value


def ap_integral_profile(W: MatrixWeight, p: float, depth: int) -> np.ndarray:
    """Per-level maxima of ``|I|^{-1} int_I (|I|^{-1} int_I ||W^{1/p}(x) W^{-1/p}(t)||^{p'} dt)^{p/p'} dx``."""
    if depth > W.resolution - 2:
        raise ResolutionError(f"depth {depth} needs resolution >= {depth + 2}, weight has {W.resolution}")
    key = ("ap_integral", float(p))
    cached = W._memo.get(key)
    if cached is not None and cached.shape[0] > depth:
        return cached[: depth + 1]
    P = np.asarray(W.power(1.0 / p))
    Q = np.asarray(W.power(-1.0 / p))
    per = np.array([_kernels.ap_integral_level(P, Q, p, j).max() for j in range(depth + 1)])
    W._memo[key] = per
    return per


def ap_characteristic_integral(W: MatrixWeight, p: float, depth: int) -> float:
    """Double-integral A_p characteristic over dyadic cubes with level <= depth."""
    return float(ap_integral_profile(W, p, depth).max())
