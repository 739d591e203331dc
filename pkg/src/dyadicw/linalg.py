"""Small-dimension matrix calculus.

Spectral decompositions, fractional powers, spectral norms, a
determinant/norm predicate, and ellipsoid fitting of sampled norm balls.
Every function accepts stacks of matrices (leading batch axes) where that
makes sense.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import FittingError, NotSPDError

SYMMETRY_TOL = 1e-12


def check_spd(M: np.ndarray, name: str = "matrix") -> np.ndarray:
    """Validate a (stack of) real symmetric positive definite matrices.

    Returns the input as a float array; raises :class:`NotSPDError` otherwise.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim < 2 or M.shape[-1] != M.shape[-2]:
        raise NotSPDError(f"{name} must be square, got shape {M.shape}")
    scale = np.abs(M).max(axis=(-1, -2), keepdims=True) if M.size else 1.0
    asym = np.abs(M - np.swapaxes(M, -1, -2)).max(axis=(-1, -2), keepdims=True) if M.size else 0.0
    if np.any(asym > SYMMETRY_TOL * np.maximum(scale, 1e-300)):
        raise NotSPDError(f"{name} is not symmetric")
    w = np.linalg.eigvalsh(M)
    if not np.all(w > 0):
        raise NotSPDError(f"{name} is not positive definite (smallest eigenvalue {w.min():.3e})")
    return M


def sym_eig(M: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues and eigenvectors of symmetric matrices (cyclic Jacobi)."""
    return _kernels.sym_eig(M)


def spd_power(M: np.ndarray, t: float, *, check: bool = True) -> np.ndarray:
    """Spectral power ``Q diag(w)^t Q^T`` of SPD matrices.

    Parameters
    ----------
    M : ndarray (..., n, n)
    t : float
    check : bool
        Validate symmetry and definiteness first.
    """
    M = check_spd(M) if check else np.asarray(M, dtype=float)
    if t == 1:
        return M.copy()
    if t == 0:
        return np.broadcast_to(np.eye(M.shape[-1]), M.shape).copy()
    w, Q = sym_eig(M)
    if not np.all(w > 0):
        raise NotSPDError("matrix lost definiteness during eigendecomposition")
    return np.einsum("...ij,...j,...kj->...ik", Q, w ** t, Q)


def op_norm(M: np.ndarray) -> np.ndarray | float:
    """Spectral norm (largest singular value); vectorised over leading axes."""
    M = np.asarray(M)
    out = _kernels.spectral_norm(M)
    return float(out) if np.ndim(out) == 0 else out


def det_norm_bound_check(A: np.ndarray, delta: float, rtol: float = 1e-12) -> bool:
    """Whether ``||A|| <= delta`` holds.

    Intended as a predicate on matrices with ``|Ae| >= |e|`` for all ``e`` and
    ``|det A| <= delta``: under that hypothesis every other singular value is
    at least one, so the largest one is at most ``|det A|``.  ``rtol`` absorbs
    rounding in the singular value computation.
    """
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    return bool(op_norm(A) <= delta * (1.0 + rtol))


# ---------------------------------------------------------------------------
# norm-ball sampling


def sphere_directions(n: int, m: int = 256) -> np.ndarray:
    """Quasi-uniform unit vectors closed under negation.

    n = 1 gives ``[[1], [-1]]``; n = 2 gives ``m`` equally spaced angles (``m``
    even); n >= 3 gives ``m/2`` Fibonacci-sphere points and their antipodes.
    """
    if n == 1:
        return np.array([[1.0], [-1.0]])
    if m % 2:
        raise ValueError("direction count must be even for symmetric closure")
    half = m // 2
    if n == 2:
        th = np.pi * np.arange(half) / half
        E = np.stack([np.cos(th), np.sin(th)], axis=1)
    else:
        E = _fibonacci_hemisphere(n, half)
    return np.concatenate([E, -E], axis=0)


def _fibonacci_hemisphere(n: int, count: int) -> np.ndarray:
    # spherical Fibonacci lattice on S^{n-1}; for n > 3 fall back to a fixed
    # low-discrepancy Gaussian draw (deterministic seed)
    if n == 3:
        i = np.arange(count) + 0.5
        z = 1.0 - i / count  # upper hemisphere
        r = np.sqrt(1.0 - z * z)
        phi = np.pi * (1.0 + 5 ** 0.5) * i
        E = np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
    else:
        rng = np.random.default_rng(20240517 + n)
        E = rng.standard_normal((count, n))
        E /= np.linalg.norm(E, axis=1, keepdims=True)
    return E


def half_directions(n: int, m: int = 256) -> np.ndarray:
    """One representative of each antipodal pair of :func:`sphere_directions`."""
    E = sphere_directions(n, m)
    return E[: max(1, E.shape[0] // 2)]


@dataclass(frozen=True)
class NormBallSample:
    """Boundary points ``x_i / rho(x_i)`` of the unit ball of a norm."""

    dim: int
    directions: np.ndarray
    radii: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.directions, dtype=float)
        r = np.asarray(self.radii, dtype=float)
        if d.ndim != 2 or d.shape[1] != self.dim or r.shape != (d.shape[0],):
            raise ValueError("directions must be (m, dim) and radii (m,)")
        if not np.all(np.isfinite(r)) or not np.all(r > 0):
            raise ValueError("radii must be positive and finite")
        if not np.allclose(np.linalg.norm(d, axis=1), 1.0, atol=1e-12, rtol=0):
            raise ValueError("directions must be unit vectors")

    @property
    def points(self) -> np.ndarray:
        return self.directions * self.radii[:, None]


def sample_norm_ball(rho: Callable[[np.ndarray], np.ndarray], n: int, m: int = 256) -> NormBallSample:
    """Evaluate a norm on :func:`sphere_directions` and record the boundary points.

    ``rho`` receives an ``(m, n)`` array of directions and returns ``(m,)``.
    """
    E = sphere_directions(n, m)
    vals = np.asarray(rho(E), dtype=float).reshape(-1)
    if not np.all(np.isfinite(vals)) or not np.all(vals > 0):
        raise ValueError("norm evaluator returned a nonpositive or non-finite value")
    return NormBallSample(n, E, 1.0 / vals)


# ---------------------------------------------------------------------------
# minimum-volume enclosing ellipsoids


@dataclass(frozen=True)
class EllipsoidFit:
    """Centered ellipsoid ``{x : |U x| <= 1}`` enclosing a point set.

    ``X`` is the weighted scatter matrix of the optimal design; ``mmax`` and
    ``mmin`` are the extremes of ``y^T X^{-1} y`` over the points.
    """

    U: np.ndarray
    X: np.ndarray
    mmax: float
    mmin: float
    iterations: int
    method: str


def _canonical_pairs(points: np.ndarray) -> np.ndarray:
    # one representative per +-pair: flip so the first significant entry is positive
    P = np.asarray(points, dtype=float)
    lead = np.argmax(np.abs(P) > 1e-14 * np.abs(P).max(axis=1, keepdims=True), axis=1)
    sign = np.sign(P[np.arange(P.shape[0]), lead])
    sign[sign == 0] = 1.0
    Q = P * sign[:, None]
    _, keep = np.unique(np.round(Q, 12), axis=0, return_index=True)
    return Q[np.sort(keep)]


def khachiyan_mvee(points: np.ndarray, tol: float = 1e-7, max_iter: int = 200000) -> EllipsoidFit:
    """Reference centered MVEE by barycentric coordinate ascent with away steps.

    Slow but simple; used to cross-check :func:`mvee`.
    """
    Y = _canonical_pairs(points)
    m, n = Y.shape
    u = np.full(m, 1.0 / m)
    X = (Y * u[:, None]).T @ Y
    for it in range(max_iter):
        Xi = np.linalg.inv(X)
        M = np.einsum("ij,jk,ik->i", Y, Xi, Y)
        j = int(np.argmax(M))
        if M[j] <= n * (1.0 + tol):
            break
        supp = np.nonzero(u > 0)[0]
        k = supp[np.argmin(M[supp])]
        if n - M[k] > M[j] - n:
            # away step: shrink weight of the least useful support point
            drop = -u[k] / (1.0 - u[k])
            # for M[k] <= 1 the objective decreases all the way down to the drop step
            step = drop if M[k] <= 1.0 else max((M[k] - n) / (n * (M[k] - 1.0)), drop)
            idx = k
        else:
            step = (M[j] - n) / (n * (M[j] - 1.0))
            idx = j
        u *= 1.0 - step
        u[idx] += step
        u[u < 0] = 0.0
        X = (Y * u[:, None]).T @ Y
    else:
        raise FittingError(f"reference MVEE did not converge in {max_iter} iterations")
    Xi = np.linalg.inv(X)
    M = np.einsum("ij,jk,ik->i", Y, Xi, Y)
    U = spd_power(0.5 * (Xi + Xi.T) / M.max(), 0.5, check=False)
    return EllipsoidFit(U, X, float(M.max()), float(M.min()), it, "khachiyan")


def mvee(points: np.ndarray, tol: float = 1e-7, method: str = "barrier", max_iter: int = 400) -> EllipsoidFit:
    """Centered minimum-volume ellipsoid enclosing ``+-points``.

    Parameters
    ----------
    points : ndarray (m, n)
    tol : float
        Stop once ``max_i y_i^T X^{-1} y_i <= n (1 + tol)``.
    method : {"barrier", "khachiyan"}
        Dual log-barrier Newton (default) or the reference coordinate-ascent
        iteration.

    Returns
    -------
    EllipsoidFit
        ``U`` is scaled so that every point satisfies ``|U y| <= 1`` exactly.
        If the barrier iteration fails to reach ``tol`` the reference iteration
        is used instead and ``method`` reports it.

    Raises
    ------
    FittingError
        If the reference iteration does not converge either.
    """
    if method == "khachiyan":
        return khachiyan_mvee(points, tol)
    if method != "barrier":
        raise ValueError(f"unknown MVEE method {method!r}")
    Y = _canonical_pairs(points)
    L, mmax, mmin, iters = _kernels.mvee_batch(Y[None], tol, max_iter)
    if iters[0] < 0:
        # the barrier Newton system stalls near tol ~ 1e-8; finish with the slow iteration
        return khachiyan_mvee(points, tol)
    X = L[0] @ L[0].T
    Xi = np.linalg.inv(X)
    U = spd_power(0.5 * (Xi + Xi.T) / mmax[0], 0.5, check=False)
    return EllipsoidFit(U, X, float(mmax[0]), float(mmin[0]), int(iters[0]), "barrier")


@dataclass(frozen=True)
class JohnFit:
    """John-ellipsoid representation of a norm.

    Attributes
    ----------
    V : ndarray
        ``sqrt(n) U`` for the enclosing ellipsoid ``{|U e| <= 1}``.
    V_tight : ndarray
        Smallest multiple of ``U`` with ``|V e| >= rho(e)`` on every sample.
    ratios : ndarray
        ``|V_tight x_i| / rho(x_i)`` per sampled direction, all in ``[1, sqrt(n)]``
        up to the fitting tolerance.
    """

    V: np.ndarray
    V_tight: np.ndarray
    ratios: np.ndarray
    sample: NormBallSample
    fit: EllipsoidFit

    @property
    def sandwich_ratio(self) -> float:
        return float(self.ratios.max())


def john_fit(rho: Callable[[np.ndarray], np.ndarray], n: int, m: int = 256, tol: float = 1e-7,
             method: str = "barrier") -> JohnFit:
    """Fit the John ellipsoid of the unit ball of ``rho`` from ``m`` directions."""
    if m < 2 * n * n and n > 1:
        raise ValueError(f"need at least 2 n^2 = {2 * n * n} directions, got {m}")
    sample = sample_norm_ball(rho, n, m)
    pts = sample.points
    fit = mvee(pts, tol=tol, method=method)
    Xi = np.linalg.inv(fit.X)
    Xi = 0.5 * (Xi + Xi.T)
    V = np.sqrt(n) * fit.U
    V_tight = spd_power(Xi / fit.mmin, 0.5, check=False)
    ratios = np.linalg.norm(sample.directions @ V_tight.T, axis=1) * sample.radii
    return JohnFit(V, V_tight, ratios, sample, fit)


def john_ellipsoid(rho: Callable[[np.ndarray], np.ndarray], n: int, m: int = 256, tol: float = 1e-7) -> np.ndarray:
    """Matrix ``V = sqrt(n) U`` with ``rho(e) <= |V e| <= sqrt(n) rho(e)`` on samples."""
    return john_fit(rho, n, m, tol).V


def john_batch(rho_vals: np.ndarray, E: np.ndarray, tol: float = 1e-7) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Tight John matrices for many norms sampled on shared directions.

    Parameters
    ----------
    rho_vals : ndarray (b, m)
        Norm values on the directions ``E``; one representative per antipodal
        pair suffices.
    E : ndarray (m, n)

    Returns
    -------
    V_tight : ndarray (b, n, n)
    ratio : ndarray (b,)
        Worst sampled sandwich ratio ``sqrt(mmax / mmin)``.
    iterations : ndarray (b,)
    """
    Ys = E[None, :, :] / rho_vals[:, :, None]
    L, mmax, mmin, iters = _kernels.mvee_batch(Ys, tol)
    if np.any(iters < 0):
        bad = int(np.argmax(iters < 0))
        raise FittingError(f"MVEE did not converge for batch entry {bad}")
    X = np.einsum("bij,bkj->bik", L, L)
    V = spd_power(X, -0.5, check=False) / np.sqrt(mmin)[:, None, None]
    return V, np.sqrt(mmax / mmin), iters
