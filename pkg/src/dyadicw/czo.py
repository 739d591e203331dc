"""Matrix-kernelled singular integrals on the dyadic grid of [0, 1).

Kernels have the form ``k(x - y) A`` with a scalar profile ``k`` and a fixed
matrix ``A``. Fields are cell averages at resolution ``L`` (cell width
``h = 2^-L``); the discrete operator returns cell averages of ``Tf``::

    (Tf)_j = h^{-1} sum_k  int_{cell j} int_{cell k} k(x - y) dy dx  A f_k

restricted to cell pairs whose centres are more than ``eps`` apart. The odd
profile ``1/(x - y)`` uses the midpoint rule off the diagonal, which makes
``(Tf)_j = sum_{|j-k| h > eps} A f_k / (j - k)``; symmetric stencils then
cancel exactly. The integrable profile ``|x - y|^{-1/2}`` uses exact cell-pair
integrals and needs no truncation. Application is an FFT convolution.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import toeplitz
from scipy.signal import fftconvolve

from .dyadic import DyadicCube, VectorField, haar_function
from .errors import ConfigError, DimensionError, ResolutionError
from .fit import SlopeFit, fit_log2
from .operators import weighted_lp_norm
from .weights import MatrixWeight

ODD = "inverse_difference"
ROOT = "inverse_sqrt_distance"
KERNELS = (ODD, ROOT)
ANTIDIAGONAL = np.array([[0.0, 1.0], [1.0, 0.0]])


@dataclass(frozen=True, eq=False)
class MatrixKernel:
    """Kernel ``k(x - y) A``; ``profile`` is :data:`ODD` or :data:`ROOT`."""

    profile: str
    A: np.ndarray = field(default_factory=lambda: ANTIDIAGONAL.copy())

    def __post_init__(self):
        if self.profile not in KERNELS:
            raise ConfigError(f"kernel profile must be one of {KERNELS}, got {self.profile!r}")
        A = np.array(self.A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise DimensionError(f"kernel matrix must be square, got shape {A.shape}")
        A.setflags(write=False)
        object.__setattr__(self, "A", A)

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    @property
    def singular(self) -> bool:
        return self.profile == ODD

    def default_eps(self, resolution: int) -> float:
        """``2h`` for the singular profile, no truncation for the integrable one."""
        return 2.0 ** (1 - resolution) if self.singular else 0.0

    def stencil(self, resolution: int, eps: float | None = None) -> np.ndarray:
        """Scalar weights ``c_d`` for offsets ``d = -(N-1) .. N-1`` (index ``d + N - 1``)."""
        h = 2.0 ** -resolution
        eps = self.default_eps(resolution) if eps is None else float(eps)
        if eps < 0:
            raise ResolutionError(f"truncation eps must be nonnegative, got {eps}")
        if self.singular and eps < h:
            raise ResolutionError(
                f"truncation eps={eps:g} is below the grid resolution h={h:g}; "
                "the odd kernel needs eps >= h")
        N = 1 << resolution
        d = np.arange(-(N - 1), N, dtype=float)
        keep = np.abs(d) * h > eps * (1 + 1e-12) if eps > 0 else np.ones(d.shape, bool)
        c = np.zeros(d.shape)
        if self.singular:
            nz = keep & (d != 0)
            c[nz] = 1.0 / d[nz]
        else:
            a = np.abs(d)
            # second difference of (4/3)|t|^{3/2}, divided by h
            c = (4.0 / 3.0) * np.sqrt(h) * (np.abs(a + 1) ** 1.5 - 2 * a ** 1.5 + np.abs(a - 1) ** 1.5)
            c[~keep] = 0.0
        return c


def inverse_difference_kernel(A=None) -> MatrixKernel:
    return MatrixKernel(ODD, ANTIDIAGONAL if A is None else A)


def kernel_from_config(cfg: dict | None) -> MatrixKernel:
    """``{"profile": ..., "A": [[...]]}``; the antidiagonal odd kernel by default."""
    cfg = dict(cfg or {})
    unknown = set(cfg) - {"profile", "A"}
    if unknown:
        raise ConfigError(f"unknown kernel field(s): {sorted(unknown)}")
    try:
        A = np.array(cfg.get("A", ANTIDIAGONAL), dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"kernel field 'A' is not a numeric matrix: {exc}") from None
    return MatrixKernel(cfg.get("profile", ODD), A)


def _check(kernel: MatrixKernel, f: VectorField) -> None:
    if kernel.dim != f.dim:
        raise DimensionError(f"kernel acts on dimension {kernel.dim}, field has dimension {f.dim}")


def czo_apply(kernel: MatrixKernel, f: VectorField, eps: float | None = None) -> VectorField:
    """Cell averages of ``T_eps f`` at the resolution of ``f``."""
    _check(kernel, f)
    L = f.resolution
    N = 1 << L
    c = kernel.stencil(L, eps)
    conv = fftconvolve(f.samples, c[:, None], axes=0)[N - 1:2 * N - 1]
    return VectorField(conv @ kernel.A.T)


def czo_matrix(kernel: MatrixKernel, resolution: int, eps: float | None = None) -> np.ndarray:
    """Dense scalar Toeplitz matrix of the stencil; the direct oracle for small grids."""
    N = 1 << resolution
    c = kernel.stencil(resolution, eps)
    return toeplitz(c[N - 1:], c[N - 1::-1])


# ---------------------------------------------------------------------------
# cancellation of T1


@dataclass(frozen=True)
class T1Row:
    resolution: int
    eps: float
    x: float
    value: float
    continuum: float


def t1_values(kernel: MatrixKernel, resolution: int, eps: float | None = None) -> np.ndarray:
    """``||T(chi_[0,1))||`` (matrix norm) in every cell; the scalar profile times ``||A||``."""
    N = 1 << resolution
    c = kernel.stencil(resolution, eps)
    s = fftconvolve(np.ones(N), c)[N - 1:2 * N - 1]
    return np.abs(s) * np.linalg.norm(kernel.A, 2)


def t1_cancellation(kernel: MatrixKernel, resolutions) -> tuple[list[T1Row], SlopeFit]:
    """``|T(chi_[0,1))|`` in the cell just right of 1/2 with ``eps = 2h``, per resolution.

    Symmetric stencils cancel, so what remains is the one-sided excess, which
    is linear in ``eps``. ``continuum`` is ``|log((1-x)/x)| ||A||`` at the cell
    midpoint ``x``. The fit is of ``log2 value`` against ``log2 eps``.
    """
    if not kernel.singular:
        raise ConfigError("the cancellation check applies to the odd kernel")
    rows = []
    nA = np.linalg.norm(kernel.A, 2)
    for L in resolutions:
        L = int(L)
        if L < 3:
            raise ResolutionError(f"cancellation check needs resolution >= 3, got {L}")
        h = 2.0 ** -L
        x = 0.5 + 0.5 * h
        v = t1_values(kernel, L)[1 << (L - 1)]
        rows.append(T1Row(L, 2 * h, x, float(v), float(abs(np.log((1 - x) / x)) * nA)))
    fit = fit_log2([np.log2(r.eps) for r in rows], [r.value for r in rows])
    return rows, fit


# ---------------------------------------------------------------------------
# weak boundedness


@dataclass(frozen=True)
class WeakBoundednessRow:
    level: int
    value: float
    cubes: int


def _sample_cubes(level: int, limit: int) -> list[int]:
    count = 1 << level
    if count <= limit:
        return list(range(count))
    return sorted({int(round(t)) for t in np.linspace(0, count - 1, limit)})


def pairing(kernel: MatrixKernel, cube: DyadicCube, resolution: int, eps: float | None = None) -> np.ndarray:
    """The matrix ``<T 1_I, 1_I>`` with entries ``int_I (T 1_I e_b)_a``."""
    N = 1 << resolution
    chi = np.zeros(N)
    chi[cube.cells(resolution)] = 1.0
    c = kernel.stencil(resolution, eps)
    s = fftconvolve(chi, c)[N - 1:2 * N - 1]
    scalar = float(np.sum(s[cube.cells(resolution)])) * 2.0 ** -resolution
    return scalar * kernel.A


def weak_boundedness_table(kernel: MatrixKernel, resolution: int, depth: int, eps: float | None = None,
                           cubes_per_level: int = 16) -> list[WeakBoundednessRow]:
    """Per level, the max over sampled cubes of ``|I|^{-1} ||<T 1_I, 1_I>||``.

    The sample includes the first and last cube of each level.
    """
    if depth > resolution - 2:
        raise ResolutionError(f"depth {depth} needs resolution >= {depth + 2}, got {resolution}")
    rows = []
    for j in range(depth + 1):
        ks = _sample_cubes(j, cubes_per_level)
        vals = [np.linalg.norm(pairing(kernel, DyadicCube(j, k), resolution, eps), 2) * 2.0 ** j for k in ks]
        rows.append(WeakBoundednessRow(j, float(max(vals)), len(ks)))
    return rows


def root_kernel_pairing_oracle(level: int, A=None) -> float:
    """``|I|^{-1} int_I int_I |x-y|^{-1/2} dx dy ||A|| = (8/3) |I|^{1/2} ||A||``."""
    nA = 1.0 if A is None else np.linalg.norm(np.asarray(A, float), 2)
    return (8.0 / 3.0) * 2.0 ** (-0.5 * level) * nA


# ---------------------------------------------------------------------------
# weighted growth


FAMILIES = ("indicator", "haar")


@dataclass
class WeightedGrowth:
    levels: list
    ratios: list
    witness: list
    fit: SlopeFit
    family: str


def _family_member(family: str, level: int, resolution: int, n: int, i: int) -> VectorField:
    cube = DyadicCube(level, 0)
    if family == "indicator":
        prof = np.zeros(1 << resolution)
        prof[cube.cells(resolution)] = 1.0
    else:
        prof = haar_function(cube, resolution)
    s = np.zeros((1 << resolution, n))
    s[:, i] = prof
    return VectorField(s)


def weighted_growth(kernel: MatrixKernel, W: MatrixWeight, p: float, levels, eps: float | None = None,
                    family: str = "indicator") -> WeightedGrowth:
    """``max_i ||T f||_{L^p(W)} / ||f||_{L^p(W)}`` for ``f`` concentrated on ``[0, 2^-k)`` along ``e_i``.

    ``family`` chooses ``f = chi_{[0,2^-k)} e_i`` or ``f = h_{[0,2^-k)} e_i``.
    Returns the per-level ratios and a log2 slope fit against ``k``.
    """
    if family not in FAMILIES:
        raise ConfigError(f"family must be one of {FAMILIES}, got {family!r}")
    if W.dim != kernel.dim:
        raise DimensionError(f"weight dimension {W.dim} differs from kernel dimension {kernel.dim}")
    L = W.resolution
    levels = [int(k) for k in levels]
    if max(levels) > L - 4:
        raise ResolutionError(f"level {max(levels)} needs weight resolution >= {max(levels) + 4}, got {L}")
    ratios, witness = [], []
    for k in levels:
        best, arg = -1.0, 0
        for i in range(kernel.dim):
            f = _family_member(family, k, L, kernel.dim, i)
            r = weighted_lp_norm(W, p, czo_apply(kernel, f, eps)) / weighted_lp_norm(W, p, f)
            if r > best:
                best, arg = r, i
        ratios.append(float(best))
        witness.append(arg)
    return WeightedGrowth(levels, ratios, witness, fit_log2(levels, ratios), family)
