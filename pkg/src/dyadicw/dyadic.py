"""Dyadic intervals of [0, 1), Haar expansions and square functions.

Functions are piecewise constant at resolution ``2**-L`` and stored as cell
arrays of shape ``(2**L, ...)``.  Haar spectra are stored level-ordered: the
coefficient of the cube ``(j, k)`` lives at flat index ``2**j - 1 + k``.  All
integrals reduce to finite sums, so Parseval and reconstruction hold up to
floating-point accumulation only.
"""

from __future__ import annotations

from collections.abc import Callable, Iterator, Mapping
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import DimensionError, IncompleteMapError, ResolutionError

MAX_LEVEL = 30


def flat_index(level: int, index: int) -> int:
    """Position of cube ``(level, index)`` in a level-ordered array."""
    return (1 << level) - 1 + index


def level_slice(level: int) -> slice:
    """Slice selecting all cubes of one level in a level-ordered array."""
    return slice((1 << level) - 1, (1 << (level + 1)) - 1)


def n_cubes(depth: int) -> int:
    """Number of cubes with level <= depth."""
    return (1 << (depth + 1)) - 1


@dataclass(frozen=True, order=True)
class DyadicCube:
    """The interval ``[k 2^-j, (k+1) 2^-j)``."""

    level: int
    index: int

    def __post_init__(self):
        if self.level < 0 or self.level > MAX_LEVEL:
            raise ResolutionError(f"level {self.level} outside [0, {MAX_LEVEL}]")
        if not 0 <= self.index < (1 << self.level):
            raise ValueError(f"index {self.index} outside [0, 2^{self.level})")

    @classmethod
    def root(cls) -> "DyadicCube":
        return cls(0, 0)

    @classmethod
    def from_flat(cls, i: int) -> "DyadicCube":
        level = int(i + 1).bit_length() - 1
        return cls(level, i + 1 - (1 << level))

    @property
    def flat(self) -> int:
        return flat_index(self.level, self.index)

    @property
    def length(self) -> float:
        return 2.0 ** -self.level

    @property
    def start(self) -> float:
        return self.index * 2.0 ** -self.level

    @property
    def end(self) -> float:
        return (self.index + 1) * 2.0 ** -self.level

    def children(self, max_level: int | None = None) -> tuple["DyadicCube", "DyadicCube"]:
        return children(self, max_level)

    def parent(self) -> "DyadicCube":
        if self.level == 0:
            raise ValueError("the root cube has no parent")
        return DyadicCube(self.level - 1, self.index // 2)

    def contains(self, other: "DyadicCube") -> bool:
        """True when ``other`` is a (non-strict) dyadic subcube."""
        if other.level < self.level:
            return False
        return other.index >> (other.level - self.level) == self.index

    def cells(self, resolution: int) -> slice:
        """Cell range covered by the cube at the given resolution."""
        if self.level > resolution:
            raise ResolutionError(f"cube level {self.level} finer than resolution {resolution}")
        width = 1 << (resolution - self.level)
        return slice(self.index * width, (self.index + 1) * width)

    def descendants(self, depth: int) -> Iterator["DyadicCube"]:
        """All subcubes (including self) with level <= depth."""
        for j in range(self.level, depth + 1):
            shift = j - self.level
            for k in range(self.index << shift, (self.index + 1) << shift):
                yield DyadicCube(j, k)


def children(cube: DyadicCube, max_level: int | None = None) -> tuple[DyadicCube, DyadicCube]:
    """Left and right halves of ``cube``.

    Raises
    ------
    ResolutionError
        If the children would lie below ``max_level``.
    """
    limit = MAX_LEVEL if max_level is None else max_level
    if cube.level + 1 > limit:
        raise ResolutionError(f"cannot split level {cube.level}: maximum level is {limit}")
    j = cube.level + 1
    return DyadicCube(j, 2 * cube.index), DyadicCube(j, 2 * cube.index + 1)


def iter_cubes(depth: int, root: DyadicCube | None = None) -> Iterator[DyadicCube]:
    """Cubes below ``root`` (default [0,1)) in level order, levels <= depth."""
    root = DyadicCube.root() if root is None else root
    return root.descendants(depth)


def _resolution_of(n_cells: int) -> int:
    L = int(n_cells).bit_length() - 1
    if n_cells <= 0 or (1 << L) != n_cells:
        raise ResolutionError(f"cell count {n_cells} is not a power of two")
    return L


@dataclass(frozen=True, eq=False)
class VectorField:
    """Piecewise-constant vector-valued function on [0, 1).

    Parameters
    ----------
    samples : array_like, shape (2**L, n) or (2**L,)
        Cell values.  One-dimensional input is read as n = 1.
    """

    samples: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.samples)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2:
            raise DimensionError(f"vector field samples must be 2-d, got shape {arr.shape}")
        _resolution_of(arr.shape[0])
        if not np.iscomplexobj(arr):
            arr = arr.astype(float, copy=False)
        arr = np.array(arr, copy=True)
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    @property
    def resolution(self) -> int:
        return _resolution_of(self.samples.shape[0])

    @classmethod
    def constant(cls, value, resolution: int) -> "VectorField":
        v = np.atleast_1d(np.asarray(value, dtype=float))
        return cls(np.tile(v, (1 << resolution, 1)))

    @classmethod
    def from_haar(cls, mean, coeffs, resolution: int) -> "VectorField":
        return cls(inverse_haar(mean, coeffs, resolution))

    def refine(self, resolution: int) -> "VectorField":
        """Same function sampled at a finer resolution."""
        if resolution < self.resolution:
            raise ResolutionError("refine cannot coarsen a field")
        return VectorField(np.repeat(self.samples, 1 << (resolution - self.resolution), axis=0))

    def mean(self) -> np.ndarray:
        return self.samples.mean(axis=0)

    def mean_free(self) -> "VectorField":
        return VectorField(self.samples - self.mean())

    def __add__(self, other: "VectorField") -> "VectorField":
        return VectorField(self.samples + other.samples)

    def __sub__(self, other: "VectorField") -> "VectorField":
        return VectorField(self.samples - other.samples)

    def __mul__(self, scalar) -> "VectorField":
        return VectorField(self.samples * scalar)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class MatrixSymbol:
    """Piecewise-constant ``n x n`` matrix-valued function on [0, 1)."""

    samples: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.samples)
        if arr.ndim == 1:
            arr = arr[:, None, None]
        if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
            raise DimensionError(f"matrix symbol samples must have shape (2**L, n, n), got {arr.shape}")
        _resolution_of(arr.shape[0])
        if not np.iscomplexobj(arr):
            arr = arr.astype(float, copy=False)
        arr = np.array(arr, copy=True)
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    @property
    def resolution(self) -> int:
        return _resolution_of(self.samples.shape[0])

    def refine(self, resolution: int) -> "MatrixSymbol":
        if resolution < self.resolution:
            raise ResolutionError("refine cannot coarsen a symbol")
        return MatrixSymbol(np.repeat(self.samples, 1 << (resolution - self.resolution), axis=0))

    def adjoint(self) -> "MatrixSymbol":
        return MatrixSymbol(np.conj(np.swapaxes(self.samples, 1, 2)))

    def mean(self) -> np.ndarray:
        return self.samples.mean(axis=0)


Field = Union[VectorField, MatrixSymbol]


def level_means(samples: np.ndarray, level: int) -> np.ndarray:
    """Averages of a cell array over every cube of one level."""
    L = _resolution_of(samples.shape[0])
    if level > L:
        raise ResolutionError(f"level {level} finer than resolution {L}")
    return samples.reshape((1 << level, 1 << (L - level)) + samples.shape[1:]).mean(axis=1)


def all_means(samples: np.ndarray, depth: int) -> np.ndarray:
    """Level-ordered averages ``m_I`` for all cubes with level <= depth."""
    L = _resolution_of(samples.shape[0])
    if depth > L:
        raise ResolutionError(f"depth {depth} finer than resolution {L}")
    out = np.empty((n_cubes(depth),) + samples.shape[1:], dtype=samples.dtype)
    cur = level_means(samples, depth)
    for j in range(depth, -1, -1):
        out[level_slice(j)] = cur
        if j:
            cur = 0.5 * (cur[0::2] + cur[1::2])
    return out


def haar_transform(samples: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Mean and level-ordered Haar coefficients of a cell array.

    Returns
    -------
    mean : ndarray, shape samples.shape[1:]
    coeffs : ndarray, shape (2**L - 1,) + samples.shape[1:]
        ``coeffs[flat(I)] = integral of f * h_I`` for all cubes with level < L.
    """
    samples = np.asarray(samples)
    L = _resolution_of(samples.shape[0])
    coeffs = np.empty((max((1 << L) - 1, 0),) + samples.shape[1:], dtype=np.result_type(samples, float))
    cur = samples.astype(coeffs.dtype, copy=False)
    for j in range(L - 1, -1, -1):
        left, right = cur[0::2], cur[1::2]
        coeffs[level_slice(j)] = (left - right) * (0.5 * 2.0 ** (-0.5 * j))
        cur = 0.5 * (left + right)
    return cur[0].copy(), coeffs


def inverse_haar(mean, coeffs: np.ndarray, resolution: int) -> np.ndarray:
    """Cell array from a mean and level-ordered Haar coefficients.

    Coefficients beyond ``2**resolution - 1`` entries must not be supplied;
    a shorter array is read as zero on the missing (finer) levels.
    """
    coeffs = np.asarray(coeffs)
    mean = np.asarray(mean)
    if coeffs.shape[0] > (1 << resolution) - 1:
        raise ResolutionError("more Haar coefficients than the resolution supports")
    cur = mean[None].astype(np.result_type(mean, coeffs, float))
    for j in range(resolution):
        sl = level_slice(j)
        if sl.start < coeffs.shape[0]:
            c = coeffs[sl] * 2.0 ** (0.5 * j)
        else:
            c = np.zeros_like(cur)
        nxt = np.empty((2 * cur.shape[0],) + cur.shape[1:], dtype=cur.dtype)
        nxt[0::2] = cur + c
        nxt[1::2] = cur - c
        cur = nxt
    return cur


def haar_function(cube: DyadicCube, resolution: int) -> np.ndarray:
    """Cell samples of ``h_I = |I|^{-1/2} (chi_left - chi_right)``."""
    if cube.level >= resolution:
        raise ResolutionError("a Haar function needs resolution above its level")
    out = np.zeros(1 << resolution)
    sl = cube.cells(resolution)
    half = (sl.stop - sl.start) // 2
    amp = 2.0 ** (0.5 * cube.level)
    out[sl.start:sl.start + half] = amp
    out[sl.start + half:sl.stop] = -amp
    return out


def haar_coefficient(f: Field, cube: DyadicCube):
    """``f_I = integral of f h_I``, exact from cell sums."""
    L = f.resolution
    if cube.level >= L:
        raise ResolutionError(f"Haar coefficient at level {cube.level} needs resolution > {cube.level}, have {L}")
    sl = cube.cells(L)
    vals = f.samples[sl]
    half = vals.shape[0] // 2
    scale = 2.0 ** (0.5 * cube.level) * 2.0 ** -L
    return scale * (vals[:half].sum(axis=0) - vals[half:].sum(axis=0))


def average(f: Field, cube: DyadicCube):
    """``m_I f``, the mean of ``f`` over the cube."""
    L = f.resolution
    if cube.level > L:
        raise ResolutionError(f"average at level {cube.level} needs resolution >= {cube.level}, have {L}")
    return f.samples[cube.cells(L)].mean(axis=0)


CubeMap = Union[None, np.ndarray, Mapping, Callable]


def as_level_array(V: CubeMap, depth: int, n: int) -> np.ndarray:
    """Normalise a cube-indexed matrix map to a level-ordered array.

    ``V`` may be None (identity), a level-ordered array, a mapping from
    :class:`DyadicCube` to matrices, or a callable on cubes.  The result covers
    all cubes with level < depth.
    """
    count = (1 << depth) - 1
    if V is None:
        return np.broadcast_to(np.eye(n), (count, n, n))
    if isinstance(V, np.ndarray):
        if V.shape[0] < count:
            raise IncompleteMapError(f"map covers {V.shape[0]} cubes, need {count}")
        return V[:count]
    out = np.empty((count, n, n), dtype=float)
    for i in range(count):
        cube = DyadicCube.from_flat(i)
        if isinstance(V, Mapping):
            if cube not in V:
                raise IncompleteMapError(f"missing matrix for cube {cube}")
            out[i] = V[cube]
        else:
            out[i] = V(cube)
    return out


def square_function(f: VectorField, V: CubeMap = None, depth: int | None = None) -> np.ndarray:
    """Weighted dyadic square function.

    Returns the cell array of
    ``S(x) = (sum_{level(I) < depth} |V_I f_I|^2 |I|^{-1} chi_I(x))^{1/2}``
    at the resolution of ``f``.
    """
    L = f.resolution
    depth = L if depth is None else depth
    if depth > L:
        raise ResolutionError(f"depth {depth} exceeds resolution {L}")
    _, coeffs = haar_transform(f.samples)
    Vs = as_level_array(V, depth, f.dim)
    acc = np.zeros(1 << L)
    for j in range(depth):
        sl = level_slice(j)
        c = coeffs[sl]
        vc = np.einsum("kab,kb->ka", Vs[sl], c) if V is not None else c
        e = (np.abs(vc) ** 2).sum(axis=1) * 2.0 ** j
        acc += np.repeat(e, 1 << (L - j))
    return np.sqrt(acc)


def lp_norm(g: Union[VectorField, np.ndarray], p: float) -> float:
    """``(sum_cells |g|^p 2^-L)^{1/p}`` with the Euclidean norm on vectors."""
    if not p > 1:
        raise ValueError(f"p must exceed 1, got {p}")
    samples = g.samples if isinstance(g, VectorField) else np.asarray(g)
    if samples.ndim == 1:
        mags = np.abs(samples)
    else:
        mags = np.sqrt((np.abs(samples) ** 2).sum(axis=1))
    return float(np.mean(mags ** p) ** (1.0 / p))
