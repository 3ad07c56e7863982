"""
Dense linear algebra, activations and seeded randomness.

Every other module builds on the handful of helpers here. Vectors and
matrices are plain float64 numpy arrays in row-major (C) order; the helpers
validate shape and finiteness at the boundaries and stay out of the way
inside hot loops.

Example:
    >>> from steadyrnn.linalg import Rng, as_matrix, matvec
    >>> matvec(as_matrix([[1, 2], [3, 4]]), [1, 1])
    array([3., 7.])
    >>> Rng(7).child(0).normal(3).shape
    (3,)
"""

from __future__ import annotations

from typing import Sequence, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray

from steadyrnn._util import DataError, ParameterError, ShapeError


Vector = NDArray[np.float64]
Matrix = NDArray[np.float64]

# exp() overflows float64 just past 709
_EXP_CLIP = 500.0


def as_vector(values: ArrayLike, name="vector") -> Vector:
    """Coerce to a finite, nonempty 1-D float64 array."""
    arr = np.ascontiguousarray(values, dtype=np.float64)
    if arr.ndim != 1 or arr.shape[0] == 0:
        raise ShapeError("{} must be 1-D and nonempty, got shape {}".format(name, arr.shape))
    if not np.all(np.isfinite(arr)):
        raise DataError("{} contains non-finite entries".format(name))
    return arr


def as_matrix(values: ArrayLike, name="matrix") -> Matrix:
    """Coerce to a finite, nonempty 2-D float64 array in row-major order."""
    arr = np.ascontiguousarray(values, dtype=np.float64)
    if arr.ndim != 2 or arr.size == 0:
        raise ShapeError("{} must be 2-D and nonempty, got shape {}".format(name, arr.shape))
    if not np.all(np.isfinite(arr)):
        raise DataError("{} contains non-finite entries".format(name))
    return arr


def identity(n: int) -> Matrix:
    """n × n identity matrix."""
    return np.eye(n, dtype=np.float64)


def matvec(m: Matrix, v: ArrayLike) -> NDArray[np.float64]:
    """
    Matrix-vector product ``m @ v``.

    ``v`` may carry leading batch axes (shape ``(..., cols)``); the product is
    applied to the last axis and the result has shape ``(..., rows)``.

    Raises:
        ShapeError: When ``m.cols`` differs from the length of ``v``.
    """
    v = np.asarray(v, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeError("matvec needs a 2-D matrix, got shape {}".format(m.shape))
    if v.ndim == 0 or v.shape[-1] != m.shape[1]:
        length = v.shape[-1] if v.ndim else 0
        raise ShapeError(
            "matvec dimension mismatch: matrix has {} columns, vector has length {}".format(
                m.shape[1], length)
        )
    return v @ m.T


def sigmoid(v: ArrayLike) -> NDArray[np.float64]:
    """Elementwise logistic function; saturates instead of overflowing."""
    v = np.asarray(v, dtype=np.float64)
    return 1.0 / (1.0 + np.exp(-np.clip(v, -_EXP_CLIP, _EXP_CLIP)))


def tanh(v: ArrayLike) -> NDArray[np.float64]:
    """Elementwise hyperbolic tangent."""
    return np.tanh(np.asarray(v, dtype=np.float64))


def norm(v: ArrayLike, axis=-1) -> NDArray[np.float64]:
    """Euclidean norm along ``axis``."""
    v = np.asarray(v, dtype=np.float64)
    return np.sqrt(np.sum(v * v, axis=axis))


class Rng:
    """
    Splittable, counter-based random stream.

    Wraps numpy's Philox bit generator, whose output for a given key is the
    same on every platform. A stream is identified by ``(seed, key)``;
    ``child(*path)`` derives an independent stream without touching the
    parent, so stochastic operations take an explicit stream instead of
    sharing one across threads.

    Attributes:
        seed (int): Root seed (64-bit unsigned).
        key (tuple): Path of child indices from the root stream.
    """

    def __init__(self, seed: int, key: Sequence[int] = ()):
        seed = int(seed)
        if seed < 0 or seed >= 2 ** 64:
            raise ParameterError("seed must be a 64-bit unsigned integer, got {}".format(seed))
        self.seed = seed
        self.key = tuple(int(k) for k in key)
        seq = np.random.SeedSequence(entropy=seed, spawn_key=self.key)
        self._gen = np.random.Generator(np.random.Philox(seq))

    def child(self, *path: int) -> "Rng":
        """Derive an independent stream; the parent's state is untouched."""
        return Rng(self.seed, self.key + tuple(path))

    def split(self, count: int) -> list["Rng"]:
        """Derive ``count`` independent child streams."""
        return [self.child(i) for i in range(count)]

    def normal(self, size: Union[int, tuple[int, ...]], mean=0.0, std=1.0) -> NDArray[np.float64]:
        """Gaussian draws; ``std`` may be zero."""
        if std < 0:
            raise ParameterError("std must be >= 0, got {}".format(std))
        draws = self._gen.standard_normal(size)
        return mean + std * draws

    def uniform(self, size: Union[int, tuple[int, ...]], low=0.0, high=1.0) -> NDArray[np.float64]:
        """Uniform draws on ``[low, high)``."""
        return self._gen.uniform(low, high, size)

    def permutation(self, n: int) -> NDArray[np.int64]:
        """Random permutation of ``range(n)``."""
        return self._gen.permutation(n)

    def __repr__(self):
        return "Rng(seed={}, key={})".format(self.seed, self.key)


def gaussian(rng: Rng, n: int, mean=0.0, std=1.0) -> Vector:
    """
    ``n`` Gaussian draws from ``rng``.

    With ``std == 0`` every entry equals ``mean`` exactly.

    Raises:
        ParameterError: When ``std`` is negative or ``n`` is not positive.
    """
    if std < 0:
        raise ParameterError("std must be >= 0, got {}".format(std))
    if n <= 0:
        raise ParameterError("n must be positive, got {}".format(n))
    if std == 0:
        return np.full(n, float(mean), dtype=np.float64)
    return rng.normal(n, mean, std)
