"""Discretized elements of the state space H."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

WEIGHTS = ("lebesgue", "gamma")


class ShapeError(ValueError):
    """Raised when two objects live on incompatible grids."""


@dataclass(frozen=True)
class Grid:
    """Uniform tensor grid, or a plain coordinate space when ``axes`` is None.

    ``axes`` holds one ``(lower, upper, count)`` triple per dimension.  The
    ``gamma`` weight is ``1 - exp(-y**2)`` and is only meaningful in 1-d.
    """

    axes: tuple[tuple[float, float, int], ...] | None = None
    size_: int | None = None
    weight: str = "lebesgue"

    def __post_init__(self):
        if self.weight not in WEIGHTS:
            raise ValueError(f"unknown weight {self.weight!r}")
        if self.axes is None:
            if self.size_ is None or self.size_ < 1:
                raise ValueError("finite-dimensional grid needs size_ >= 1")
            return
        for lo, hi, n in self.axes:
            if n < 2:
                raise ValueError("point count must be >= 2 per dimension")
            if not hi > lo:
                raise ValueError("grid spacing must be positive")
        if self.weight == "gamma" and len(self.axes) != 1:
            raise ValueError("gamma weight is defined on the half-line only")

    @classmethod
    def finite(cls, n: int) -> "Grid":
        return cls(axes=None, size_=n)

    @classmethod
    def uniform(cls, lower: float, upper: float, count: int, dim: int = 1,
                weight: str = "lebesgue") -> "Grid":
        return cls(axes=tuple((float(lower), float(upper), int(count)) for _ in range(dim)),
                   weight=weight)

    @property
    def is_finite(self) -> bool:
        return self.axes is None

    @property
    def dim(self) -> int:
        return 0 if self.axes is None else len(self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        if self.axes is None:
            return (self.size_,)
        return tuple(n for _, _, n in self.axes)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def h(self) -> float:
        """Spacing of the first axis (all axes share it in practice)."""
        if self.axes is None:
            return 1.0
        lo, hi, n = self.axes[0]
        return (hi - lo) / (n - 1)

    def axis_nodes(self, k: int = 0) -> np.ndarray:
        lo, hi, n = self.axes[k]
        return np.linspace(lo, hi, n)

    @cached_property
    def points(self) -> np.ndarray:
        """Node coordinates, shape ``(size, dim)``; flattened in C order."""
        if self.axes is None:
            raise ShapeError("finite-dimensional grid has no node coordinates")
        mesh = np.meshgrid(*[self.axis_nodes(k) for k in range(self.dim)], indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    @cached_property
    def quad_weights(self) -> np.ndarray:
        """Per-node weights ``w_j h^d`` of the discrete inner product."""
        if self.axes is None:
            return np.ones(self.size_)
        cell = float(np.prod([(hi - lo) / (n - 1) for lo, hi, n in self.axes]))
        if self.weight == "gamma":
            y = self.points[:, 0]
            return -np.expm1(-y * y) * cell
        return np.full(self.size, cell)

    def inner(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Weighted inner product along the last axis (broadcasts)."""
        return np.sum(u * v * self.quad_weights, axis=-1)

    def discretize(self, fn) -> "GridFunction":
        """Sample ``fn(points)`` (points of shape ``(size, dim)``) on the grid."""
        return GridFunction(np.asarray(fn(self.points), dtype=float), self)


@dataclass(frozen=True, eq=False)
class GridFunction:
    values: np.ndarray
    grid: Grid

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).reshape(-1)
        if v.size != self.grid.size:
            raise ShapeError(f"{v.size} values for a grid of size {self.grid.size}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def _check(self, other: "GridFunction"):
        if other.grid != self.grid:
            raise ShapeError("grid mismatch")

    def inner(self, other: "GridFunction") -> float:
        self._check(other)
        return float(self.grid.inner(self.values, other.values))

    def norm(self) -> float:
        return float(np.sqrt(max(self.inner(self), 0.0)))

    def __add__(self, other: "GridFunction") -> "GridFunction":
        self._check(other)
        return GridFunction(self.values + other.values, self.grid)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        self._check(other)
        return GridFunction(self.values - other.values, self.grid)

    def __mul__(self, c: float) -> "GridFunction":
        return GridFunction(self.values * float(c), self.grid)

    __rmul__ = __mul__

    def __neg__(self) -> "GridFunction":
        return GridFunction(-self.values, self.grid)

    def __repr__(self):
        return f"GridFunction(size={self.values.size}, weight={self.grid.weight})"


def vector(values) -> GridFunction:
    """Element of the finite-dimensional space R^n."""
    v = np.atleast_1d(np.asarray(values, dtype=float))
    return GridFunction(v, Grid.finite(v.size))
