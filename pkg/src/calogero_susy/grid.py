"""Uniform staggered grids on the Jacobi box ``[-L, L]**d``."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .model import SingularGeometry, singular_distance

__all__ = ["Grid", "Grid2D", "Grid3D", "build_grid"]

MIN_POINTS = 16


@dataclass(frozen=True)
class Grid:
    """Cell-centred grid: node ``i`` sits at ``-L + (i + 1/2) h`` on every axis.

    With ``n`` even the origin is a cell corner, so no node lies on a
    coincidence plane through the origin.
    """

    half_width: float
    points_per_axis: int
    dim: int = 2
    offset: bool = True

    def __post_init__(self):
        if not self.half_width > 0:
            raise ValueError("half_width must be positive")
        if self.points_per_axis < MIN_POINTS:
            raise ValueError(f"points_per_axis must be >= {MIN_POINTS}")
        if self.points_per_axis % 2:
            raise ValueError("points_per_axis must be even so the origin is not a node")
        if self.dim not in (2, 3):
            raise ValueError("dim must be 2 or 3")
        if not self.offset:
            raise ValueError("only the staggered layout is supported")

    @property
    def n(self) -> int:
        return self.points_per_axis

    @property
    def h(self) -> float:
        return 2.0 * self.half_width / self.points_per_axis

    @cached_property
    def axis(self) -> np.ndarray:
        return -self.half_width + (np.arange(self.n) + 0.5) * self.h

    @cached_property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.axis[:-1] + self.axis[1:])

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.dim

    @property
    def size(self) -> int:
        return self.n**self.dim

    def points(self) -> np.ndarray:
        """Node coordinates, shape ``shape + (dim,)`` (C order, axis 0 slowest)."""
        mesh = np.meshgrid(*([self.axis] * self.dim), indexing="ij")
        return np.stack(mesh, axis=-1)

    def flat_points(self) -> np.ndarray:
        return self.points().reshape(-1, self.dim)

    def min_singular_distance(self, geometry: SingularGeometry | None = None) -> float:
        geometry = geometry or SingularGeometry.for_particles(self.dim + 1)
        return float(singular_distance(self.flat_points(), geometry).min())

    def clearance_ratio(self, geometry: SingularGeometry | None = None) -> float:
        """Reported constant ``c`` with ``min |f| = c h`` over the nodes."""
        return self.min_singular_distance(geometry) / self.h


class Grid2D(Grid):
    def __init__(self, half_width: float, points_per_axis: int, offset: bool = True):
        super().__init__(half_width, points_per_axis, 2, offset)


class Grid3D(Grid):
    def __init__(self, half_width: float, points_per_axis: int, offset: bool = True):
        super().__init__(half_width, points_per_axis, 3, offset)


def build_grid(L: float, n: int, dim: int = 2) -> Grid:
    """Staggered grid with ``n`` nodes per axis on ``[-L, L]**dim``."""
    return Grid2D(L, n) if dim == 2 else Grid3D(L, n)
