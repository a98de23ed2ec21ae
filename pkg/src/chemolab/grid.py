"""Cell-centered rectangular grid, scalar fields and Neumann stencils.

Arrays are stored with shape ``(ny, nx)``: axis 0 runs along y, axis 1 along
x, so a C-order flatten is row-major by y then x.  Cell ``(j, i)`` has its
center at ``((i + 1/2) hx, (j + 1/2) hy)``.

Homogeneous Neumann data is imposed with ghost cells that mirror the boundary
cell (``f[-1] = f[0]``), which makes the boundary face difference vanish and
the 5-point Laplacian symmetric and conservative.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .errors import InvalidInput


@dataclass(frozen=True)
class Grid:
    nx: int
    ny: int
    lx: float = 1.0
    ly: float = 1.0

    def __post_init__(self):
        if int(self.nx) != self.nx or int(self.ny) != self.ny:
            raise InvalidInput("nx and ny must be integers")
        if self.nx < 4 or self.ny < 4:
            raise InvalidInput(f"grid needs at least 4 cells per axis, got {self.nx}x{self.ny}")
        if not (math.isfinite(self.lx) and math.isfinite(self.ly)) or self.lx <= 0 or self.ly <= 0:
            raise InvalidInput("domain side lengths must be positive and finite")

    @property
    def hx(self) -> float:
        return self.lx / self.nx

    @property
    def hy(self) -> float:
        return self.ly / self.ny

    @property
    def cell_area(self) -> float:
        return self.hx * self.hy

    @property
    def area(self) -> float:
        return self.lx * self.ly

    @property
    def diam(self) -> float:
        return math.sqrt(self.lx**2 + self.ly**2)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    @property
    def size(self) -> int:
        return self.nx * self.ny

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(X, Y)`` arrays of cell-center coordinates, each ``(ny, nx)``."""
        x = (np.arange(self.nx) + 0.5) * self.hx
        y = (np.arange(self.ny) + 0.5) * self.hy
        return np.meshgrid(x, y, indexing="xy")


@dataclass(frozen=True)
class ScalarField:
    """Immutable cell-centered data on a :class:`Grid`."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        a = np.array(self.values, dtype=float)
        if a.size != self.grid.size:
            raise InvalidInput(f"field has {a.size} values, grid needs {self.grid.size}")
        a = a.reshape(self.grid.shape)
        if not np.all(np.isfinite(a)):
            raise InvalidInput("field contains non-finite values")
        a.flags.writeable = False
        object.__setattr__(self, "values", a)

    @classmethod
    def constant(cls, grid: Grid, c: float) -> "ScalarField":
        return cls(grid, np.full(grid.shape, float(c)))

    @classmethod
    def from_function(cls, grid: Grid, fn: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> "ScalarField":
        X, Y = grid.centers()
        return cls(grid, np.broadcast_to(fn(X, Y), grid.shape))

    def with_values(self, values: np.ndarray) -> "ScalarField":
        return ScalarField(self.grid, values)

    def min(self) -> float:
        return float(self.values.min())

    def max(self) -> float:
        return float(self.values.max())

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


@dataclass(frozen=True)
class AnchoredField(ScalarField):
    """A field stored as ``anchor + dev``.

    ``values`` holds the rounded sum, so code that ignores the anchor sees the
    ordinary field.  Code working close to the anchor reads ``dev`` instead,
    which keeps full relative precision where ``values - anchor`` would cancel.
    """

    anchor: float = 0.0
    dev: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        super().__post_init__()
        d = np.array(self.dev, dtype=float).reshape(self.grid.shape)
        if not np.all(np.isfinite(d)) or not math.isfinite(self.anchor):
            raise InvalidInput("anchored field contains non-finite values")
        d.flags.writeable = False
        object.__setattr__(self, "dev", d)

    @classmethod
    def from_dev(cls, grid: Grid, anchor: float, dev: np.ndarray) -> "AnchoredField":
        dev = np.asarray(dev, dtype=float)
        return cls(grid, anchor + dev, float(anchor), dev)

    @classmethod
    def anchor_at(cls, f: ScalarField, anchor: float) -> "AnchoredField":
        return cls.from_dev(f.grid, anchor, deviation(f, anchor))


def deviation(f: ScalarField, ref: float) -> np.ndarray:
    """``f - ref`` evaluated without cancellation when ``f`` is anchored near ``ref``."""
    if isinstance(f, AnchoredField):
        return f.dev if f.anchor == ref else f.dev + (f.anchor - ref)
    return f.values - ref


def fine_values(f: ScalarField) -> np.ndarray:
    """Array whose differences equal those of ``f`` at full precision."""
    return f.dev if isinstance(f, AnchoredField) else f.values


# Array-level kernels; the solvers call these directly to avoid re-validating
# fields inside iterative loops.

def _integrate(a: np.ndarray, grid: Grid) -> float:
    return grid.cell_area * float(np.sum(a))


def _face_diff_x(a: np.ndarray, hx: float) -> np.ndarray:
    """Differences across x-faces, shape ``(ny, nx + 1)``; boundary faces are 0."""
    g = np.zeros((a.shape[0], a.shape[1] + 1))
    g[:, 1:-1] = (a[:, 1:] - a[:, :-1]) / hx
    return g


def _face_diff_y(a: np.ndarray, hy: float) -> np.ndarray:
    g = np.zeros((a.shape[0] + 1, a.shape[1]))
    g[1:-1, :] = (a[1:, :] - a[:-1, :]) / hy
    return g


def _laplacian(a: np.ndarray, hx: float, hy: float) -> np.ndarray:
    gx = _face_diff_x(a, hx)
    gy = _face_diff_y(a, hy)
    return (gx[:, 1:] - gx[:, :-1]) / hx + (gy[1:, :] - gy[:-1, :]) / hy


def _gradient(a: np.ndarray, hx: float, hy: float) -> tuple[np.ndarray, np.ndarray]:
    # centered difference == mean of the two adjacent face differences
    gx = _face_diff_x(a, hx)
    gy = _face_diff_y(a, hy)
    return 0.5 * (gx[:, 1:] + gx[:, :-1]), 0.5 * (gy[1:, :] + gy[:-1, :])


def integrate(f: ScalarField) -> float:
    """Midpoint rule: ``hx * hy * sum(values)``."""
    return _integrate(f.values, f.grid)


def laplacian_neumann(f: ScalarField) -> ScalarField:
    g = f.grid
    return ScalarField(g, _laplacian(f.values, g.hx, g.hy))


def face_gradients(f: ScalarField) -> tuple[np.ndarray, np.ndarray]:
    """Two-point differences on x-faces ``(ny, nx+1)`` and y-faces ``(ny+1, nx)``.

    Boundary faces carry exactly zero (mirrored ghost cells).
    """
    g = f.grid
    return _face_diff_x(f.values, g.hx), _face_diff_y(f.values, g.hy)


def gradient_centered(f: ScalarField) -> tuple[ScalarField, ScalarField]:
    g = f.grid
    gx, gy = _gradient(f.values, g.hx, g.hy)
    return ScalarField(g, gx), ScalarField(g, gy)


@functools.lru_cache(maxsize=8)
def laplacian_matrix(grid: Grid) -> sp.csr_matrix:
    """Sparse Neumann 5-point Laplacian matching :func:`laplacian_neumann`."""

    def lap1d(m, h):
        d = np.full(m, -2.0)
        d[0] = d[-1] = -1.0
        off = np.ones(m - 1)
        return sp.diags([off, d, off], [-1, 0, 1]) / h**2

    # x is the fastest-varying index of the flattened (ny, nx) layout
    return sp.kronsum(lap1d(grid.nx, grid.hx), lap1d(grid.ny, grid.hy), format="csr")
