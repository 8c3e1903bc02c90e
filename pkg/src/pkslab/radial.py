"""Radial finite-volume meshes, density/pressure fields and quadrature.

Everything downstream works on cell averages over spherical shells in
``n`` dimensions.  Shell volumes are exact, so ``sum(rho * volumes)`` is the
mass of the piecewise-constant reconstruction with no quadrature error.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


def unit_ball_volume(n: int) -> float:
    """Volume of the unit ball in R^n, pi^(n/2) / Gamma(n/2 + 1)."""
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1)


@dataclass(frozen=True)
class RadialGrid:
    n_dim: int
    r_max: float
    cells: int
    dr: float = field(init=False)
    omega_n: float = field(init=False)
    faces: np.ndarray = field(init=False, repr=False)
    centers: np.ndarray = field(init=False, repr=False)
    face_areas: np.ndarray = field(init=False, repr=False)
    cell_volumes: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        n = self.n_dim
        dr = self.r_max / self.cells
        wn = unit_ball_volume(n)
        faces = np.arange(self.cells + 1) * dr
        # faces[-1] is forced to r_max so the volumes telescope exactly
        faces[-1] = self.r_max
        centers = (np.arange(self.cells) + 0.5) * dr
        areas = n * wn * faces ** (n - 1)
        vols = wn * np.diff(faces**n)
        for arr in (faces, centers, areas, vols):
            arr.setflags(write=False)
        object.__setattr__(self, "dr", dr)
        object.__setattr__(self, "omega_n", wn)
        object.__setattr__(self, "faces", faces)
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "face_areas", areas)
        object.__setattr__(self, "cell_volumes", vols)

    @property
    def total_volume(self) -> float:
        return self.omega_n * self.r_max**self.n_dim

    def integrate(self, values) -> float:
        """Integral of a cell-wise constant function over the ball."""
        return float(np.dot(values, self.cell_volumes))

    def same_as(self, other: "RadialGrid") -> bool:
        return (self.n_dim, self.r_max, self.cells) == (other.n_dim, other.r_max, other.cells)


def make_grid(n_dim: int, r_max: float, cells: int) -> RadialGrid:
    if int(n_dim) != n_dim or n_dim < 3:
        raise ValueError(f"n_dim must be an integer >= 3, got {n_dim}")
    if not r_max > 0:
        raise ValueError(f"r_max must be positive, got {r_max}")
    if int(cells) != cells or cells < 1:
        raise ValueError(f"cells must be a positive integer, got {cells}")
    return RadialGrid(int(n_dim), float(r_max), int(cells))


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class DensityField:
    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self):
        vals = _frozen(self.values)
        if vals.shape != (self.grid.cells,):
            raise ValueError(f"expected {self.grid.cells} cell values, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("density values must be finite")
        if np.any(vals < 0):
            raise ValueError(f"density must be non-negative (min {vals.min():.3e})")
        object.__setattr__(self, "values", vals)

    @property
    def mass(self) -> float:
        return self.grid.integrate(self.values)

    def scaled(self, c: float) -> "DensityField":
        return DensityField(self.grid, c * self.values)


@dataclass(frozen=True)
class PressureField:
    grid: RadialGrid
    values: np.ndarray
    exponent: float

    def __post_init__(self):
        vals = _frozen(self.values)
        if vals.shape != (self.grid.cells,):
            raise ValueError(f"expected {self.grid.cells} cell values, got shape {vals.shape}")
        if np.any(vals < 0) or not np.all(np.isfinite(vals)):
            raise ValueError("pressure must be finite and non-negative")
        object.__setattr__(self, "values", vals)


def density_profile(grid: RadialGrid, func) -> DensityField:
    """Sample ``func(r)`` at cell centers."""
    return DensityField(grid, np.asarray(func(grid.centers), dtype=float))


def pressure_from_density(rho: DensityField, m: float) -> PressureField:
    if not m > 1:
        raise ValueError(f"exponent m must exceed 1, got {m}")
    return PressureField(rho.grid, m / (m - 1) * rho.values ** (m - 1), float(m))


def density_from_pressure(p: PressureField) -> DensityField:
    m = p.exponent
    return DensityField(p.grid, ((m - 1) / m * p.values) ** (1.0 / (m - 1)))


def lp_norm(f, p: float, grid: RadialGrid | None = None) -> float:
    """L^p norm of a cell-wise constant field; ``p=inf`` is the max over cells.

    ``f`` may be a field object or a bare array together with ``grid``.
    """
    if grid is None:
        grid = f.grid
    vals = np.abs(np.asarray(getattr(f, "values", f), dtype=float))
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    if math.isinf(p):
        return float(vals.max()) if vals.size else 0.0
    return grid.integrate(vals**p) ** (1.0 / p)


def excess_above_one(rho: DensityField) -> float:
    """L^2 norm of the positive part of rho - 1."""
    return lp_norm(np.maximum(rho.values - 1.0, 0.0), 2, rho.grid)
