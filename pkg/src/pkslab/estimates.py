"""Monitored functionals: free energy, dissipation, Aronson-Benilan quantity,
pressure-gradient norms, complementarity residual and support radii.

All discrete operators use the same face/cell geometry as the solver.  The
Laplacian of a cell field has zero flux through r = 0 and r = r_max.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from typing import Callable, Optional, Sequence

import numpy as np

from .potential import cumulative_mass, gradient_from_mass, potential_cell_average
from .radial import (DensityField, PressureField, RadialGrid, excess_above_one,
                     lp_norm, pressure_from_density)


@dataclass(frozen=True)
class EstimateReport:
    t: float
    mass: float
    lq_1: float
    lq_2: float
    lq_mp1: float  # ||rho||_{m+1}
    lq_inf: float
    excess_l2: float
    energy: float
    dissipation: float
    omega_neg_l1: float
    omega_neg_l3_cubed: float
    gradP_l2: float
    gradP_l3: float
    comp_residual: float
    support_radius: float
    barrier_radius: float

    @property
    def lq_norms(self) -> dict:
        return {1: self.lq_1, 2: self.lq_2, "m+1": self.lq_mp1, math.inf: self.lq_inf}

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def as_dict(self) -> dict:
        return asdict(self)

    def all_finite(self) -> bool:
        return all(math.isfinite(v) for v in asdict(self).values())


def _face_diff(grid: RadialGrid, values) -> np.ndarray:
    """(f_{i+1} - f_i)/dr on the interior faces 1..cells-1."""
    return np.diff(np.asarray(values, dtype=float)) / grid.dr


def radial_laplacian(grid: RadialGrid, values) -> np.ndarray:
    flux = np.zeros(grid.cells + 1)
    flux[1:-1] = grid.face_areas[1:-1] * _face_diff(grid, values)
    return np.diff(flux) / grid.cell_volumes


def free_energy(rho: DensityField, m: float) -> float:
    """1/(m-1) int rho^m + 1/2 int rho N*rho."""
    g = rho.grid
    entropy = g.integrate(rho.values**m) / (m - 1)
    interaction = 0.5 * g.integrate(rho.values * potential_cell_average(rho))
    return entropy + interaction


def _drift_faces(rho: DensityField) -> np.ndarray:
    return gradient_from_mass(rho.grid, cumulative_mass(rho))[1:-1]


def dissipation(rho: DensityField, m: float) -> float:
    """int rho |grad(P + N*rho)|^2 with the outer cell as the upwind density."""
    g = rho.grid
    p = pressure_from_density(rho, m).values
    vel = _face_diff(g, p) + _drift_faces(rho)
    return float(np.sum(rho.values[1:] * vel**2 * g.face_areas[1:-1]) * g.dr)


def pair_dissipation(rho: DensityField, p: PressureField) -> float:
    """Same sum as ``dissipation`` but with a given pressure, e.g. a limit pair."""
    if not rho.grid.same_as(p.grid):
        raise ValueError("density and pressure live on different grids")
    g = rho.grid
    vel = _face_diff(g, p.values) + _drift_faces(rho)
    return float(np.sum(rho.values[1:] * vel**2 * g.face_areas[1:-1]) * g.dr)


def ab_quantities(rho: DensityField, p: PressureField):
    """omega = lap P + rho per cell, with ||omega_-||_1 and ||omega_-||_3^3."""
    if not rho.grid.same_as(p.grid):
        raise ValueError("density and pressure live on different grids")
    g = rho.grid
    omega = radial_laplacian(g, p.values) + rho.values
    neg = np.maximum(-omega, 0.0)
    return omega, g.integrate(neg), g.integrate(neg**3)


def gradP_norms(p: PressureField):
    """L^2 and L^3 norms of the face-difference pressure gradient."""
    g = p.grid
    grad = np.abs(_face_diff(g, p.values))
    w = g.face_areas[1:-1] * g.dr
    return float(np.sum(grad**2 * w)) ** 0.5, float(np.sum(grad**3 * w)) ** (1 / 3)


def default_test_profile(r, r_max: float):
    return np.clip(1.0 - (np.asarray(r) / r_max) ** 2, 0.0, None) ** 2


def complementarity_residual(rho: DensityField, p: PressureField,
                             test_profile: Optional[Callable] = None) -> float:
    """Weak pairing sum P * (lap P + rho) * zeta over cells."""
    g = rho.grid
    if test_profile is None:
        zeta = default_test_profile(g.centers, g.r_max)
    else:
        zeta = np.asarray(test_profile(g.centers), dtype=float)
    omega = ab_quantities(rho, p)[0]
    return g.integrate(p.values * omega * zeta)


def support_radius(rho: DensityField, tol: float = 1e-10) -> float:
    idx = np.nonzero(np.asarray(rho.values) > tol)[0]
    return float(rho.grid.faces[idx[-1] + 1]) if idx.size else 0.0


def barrier_radius(t: float, r0: float, drift_sup: float, n: int, a: float) -> float:
    """Exponential support barrier (r0 + n d/A) e^{A t/n} - n d/A."""
    if r0 <= 0 or a < 1 or drift_sup < 0:
        raise ValueError("barrier needs r0 > 0, A >= 1 and drift_sup >= 0")
    shift = n * drift_sup / a
    return (r0 + shift) * math.exp(a * t / n) - shift


def dtP_l1(snapshots: Sequence) -> float:
    """Sum over consecutive snapshots of int |P(t_{k+1}) - P(t_k)|.

    ``snapshots`` holds ``(t, PressureField)`` pairs on one grid.
    """
    if len(snapshots) < 2:
        raise ValueError("need at least two snapshots")
    total = 0.0
    for (_, a), (_, b) in zip(snapshots[:-1], snapshots[1:]):
        total += a.grid.integrate(np.abs(b.values - a.values))
    return total


def make_report(t: float, rho: DensityField, m: float, *, barrier: float = math.nan,
                support_tol: float = 1e-10, test_profile=None) -> EstimateReport:
    g = rho.grid
    p = pressure_from_density(rho, m)
    _, neg1, neg3 = ab_quantities(rho, p)
    gp2, gp3 = gradP_norms(p)
    return EstimateReport(
        t=float(t), mass=rho.mass,
        lq_1=lp_norm(rho, 1), lq_2=lp_norm(rho, 2), lq_mp1=lp_norm(rho, m + 1),
        lq_inf=lp_norm(rho, math.inf),
        excess_l2=excess_above_one(rho),
        energy=free_energy(rho, m), dissipation=dissipation(rho, m),
        omega_neg_l1=neg1, omega_neg_l3_cubed=neg3,
        gradP_l2=gp2, gradP_l3=gp3,
        comp_residual=complementarity_residual(rho, p, test_profile),
        support_radius=support_radius(rho, support_tol),
        barrier_radius=float(barrier))
