"""Newtonian potential of radial densities.

For a radial density the field follows from the enclosed mass alone,
``u(r) = M(r) / |dB_r|``, so no Poisson solve is needed.  ``u`` is the
outward radial derivative of ``phi = N * rho`` and is non-negative; the
attraction on a particle is ``-u`` (inward).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .radial import DensityField, RadialGrid

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PotentialData:
    grid: RadialGrid
    cum_mass: np.ndarray  # at faces, cum_mass[0] = 0
    grad: np.ndarray  # at faces, grad[0] = 0
    value: np.ndarray  # at cell centers


def cumulative_mass(rho) -> np.ndarray:
    """Enclosed mass at every face, starting with 0 at r = 0."""
    grid = rho.grid
    out = np.zeros(grid.cells + 1)
    np.cumsum(np.asarray(rho.values) * grid.cell_volumes, out=out[1:])
    return out


def gradient_from_mass(grid: RadialGrid, cum_mass: np.ndarray) -> np.ndarray:
    u = np.zeros_like(cum_mass)
    u[1:] = cum_mass[1:] / grid.face_areas[1:]
    return u


def potential_gradient(rho: DensityField) -> np.ndarray:
    """Radial derivative of the potential at faces (u >= 0 for rho >= 0)."""
    return gradient_from_mass(rho.grid, cumulative_mass(rho))


def far_field(mass: float, r, n: int, omega_n: float):
    return -mass / (n * (n - 2) * omega_n * np.asarray(r, dtype=float) ** (n - 2))


def _integral_of_gradient(grid, cum_mass, rho_vals, r_lo, r_hi):
    """Exact integral of u over [r_lo, r_hi] inside cells with constant density.

    Inside cell k, M(r) = M_k + rho_k * omega * (r^n - r_k^n).
    """
    n, wn = grid.n_dim, grid.omega_n
    rk = grid.faces[:-1]
    c = cum_mass[:-1] - rho_vals * wn * rk**n
    return (c / (n * wn) * (r_hi ** (2 - n) - r_lo ** (2 - n)) / (2 - n)
            + rho_vals * (r_hi**2 - r_lo**2) / (2 * n))


def _potential_faces_centers(rho: DensityField, cum_mass=None):
    grid = rho.grid
    if cum_mass is None:
        cum_mass = cumulative_mass(rho)
    vals = np.asarray(rho.values)
    n = grid.n_dim
    rk, rk1, rc = grid.faces[:-1], grid.faces[1:], grid.centers
    # r_k = 0 for the first cell: the 1/r^(n-2) term has zero coefficient there
    with np.errstate(divide="ignore", invalid="ignore"):
        lower = _integral_of_gradient(grid, cum_mass, vals, np.where(rk > 0, rk, 1.0), rc)
        upper = _integral_of_gradient(grid, cum_mass, vals, rc, rk1)
    lower[0] = vals[0] * rc[0] ** 2 / (2 * n)
    phi_faces = np.empty(grid.cells + 1)
    phi_faces[-1] = far_field(cum_mass[-1], grid.r_max, n, grid.omega_n)
    phi_faces[:-1] = phi_faces[-1] - np.cumsum((lower + upper)[::-1])[::-1]
    phi_centers = phi_faces[1:] - upper
    return phi_faces, phi_centers


def _warn_if_support_near_edge(rho: DensityField):
    nz = np.nonzero(rho.values)[0]
    if nz.size and rho.grid.faces[nz[-1] + 1] > 0.9 * rho.grid.r_max:
        logger.warning("density support reaches the outer 10%% of the domain; "
                       "far-field anchor of the potential is inexact")


def potential_value(rho: DensityField) -> np.ndarray:
    """Potential at cell centers, anchored to the point-mass far field at r_max."""
    _warn_if_support_near_edge(rho)
    return _potential_faces_centers(rho)[1]


def potential_cell_average(rho: DensityField) -> np.ndarray:
    """Shell average of the potential over each cell (Simpson in r^(n-1) dr)."""
    grid = rho.grid
    faces, centers = _potential_faces_centers(rho)
    n = grid.n_dim
    rk, rk1, rc = grid.faces[:-1], grid.faces[1:], grid.centers
    integral = grid.dr / 6 * (faces[:-1] * rk ** (n - 1) + 4 * centers * rc ** (n - 1)
                              + faces[1:] * rk1 ** (n - 1))
    return n * grid.omega_n * integral / grid.cell_volumes


def potential_data(rho: DensityField) -> PotentialData:
    cm = cumulative_mass(rho)
    _warn_if_support_near_edge(rho)
    return PotentialData(rho.grid, cm, gradient_from_mass(rho.grid, cm),
                         _potential_faces_centers(rho, cm)[1])


def h_minus_one_distance(rho1: DensityField, rho2: DensityField) -> float:
    """Homogeneous H^-1 distance, the L^2 norm of the field of rho1 - rho2."""
    m1, m2 = rho1.mass, rho2.mass
    if abs(m1 - m2) > 1e-8 * max(abs(m1), abs(m2)):
        raise ValueError(f"H^-1 distance needs equal masses, got {m1!r} and {m2!r}")
    grid = rho1.grid
    dmass = np.cumsum((rho1.values - rho2.values) * grid.cell_volumes)
    # differences of enclosed mass are formed before dividing by the face area
    u = dmass / grid.face_areas[1:]
    return float(np.sqrt(np.sum(u**2 * grid.face_areas[1:]) * grid.dr))
