"""m-sweeps, log-log rate fits and the explicit incompressible-limit objects."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .estimates import (EstimateReport, ab_quantities, barrier_radius,
                        complementarity_residual, dtP_l1, make_report, support_radius)
from .evolve import EvolutionState, EvolveOptions, SolverError, evolve
from .potential import h_minus_one_distance, potential_value
from .radial import (DensityField, PressureField, RadialGrid, density_profile, make_grid,
                     pressure_from_density)
from .stationary import (alpha_bound, limit_radius, resample, rstar_bound, sampled_pressure,
                         solve_for_mass, uv_trajectory)

logger = logging.getLogger(__name__)


class FloorLimited(ValueError):
    """A quantity fell to the discretisation floor, so no rate can be fitted."""


def fit_rate(xs: Sequence[float], ys: Sequence[float], floor: float = 0.0):
    """Least-squares slope of log(y - floor) against log(x), with its r^2."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float) - floor
    if xs.size < 4:
        raise ValueError(f"rate fits need at least 4 points, got {xs.size}")
    if np.any(ys <= 0):
        raise FloorLimited(f"values at or below the floor {floor:.3e}: {ys + floor}")
    lx, ly = np.log(xs), np.log(ys)
    slope, icpt = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + icpt)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), r2


def patch_pressure(R: float, n: int, grid: RadialGrid) -> PressureField:
    """Limit pressure (R^2 - r^2)_+ / (2n) of a ball patch, sampled at cell centers."""
    if R >= grid.r_max:
        raise ValueError("patch radius must be inside the domain")
    vals = np.clip(R**2 - grid.centers**2, 0.0, None) / (2 * n)
    return PressureField(grid, vals, math.inf)


def patch_density(R: float, grid: RadialGrid) -> DensityField:
    return density_profile(grid, lambda r: (r < R).astype(float))


def stationary_limit_pressure(M: float, grid: RadialGrid) -> PressureField:
    """(-N*chi - C)_+ for the ball of volume M, with C fixed by P(R(M)) = 0."""
    n = grid.n_dim
    R = limit_radius(M, n)
    phi = potential_value(patch_density(R, grid))
    # C = -phi(R) for the exact potential of the unit-density ball
    c = R**2 / (n * (n - 2))
    return PressureField(grid, np.clip(-phi - c, 0.0, None), math.inf)


def patch_floors(R: float, grid: RadialGrid) -> dict:
    """Per-quantity discretisation floors from the exact patch pair on ``grid``."""
    rho = patch_density(R, grid)
    p = patch_pressure(R, grid.n_dim, grid)
    _, neg1, neg3 = ab_quantities(rho, p)
    return {
        "excess_l2": 0.0,
        "omega_neg_l1": neg1,
        "omega_neg_l3_cubed": neg3,
        "comp_residual": abs(complementarity_residual(rho, p)),
    }


@dataclass
class BumpData:
    amplitude: float = 0.5
    radius: float = 1.0

    def __call__(self, r):
        return self.amplitude * np.clip(1.0 - (np.asarray(r) / self.radius) ** 2, 0.0, None) ** 2


@dataclass
class EvolutionSweepConfig:
    n_dim: int = 3
    r_max: float = 2.0
    cells: int = 2048
    snapshots: int = 10
    initial: Callable = field(default_factory=BumpData)
    support_tol: float = 1e-10
    cfl_diffusion: float = 0.25
    cfl_advection: float = 0.5

    def grid(self) -> RadialGrid:
        return make_grid(self.n_dim, self.r_max, self.cells)


@dataclass
class RunSummary:
    m: float
    reports: list
    audit: object = None
    dtP_l1: float = math.nan
    omega_neg_l3_spacetime: float = math.nan
    energy_slack: list = field(default_factory=list)
    failure: Optional[str] = None
    wall_time: float = math.nan  # seconds; kept out of serialized summaries
    final_density: Optional[DensityField] = field(default=None, repr=False)

    @property
    def final(self) -> EstimateReport:
        return self.reports[-1]


@dataclass
class SweepResult:
    m_values: list
    per_m: dict
    fitted_slopes: dict  # name -> (slope, r2) or None when floor-limited/absent
    references: dict
    notes: dict = field(default_factory=dict)


def _energy_slack(reports):
    """F(t_{k+1}) - F(t_k) - (1e-8 + 10 dt D(t_k)) per snapshot interval dt.

    A value <= 0 means the interval is dissipative within tolerance.
    """
    out = []
    for k in range(len(reports) - 1):
        dt = reports[k + 1].t - reports[k].t
        tol = 1e-8 + 10 * dt * reports[k].dissipation
        out.append(reports[k + 1].energy - reports[k].energy - tol)
    return out


def run_one(rho0: DensityField, m: float, t_end: float, snapshots: int = 10, *,
            support_tol: float = 1e-10, cfl_diffusion: float = 0.25,
            cfl_advection: float = 0.5) -> RunSummary:
    """Evolve one density to t_end and evaluate every monitored quantity at uniform snapshots."""
    grid = rho0.grid
    times = np.linspace(0.0, t_end, snapshots + 1)
    opts = EvolveOptions(t_end=t_end, snapshot_times=times, cfl_diffusion=cfl_diffusion,
                         cfl_advection=cfl_advection)
    t0 = time.perf_counter()
    res = evolve(EvolutionState(0.0, rho0, m), opts)
    wall = time.perf_counter() - t0
    audit = res.audit
    r0 = 2 * support_radius(rho0, support_tol)
    a = max(audit.max_density, 1.0)
    reports = [make_report(t, rho, m, support_tol=support_tol,
                           barrier=barrier_radius(t, r0, audit.max_drift, grid.n_dim, a))
               for t, rho in res.snapshots]
    pressures = [(t, pressure_from_density(rho, m)) for t, rho in res.snapshots]
    w3 = np.array([r.omega_neg_l3_cubed for r in reports])
    spacetime = float(np.sum(0.5 * (w3[1:] + w3[:-1]) * np.diff(times)))
    return RunSummary(m, reports, audit, dtP_l1(pressures), spacetime,
                      _energy_slack(reports), wall_time=wall, final_density=res.final.rho)


EVOLUTION_FITS = ("excess_l2", "omega_neg_l3_cubed", "gradP_l3", "dtP_l1",
                  "omega_neg_l1", "comp_residual")
# quantities fitted after subtracting the patch floor; the rest are boundedness checks
FLOORED = ("excess_l2", "omega_neg_l3_cubed")


def _value(run: RunSummary, name: str) -> float:
    return run.dtP_l1 if name == "dtP_l1" else getattr(run.final, name)


def _fit_all(m_values, runs, names, floors):
    slopes = {}
    ok = [m for m in m_values if runs[m].failure is None]
    for name in names:
        if len(ok) < 4:
            slopes[name] = None
            continue
        ys = [abs(_value(runs[m], name)) for m in ok]
        try:
            slopes[name] = fit_rate(ok, ys, floors.get(name, 0.0) if name in FLOORED else 0.0)
        except FloorLimited as exc:
            logger.info("%s: %s", name, exc)
            slopes[name] = None
    return slopes


def run_evolution_sweep(base: EvolutionSweepConfig, m_values: Sequence[float],
                        t_end: float, rho0: DensityField | None = None) -> SweepResult:
    """Evolve shared initial data for each m and fit decay rates of the monitored norms.

    ``rho0`` overrides ``base.initial`` and must live on ``base.grid()``.
    """
    m_values = sorted(float(m) for m in m_values)
    grid = base.grid()
    if rho0 is None:
        rho0 = density_profile(grid, base.initial)
    elif not rho0.grid.same_as(grid):
        raise ValueError("rho0 is not on the sweep grid")
    runs = {}
    for m in m_values:
        try:
            runs[m] = run_one(rho0, m, t_end, base.snapshots, support_tol=base.support_tol,
                              cfl_diffusion=base.cfl_diffusion,
                              cfl_advection=base.cfl_advection)
        except SolverError as exc:
            logger.error("m=%g failed: %s", m, exc)
            runs[m] = RunSummary(m, [], failure=str(exc))
    R = limit_radius(rho0.mass, grid.n_dim)
    floors = patch_floors(R, grid) if R < grid.r_max else {}
    slopes = _fit_all(m_values, runs, EVOLUTION_FITS, floors)
    refs = {"limit_radius": R, "initial_mass": rho0.mass,
            "patch_center_pressure": R**2 / (2 * grid.n_dim), "floors": floors}
    return SweepResult(m_values, runs, slopes, refs)


@dataclass
class StationarySummary:
    m: float
    alpha: float
    support_radius: float
    mass: float
    radius_gap: float
    l1_to_patch: float
    pressure_gap: float  # sup |P_m - P_inf|
    omega_neg_l3_cubed: float
    alpha_ok: bool
    alpha_pow_ok: bool
    uv_ok: bool
    support_ok: bool


def stationary_summary(M: float, n: int, m: float, grid: RadialGrid,
                       dr_ode: float | None = None) -> StationarySummary:
    prof = solve_for_mass(M, m, n, dr_ode)
    rho = resample(prof, grid)
    p = sampled_pressure(prof, grid)
    R = limit_radius(M, n)
    patch = patch_density(R, grid)
    p_inf = stationary_limit_pressure(M, grid)
    a_max, apow_max = alpha_bound(M, n)
    return StationarySummary(
        m=m, alpha=prof.alpha, support_radius=prof.support_radius, mass=prof.mass,
        radius_gap=abs(prof.support_radius - R),
        l1_to_patch=grid.integrate(np.abs(rho.values - patch.values)),
        pressure_gap=float(np.max(np.abs(p.values - p_inf.values))),
        omega_neg_l3_cubed=ab_quantities(rho, p)[2],
        alpha_ok=prof.alpha <= a_max,
        alpha_pow_ok=prof.alpha ** (m - 1) <= apow_max,
        uv_ok=uv_trajectory(prof).all_flags,
        support_ok=prof.support_radius <= rstar_bound(M, n))


def run_stationary_sweep(M: float, n: int, m_values: Sequence[float], *,
                         cells: int = 2048, r_max: float | None = None) -> SweepResult:
    m_values = sorted(float(m) for m in m_values)
    if m_values and m_values[0] < 3:
        raise ValueError("stationary sweeps need m >= 3")
    R = limit_radius(M, n)
    grid = make_grid(n, r_max if r_max is not None else 2.0 * max(R, 1.0) * 1.5, cells)
    per_m = {m: stationary_summary(M, n, m, grid) for m in m_values}
    floors = patch_floors(R, grid)
    slopes = {}
    for name in ("omega_neg_l3_cubed", "l1_to_patch", "radius_gap"):
        if len(m_values) < 4:
            slopes[name] = None
            continue
        ys = [getattr(per_m[m], name) for m in m_values]
        try:
            slopes[name] = fit_rate(m_values, ys, floors.get(name, 0.0))
        except FloorLimited:
            slopes[name] = None
    refs = {"limit_radius": R, "rstar": rstar_bound(M, n), "alpha_bound": alpha_bound(M, n),
            "floors": floors, "mass": M}
    return SweepResult(m_values, per_m, slopes, refs)


def uniqueness_probe(rho_a: DensityField, rho_b: DensityField, m: float, t_end: float,
                     snapshots: int = 20):
    """H^-1 distance between two evolutions at common snapshot times.

    Returns (series, red_flag); the flag is set when the final distance exceeds
    ten times the initial one.
    """
    h_minus_one_distance(rho_a, rho_b)  # mass check up front
    times = np.linspace(0.0, t_end, snapshots + 1)
    opts = EvolveOptions(t_end=t_end, snapshot_times=times)
    ra = evolve(EvolutionState(0.0, rho_a, m), opts).snapshots
    rb = evolve(EvolutionState(0.0, rho_b, m), opts).snapshots
    series = [(ta, h_minus_one_distance(a, b)) for (ta, a), (_, b) in zip(ra, rb)]
    d0, d1 = series[0][1], series[-1][1]
    return series, bool(d1 > 10 * d0)
