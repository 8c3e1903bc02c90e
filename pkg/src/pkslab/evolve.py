"""Explicit conservative stepper for d_t rho = lap(rho^m) + div(rho grad N*rho).

Radial finite volumes: face fluxes of rho^m differences plus an upwinded
drift.  The drift velocity ``-u`` always points inward, so the upwind cell
is the outer neighbour.  The potential is refreshed every step.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numba
import numpy as np

from .radial import DensityField

logger = logging.getLogger(__name__)

_OK, _SUPPORT, _NONFINITE, _MAXSTEPS = 0, 1, 2, 3


class SolverError(RuntimeError):
    pass


class SupportTooLarge(SolverError):
    """Support reached the abort radius; the domain is too small for the run."""


@dataclass(frozen=True)
class EvolveOptions:
    t_end: float
    cfl_diffusion: float = 0.25
    cfl_advection: float = 0.5
    snapshot_times: Sequence[float] = ()
    support_margin: float = 0.9
    drift: bool = True
    max_steps: int = 10**9

    def __post_init__(self):
        if not 0 < self.cfl_diffusion <= 0.5:
            raise ValueError(f"cfl_diffusion must lie in (0, 1/2], got {self.cfl_diffusion}")
        if not 0 < self.cfl_advection <= 1:
            raise ValueError(f"cfl_advection must lie in (0, 1], got {self.cfl_advection}")
        if not 0 < self.support_margin <= 1:
            raise ValueError(f"support_margin must lie in (0, 1], got {self.support_margin}")
        if self.t_end < 0:
            raise ValueError("t_end must be non-negative")


@dataclass(frozen=True)
class EvolutionState:
    t: float
    rho: DensityField
    m: float
    step_count: int = 0
    dt_last: float = 0.0
    clipped_mass: float = 0.0
    clip_events: int = 0

    @property
    def mass(self) -> float:
        return self.rho.mass


@dataclass
class RunAudit:
    initial_mass: float
    max_density: float
    max_drift: float = 0.0
    clipped_mass: float = 0.0
    clip_events: int = 0
    steps: int = 0
    dt_at_snapshots: list = field(default_factory=list)


@dataclass
class EvolutionResult:
    final: EvolutionState
    snapshots: list  # [(t, DensityField)]
    audit: RunAudit


@numba.njit(cache=True)
def _last_positive(rho):
    for i in range(rho.size - 1, -1, -1):
        if rho[i] > 0.0:
            return i
    return -1


@numba.njit(cache=True)
def _fluxes(rho, m, areas, vols, dr, drift, rhom, flux, hi):
    """Inward face fluxes on faces 1..hi; returns (max m rho^(m-1), max u)."""
    dmax = 0.0
    umax = 0.0
    for i in range(hi + 1):
        r = rho[i]
        if r > 0.0:
            p = r**m
            rhom[i] = p
            d = m * p / r
            if d > dmax:
                dmax = d
        else:
            rhom[i] = 0.0
    flux[0] = 0.0
    mass = 0.0
    for k in range(1, hi + 1):
        mass += rho[k - 1] * vols[k - 1]
        f = areas[k] * (rhom[k] - rhom[k - 1]) / dr
        if drift:
            uk = mass / areas[k]
            if uk > umax:
                umax = uk
            f += areas[k] * rho[k] * uk
        flux[k] = f
    flux[hi + 1] = 0.0
    return dmax, umax


@numba.njit(cache=True)
def _apply(rho, vols, flux, dt, hi):
    """Update cells 0..hi in place; returns the mass removed by clipping."""
    clipped = 0.0
    for i in range(hi + 1):
        r = rho[i] + dt / vols[i] * (flux[i + 1] - flux[i])
        if r < 0.0:
            clipped -= r * vols[i]
            r = 0.0
        rho[i] = r
    return clipped


@numba.njit(cache=True)
def _limits(rho, m, areas, vols, dr, drift):
    n = rho.size
    last = _last_positive(rho)
    if last < 0:
        return 0.0, 0.0
    rhom = np.zeros(n)
    flux = np.zeros(n + 1)
    return _fluxes(rho, m, areas, vols, dr, drift, rhom, flux, min(last + 1, n - 1))


@numba.njit(cache=True)
def _advance(rho, m, areas, vols, dr, drift, t, t_stop, cfl_d, cfl_a,
             support_cell, max_steps, fixed_dt):
    """Step rho in place from t to t_stop.

    Returns (t, steps, clipped, clip_events, max_rho, max_u, dt_last, status).
    A positive ``fixed_dt`` replaces the CFL choice (single-step use).
    """
    n = rho.size
    rhom = np.zeros(n)
    flux = np.zeros(n + 1)
    steps = 0
    clipped = 0.0
    events = 0
    max_rho = 0.0
    max_u = 0.0
    dt = 0.0
    status = 0
    while t < t_stop:
        if steps >= max_steps:
            status = 3
            break
        last = _last_positive(rho)
        if last < 0:
            dt = t_stop - t
            t = t_stop
            break
        if last >= support_cell:
            status = 1
            break
        hi = min(last + 1, n - 1)
        dmax, umax = _fluxes(rho, m, areas, vols, dr, drift, rhom, flux, hi)
        if fixed_dt > 0.0:
            dt = fixed_dt
        else:
            dt = t_stop - t
            if dmax > 0.0:
                dt = min(dt, cfl_d * dr * dr / dmax)
            if umax > 0.0:
                dt = min(dt, cfl_a * dr / umax)
        c = _apply(rho, vols, flux, dt, hi)
        if c > 0.0:
            clipped += c
            events += 1
        if umax > max_u:
            max_u = umax
        for i in range(hi + 1):
            v = rho[i]
            if not np.isfinite(v):
                status = 2
            elif v > max_rho:
                max_rho = v
        if status == 2:
            break
        # land exactly on t_stop when the remaining gap is roundoff
        if t_stop - (t + dt) <= 1e-13 * max(1.0, abs(t_stop)):
            t = t_stop
        else:
            t += dt
        steps += 1
    return t, steps, clipped, events, max_rho, max_u, dt, status


def _support_cell(grid, margin: float) -> int:
    """First cell whose outer face lies beyond margin * r_max."""
    idx = np.nonzero(grid.faces[1:] > margin * grid.r_max * (1 + 1e-12))[0]
    return int(idx[0]) if idx.size else grid.cells


def stable_dt(state: EvolutionState, opts: EvolveOptions) -> float:
    """CFL-limited step, never past t_end; a vacuum state may jump straight to t_end."""
    g = state.rho.grid
    remaining = max(opts.t_end - state.t, 0.0)
    dmax, umax = _limits(np.array(state.rho.values), float(state.m), g.face_areas,
                         g.cell_volumes, g.dr, opts.drift)
    dt = remaining
    if dmax > 0:
        dt = min(dt, opts.cfl_diffusion * g.dr**2 / dmax)
    if umax > 0:
        dt = min(dt, opts.cfl_advection * g.dr / umax)
    return dt


def _raise_status(status: int, t: float, grid, margin: float):
    if status == _SUPPORT:
        raise SupportTooLarge(
            f"support reached {margin:g} * r_max = {margin * grid.r_max:g} at t = {t:.6g}; "
            "enlarge r_max")
    if status == _NONFINITE:
        raise SolverError(f"non-finite density at t = {t:.6g}")
    if status == _MAXSTEPS:
        raise SolverError(f"step budget exhausted at t = {t:.6g}")


def step(state: EvolutionState, dt: float, opts: Optional[EvolveOptions] = None) -> EvolutionState:
    """One explicit Euler step of size dt (must not exceed the CFL step)."""
    if opts is None:
        opts = EvolveOptions(t_end=state.t + dt)
    g = state.rho.grid
    limit = stable_dt(replace(state), replace(opts, t_end=state.t + dt + 1.0))
    if dt > limit * (1 + 1e-12):
        raise SolverError(f"dt = {dt:.3e} violates the CFL limit {limit:.3e}")
    rho = np.array(state.rho.values)
    t, steps, clipped, events, _, _, dt_used, status = _advance(
        rho, float(state.m), g.face_areas, g.cell_volumes, g.dr, opts.drift,
        state.t, state.t + dt, opts.cfl_diffusion, opts.cfl_advection,
        _support_cell(g, opts.support_margin), 1, float(dt))
    _raise_status(status, state.t, g, opts.support_margin)
    if clipped > 0:
        logger.debug("clipped %.3e of mass at t=%.6g", clipped, t)
    return EvolutionState(state.t + dt, DensityField(g, rho), state.m,
                          state.step_count + 1, dt, state.clipped_mass + clipped,
                          state.clip_events + events)


def evolve(state: EvolutionState, opts: EvolveOptions,
           observer: Optional[Callable[[float, DensityField], None]] = None) -> EvolutionResult:
    """Advance to ``opts.t_end``, landing exactly on every snapshot time.

    ``observer(t, rho)`` is called at each snapshot time in [t, t_end]
    (including the start time if listed).
    """
    g = state.rho.grid
    rho = np.array(state.rho.values)
    m = float(state.m)
    audit = RunAudit(initial_mass=state.mass, max_density=float(rho.max(initial=0.0)))
    stops = sorted({float(s) for s in opts.snapshot_times if state.t <= s <= opts.t_end})
    snapshots = []
    t = state.t
    steps = state.step_count
    clipped, events = state.clipped_mass, state.clip_events
    dt_last = state.dt_last
    support_cell = _support_cell(g, opts.support_margin)

    def record(time):
        snap = DensityField(g, rho.copy())
        snapshots.append((time, snap))
        audit.dt_at_snapshots.append(dt_last)
        if observer is not None:
            observer(time, snap)

    if stops and stops[0] == t:
        record(t)
        stops = stops[1:]
    targets = stops if stops and stops[-1] == opts.t_end else stops + [opts.t_end]
    for target in targets:
        if target <= t:
            continue
        t, n_steps, c, ev, mx, mu, dt_used, status = _advance(
            rho, m, g.face_areas, g.cell_volumes, g.dr, opts.drift, t, float(target),
            opts.cfl_diffusion, opts.cfl_advection, support_cell,
            opts.max_steps - steps, 0.0)
        steps += n_steps
        clipped += c
        events += ev
        audit.max_density = max(audit.max_density, mx)
        audit.max_drift = max(audit.max_drift, mu)
        if n_steps:
            dt_last = dt_used
        _raise_status(status, t, g, opts.support_margin)
        if target in stops:
            record(target)
    audit.clipped_mass, audit.clip_events, audit.steps = clipped, events, steps
    final = EvolutionState(t, DensityField(g, rho), m, steps, dt_last, clipped, events)
    return EvolutionResult(final, snapshots, audit)
