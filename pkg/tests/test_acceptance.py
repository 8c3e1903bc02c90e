"""Acceptance suite: one test per criterion, each at its stated tolerance.

Every test records a PASS/FAIL line that is printed in the terminal summary.
Run directly with ``python3 tests/test_acceptance.py`` or through pytest.
"""
import math
import os
import subprocess
import sys
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE
from pkslab.estimates import pair_dissipation
from pkslab.radial import make_grid
from pkslab.stationary import alpha_bound, rstar_bound, solve_for_mass, uv_trajectory
from pkslab.sweep import (BumpData, EvolutionSweepConfig, FloorLimited, fit_rate, patch_density,
                          patch_pressure, run_evolution_sweep, run_one, run_stationary_sweep)
from pkslab.validate import barenblatt_error, check_poisson_identity, convergence_order, \
    patch_pair_residuals

pytestmark = pytest.mark.slow

M_VALUES = [8.0, 16.0, 32.0, 64.0]
CELLS = 2048
T_END = 0.5
# a taller bump than the CLI default so that the density exceeds 1 at t = 0
SWEEP_DATA = BumpData(amplitude=0.9, radius=1.0)
PATCH_CELLS = 512


def record(key, ok, detail):
    ACCEPTANCE[key] = (bool(ok), detail)
    assert ok, detail


def _slope_text(fit):
    return "no fit (values at the floor)" if fit is None else f"slope {fit[0]:.3f}, r2 {fit[1]:.3f}"


@pytest.fixture(scope="session")
def sweep():
    base = EvolutionSweepConfig(n_dim=3, r_max=2.0, cells=CELLS, snapshots=10, initial=SWEEP_DATA)
    return run_evolution_sweep(base, M_VALUES, T_END)


@pytest.fixture(scope="session")
def patch_run():
    g = make_grid(3, 2.0, PATCH_CELLS)
    return run_one(patch_density(1.0, g), 64.0, T_END, 10)


@pytest.fixture(scope="session")
def all_runs(sweep, patch_run):
    runs = [(f"bump m={m:g}", sweep.per_m[m]) for m in sweep.m_values]
    return runs + [("patch m=64", patch_run)]


@pytest.fixture(scope="session")
def stationary_sweep():
    return run_stationary_sweep(4 * math.pi / 3, 3, [4.0, 8.0, 16.0, 32.0, 64.0], cells=CELLS)


def test_c01_conservation(sweep):
    rows, ok = [], True
    for m in sweep.m_values:
        run = sweep.per_m[m]
        if run.failure:
            ok = False
            rows.append(f"m={m:g} failed: {run.failure}")
            continue
        m0 = run.audit.initial_mass
        drift = abs(run.final.mass - m0) / m0
        clip = run.audit.clipped_mass / m0
        ok &= drift <= 1e-10 and clip <= 1e-8 and run.wall_time <= 600
        rows.append(f"m={m:g} drift {drift:.1e} clip {clip:.1e} {run.wall_time:.0f}s")
    record(1, ok, "; ".join(rows))


def test_c02_scheme_validation():
    errs = [barenblatt_error(c) for c in (512, 1024, 2048)]
    order = convergence_order(errs)
    poisson = check_poisson_identity()
    ok = order >= 0.8 and poisson.passed
    record(2, ok, f"Barenblatt errors {', '.join(f'{e:.2e}' for e in errs)}, order {order:.2f}; "
                  f"Poisson identity {poisson.detail}")


def _fit_or_none(xs, ys, floor=0.0):
    try:
        return fit_rate(xs, ys, floor)
    except FloorLimited:
        return None


def test_c03_excess_rate(sweep):
    fit = sweep.fitted_slopes["excess_l2"]
    values = [sweep.per_m[m].final.excess_l2 for m in sweep.m_values]
    ok = fit is not None and -0.8 <= fit[0] <= -0.3 and fit[1] >= 0.9
    record(3, ok, f"{_slope_text(fit)}; excess L2 at t_end "
                  + ", ".join(f"{v:.2e}" for v in values))


def test_c04_omega_rate(sweep):
    fit = sweep.fitted_slopes["omega_neg_l3_cubed"]
    values = [sweep.per_m[m].final.omega_neg_l3_cubed for m in sweep.m_values]
    spacetime = [sweep.per_m[m].omega_neg_l3_spacetime for m in sweep.m_values]
    diag = _fit_or_none(sweep.m_values, spacetime)
    ok = fit is not None and -1.4 <= fit[0] <= -0.6 and fit[1] >= 0.85
    record(4, ok, f"{_slope_text(fit)}; values at t_end "
                  + ", ".join(f"{v:.2e}" for v in values)
                  + f"; space-time integral {_slope_text(diag)}")


def test_c05_uniformity(sweep):
    g3 = sweep.fitted_slopes["gradP_l3"]
    dt = sweep.fitted_slopes["dtP_l1"]
    ok = g3 is not None and dt is not None and g3[0] <= 0.1 and dt[0] <= 0.1
    record(5, ok, f"grad P L3 {_slope_text(g3)}; dtP L1 {_slope_text(dt)}")


def test_c06_complementarity(sweep):
    floor = abs(sweep.references["floors"]["comp_residual"])
    res = [abs(sweep.per_m[m].final.comp_residual) for m in sweep.m_values]
    mono = all(b <= a + floor for a, b in zip(res, res[1:]))
    pair = [patch_pair_residuals(c)[1] for c in (256, 512, 1024)]
    ratios = [a / b for a, b in zip(pair, pair[1:])]
    halves = all(1 / 0.7 <= q <= 1 / 0.3 for q in ratios)
    record(6, mono and halves,
           "bump residuals " + ", ".join(f"{v:.2e}" for v in res) + f" (floor {floor:.1e}); "
           "patch pair ratios " + ", ".join(f"{q:.2f}" for q in ratios))


def test_c07_energy(all_runs):
    worst = {name: max(run.energy_slack) for name, run in all_runs}
    ok = all(v <= 0 for v in worst.values())
    record(7, ok, "max slack " + ", ".join(f"{k} {v:.1e}" for k, v in worst.items()))


def test_c08_barrier(all_runs):
    rows, ok = [], True
    for name, run in all_runs:
        margin = min(r.barrier_radius - r.support_radius for r in run.reports)
        finite = all(np.isfinite(getattr(r, k)) for r in run.reports for k in r.field_names())
        ok &= margin >= 0 and finite
        rows.append(f"{name} min margin {margin:.3f}")
    record(8, ok, "; ".join(rows))


def test_c09_stationary_matrix():
    t0 = time.perf_counter()
    bad = []
    count = 0
    for n in (3, 4):
        for M in (1.0, 4 * math.pi / 3, 10.0):
            a_max, apow = alpha_bound(M, n)
            for m in (4.0, 8.0, 16.0, 32.0, 64.0):
                p = solve_for_mass(M, m, n)
                count += 1
                ok = (abs(p.mass - M) <= 1e-8 * M and p.alpha <= a_max
                      and p.alpha ** (m - 1) <= apow and uv_trajectory(p).all_flags
                      and p.support_radius <= rstar_bound(M, n))
                if not ok:
                    bad.append(f"(m={m:g}, n={n}, M={M:.3g})")
    secs = time.perf_counter() - t0
    record(9, not bad and secs <= 60,
           f"{count - len(bad)}/{count} tuples satisfy every bound in {secs:.1f}s"
           + (f"; failing {', '.join(bad)}" if bad else ""))


def test_c10_stationary_limit(stationary_sweep):
    res = stationary_sweep
    ms = res.m_values
    gaps = [res.per_m[m].radius_gap for m in ms]
    l1 = [res.per_m[m].l1_to_patch for m in ms]
    fit = res.fitted_slopes["omega_neg_l3_cubed"]
    w3 = [res.per_m[m].omega_neg_l3_cubed for m in ms]
    radius_ok = all(b < a for a, b in zip(gaps, gaps[1:])) and gaps[-1] <= 0.05
    l1_ok = all(b < a for a, b in zip(l1, l1[1:]))
    rate_ok = fit is not None and -1.4 <= fit[0] <= -0.6
    record(10, radius_ok and l1_ok and rate_ok,
           "|R_m - 1| " + ", ".join(f"{v:.3f}" for v in gaps)
           + "; L1 to ball " + ", ".join(f"{v:.3f}" for v in l1)
           + f"; omega_- L3^3 {_slope_text(fit)} from " + ", ".join(f"{v:.1e}" for v in w3))


def test_c11_patch_oracle(patch_run):
    g = make_grid(3, 2.0, CELLS)
    rho, p = patch_density(1.0, g), patch_pressure(1.0, 3, g)
    diss = pair_dissipation(rho, p)
    # analytic boundary velocity -dP/dr - M(R)/(n omega_n R^(n-1)) at R = 1
    R, n = 1.0, 3
    velocity = R / n - (4 * math.pi / 3 * R**3) / (n * 4 * math.pi / 3 * R ** (n - 1))
    rho0 = patch_density(1.0, make_grid(3, 2.0, PATCH_CELLS))
    final = patch_run.final_density
    drift = rho0.grid.integrate(np.abs(final.values - rho0.values))
    ok = drift <= 1e-2 * rho0.mass and abs(velocity) <= 1e-14 and diss <= 1e-6
    record(11, ok, f"L1 drift {drift / rho0.mass:.4f} of mass at m=64 ({PATCH_CELLS} cells); "
                   f"boundary velocity {velocity:g}; pair dissipation {diss:.1e}; "
                   f"final mass {final.mass:.6f}")


def test_c12_validate_subcommand(tmp_path):
    env = {**os.environ, "PKSLAB_OUTPUT_ROOT": str(tmp_path)}
    t0 = time.perf_counter()
    proc = subprocess.run([sys.executable, "-m", "pkslab.cli", "validate"],
                          capture_output=True, text=True, timeout=600, env=env)
    secs = time.perf_counter() - t0
    last = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr[-200:]
    record(12, proc.returncode == 0 and secs <= 120, f"{last} in {secs:.1f}s")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-p", "no:cacheprovider"]))
