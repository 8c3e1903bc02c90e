"""Fast oracle battery behind the ``validate`` subcommand.

Every check compares the discrete machinery against a closed form that is
computed here independently of the module under test.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .estimates import radial_laplacian
from .evolve import EvolutionState, EvolveOptions, evolve
from .potential import cumulative_mass, gradient_from_mass, potential_value
from .radial import DensityField, density_profile, make_grid, unit_ball_volume
from .stationary import alpha_bound, limit_radius, rstar_bound, shoot, solve_for_mass, uv_trajectory

logger = logging.getLogger(__name__)


@dataclass
class Check:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


def barenblatt(r, t, m, n, C=1.0):
    """Self-similar porous-medium solution t^-a (C - k r^2 t^-2b)_+^(1/(m-1))."""
    a = n / (n * (m - 1) + 2)
    b = a / n
    k = a * (m - 1) / (2 * m * n)
    base = np.clip(C - k * np.asarray(r) ** 2 * t ** (-2 * b), 0.0, None)
    return t ** (-a) * base ** (1 / (m - 1))


def barenblatt_constant(support: float, t: float, m: float, n: int) -> float:
    """C for which the profile at time t is supported on [0, support]."""
    a = n / (n * (m - 1) + 2)
    k = a * (m - 1) / (2 * m * n)
    return k * support**2 * t ** (-2 * a / n)


def barenblatt_error(cells: int, m: float = 2.0, n: int = 3, t0: float = 0.05,
                     t1: float = 0.1, r_max: float = 2.0) -> float:
    """L^1 error at t1 of a drift-free run started from the exact profile at t0."""
    g = make_grid(n, r_max, cells)
    C = barenblatt_constant(0.6, t0, m, n)
    # cell averages of the initial profile by 8-point Gauss per cell
    x, w = np.polynomial.legendre.leggauss(8)

    def averages(t):
        lo, hi = g.faces[:-1, None], g.faces[1:, None]
        rr = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
        wt = 0.5 * (hi - lo) * w * g.n_dim * g.omega_n * rr ** (n - 1)
        return np.sum(barenblatt(rr, t, m, n, C) * wt, axis=1) / g.cell_volumes

    rho0 = DensityField(g, averages(t0))
    res = evolve(EvolutionState(t0, rho0, m), EvolveOptions(t_end=t1, drift=False))
    return g.integrate(np.abs(res.final.rho.values - averages(t1)))


def convergence_order(errors) -> float:
    e = np.asarray(errors, dtype=float)
    return float(np.min(np.log2(e[:-1] / e[1:])))


def check_volumes() -> Check:
    worst = 0.0
    for n in (3, 4, 5):
        g = make_grid(n, 3.0, 97)
        worst = max(worst, abs(g.cell_volumes.sum() / (unit_ball_volume(n) * 27.0 ** (n / 3)) - 1))
    # omega_n from the recursion omega_n = 2 pi / n omega_{n-2}
    rec = abs(unit_ball_volume(5) - 2 * math.pi / 5 * unit_ball_volume(3))
    ok = worst < 1e-12 and rec < 1e-14
    return Check("shell volumes n=3,4,5", ok, f"rel err {worst:.1e}")


def _ball_potential(r, R, n):
    wn = unit_ball_volume(n)
    M = wn * R**n
    inside = r**2 / (2 * n) - R**2 / (2 * (n - 2))
    with np.errstate(divide="ignore"):
        outside = -M / (n * (n - 2) * wn * r ** (n - 2))
    return np.where(r < R, inside, outside)


def check_potential(n: int) -> Check:
    g = make_grid(n, 4.0, 256)
    rho = density_profile(g, lambda r: (r < 1.0).astype(float))
    phi = potential_value(rho)
    err_phi = float(np.max(np.abs(phi - _ball_potential(g.centers, 1.0, n))))
    u = gradient_from_mass(g, cumulative_mass(rho))
    half, two = np.searchsorted(g.faces, [0.5, 2.0])
    u_exact = np.array([0.5 / n, 2.0 ** (1 - n) / n])
    err_u = float(np.max(np.abs(u[[half, two]] - u_exact)))
    ok = err_phi < 1e-10 and err_u < 1e-13
    return Check(f"ball potential n={n}", ok, f"phi err {err_phi:.1e}, u err {err_u:.1e}")


def check_poisson_identity(seed: int = 0) -> Check:
    """div(face gradient) reproduces rho cell by cell: the sum telescopes exactly."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for n in (3, 4):
        g = make_grid(n, 2.0, 300)
        rho = DensityField(g, rng.random(g.cells) * (g.centers < 1.5))
        u = gradient_from_mass(g, cumulative_mass(rho))
        lap = np.diff(g.face_areas * u) / g.cell_volumes
        worst = max(worst, float(np.max(np.abs(lap - rho.values))))
    return Check("discrete Poisson identity n=3,4", worst < 1e-12, f"max err {worst:.1e}")


def check_barenblatt(cells=(128, 256, 512)) -> Check:
    errs = [barenblatt_error(c) for c in cells]
    order = convergence_order(errs)
    return Check(f"Barenblatt m=2 cells {cells}", order >= 0.8,
                 f"errors {', '.join(f'{e:.2e}' for e in errs)}; order {order:.2f}")


def patch_pair_residuals(cells: int, laplacian: Callable = radial_laplacian, n: int = 3,
                         R: float = 1.0, r_max: float = 2.0):
    """(max |omega| strictly inside the patch, complementarity residual)."""
    g = make_grid(n, r_max, cells)
    rho = (g.centers < R).astype(float)
    p = np.clip(R**2 - g.centers**2, 0.0, None) / (2 * n)
    omega = laplacian(g, p) + rho
    zeta = np.clip(1 - (g.centers / r_max) ** 2, 0.0, None) ** 2
    inner = g.centers < R - 2 * g.dr
    return float(np.max(np.abs(omega[inner]))), abs(g.integrate(p * omega * zeta))


def check_complementarity(laplacian: Callable = radial_laplacian) -> Check:
    rows = [patch_pair_residuals(c, laplacian) for c in (256, 512, 1024)]
    interior = max(r[0] for r in rows)
    res = [r[1] for r in rows]
    ratios = [a / b for a, b in zip(res[:-1], res[1:])]
    # halving dr halves the residual to within 40%
    ok = interior < 1e-10 and all(1 / 0.7 <= q <= 1 / 0.3 for q in ratios)
    return Check("patch complementarity pair", ok,
                 f"interior omega {interior:.1e}; residual ratios "
                 + ", ".join(f"{q:.2f}" for q in ratios))


def _series_gap(m, n, h=None, alpha=1.0):
    p = shoot(alpha, m, n, h)
    c, q = (m - 1) / m, 1 / (m - 1)
    a = -c * alpha / (2 * n)
    b = -(c * q * alpha ** (2 - m)) * a / (4 * (n + 2))
    sel = p.r < 0.05
    series = alpha ** (m - 1) + a * p.r[sel] ** 2 + b * p.r[sel] ** 4
    return float(np.max(np.abs(p.psi[sel] - series))) / alpha ** (m - 1), p


def check_shooting_series() -> Check:
    """Near the centre the integrated Psi follows its Taylor series, and gets closer as h shrinks."""
    details = []
    ok = True
    for m, n in ((4.0, 3), (8.0, 4)):
        gap, p = _series_gap(m, n)
        fine, _ = _series_gap(m, n, p.r[1] / 4)
        u0 = abs(uv_trajectory(p).u[0] - n)
        ok &= gap < 1e-8 and fine < gap / 4 and u0 < 1e-3
        details.append(f"m={m:g} n={n}: gap {gap:.1e} -> {fine:.1e}, |u(0)-n| {u0:.1e}")
    return Check("shooting vs series", ok, "; ".join(details))


def check_bounds() -> Check:
    # mass n(n-2) omega_n gives k = 1, so y2 = 2 and y2 + 2k = 4
    y2, y2k = alpha_bound(4 * math.pi, 3)
    rs = rstar_bound(4 * math.pi, 3)
    rs_exact = math.sqrt(48) + math.log1p(math.exp(-math.sqrt(48)))
    errs = [abs(y2 - 2), abs(y2k - 4), abs(rs - rs_exact),
            abs(limit_radius(4 * math.pi / 3, 3) - 1), abs(limit_radius(math.pi**2 / 2, 4) - 1)]
    return Check("closed-form bounds", max(errs) < 1e-12, f"max err {max(errs):.1e}")


def check_stationary(n: int) -> Check:
    M = 1.0
    p = solve_for_mass(M, 8.0, n)
    a_max, apow = alpha_bound(M, n)
    ok = (abs(p.mass - M) <= 1e-8 * M and p.alpha <= a_max and p.alpha**7 <= apow
          and uv_trajectory(p).all_flags and p.support_radius <= rstar_bound(M, n))
    return Check(f"stationary state n={n}, m=8", ok,
                 f"alpha {p.alpha:.4f} <= {a_max:.4f}, R {p.support_radius:.4f}, "
                 f"mass err {abs(p.mass - M):.1e}")


def run_battery(laplacian: Callable = radial_laplacian) -> list[Check]:
    checks = [check_volumes, lambda: check_potential(3), lambda: check_potential(4),
              check_poisson_identity, check_barenblatt,
              lambda: check_complementarity(laplacian), check_shooting_series,
              check_bounds, lambda: check_stationary(3), lambda: check_stationary(4)]
    out = []
    for fn in checks:
        t0 = time.perf_counter()
        try:
            c = fn()
        except Exception as exc:  # a crashing oracle is a failed oracle
            logger.exception("oracle crashed")
            c = Check(getattr(fn, "__name__", "oracle"), False, f"error: {exc}")
        c.seconds = time.perf_counter() - t0
        out.append(c)
    return out


def format_table(checks) -> str:
    width = max(len(c.name) for c in checks)
    lines = [f"{'PASS' if c.passed else 'FAIL'}  {c.name:<{width}}  {c.seconds:6.2f}s  {c.detail}"
             for c in checks]
    lines.append(f"{sum(c.passed for c in checks)}/{len(checks)} passed")
    return "\n".join(lines)
