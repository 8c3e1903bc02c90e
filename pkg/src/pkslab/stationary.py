"""Radial stationary states by shooting.

With Psi = rho^(m-1) the stationary equation reduces on the support to

    Psi'' + (n-1)/r Psi' = -(m-1)/m Psi^(1/(m-1)),  Psi(0) = alpha^(m-1), Psi'(0) = 0,

integrated outward in (Psi, Phi = r^(n-1) Psi') until Psi first vanishes.
Integrating the equation gives the enclosed mass exactly,
M(r) = -n omega_n m/(m-1) Phi(r), which is what every mass below uses.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numba
import numpy as np

from .radial import DensityField, PressureField, RadialGrid, unit_ball_volume
from .potential import cumulative_mass, gradient_from_mass


class ShootingError(RuntimeError):
    pass


@dataclass(frozen=True)
class StationaryProfile:
    m: float
    n: int
    alpha: float
    r: np.ndarray  # ODE mesh, r[0] = 0, r[-1] = support radius
    psi: np.ndarray
    flux: np.ndarray  # Phi = r^(n-1) Psi'
    support_radius: float
    mass: float

    @property
    def density(self) -> np.ndarray:
        return np.maximum(self.psi, 0.0) ** (1.0 / (self.m - 1))

    @property
    def dpsi(self) -> np.ndarray:
        out = np.zeros_like(self.flux)
        out[1:] = self.flux[1:] / self.r[1:] ** (self.n - 1)
        return out

    @property
    def enclosed_mass(self) -> np.ndarray:
        return -self.n * unit_ball_volume(self.n) * self.m / (self.m - 1) * self.flux

    def pressure(self) -> np.ndarray:
        return self.m / (self.m - 1) * np.maximum(self.psi, 0.0)


def alpha_bound(M: float, n: int):
    """Closed-form bounds on the central density alpha and on alpha^(m-1), m >= 3."""
    k = M / (n * (n - 2) * unit_ball_volume(n))
    y2 = (1 + math.sqrt(1 + 8 * k)) / 2
    return y2, y2 + 2 * k


def rstar_bound(M: float, n: int) -> float:
    """Uniform-in-m bound on the support radius of the stationary state of mass M."""
    rprime = math.sqrt(2 * n * (n - 1) * alpha_bound(M, n)[1])
    # log(1 + e^x) without overflow
    return rprime + math.log1p(math.exp(-rprime))


def limit_radius(M: float, n: int) -> float:
    """Radius of the ball of volume M."""
    return (M / unit_ball_volume(n)) ** (1.0 / n)


@numba.njit(cache=True)
def _rhs(r, psi, phi, n, c, q):
    dpsi = phi / r ** (n - 1)
    src = psi**q if psi > 0.0 else 0.0
    return dpsi, -c * r ** (n - 1) * src


@numba.njit(cache=True)
def _rk4(r, psi, phi, h, n, c, q):
    k1a, k1b = _rhs(r, psi, phi, n, c, q)
    k2a, k2b = _rhs(r + h / 2, psi + h / 2 * k1a, phi + h / 2 * k1b, n, c, q)
    k3a, k3b = _rhs(r + h / 2, psi + h / 2 * k2a, phi + h / 2 * k2b, n, c, q)
    k4a, k4b = _rhs(r + h, psi + h * k3a, phi + h * k3b, n, c, q)
    return (psi + h / 6 * (k1a + 2 * k2a + 2 * k3a + k4a),
            phi + h / 6 * (k1b + 2 * k2b + 2 * k3b + k4b))


@numba.njit(cache=True)
def _rstar(mass, n, wn):
    k = mass / (n * (n - 2) * wn)
    y2 = (1 + math.sqrt(1 + 8 * k)) / 2
    rp = math.sqrt(2 * n * (n - 1) * (y2 + 2 * k))
    return rp + math.log1p(math.exp(-rp))


SEED_STEPS = 16.0


@numba.njit(cache=True)
def _shoot(alpha, m, n, h, wn, r_out, psi_out, phi_out, mass_cap):
    """Fill the mesh arrays; returns (count, R, Phi(R), status).

    status 0: zero found, 1: capacity exhausted, 2: non-termination,
    4: enclosed mass passed ``mass_cap`` before the zero.
    """
    c = (m - 1.0) / m
    q = 1.0 / (m - 1.0)
    psi0 = alpha ** (m - 1.0)
    a = -c * alpha / (2.0 * n)
    b = -(c * q * alpha ** (2.0 - m)) * a / (4.0 * (n + 2.0))
    cap = r_out.size
    r_out[0] = 0.0
    psi_out[0] = psi0
    phi_out[0] = 0.0
    # series start removes the coordinate singularity at r = 0; starting a few
    # steps out keeps RK4 away from the r^(1-n) stages, where it loses two orders
    # the seed interval is filled with series values so that interpolation on
    # the mesh stays accurate near the centre
    seed = int(max(1.0, min(SEED_STEPS, math.floor(0.05 * math.sqrt(-psi0 / a) / h))))
    if seed + 1 >= cap:
        return 1, 0.0, 0.0, 1
    for j in range(1, seed + 1):
        rs = j * h
        r_out[j] = rs
        psi_out[j] = psi0 + a * rs * rs + b * rs**4
        phi_out[j] = rs ** (n - 1) * (2.0 * a * rs + 4.0 * b * rs**3)
    k = seed
    while True:
        if psi_out[k] <= 0.0:
            # series step already crossed zero; fall back to bracketing on [0, h]
            break
        if k + 1 >= cap:
            return k + 1, 0.0, 0.0, 1
        r = r_out[k]
        mass = -n * wn * phi_out[k] / c
        if mass > mass_cap:
            return k + 1, 0.0, 0.0, 4
        if r > 2.0 * _rstar(mass, n, wn):
            return k + 1, 0.0, 0.0, 2
        p1, f1 = _rk4(r, psi_out[k], phi_out[k], h, n, c, q)
        if p1 <= 0.0:
            # locate the zero inside (r, r + h) on the one-step RK4 map
            lo, hi = 0.0, h
            for _ in range(200):
                s = 0.5 * (lo + hi)
                ps, _f = _rk4(r, psi_out[k], phi_out[k], s, n, c, q)
                if ps > 0.0:
                    lo = s
                else:
                    hi = s
                if hi - lo <= 1e-16 * (r + h):
                    break
            s = 0.5 * (lo + hi)
            ps, fs = _rk4(r, psi_out[k], phi_out[k], s, n, c, q)
            k += 1
            r_out[k] = r + s
            psi_out[k] = 0.0
            phi_out[k] = fs
            return k + 1, r + s, fs, 0
        k += 1
        r_out[k] = r + h
        psi_out[k] = p1
        phi_out[k] = f1
    return k + 1, 0.0, 0.0, 3


def default_step(alpha: float, m: float, n: int) -> float:
    """Mesh width from a mass guess: the R_*-scaled step used by solve_for_mass."""
    c = (m - 1) / m
    # first zero of the two-term series, a lower bound for the support radius
    r0 = math.sqrt(2 * n * alpha ** (m - 1) / (c * alpha))
    mass_guess = unit_ball_volume(n) * alpha * r0**n
    return min(rstar_bound(mass_guess, n), 4 * r0) / 20000


@functools.lru_cache(maxsize=64)
def _gauss_jacobi(npts: int, a: float):
    """Nodes and weights on [-1, 1] for the weight (1 - x)^a (Golub-Welsch)."""
    k = np.arange(npts, dtype=float)
    s = 2 * k + a
    diag = -(a * a) / (s * (s + 2))
    diag[0] = -a / (a + 2)
    kk = k[1:]
    ss = 2 * kk + a
    off = np.sqrt(4 * kk**2 * (kk + a) ** 2 / (ss**2 * (ss + 1) * (ss - 1)))
    x, vec = np.linalg.eigh(np.diag(diag) + np.diag(off, 1) + np.diag(off, -1))
    mu0 = 2 ** (a + 1) / (a + 1)
    return x, mu0 * vec[0] ** 2


TAIL_STEPS = 24
TAIL_NODES = 24


def _tail_flux(r, psi, phi, R, m, n):
    """Phi(R) with the last TAIL_STEPS mesh steps re-integrated.

    Near the zero the source Psi^(1/(m-1)) behaves like (R - r)^(1/(m-1)), which
    caps RK4 at order 1 + 1/(m-1).  Writing Psi = (R - r) g(r) with g smooth to
    leading order, the integral of r^(n-1) Psi^q is done by Gauss-Jacobi
    quadrature for the weight (R - r)^q.
    """
    k = len(r) - 2  # last mesh point with Psi > 0
    j = max(1, k - TAIL_STEPS)
    if k - j < 3:
        return phi[-1]
    c, q = (m - 1) / m, 1 / (m - 1)
    L = R - r[j]
    ri, pi = r[j:k + 1], psi[j:k + 1]
    keep = R - ri > 1e-6 * L
    s = (R - ri[keep]) / L
    g = pi[keep] / (R - ri[keep])
    coef = np.polyfit(s, g, min(6, s.size - 1))
    x, w = _gauss_jacobi(TAIL_NODES, q)
    sq = (1 - x) / 2  # (R - r)/L at the nodes
    gq = np.maximum(np.polyval(coef, sq), 0.0)
    rq = R - L * sq
    integral = (L / 2) ** (1 + q) * np.sum(w * rq ** (n - 1) * gq**q)
    return phi[j] - c * integral


class MassExceeded(ShootingError):
    """Enclosed mass passed the requested cap before Psi vanished."""


def shoot(alpha: float, m: float, n: int, dr_ode: float | None = None,
          mass_cap: float = math.inf) -> StationaryProfile:
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    if m < 3:
        raise ValueError(f"stationary theory needs m >= 3, got {m}")
    if int(n) != n or n < 3:
        raise ValueError(f"n must be an integer >= 3, got {n}")
    h = default_step(alpha, m, n) if dr_ode is None else float(dr_ode)
    if not h > 0:
        raise ValueError("dr_ode must be positive")
    c = (m - 1) / m
    r0 = math.sqrt(2 * n * alpha ** (m - 1) / (c * alpha))
    if h > 0.05 * r0:
        # the start series is only valid well inside its own zero r0
        h = r0 / 1000
    wn = unit_ball_volume(n)
    cap = 65536
    while True:
        r, psi, phi = np.empty(cap), np.empty(cap), np.empty(cap)
        count, R, phiR, status = _shoot(float(alpha), float(m), int(n), h, wn, r, psi, phi,
                                        float(mass_cap))
        if status == 1:
            cap *= 4
            if cap > 2**27:
                raise ShootingError("mesh too fine for the support radius")
            continue
        break
    if status == 4:
        raise MassExceeded(f"enclosed mass exceeds {mass_cap!r} at alpha={alpha!r}")
    if status == 2:
        raise ShootingError(
            f"Psi did not vanish before 2 R_*(M); alpha={alpha}, m={m}, n={n}")
    if status == 3:
        # support narrower than one step: refine relative to the series zero
        return shoot(alpha, m, n, r0 / 1000, mass_cap)
    r, psi, phi = r[:count].copy(), psi[:count].copy(), phi[:count].copy()
    phi[-1] = phiR = _tail_flux(r, psi, phi, R, m, n)
    mass = -n * wn * m / (m - 1) * phiR
    return StationaryProfile(float(m), int(n), float(alpha), r, psi, phi, float(R), float(mass))


def mass_of_profile(p: StationaryProfile) -> float:
    """Mass n omega_n int_0^R r^(n-1) Psi^(1/(m-1)) dr.

    Evaluated through the integrated equation, -n omega_n m/(m-1) Phi(R), which
    is the RK4 quadrature of the density carried along the shooting mesh.
    """
    return p.mass


def _mass_at(alpha, m, n, h, cap=math.inf):
    try:
        return shoot(alpha, m, n, h, mass_cap=cap).mass
    except MassExceeded:
        return math.inf


def solve_for_mass(M: float, m: float, n: int, dr_ode: float | None = None,
                   rtol: float = 1e-8) -> StationaryProfile:
    """Stationary profile with total mass M: bisection on alpha, then secant polish."""
    if not M > 0:
        raise ValueError(f"mass must be positive, got {M}")
    h = rstar_bound(M, n) / 20000 if dr_ode is None else dr_ode
    hi = alpha_bound(M, n)[0]
    m_hi = _mass_at(hi, m, n, h, 2 * M)
    if m_hi < M:
        raise ShootingError(
            f"mass {m_hi:.6g} at the alpha bound {hi:.6g} is below the target {M:.6g}; "
            "the pressure bound is violated (solver bug)")
    # step down geometrically in Psi(0) = alpha^(m-1), the natural scale of the mass
    j = 4
    lo = hi * 2.0 ** (-j / (m - 1))
    m_lo = _mass_at(lo, m, n, h, 2 * M)
    while m_lo >= M:
        hi, m_hi = lo, m_lo
        j *= 2
        lo = hi * 2.0 ** (-j / (m - 1))
        if j > 4096:
            raise ShootingError("could not bracket the central density from below")
        m_lo = _mass_at(lo, m, n, h, 2 * M)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        m_mid = _mass_at(mid, m, n, h, 2 * M)
        if m_mid < M:
            lo, m_lo = mid, m_mid
        else:
            hi, m_hi = mid, m_mid
        if (m_hi - m_lo) <= 1e-6 * M or hi - lo <= 4e-16 * hi:
            break
    best, best_f = (lo, m_lo - M) if abs(m_lo - M) < abs(m_hi - M) else (hi, m_hi - M)
    a0, f0, a1, f1 = lo, m_lo - M, hi, m_hi - M
    for _ in range(8):
        if f1 == f0 or not math.isfinite(f1 - f0):
            break
        a2 = a1 - f1 * (a1 - a0) / (f1 - f0)
        if not lo <= a2 <= hi:
            break
        f2 = _mass_at(a2, m, n, h) - M
        a0, f0, a1, f1 = a1, f1, a2, f2
        if abs(f2) < abs(best_f):
            best, best_f = a2, f2
        if abs(f2) <= 1e-13 * M:
            break
    prof = shoot(best, m, n, h)
    if abs(prof.mass - M) > rtol * M:
        raise ShootingError(f"mass {prof.mass!r} misses target {M!r} beyond rtol {rtol}")
    return prof


@dataclass(frozen=True)
class UVTrajectory:
    r: np.ndarray
    u: np.ndarray
    v: np.ndarray
    u_in_range: bool  # 0 < u < n
    v_positive: bool
    above_line: bool  # u + v/(m-1) > n
    subsolution: bool  # v >= (m-1)/(mn) alpha^(2-m) r^2

    @property
    def all_flags(self) -> bool:
        return self.u_in_range and self.v_positive and self.above_line


def uv_trajectory(p: StationaryProfile, tol: float = 1e-12) -> UVTrajectory:
    """Phase-plane variables u = -(m-1)/m r Psi^(1/(m-1)) / Psi', v = -r Psi'/Psi.

    The (m-1)/m prefactor is the one for which r u' = u (n - u - v/(m-1))
    holds along the shooting equation and u -> n at the origin.
    """
    dpsi = p.dpsi
    scale = max(abs(p.psi[0]), 1.0)
    keep = (p.r > 0) & (p.psi > tol * scale) & (np.abs(dpsi) > tol * scale)
    r, psi, dpsi = p.r[keep], p.psi[keep], dpsi[keep]
    m, n = p.m, p.n
    u = -(m - 1) / m * r * psi ** (1 / (m - 1)) / dpsi
    v = -r * dpsi / psi
    lower = (m - 1) / (m * n) * p.alpha ** (2 - m) * r**2
    return UVTrajectory(
        r, u, v,
        u_in_range=bool(np.all((u > 0) & (u < n))),
        v_positive=bool(np.all(v > 0)),
        above_line=bool(np.all(u + v / (m - 1) > n)),
        subsolution=bool(np.all(v >= lower * (1 - 1e-9))))


def resample(p: StationaryProfile, grid: RadialGrid) -> DensityField:
    """Cell averages of the profile on ``grid``; the grid mass equals the profile mass.

    Enclosed mass at the faces comes from cubic Hermite interpolation of
    M(r) with slope n omega_n r^(n-1) rho(r) on the shooting mesh.
    """
    if grid.n_dim != p.n:
        raise ValueError("grid dimension does not match the profile")
    if p.support_radius >= grid.r_max:
        raise ValueError("profile support exceeds the grid")
    wn = unit_ball_volume(p.n)
    big_m = p.enclosed_mass
    slope = p.n * wn * p.r ** (p.n - 1) * p.density
    faces = grid.faces
    idx = np.clip(np.searchsorted(p.r, faces, side="right") - 1, 0, p.r.size - 2)
    r0, r1 = p.r[idx], p.r[idx + 1]
    h = r1 - r0
    s = (faces - r0) / h
    h00 = 2 * s**3 - 3 * s**2 + 1
    h10 = s**3 - 2 * s**2 + s
    h01 = -2 * s**3 + 3 * s**2
    h11 = s**3 - s**2
    at_faces = (h00 * big_m[idx] + h10 * h * slope[idx]
                + h01 * big_m[idx + 1] + h11 * h * slope[idx + 1])
    at_faces = np.where(faces >= p.support_radius, p.mass, at_faces)
    at_faces[0] = 0.0
    at_faces = np.maximum.accumulate(at_faces)
    return DensityField(grid, np.maximum(np.diff(at_faces), 0.0) / grid.cell_volumes)


def balance_residual(rho: DensityField, pressure: PressureField) -> float:
    """sup |dP/dr + u| over faces whose two neighbouring cells lie inside the support.

    A cell is inside the support when its outer neighbour is also occupied.
    """
    g = rho.grid
    u = gradient_from_mass(g, cumulative_mass(rho))[1:-1]
    dp = np.diff(pressure.values) / g.dr
    occupied = rho.values > 0
    interior = occupied[:-1] & occupied[1:]
    interior[:-1] &= occupied[2:]
    if not interior.any():
        return 0.0
    return float(np.max(np.abs(dp + u)[interior]))


def stationary_residual(p: StationaryProfile, grid: RadialGrid) -> float:
    """Force balance of the profile on ``grid``: exact-mass cell averages for the
    drift, pointwise pressure from Psi for the gradient."""
    return balance_residual(resample(p, grid), sampled_pressure(p, grid))


def sampled_pressure(p: StationaryProfile, grid: RadialGrid) -> PressureField:
    """m/(m-1) Psi interpolated at the cell centres.

    Pointwise values of the shooting variable; unlike P(cell-averaged rho)
    this has no spurious kink in the cell cut by the free boundary.
    """
    psi = np.interp(grid.centers, p.r, np.maximum(p.psi, 0.0), right=0.0)
    return PressureField(grid, p.m / (p.m - 1) * psi, p.m)
