import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pkslab.estimates import (EstimateReport, ab_quantities, barrier_radius,
                              complementarity_residual, dissipation, dtP_l1, free_energy,
                              gradP_norms, make_report, pair_dissipation, radial_laplacian,
                              support_radius)
from pkslab.radial import DensityField, PressureField, density_profile, make_grid
from pkslab.stationary import resample, solve_for_mass
from pkslab.sweep import patch_density, patch_pressure

from conftest import bump


def test_free_energy_of_unit_ball_m3():
    g = make_grid(3, 4.0, 1024)
    rho = density_profile(g, lambda r: (r < 1).astype(float))
    assert free_energy(rho, 3) == pytest.approx(2 * math.pi / 3 - 4 * math.pi / 15, rel=1e-9)


def test_free_energy_zero_and_scaling():
    g = make_grid(3, 3.0, 256)
    assert free_energy(DensityField(g, np.zeros(g.cells)), 3) == 0
    rho = density_profile(g, bump(0.7))
    m = 5.0
    ent = g.integrate(rho.values**m) / (m - 1)
    inter = free_energy(rho, m) - ent
    assert free_energy(rho.scaled(2.0), m) == pytest.approx(2**m * ent + 4 * inter, rel=1e-12)


def test_dissipation_basics():
    g = make_grid(3, 2.0, 128)
    assert dissipation(DensityField(g, np.zeros(g.cells)), 3) == 0


@given(st.floats(0.01, 2), st.floats(0.2, 1.5), st.floats(1.5, 50))
def test_dissipation_nonnegative(amp, radius, m):
    g = make_grid(3, 2.0, 64)
    assert dissipation(density_profile(g, bump(amp, radius)), m) >= 0


def test_dissipation_vanishes_on_stationary_profile():
    M = 4 * math.pi / 3
    g = make_grid(3, 3.0, 2048)
    rho = resample(solve_for_mass(M, 4.0, 3), g)
    assert dissipation(rho, 4.0) <= 1e-6 * M


def test_patch_pair_dissipation_vanishes():
    g = make_grid(3, 2.0, 1024)
    rho, p = patch_density(1.0, g), patch_pressure(1.0, 3, g)
    assert pair_dissipation(rho, p) <= 1e-6 * rho.mass


def test_ab_quantities():
    g = make_grid(3, 2.0, 512)
    rho = density_profile(g, bump())
    omega, n1, n3 = ab_quantities(rho, PressureField(g, np.zeros(g.cells), 3.0))
    assert np.array_equal(omega, rho.values) and n1 == 0 and n3 == 0
    # exact pair: omega vanishes away from the rim
    omega, _, _ = ab_quantities(patch_density(1.0, g), patch_pressure(1.0, 3, g))
    assert np.max(np.abs(omega[g.centers < 1 - 2 * g.dr])) < 1e-10
    # steeply concave pressure over a thin density: Laplacian beats rho
    small = density_profile(g, lambda r: 0.1 * (r < 1))
    steep = PressureField(g, np.clip(1 - g.centers**2, 0, None), math.inf)
    _, n1, n3 = ab_quantities(small, steep)
    assert n1 > 0 and n3 > 0


def test_laplacian_of_quadratic_is_exact():
    g = make_grid(4, 1.0, 100)
    lap = radial_laplacian(g, g.centers**2)
    # zero-flux outer face spoils only the last cell
    assert lap[:-1] == pytest.approx(2 * 4, rel=1e-10)


def test_gradp_norms():
    g = make_grid(3, 1.0, 2048)
    p = PressureField(g, (1 - g.centers**2) / 6, math.inf)
    l2, l3 = gradP_norms(p)
    # interior faces only, so the last half-cell is missing: O(dr) error
    assert l2 == pytest.approx(math.sqrt(4 * math.pi / 45), rel=2 * g.dr)
    c = PressureField(g, np.full(g.cells, 3.0), math.inf)
    assert gradP_norms(c) == (0.0, 0.0)
    d2, d3 = gradP_norms(PressureField(g, 2 * p.values, math.inf))
    assert d2 == pytest.approx(2 * l2) and d3 == pytest.approx(2 * l3)


def test_complementarity():
    g = make_grid(3, 2.0, 256)
    rho = density_profile(g, bump())
    assert complementarity_residual(rho, PressureField(g, np.zeros(g.cells), 3.0)) == 0
    res = []
    for cells in (256, 512, 1024):
        gg = make_grid(3, 2.0, cells)
        res.append(abs(complementarity_residual(patch_density(1.0, gg), patch_pressure(1.0, 3, gg))))
    for a, b in zip(res, res[1:]):
        assert 1 / 0.7 <= a / b <= 1 / 0.3
    # positive pressure with omega = 1 + rho on the test support
    flat = PressureField(g, np.ones(g.cells), math.inf)
    assert complementarity_residual(rho, flat) > 0


def test_support_radius(ball, unit_ball_grid):
    assert support_radius(DensityField(unit_ball_grid, np.zeros(unit_ball_grid.cells))) == 0
    assert abs(support_radius(ball) - 1) <= unit_ball_grid.dr


def test_barrier_radius():
    assert barrier_radius(0.0, 2.0, 0.7, 3, 1.3) == pytest.approx(2.0)
    assert barrier_radius(0.9, 2.0, 0.0, 3, 1.0) == pytest.approx(2 * math.exp(0.3))
    assert barrier_radius(3.0, 2.0, 1.0, 3, 1.0) == pytest.approx(5 * math.e - 3)
    with pytest.raises(ValueError):
        barrier_radius(1.0, 2.0, 1.0, 3, 0.5)


def test_dtp_l1():
    g = make_grid(3, 1.0, 64)
    a = PressureField(g, np.full(g.cells, 0.5), math.inf)
    b = PressureField(g, np.full(g.cells, 1.5), math.inf)
    assert dtP_l1([(0, a), (1, a)]) == 0
    assert dtP_l1([(0, a), (1, b)]) == pytest.approx(4 * math.pi / 3, rel=1e-13)
    with pytest.raises(ValueError):
        dtP_l1([(0, a)])


def test_report_fields_and_finiteness():
    g = make_grid(3, 2.0, 256)
    rho = density_profile(g, bump(0.9))
    rep = make_report(0.0, rho, 8.0, barrier=2.0)
    assert rep.all_finite()
    assert rep.mass == pytest.approx(rho.mass)
    assert list(rep.as_dict()) == EstimateReport.field_names()
    assert rep.lq_norms[1] == pytest.approx(rho.mass)
