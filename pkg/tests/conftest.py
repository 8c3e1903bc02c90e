import numpy as np
import pytest
from hypothesis import settings

from pkslab.radial import density_profile, make_grid

settings.register_profile("lab", max_examples=40, deadline=None)
settings.load_profile("lab")


@pytest.fixture
def unit_ball_grid():
    """n=3 grid whose faces include r = 1/2, 1 and 2."""
    return make_grid(3, 4.0, 512)


@pytest.fixture
def ball(unit_ball_grid):
    return density_profile(unit_ball_grid, lambda r: (r < 1).astype(float))


def bump(amp=0.5, radius=1.0):
    return lambda r: amp * np.clip(1 - (np.asarray(r) / radius) ** 2, 0, None) ** 2


# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
