"""Radial Patlak-Keller-Segel lab: porous-medium aggregation and its stiff-pressure limit."""
__version__ = "0.1.0"

from .radial import (DensityField, PressureField, RadialGrid, density_profile, lp_norm,
                     make_grid, pressure_from_density)
from .evolve import EvolutionState, EvolveOptions, evolve, stable_dt, step
from .estimates import EstimateReport, make_report
from .stationary import solve_for_mass, shoot

__all__ = ["DensityField", "PressureField", "RadialGrid", "density_profile", "lp_norm",
           "make_grid", "pressure_from_density", "EvolutionState", "EvolveOptions",
           "evolve", "stable_dt", "step", "EstimateReport", "make_report",
           "solve_for_mass", "shoot", "__version__"]
