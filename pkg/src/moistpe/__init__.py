"""Simulator and verification harness for the 3D viscous moist primitive equations.

The package advances horizontal velocity, temperature and specific humidity on
a node-centred box grid with a semi-implicit fractional-step scheme, and
turns the energy, absorbing-set, smoothing, time-regularity and covering
estimates of the continuous system into executable checks.
"""

from .covering import build_covering, fractal_dim_bound, holder_dim_property
from .energy import EnergyReport, norm_H, norm_V, report
from .forcing import admissible, random_state
from .grid import ForcingSpec, Grid, PhysParams, State, make_grid
from .io import RunConfig, load_config, load_snapshot, parse_config, save_snapshot
from .timestepper import RunResult, StepConfig, run, step

__version__ = "0.1.0"

__all__ = [
    "EnergyReport",
    "ForcingSpec",
    "Grid",
    "PhysParams",
    "RunConfig",
    "RunResult",
    "State",
    "StepConfig",
    "admissible",
    "build_covering",
    "fractal_dim_bound",
    "holder_dim_property",
    "load_config",
    "load_snapshot",
    "make_grid",
    "norm_H",
    "norm_V",
    "parse_config",
    "random_state",
    "report",
    "run",
    "save_snapshot",
    "step",
]
