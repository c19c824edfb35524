"""Spline-coupled multirate Runge-Kutta integration for fast/slow partitioned ODEs."""

from .multirate import (
    CostReport,
    MultirateConfig,
    MultirateRun,
    MultirateState,
    cost_report,
    extrapolate_fast,
    first_macro_step,
    integrate,
    integrate_singlerate,
    macro_step,
)
from .partition import EvalCounter, PartitionedIVP, couple, split
from .problems import MassSpringChain, build_chain_ivp, build_stiffness, exact_solution
from .rk_core import RK4, ButcherTableau, IntegrationError, rk_step, singlerate_integrate, validate_tableau
from .spline import ClampedCubicSpline, WaveformWindow, build_clamped_spline, build_hermite_cubic

__version__ = "0.1.0"
