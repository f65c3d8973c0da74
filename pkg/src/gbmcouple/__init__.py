"""Optimal coupling of two geometric Brownian motions: closed-form
values, Monte Carlo coupling-time estimation under correlation controls,
a bang-bang finite-difference solver for the true finite-horizon value,
and exponential tail-rate analysis."""

from .params import (
    DerivedConstants,
    OptimalityVerdict,
    ProblemSpec,
    SpecError,
    classify_finite_horizon,
    classify_stationary,
    derive,
)
from .analytic import (
    DiscountedValue,
    TailRate,
    normal_bounds_check,
    pde_residual_A,
    pde_residual_L,
    phi,
    phi_limit,
    phi_xy,
    psi,
    tail_rates,
)
from .policies import (
    Constant,
    CouplingPolicy,
    GridFeedback,
    Mirror,
    Switching,
    Synchronous,
    switching_policy,
)
from .simulate import (
    Estimate,
    LaplaceBracket,
    SimConfig,
    SimResult,
    estimate_ergodic,
    estimate_laplace,
    estimate_survival,
    set_workers,
    simulate_tau,
    tail_rate_regression,
)
from .hjb import GapReport, GridSpec, ValueSurface, extract_policy, gap_report, solve

__version__ = "0.1.0"

__all__ = [
    "ProblemSpec",
    "DerivedConstants",
    "OptimalityVerdict",
    "SpecError",
    "derive",
    "classify_finite_horizon",
    "classify_stationary",
    "DiscountedValue",
    "TailRate",
    "psi",
    "phi",
    "phi_xy",
    "phi_limit",
    "pde_residual_L",
    "pde_residual_A",
    "tail_rates",
    "normal_bounds_check",
    "CouplingPolicy",
    "Mirror",
    "Synchronous",
    "Constant",
    "Switching",
    "GridFeedback",
    "switching_policy",
    "SimConfig",
    "SimResult",
    "Estimate",
    "LaplaceBracket",
    "simulate_tau",
    "estimate_survival",
    "estimate_laplace",
    "estimate_ergodic",
    "tail_rate_regression",
    "set_workers",
    "GridSpec",
    "ValueSurface",
    "GapReport",
    "solve",
    "extract_policy",
    "gap_report",
    "__version__",
]
