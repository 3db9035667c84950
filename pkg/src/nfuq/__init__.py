"""Stochastic collocation for neural field equations with random data."""

from .engine import (
    CollocationSolution,
    MomentField,
    error_self,
    error_vs_exact,
    mean_field,
    moments,
    monte_carlo_mean,
    solve_collocation,
    spectrum_diagnostic,
    surrogate_eval,
    variance_field,
)
from .integrator import IntegratorConfig, Trajectory, integrate, integrate_system
from .model import (
    Custom,
    Linear,
    ProblemSpec,
    SemiDiscreteSystem,
    Sigmoid,
    preset_problem1,
    preset_problem2,
    preset_problem3,
    preset_ring,
)
from .param_space import Normal, ParameterSpace, TensorGrid, Uniform, gauss_hermite, gauss_legendre
from .spatial import chebyshev_grid, fem_grid, periodic_grid

__version__ = "0.1.0"
