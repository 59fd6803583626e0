"""Bayesian optimisation of simulated photonic reservoir computers."""
from rcbo.hyperspace import (
    DomainError,
    GridSpec,
    HyperPoint,
    HyperSpace,
    baseline_grid,
    default_space,
    from_unit,
    grid_points,
    is_duplicate,
    to_unit,
)
from rcbo.reservoir import DEFAULT_BACKEND, ReservoirConfig, available_backends

__version__ = "0.1.0"
