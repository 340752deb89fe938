"""Steering the distribution of weakly interacting linear stochastic agents.

Design terminal and stationary cost incentives plus feedback laws that
move a population between prescribed marginals, and verify the designs
by closed-form moment propagation and large-N particle simulation.
"""

from .densities import GaussianDensity, GridDensity1D
from .linsys import SystemDynamics, TimeGrid

__all__ = [
    "GaussianDensity",
    "GridDensity1D",
    "SystemDynamics",
    "TimeGrid",
]

__version__ = "0.1.0"
