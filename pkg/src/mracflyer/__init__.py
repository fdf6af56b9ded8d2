"""Model-reference adaptive position control for an insect-scale flapping-wing flyer.

The package simulates the translational point-mass dynamics of the flyer,
compensates the aggregated disturbance with a Gaussian RBF network whose
weights adapt online, certifies the closed-loop error dynamics with a
Lyapunov solve, and runs paired hovering experiments (adaptive vs. baseline).
"""

from .errors import (
    CertificationError,
    ConfigError,
    DivergenceError,
    DomainError,
    MracError,
    ShapeError,
)

__version__ = "0.1.0"

__all__ = [
    "CertificationError",
    "ConfigError",
    "DivergenceError",
    "DomainError",
    "MracError",
    "ShapeError",
    "__version__",
]
