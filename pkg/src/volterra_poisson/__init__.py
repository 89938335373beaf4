"""Poisson integrators and structure checks for the periodic Volterra lattice."""
from .exceptions import (
    DomainError,
    IntegrationError,
    NonConvergenceError,
    PositivityLossWarning,
    SingularStepError,
)
from .lattice import *  # noqa: F401,F403
from .integrators import *  # noqa: F401,F403
from .verify import *  # noqa: F401,F403

__version__ = "0.1.0"
