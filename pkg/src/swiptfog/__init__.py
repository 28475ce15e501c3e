"""Minimum-energy mode selection for SWIPT-powered mobile users with fog offloading."""
from .exceptions import (BothModesInfeasibleError, ConfigError, DomainError, InfeasibleModeError,
                         NoCrossoverError, NoFeasiblePointError, ScheduleTooLargeError, SwiptFogError)
from .models import Geometry, LinkGains, ModeSolution, RunConfig, SystemParams

__version__ = "1.0.0"

__all__ = [
    "BothModesInfeasibleError",
    "ConfigError",
    "DomainError",
    "Geometry",
    "InfeasibleModeError",
    "LinkGains",
    "ModeSolution",
    "NoCrossoverError",
    "NoFeasiblePointError",
    "RunConfig",
    "ScheduleTooLargeError",
    "SwiptFogError",
    "SystemParams",
]
