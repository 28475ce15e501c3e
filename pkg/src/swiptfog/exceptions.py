from typing import Optional


class SwiptFogError(Exception):
    """Base class for every error raised by the package."""


class DomainError(SwiptFogError, ValueError):
    """An argument lies outside the domain of the formula being evaluated."""


class InfeasibleModeError(SwiptFogError):
    """A computing mode cannot meet its constraints for the given channel."""

    def __init__(self, verdict, message: Optional[str] = None):
        self.verdict = verdict
        super().__init__(message or f"{verdict.mode} mode infeasible: {verdict.reason}")


class BothModesInfeasibleError(InfeasibleModeError):
    def __init__(self, local_verdict, offload_verdict):
        self.local_verdict = local_verdict
        self.offload_verdict = offload_verdict
        super().__init__(
            local_verdict,
            f"both modes infeasible (local: {local_verdict.reason}, "
            f"offload: {offload_verdict.reason})",
        )


class NoFeasiblePointError(SwiptFogError):
    """The search lattice holds no point satisfying the constraints."""


class NoCrossoverError(SwiptFogError):
    """The two mode energies do not cross inside the search bracket."""


class ScheduleTooLargeError(SwiptFogError, ValueError):
    pass


class ConfigError(SwiptFogError, ValueError):
    pass
