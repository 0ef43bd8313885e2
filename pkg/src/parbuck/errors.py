"""Exception types shared across the package."""


class ParbuckError(Exception):
    """Base class for all package errors."""


class ParameterError(ParbuckError):
    """A physical or controller parameter is invalid.

    Carries the name of the offending field so callers (CLI, service) can
    point at the exact entry.
    """

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class StructureError(ParbuckError):
    """A constructed matrix violates its required algebraic structure."""


class UnsupportedOracleError(ParbuckError):
    """No closed-form or scalar-search argmin route exists for this cost."""


class ConfigError(ParbuckError):
    """A scenario description failed to parse or validate."""


class SimulationDiverged(ParbuckError):
    """Integration produced a non-finite state.

    The partial trace recorded up to the failure is attached for
    post-mortem inspection.
    """

    def __init__(self, t: float, state, trace=None):
        self.t = t
        self.state = state
        self.trace = trace
        super().__init__(
            f"non-finite state at t={t:.6g} s: {state}"
        )
