"""Exception hierarchy shared by the toolkit and the CLI."""


class BilError(Exception):
    """Base class for all toolkit errors."""


class ConfigurationError(BilError, ValueError):
    """Invalid grid, parameter or run configuration."""


class FieldFormatError(BilError):
    """Malformed ``BSPC1`` container."""


class RangeError(BilError, ValueError):
    """Dyadic index or field energy outside the certified range of a partition."""

    def __init__(self, message, out_of_range_energy=None):
        super().__init__(message)
        self.out_of_range_energy = out_of_range_energy


class InfeasibleSchedule(BilError):
    """A construction schedule cannot be realized on the requested grid."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class SupportError(BilError):
    """Energy found where the construction requires an exact spectral zero."""


class SolverError(BilError):
    """Base class for Picard solver failures; carries the partial report."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class NonConvergence(SolverError):
    pass


class DivergenceDetected(SolverError):
    pass


class SmallnessViolated(SolverError):
    pass
