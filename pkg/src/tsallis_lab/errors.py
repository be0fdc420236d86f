"""Exception types. Each maps onto a CLI exit code."""


class LabError(Exception):
    exit_code = 1


class ResolutionError(LabError):
    """A field is under-resolved on its grid (spectral tail too heavy, or the
    evolved density lost positivity)."""

    exit_code = 3


class DegenerateInputError(LabError):
    """Input too close to zero or constant for a quotient functional."""

    exit_code = 3


class StepSizeError(LabError):
    """Finite-difference ladder is not converging monotonically."""

    exit_code = 3


class ConfigError(LabError):
    exit_code = 2


class InternalConsistencyError(LabError):
    """Something that cannot happen for valid inputs did."""

    exit_code = 1
