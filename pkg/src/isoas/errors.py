"""Exception types shared across the package.

The split matters for the CLI exit codes: bad input files, bad models and
blown iteration caps are different failure classes and map to different
codes.
"""


class IsoasError(Exception):
    """Base class for all package-specific errors."""


class SchemaError(IsoasError):
    """A problem file is malformed. Collects every offending field."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid problem file: " + "; ".join(self.problems))


class ModelError(IsoasError):
    """The model data is structurally valid but violates a precondition
    (non-Schur closed loop, wrong equilibrium nullity, empty input range...)."""


class LPSolverError(IsoasError):
    """The LP backend returned an unexpected status."""


class CapExceededError(IsoasError):
    """An iteration or row-count cap was hit before convergence."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
