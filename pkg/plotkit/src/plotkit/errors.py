class PlotkitError(Exception):
    """Base class for everything raised on purpose."""


class SpecError(PlotkitError):
    """The figure spec is unusable. Carries every problem found."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid figure spec: " + "; ".join(self.problems))


class ReaderError(PlotkitError):
    """An artifact file does not parse as expected."""
