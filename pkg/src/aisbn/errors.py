"""Exception types shared across the package."""


class NetworkFormatError(ValueError):
    """A network or evidence file could not be parsed."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class InvalidNetworkError(ValueError):
    """A network failed structural validation.

    Carries the full list of problems so callers can report all of
    them at once instead of one per attempt.
    """

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class StateSpaceCapError(RuntimeError):
    """Exact computation would enumerate more states than the cap allows."""


class ZeroEvidenceProbabilityError(RuntimeError):
    """The evidence has probability zero, so posteriors are undefined."""


class NoEffectiveSamplesError(RuntimeError):
    """Every accumulated sample scored zero; estimates are unavailable."""
