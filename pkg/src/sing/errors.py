"""Exception and warning types raised by the sing package."""


class SingError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(SingError, ValueError):
    """Malformed input: wrong shape, non-finite values, bad parameters."""


class DegenerateInputError(SingError, ValueError):
    """Input is well-formed but carries too little information (constant, rank deficient)."""


class DomainError(SingError, ValueError):
    """A quantity is outside the domain of the requested operation."""


class InvalidRankError(InvalidInputError):
    """Requested number of components is incompatible with the data."""


class MissingRankError(InvalidInputError):
    """Component counts were not supplied."""


class AlignmentError(SingError, ValueError):
    """Score columns have inconsistent signs."""


class InsufficientSubjectsError(InvalidInputError):
    """Too few subjects (rows) for the requested test."""


class InsufficientPermutationsError(InvalidInputError):
    """Too few permutations for a meaningful null distribution."""


class NumericError(SingError, ArithmeticError):
    """Non-finite values produced during optimization."""

    def __init__(self, message, *, restart=None, iteration=None):
        super().__init__(message)
        self.restart = restart
        self.iteration = iteration


class ConvergenceWarning(UserWarning):
    """An iterative routine stopped at its iteration cap."""
