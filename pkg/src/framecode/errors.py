"""Exception hierarchy shared by all framecode modules."""


class FramecodeError(Exception):
    """Base class for every error raised by this package."""


class InvalidParameters(FramecodeError, ValueError):
    pass


class UnsupportedParameters(FramecodeError, ValueError):
    """Parameters are well formed but no construction is implemented for them."""


class RejectedAsUSPC(InvalidParameters):
    """A power set offered as non-consecutive is a cyclic run of integers."""


class Underdetermined(FramecodeError, ValueError):
    """Fewer retained columns than message blocks; decoding is impossible."""


class IllConditioned(FramecodeError, ArithmeticError):
    """The retained sub-frame is numerically singular."""

    def __init__(self, message: str, kappa: float):
        super().__init__(message)
        self.kappa = kappa


class FormatError(FramecodeError, ValueError):
    """A frame or data file could not be parsed."""
