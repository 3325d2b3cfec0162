"""
Exception hierarchy for halfspace-kernels.

Contract violations on user input derive from ValueError, numerical or
construction failures derive from RuntimeError. Every error carries the
process exit code the CLI reports for it.
"""


class HalfSpaceError(Exception):
    """Base class for all errors raised by this package.

    Attributes:
        exit_code: Exit status used by the command-line driver
    """

    exit_code = 4


class InputError(HalfSpaceError, ValueError):
    """Bad input or violated precondition."""

    exit_code = 2


class ComputationError(HalfSpaceError, RuntimeError):
    """A numerical construction could not be carried out."""

    exit_code = 3


# Grid and field contracts

class InvalidGrid(InputError):
    pass


class NonPowerOfTwo(InvalidGrid):
    pass


class NonFiniteSample(InputError):
    pass


class GridMismatch(InputError):
    pass


class EmptyHeights(InputError):
    pass


class InvalidHeights(InputError):
    pass


class NonPositiveWeight(InputError):
    pass


class ConfigError(InputError):
    pass


class MissingFile(InputError):
    pass


# Function spaces

class SpecViolation(InputError):
    pass


class NoDualImplemented(InputError):
    pass


class InvalidAtom(InputError):
    pass


class SupportViolation(InvalidAtom):
    pass


class SizeViolation(InvalidAtom):
    pass


class MeanNotZero(InvalidAtom):
    pass


class SpecScreenFailed(ComputationError):
    """The maximal operator could not be certified bounded on a space."""


# Kernels

class CoincidentPoints(InputError):
    pass


class NotStronglyElliptic(ComputationError):
    pass


class NotLegendreHadamard(ComputationError):
    pass


class SingularSymbol(ComputationError):
    pass


class NotRadial(ComputationError):
    pass


class SplittingFailure(ComputationError):
    """The companion pencil did not split into M decaying and M growing roots."""


class IllConditionedBasis(ComputationError):
    pass
