"""Exception hierarchy.

Every error raised by the package derives from :class:`DressingLabError`, and
most also derive from the closest builtin so callers can catch either.
"""

import numpy as np


class DressingLabError(Exception):
    """Base class for all package errors."""


# grids and finite differences
class NonPositivePeriod(DressingLabError, ValueError):
    pass


class TooFewNodes(DressingLabError, ValueError):
    pass


class AxisOutOfRange(DressingLabError, IndexError):
    pass


class NonFiniteState(DressingLabError, FloatingPointError):
    pass


# model data
class NoNonzeroSolution(DressingLabError, ValueError):
    pass


class NonEvolvable(DressingLabError, ValueError):
    """Some S^M_{ab} vanishes, so the equation cannot be solved for d/dx_M."""


class VariantMismatch(DressingLabError, ValueError):
    pass


# dressing kernels
class PoleHit(DressingLabError, ZeroDivisionError):
    pass


class NotIntegrable(DressingLabError, ValueError):
    pass


class SingularSystem(DressingLabError, np.linalg.LinAlgError):
    def __init__(self, message, x=None, condition=None):
        super().__init__(message)
        self.x = x
        self.condition = condition


# phi representation
class SingularReconstruction(DressingLabError, np.linalg.LinAlgError):
    def __init__(self, message, node=None, condition=None):
        super().__init__(message)
        self.node = node
        self.condition = condition


class SingularLineSystem(DressingLabError, np.linalg.LinAlgError):
    def __init__(self, message, line=None, condition=None):
        super().__init__(message)
        self.line = line
        self.condition = condition


class MissingTimeDerivative(DressingLabError, ValueError):
    pass


class MissingProfile(DressingLabError, KeyError):
    pass


# residuals
class MissingDerivative(DressingLabError, KeyError):
    pass


class NonMonotone(DressingLabError, ValueError):
    pass


# harness
class ParseError(DressingLabError, ValueError):
    def __init__(self, message, line=None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)
        self.line = line


class UnknownKey(ParseError):
    pass


class ModelInvalid(DressingLabError, ValueError):
    def __init__(self, report):
        super().__init__("invalid model:\n" + str(report))
        self.report = report


class FormatError(DressingLabError, ValueError):
    pass


class IoError(DressingLabError, OSError):
    pass
