"""Exception hierarchy for the toolkit."""


class TspmpError(Exception):
    """Base class of every error raised by tspmp."""


# time scales
class EmptyScale(TspmpError, ValueError):
    pass


class SingletonScale(TspmpError, ValueError):
    pass


class NotInScale(TspmpError, ValueError):
    pass


class ReversedInterval(TspmpError, ValueError):
    pass


class NonPositiveStep(TspmpError, ValueError):
    pass


# grid functions / calculus
class GridMismatch(TspmpError, ValueError):
    pass


class NotOnGrid(TspmpError, ValueError):
    pass


class AtScaleMax(TspmpError, ValueError):
    pass


class NegativeRate(TspmpError, ValueError):
    pass


# geometry
class DimensionMismatch(TspmpError, ValueError):
    pass


class NotInOmega(TspmpError, ValueError):
    pass


class NotInTarget(TspmpError, ValueError):
    pass


class UnsupportedKind(TspmpError, ValueError):
    pass


# term language / problems
class TermError(TspmpError, ValueError):
    """Malformed or disallowed expression in the dynamics term language."""


# simulation
class BlowUp(TspmpError, ArithmeticError):
    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class ControlOutOfOmega(TspmpError, ValueError):
    pass


# needles
class NotRS(TspmpError, ValueError):
    pass


class NotRD(TspmpError, ValueError):
    pass


class AlphaNotInDenseSet(TspmpError, ValueError):
    pass


class BetaNotInV(TspmpError, ValueError):
    pass


# certificate
class MaximizationFailed(TspmpError, RuntimeError):
    pass


class NotApplicable(TspmpError):
    """A condition does not apply to this problem/extremal.

    ``value`` optionally carries the quantity that was computed anyway
    (e.g. the maximized Hamiltonian at a non-interior final time).
    """

    def __init__(self, message, value=None):
        super().__init__(message)
        self.value = value


class NontrivialityViolation(TspmpError, ValueError):
    pass


# solvers
class TooLarge(TspmpError, ValueError):
    pass


class NoAdmissibleControl(TspmpError, RuntimeError):
    pass


class NoConvergence(TspmpError, RuntimeError):
    def __init__(self, message, defect_history=None):
        super().__init__(message)
        self.defect_history = list(defect_history or [])


class DegenerateArgmax(TspmpError, RuntimeError):
    pass


class StepTooLarge(TspmpError, RuntimeError):
    pass
