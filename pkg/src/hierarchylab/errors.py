"""Exception hierarchy shared by all modules."""


class HierarchyLabError(Exception):
    """Base class for all library errors."""


# symbolic layer
class UnsupportedAlphabet(HierarchyLabError):
    pass


class NotATotalDerivative(HierarchyLabError):
    pass


class NotAGradient(HierarchyLabError):
    pass


class RecursionInconsistency(HierarchyLabError):
    pass


class StructureViolation(HierarchyLabError):
    pass


# numerical layer
class GridMismatch(HierarchyLabError):
    pass


class SingularS(HierarchyLabError):
    pass


class NonDecayingPotential(HierarchyLabError):
    pass


class StiffnessFailure(HierarchyLabError):
    pass


class AtEigenvalue(HierarchyLabError):
    pass


class NotInMiuraRange(HierarchyLabError):
    pass


class ResidualTooLarge(HierarchyLabError):
    pass


class BranchAmbiguity(HierarchyLabError):
    pass


class EigenvalueAtMinusOne(HierarchyLabError):
    pass


class ConvergenceNotReached(HierarchyLabError):
    pass


# time stepping
class BlowupDetected(HierarchyLabError):
    def __init__(self, message, last_good_time=None):
        super().__init__(message)
        self.last_good_time = last_good_time


class StabilityViolation(HierarchyLabError):
    pass
