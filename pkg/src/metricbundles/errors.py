"""Exception hierarchy.

Two families matter to callers: ``PreconditionError`` (the inputs do not meet
an operation's hypotheses, CLI exit code 2) and ``NumericFailure`` (a spectral
gap closed or an eigensolver failed to converge, CLI exit code 3).
"""

from __future__ import annotations


class BundleError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class PreconditionError(BundleError):
    exit_code = 2


class NumericFailure(BundleError):
    exit_code = 3


class EmptySubset(PreconditionError):
    pass


class MetricAxiomViolation(PreconditionError):
    pass


class ZeroDistanceDistinctBlocks(PreconditionError):
    pass


class CorrespondenceDistortion(PreconditionError):
    pass


class NonFinite(PreconditionError):
    pass


class NotHermitian(PreconditionError):
    pass


class NotUnit(PreconditionError):
    pass


class SizeMismatch(PreconditionError):
    pass


class NotAProjection(PreconditionError):
    pass


class NotAFrame(PreconditionError):
    pass


class SlopeTooSmall(PreconditionError):
    pass


class DefectTooLarge(PreconditionError):
    pass


class NoGap(PreconditionError):
    pass


class RestrictionMismatch(PreconditionError):
    pass


class SpacingViolation(PreconditionError):
    def __init__(self, index: int, gap: float, allowed: float):
        super().__init__(
            f"consecutive restriction gap at index {index} is {gap:.6g}, "
            f"allowed at most {allowed:.6g}"
        )
        self.index = index
        self.gap = gap
        self.allowed = allowed


class BadParams(PreconditionError):
    pass


class NotOnSphere(PreconditionError):
    pass


class BadGrid(PreconditionError):
    pass


class NotPeriodicGrid(PreconditionError):
    pass


class SpectralGapViolation(NumericFailure):
    pass


class ConvergenceFailure(NumericFailure):
    pass


class StepFailure(BundleError):
    """Wraps an error raised while processing one step of a path."""

    def __init__(self, step: int, cause: BundleError):
        super().__init__(f"step {step}: {type(cause).__name__}: {cause}")
        self.step = step
        self.cause = cause
        self.exit_code = cause.exit_code
