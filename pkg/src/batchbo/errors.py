"""Exception types shared across the package.

Everything numerical that can fail in a well-defined way derives from
MathDomainError so the CLI can map it to a stable exit code.
"""


class MathDomainError(Exception):
    """Base class for numeric/domain failures (CLI exit code 2)."""


class NonSpdError(MathDomainError):
    """Matrix is not symmetric positive definite, even after one jitter pass."""


class CdfToleranceError(MathDomainError):
    """CDF integration did not reach the requested tolerance.

    Carries the requested tolerance, the achieved error estimate and the
    best value so callers can decide whether to proceed anyway.
    """

    def __init__(self, requested, achieved, value):
        self.requested = requested
        self.achieved = achieved
        self.value = value
        super().__init__(
            f"cdf tolerance {requested:.3e} not reached "
            f"(achieved {achieved:.3e}, value {value:.6e})"
        )


class DuplicatePointError(MathDomainError):
    """Points coincide beyond the dedup tolerance where distinctness is required."""


class NonSmoothPointError(MathDomainError):
    """Gradient requested at a point where the kernel is not smooth (matern32)."""


class DegenerateScheduleError(MathDomainError):
    """A confidence-bound schedule produced a non-positive coefficient."""


class LineSearchError(MathDomainError):
    """Every optimizer start failed its first line search."""
