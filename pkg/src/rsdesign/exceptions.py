"""Exception types shared across the package."""

from __future__ import annotations


class RsdesignError(Exception):
    """Base class for all package errors."""


class DomainError(RsdesignError, ValueError):
    """A design point or argument lies outside its admissible region."""


class SupportViolation(RsdesignError, ValueError):
    """An error value lies outside the support of the error density."""


class QuadratureError(RsdesignError, RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance.

    Carries the best estimate and the achieved error bound so callers can
    decide whether the result is still usable.
    """

    def __init__(self, message: str, estimate=None, error_bound=None):
        super().__init__(message)
        self.estimate = estimate
        self.error_bound = error_bound


class NonConvergence(RsdesignError, RuntimeError):
    """An iterative solver hit its iteration cap before meeting tolerance."""

    def __init__(self, message: str, best=None, grad_norm: float | None = None):
        super().__init__(message)
        self.best = best
        self.grad_norm = grad_norm


class MultimodalWarning(UserWarning):
    """Multi-start optimization found distinct local maxima in a near-tie."""


class SingularInfo(RsdesignError, RuntimeError):
    """An information matrix is singular (or incompatible with the criterion)."""


class NegativeQ(RsdesignError, RuntimeError):
    """A per-cluster observed information is negative where a genuine local
    maximum was required; indicates a failed location fit."""


class AllWeightsDegenerate(RsdesignError, RuntimeError):
    """Total observed information is non-positive even after regularization."""


class NotCertified(RsdesignError, RuntimeError):
    """The design solver stopped at its iteration cap without certification."""

    def __init__(self, message: str, design=None, min_phi: float | None = None):
        super().__init__(message)
        self.design = design
        self.min_phi = min_phi


class InfeasibleRounding(RsdesignError, ValueError):
    """Exact-design rounding is impossible (fewer observations than points)."""


class ReplicateDropped(RsdesignError, RuntimeError):
    """A simulated replicate could not be completed (recorded, not fatal)."""


class ConfigError(RsdesignError, ValueError):
    """Configuration parsing/validation failed; carries all messages."""

    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = list(errors)
