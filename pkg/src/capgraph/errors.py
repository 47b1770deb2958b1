"""Exception types shared across the package."""

from __future__ import annotations


class CapillaryLabError(Exception):
    """Base class for all package-specific errors."""


class BadDimension(CapillaryLabError):
    """Base dimension outside the supported set {1, 2}."""


class NonconformingExtent(CapillaryLabError):
    """Domain extent is not an integer multiple of the mesh width."""


class EmptyRegion(CapillaryLabError):
    """No grid node lies in (or near) the requested region."""


class ZeroVector(CapillaryLabError):
    """A direction argument that must be nonzero was zero."""


class DegenerateAngle(CapillaryLabError):
    """Contact angle too close to 0 or pi (sin below the configured floor)."""


class ShapeMismatch(CapillaryLabError):
    """Field or vector shape does not match the grid it claims to live on."""


class LinearSolveFailure(CapillaryLabError):
    """Krylov iteration stagnated or hit its iteration cap."""


class DegenerateState(CapillaryLabError):
    """Coefficient evaluation requested outside its domain of validity."""


class AngleOutOfRange(CapillaryLabError):
    """Contact angle outside the admissible range for the requested dimension."""


class HypothesisViolation(CapillaryLabError):
    """Configured data family breaks the hypothesis of the chosen scenario."""


class OutOfExtent(CapillaryLabError):
    """Rescaled query point falls outside the source grid extent."""


class BadConfig(CapillaryLabError):
    """Malformed or unknown configuration input."""


class InvariantViolation(CapillaryLabError):
    """A run-time check of a documented invariant failed."""


class StationarityViolation(InvariantViolation):
    """An admissible competitor undercuts the energy of a solved field.

    Carries the offending perturbation so the failure can be replayed.
    """

    def __init__(self, message: str, perturbation=None, epsilon: float | None = None):
        super().__init__(message)
        self.perturbation = perturbation
        self.epsilon = epsilon
