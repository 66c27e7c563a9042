"""Exception types shared across the toolkit."""


class Driftless3DError(Exception):
    """Base class for all toolkit errors."""


class EmptyRegion(Driftless3DError):
    """Sampling box is degenerate (some side has nonpositive length)."""


class BlowUp(Driftless3DError):
    """Trajectory left the configured bounding box."""


class StepTooSmall(Driftless3DError):
    """Finite-difference step fell below the integrator accuracy floor."""


class ChatteringSuspected(Driftless3DError):
    """More switching events than the configured cap; possible chattering."""


class NonzeroViolation(Driftless3DError):
    """Covector norm underflowed along an extremal."""


class ZeroCovector(Driftless3DError):
    """Covector annihilates the evaluation frame; cannot normalize."""


class AmbiguousFeedback(Driftless3DError):
    """Both switching functions vanish, so the bang feedback is undefined."""


class SingularDenominator(Driftless3DError):
    """Singular-control denominator bracket pairing is below tolerance."""


class RankDeficient(Driftless3DError):
    """Constraint-space dimension differs from the value implied by ranks."""


class LiftConstructionFailed(Driftless3DError):
    """Shooting for a covector lift left a residual above tolerance."""


class Unreachable(Driftless3DError):
    """No candidate schedule hit the target within the time horizon."""


class FixtureInvalid(Driftless3DError):
    """Named system fixture failed its load-time validation."""


class ConfigError(Driftless3DError):
    """Run configuration failed validation.

    Carries the full list of field-level problems in ``problems``.
    """

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
