"""Exception types shared across the package."""


class AdvChainError(Exception):
    """Base class for all package errors."""


class JumpBoundViolation(AdvChainError):
    """A kernel or policy emitted a step longer than its declared bound."""


class NonFiniteState(AdvChainError):
    """A simulated coordinate became NaN or infinite."""


class EmptyEnsemble(AdvChainError):
    """An operation required a nonempty replica ensemble."""


class AllCensored(AdvChainError):
    """Every hitting-time replica hit the step cap."""


class InvalidState(AdvChainError):
    """A state does not belong to the process's state set."""


class InvalidParameter(AdvChainError):
    """A construction parameter violates its precondition."""


class PrecisionExhausted(AdvChainError):
    """A binary digit was requested beyond the declared precision depth."""


class DegenerateRectangle(AdvChainError):
    """A density-floor check was given an empty or zero-width rectangle."""


class NotReversible(AdvChainError):
    """An operation requiring a reversible chain was given a nonreversible one."""


class NoSuccess(AdvChainError):
    """A stopped-sum replica never drew a success indicator within the cap."""


class ConstantSeries(AdvChainError):
    """Autocorrelation of a zero-variance series is undefined."""


class ShapeMismatch(AdvChainError):
    """Two parameter collections do not share a common shape."""


class NonFiniteDensity(AdvChainError):
    """A proposal density was nonpositive or nonfinite at a sampled point."""


class InvalidSpec(AdvChainError):
    """A distribution spec violates its own consistency constraints."""


class DegenerateResidual(AdvChainError):
    """The data-augmentation residual sum of squares was nonpositive."""
