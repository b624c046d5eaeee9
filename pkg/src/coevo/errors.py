"""Exception types shared across the package."""


class GroundTruthMissing(ValueError):
    """An operation needs ground-truth test columns but the matrix has none."""


class NoValidCandidates(ValueError):
    """A matrix cannot be built because no code candidate parsed successfully."""


class EmptyGroup(ValueError):
    """A group-level statistic was requested for an empty candidate group."""


class ShapeError(ValueError):
    """Aligned sequences disagree in length or indices fall out of range."""


class UnsupportedShape(ValueError):
    """stdio encoding got a value nested deeper than one list level."""


class SubsampleTooLarge(ValueError):
    """A subsample size exceeds the number of available rows or columns."""


class NoGeneratedTests(ValueError):
    """Selection needs at least one generated-test column."""


class PromptError(ValueError):
    """A prompt template cannot be rendered from the given task."""


class InterpreterMissing(OSError):
    """The configured interpreter executable was not found."""


class SpawnError(OSError):
    """The candidate process could not be launched (distinct from it failing)."""


class GatewayError(RuntimeError):
    """All attempts to reach the completion endpoint failed."""


class AuthError(GatewayError):
    """The completion endpoint rejected our credentials."""
