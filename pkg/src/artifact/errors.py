"""Exception hierarchy shared by all modules."""


class ArtifactError(Exception):
    """Base class for computation errors (CLI exit code 1)."""


class ConfigError(ArtifactError):
    """Invalid or unknown configuration (CLI exit code 2)."""


# maps
class CosetEnumerationFailure(ArtifactError):
    pass


class NotVolumePreserving(ArtifactError):
    pass


# billiards
class InvalidTable(ArtifactError):
    pass


class HorizonExceeded(ArtifactError):
    pass


class GrazingInput(ArtifactError):
    pass


class NearGrazing(ArtifactError):
    pass


class NoConvergence(ArtifactError):
    pass


class Occluded(ArtifactError):
    pass


# cocycles
class SingularJacobian(ArtifactError):
    pass


class DepthTooSmall(ArtifactError):
    pass


class NoGap(ArtifactError):
    pass


class NotHyperbolic(ArtifactError):
    pass


# preimage statistics
class BudgetExceeded(ArtifactError):
    pass


class DegenerateTail(ArtifactError):
    pass


# markov shifts
class NonConvergence(ArtifactError):
    pass


class MonotonicityViolation(ArtifactError):
    pass


class HypothesisViolated(UserWarning):
    """Warning: the averaged bound assumed by the Pliss selection fails on the window."""
