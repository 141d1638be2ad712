"""Exception types raised across the package.

Every error carries its class name to the CLI, which reports it and exits 1.
"""


class ThermaugError(Exception):
    """Base class for all package errors."""


# dataio
class MissingColumn(ThermaugError):
    pass


class RaggedSeries(ThermaugError):
    pass


class NonFiniteValue(ThermaugError):
    pass


class DuplicateKey(ThermaugError):
    pass


class DegenerateData(ThermaugError):
    pass


class EmptyDataset(ThermaugError):
    pass


class NonDivisibleFactor(ThermaugError):
    pass


# simulator
class UnstableIntegration(ThermaugError):
    pass


# labeling
class BadWindow(ThermaugError):
    pass


# training
class NonFiniteLoss(ThermaugError):
    pass


class UnfittedModel(ThermaugError):
    pass


class UnknownClass(ThermaugError):
    pass


class CodebookCollapse(UserWarning):
    """Emitted (as a warning) when fewer than two codes are in use after training."""


# metrics
class UndefinedMAPE(ThermaugError):
    pass


class UndefinedMASE(ThermaugError):
    pass


class RankDeficient(ThermaugError):
    pass


class PerplexityTooLarge(ThermaugError):
    pass


# harness
class ClassTooSmall(ThermaugError):
    pass


class EmptyArm(ThermaugError):
    pass


class LeakageError(ThermaugError):
    """A test-set series reached a fit or train call."""


class CheckpointError(ThermaugError):
    pass


class OutputExists(ThermaugError):
    """Refusing to overwrite an existing output without ``--force``."""
