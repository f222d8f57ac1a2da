"""Error types raised by restkit.

Everything derives from ValueError so callers that only know about bad input
can keep catching that.
"""


class RestKitError(ValueError):
    """Base class for all restkit domain errors."""


class MalformedBody(RestKitError):
    """Tool-call delimiters were found but the enclosed body does not parse."""


class LengthMismatch(RestKitError):
    """Two per-token sequences that must align have different lengths."""


class NonFiniteLogits(RestKitError):
    """A policy produced NaN or infinite logits."""


class StateSpaceTooLarge(RestKitError):
    """An environment is too large to enumerate exactly."""


class GroupTooSmall(RestKitError):
    """Group-normalized advantages need at least two rewards."""


class EmptySequence(RestKitError):
    """A per-token operation was given a sequence without tokens."""


class MissingOldLogProbs(RestKitError):
    """A clipped objective needs rollout-time log-probabilities."""


class ConfigError(RestKitError):
    """A configuration file contains unsupported keys or values."""


class DataError(RestKitError):
    """An input data file is empty or does not follow its documented schema."""
