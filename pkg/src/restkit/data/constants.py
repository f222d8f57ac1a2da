"""Constants for the restkit package.

This module defines the region tags, the response template and the numeric
defaults shared by the reward, tagging, estimator and objective modules.
"""

from enum import Enum
from dataclasses import dataclass

# Probabilities are floored before taking logs so 0 * log(0) evaluates to 0
PROB_FLOOR = 1e-300
# Strictly positive floor for per-step variance contributions when mixing with surrogates
BETA_FLOOR = 1e-9
# Enumeration oracles refuse environments with more trajectories than this
MAX_ENUMERATION = 10**6

DEFAULT_BETA_ACC = 0.8
DEFAULT_BETA_FMT = 0.2
DEFAULT_W_MIN = 0.5
DEFAULT_W_MAX = 3.0
DEFAULT_ADVANTAGE_DELTA = 1e-6
DEFAULT_BOOTSTRAP_RESAMPLES = 1000


class RegionTag(Enum):
    """Weight regions of a generated response."""

    FORMAT = "format"
    TOOL_NAME = "name"
    PARAMETER = "param"
    THOUGHT = "thought"
    OTHER = "other"


# Regions that receive entropy-initialized weights; OTHER is always a fixed weight
WEIGHTED_REGIONS = (
    RegionTag.FORMAT,
    RegionTag.TOOL_NAME,
    RegionTag.PARAMETER,
    RegionTag.THOUGHT,
)


class SurrogateRule(Enum):
    """Entropy-only stand-ins for the per-step variance contribution."""

    INV_ONE_MINUS_EXP = "inv_one_minus_exp"
    INV_ENTROPY = "inv_entropy"


class BetaKind(Enum):
    """How a per-step variance profile was obtained."""

    EXACT_TOY = "exact_toy"
    EXACT_PLAIN = "exact_plain"
    MONTE_CARLO = "monte_carlo"
    ENTROPY_ONLY = "entropy_only"


class AdvantageMode(Enum):
    """Baseline used when turning rewards into advantages."""

    GROUP = "group"
    POPULATION = "population"
    CENTERED = "centered"


@dataclass(frozen=True)
class ResponseTemplate:
    """Delimiters of a response: a thought block followed by a tool-call block."""

    think_open: str = "<think>"
    think_close: str = "</think>"
    call_open: str = "<tool_call>"
    call_close: str = "</tool_call>"

    def __post_init__(self) -> None:
        for delimiter in self.delimiters:
            assert delimiter, "ERROR: Template delimiters must be non-empty"

    @property
    def delimiters(self) -> tuple[str, str, str, str]:
        """All four delimiters in their required order."""
        return (self.think_open, self.think_close, self.call_open, self.call_close)


DEFAULT_TEMPLATE = ResponseTemplate()
