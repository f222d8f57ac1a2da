"""Rule-based reward for tool calls.

The reward is a weighted sum of a format score and a normalized correctness
score built from three parts:

    r_name  = Jaccard(gold names, predicted names)
    r_para  = sum over gold tools of Jaccard(gold param names, predicted param names)
    r_value = sum over gold tools and gold params of 1[predicted value == gold value]
    s_acc   = (r_name + r_para + r_value) / (1 + |G| + sum |v(G_i)|)

and, with dynamic scaling, the whole reward shrinks by (1 - nu) as training
progresses.
"""

import dataclasses
import logging
from typing import AbstractSet

from ..data.constants import (
    DEFAULT_BETA_ACC,
    DEFAULT_BETA_FMT,
    DEFAULT_TEMPLATE,
    ResponseTemplate,
)
from ..data.exceptions import ConfigError, MalformedBody
from ..tooldata.ToolCall import (
    ToolCallSet,
    canonical_key,
    parse_tool_calls,
    parse_tool_calls_lenient,
)

logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class RewardConfig:
    """Weights of the accuracy and format scores.

    Parameters:
        beta_acc (float): Weight of the correctness score (default: 0.8).
        beta_fmt (float): Weight of the format score (default: 0.2).
        dynamic_scaling (bool): Scale the reward by (1 - nu) (default: True).
    """

    beta_acc: float = DEFAULT_BETA_ACC
    beta_fmt: float = DEFAULT_BETA_FMT
    dynamic_scaling: bool = True

    def __post_init__(self) -> None:
        if self.beta_acc < 0 or self.beta_fmt < 0:
            raise ConfigError("Reward weights must be non-negative")
        if self.beta_acc + self.beta_fmt <= 0:
            raise ConfigError("At least one reward weight must be positive")


@dataclasses.dataclass(frozen=True)
class RewardBreakdown:
    """Every intermediate quantity of one reward computation."""

    s_format: int
    r_name: float
    r_para: float
    r_value: float
    z_norm: int
    s_acc: float
    r_final: float
    parse_error: str | None = None

    def unscaled(self, cfg: "RewardConfig") -> float:
        """The reward without dynamic scaling, for progress reporting."""
        return cfg.beta_acc * self.s_acc + cfg.beta_fmt * self.s_format


def _jaccard(a: AbstractSet[str], b: AbstractSet[str]) -> float:
    union = a | b
    if not union:
        # Two empty sets agree perfectly
        return 1.0
    return len(a & b) / len(union)


def format_score(raw: str, template: ResponseTemplate = DEFAULT_TEMPLATE) -> int:
    """1 if the response has every delimiter exactly once, in order, and a parsable call.

    Args:
        raw (str): The raw response.
        template (ResponseTemplate): The expected delimiters.

    Returns:
        int: 1 or 0.
    """
    positions = []
    for delimiter in template.delimiters:
        if raw.count(delimiter) != 1:
            return 0
        positions.append(raw.find(delimiter))
    if positions != sorted(positions):
        return 0
    try:
        calls = parse_tool_calls(raw, template)
    except MalformedBody:
        return 0
    return 1 if len(calls) > 0 else 0


def tool_match_scores(
    pred: ToolCallSet, gold: ToolCallSet
) -> tuple[float, float, float]:
    """Name, parameter-name and parameter-value scores of a prediction.

    Tools only in the prediction lower r_name through the union but add
    nothing to r_para or r_value, which sum over gold tools.

    Args:
        pred (ToolCallSet): The predicted calls.
        gold (ToolCallSet): The ground-truth calls.

    Returns:
        tuple[float, float, float]: (r_name, r_para, r_value).
    """
    r_name = _jaccard(gold.names, pred.names)
    predicted = pred.by_name()
    r_para = 0.0
    r_value = 0
    for name, gold_call in gold.by_name().items():
        pred_call = predicted.get(name)
        if pred_call is None:
            continue
        r_para += _jaccard(gold_call.param_names, pred_call.param_names)
        for param, gold_value in gold_call.params.items():
            if param in pred_call.params and canonical_key(
                pred_call.params[param]
            ) == canonical_key(gold_value):
                r_value += 1
    return r_name, r_para, float(r_value)


def normalizer(gold: ToolCallSet) -> int:
    """Z = 1 + |G| + total number of gold parameter values."""
    tools = gold.by_name()
    return 1 + len(tools) + sum(len(call.params) for call in tools.values())


def accuracy_score(scores: tuple[float, float, float], gold: ToolCallSet) -> float:
    """Normalized correctness score in [0, 1].

    With an empty gold set Z is 1 and the score reduces to r_name, which is 1
    only when the prediction is empty too.
    """
    r_name, r_para, r_value = scores
    return (r_name + r_para + r_value) / normalizer(gold)


def final_reward(
    s_acc: float, s_format: int, cfg: RewardConfig = RewardConfig(), nu: float = 0.0
) -> float:
    """Weighted sum of accuracy and format, scaled by (1 - nu) when enabled.

    Raises:
        ValueError: If nu is outside [0, 1).
    """
    if not 0.0 <= nu < 1.0:
        raise ValueError(f"Training progress must be in [0, 1), got {nu}")
    reward = cfg.beta_acc * s_acc + cfg.beta_fmt * s_format
    if cfg.dynamic_scaling:
        return (1.0 - nu) * reward
    return reward


def score_response(
    raw: str,
    gold: ToolCallSet,
    template: ResponseTemplate = DEFAULT_TEMPLATE,
    cfg: RewardConfig = RewardConfig(),
    nu: float = 0.0,
) -> RewardBreakdown:
    """Full reward computation for one raw response against its gold calls."""
    pred, error = parse_tool_calls_lenient(raw, template)
    s_format = format_score(raw, template)
    scores = tool_match_scores(pred, gold)
    s_acc = accuracy_score(scores, gold)
    return RewardBreakdown(
        s_format=s_format,
        r_name=scores[0],
        r_para=scores[1],
        r_value=scores[2],
        z_norm=normalizer(gold),
        s_acc=s_acc,
        r_final=final_reward(s_acc, s_format, cfg, nu),
        parse_error=error,
    )
