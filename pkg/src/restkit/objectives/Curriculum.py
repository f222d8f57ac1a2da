"""Region weights: entropy initialization, curriculum schedule, normalization.

Base weights come from region mean entropies. As training progress nu goes from
0 to 1 the schedule lowers format weights, raises parameter and thought weights
and pins tool-name weights at w_max. Per-token weights are then normalized to
mean one over a sequence.
"""

import dataclasses
import math
from typing import Sequence

import numpy as np

from ..data.constants import (
    DEFAULT_ADVANTAGE_DELTA,
    DEFAULT_W_MAX,
    DEFAULT_W_MIN,
    WEIGHTED_REGIONS,
    RegionTag,
    SurrogateRule,
)
from ..data.exceptions import ConfigError, EmptySequence
from ..estimators.OptimalWeights import surrogate_weights
from ..policy.SoftmaxPolicy import FloatArray
from ..tagging.RegionTagger import RegionEntropy, TaggedResponse

NORMALIZATIONS = ("sequence", "global")


@dataclasses.dataclass(frozen=True)
class WeightConfig:
    """Hyperparameters of region weighting and the clipped objectives.

    Parameters:
        w_min (float): Lower clip of region weights (default: 0.5).
        w_max (float): Upper clip of region weights (default: 3.0).
        alpha_f (float): Format weight decrease per unit progress.
        alpha_p (float): Parameter weight increase per unit progress.
        alpha_t (float): Thought weight increase per unit progress.
        epsilon_clip (float): Importance ratio clip range.
        delta (float): Advantage stability constant.
        delta_w (float): Stability constant of weight normalization.
        kl_coeff (float): Strength of the KL penalty towards the reference policy.
        surrogate_rule (SurrogateRule): Entropy-to-weight rule.
        normalization (str): "sequence" (per response) or "global" (per group).
        curriculum (bool): Apply the schedule; when off, weights are only clipped.
        thought_gradients (bool): When off, thought tokens get zero weight.
        other_weight (float): Fixed weight of the OTHER region.
    """

    w_min: float = DEFAULT_W_MIN
    w_max: float = DEFAULT_W_MAX
    alpha_f: float = 1.0
    alpha_p: float = 1.0
    alpha_t: float = 0.5
    epsilon_clip: float = 0.2
    delta: float = DEFAULT_ADVANTAGE_DELTA
    delta_w: float = 0.0
    kl_coeff: float = 0.0
    surrogate_rule: SurrogateRule = SurrogateRule.INV_ONE_MINUS_EXP
    normalization: str = "sequence"
    curriculum: bool = True
    thought_gradients: bool = True
    other_weight: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 < self.w_min <= self.w_max:
            raise ConfigError(f"Need 0 < w_min <= w_max, got {self.w_min}, {self.w_max}")
        if min(self.alpha_f, self.alpha_p, self.alpha_t) < 0.0:
            raise ConfigError("Curriculum rates must be non-negative")
        if not 0.0 < self.epsilon_clip < 1.0:
            raise ConfigError(f"epsilon_clip must be in (0, 1), got {self.epsilon_clip}")
        if self.delta < 0.0 or self.delta_w < 0.0 or self.kl_coeff < 0.0:
            raise ConfigError("delta, delta_w and kl_coeff must be non-negative")
        if self.normalization not in NORMALIZATIONS:
            raise ConfigError(f"Unknown normalization: {self.normalization!r}")
        if self.other_weight < 0.0:
            raise ConfigError("other_weight must be non-negative")


@dataclasses.dataclass(frozen=True)
class CurriculumState:
    """Training progress, entropy-initialized base weights and scheduled weights."""

    nu: float
    base: dict[RegionTag, float]
    weights: dict[RegionTag, float]

    def __post_init__(self) -> None:
        assert 0.0 <= self.nu <= 1.0, f"ERROR: Progress {self.nu} outside [0, 1]"
        for tag in RegionTag:
            assert math.isfinite(self.weights[tag]) and self.weights[tag] >= 0.0, (
                f"ERROR: Invalid weight for {tag.value}: {self.weights[tag]}"
            )

    def __getitem__(self, tag: RegionTag) -> float:
        return self.weights[tag]


def init_region_weights(
    region_entropy: RegionEntropy, cfg: WeightConfig = WeightConfig()
) -> CurriculumState:
    """Base weights from region entropies; absent regions and OTHER get 1."""
    raw = surrogate_weights(region_entropy, cfg.surrogate_rule, cfg.w_max)
    base = {tag: 1.0 if raw[tag] is None else float(raw[tag]) for tag in WEIGHTED_REGIONS}  # type: ignore[arg-type]
    base[RegionTag.OTHER] = 1.0
    return CurriculumState(nu=0.0, base=base, weights=dict(base))


def _clip(value: float, cfg: WeightConfig) -> float:
    return min(cfg.w_max, max(cfg.w_min, value))


def curriculum_update(
    state: CurriculumState, cfg: WeightConfig = WeightConfig(), nu: float | None = None
) -> CurriculumState:
    """Scheduled region weights at progress nu, recomputed from the base weights.

    Args:
        state (CurriculumState): State holding the base weights.
        cfg (WeightConfig): Clip bounds and schedule rates.
        nu (float | None): New progress; defaults to state.nu.

    Returns:
        CurriculumState: The state at nu.
    """
    progress = state.nu if nu is None else nu
    if not 0.0 <= progress <= 1.0:
        raise ValueError(f"Training progress must be in [0, 1], got {progress}")
    base = state.base
    if cfg.curriculum:
        weights = {
            RegionTag.FORMAT: _clip(base[RegionTag.FORMAT] - cfg.alpha_f * progress, cfg),
            RegionTag.TOOL_NAME: cfg.w_max,
            RegionTag.PARAMETER: _clip(base[RegionTag.PARAMETER] + cfg.alpha_p * progress, cfg),
            RegionTag.THOUGHT: _clip(base[RegionTag.THOUGHT] + cfg.alpha_t * progress, cfg),
        }
    else:
        weights = {tag: _clip(base[tag], cfg) for tag in WEIGHTED_REGIONS}
    weights[RegionTag.OTHER] = _clip(cfg.other_weight, cfg)
    return CurriculumState(nu=progress, base=dict(base), weights=weights)


def _token_weights(tagged: TaggedResponse, state: CurriculumState, cfg: WeightConfig) -> FloatArray:
    if len(tagged) == 0:
        raise EmptySequence("Cannot weight a response without tokens")
    w = np.array([state[tag] for tag in tagged.spans], dtype=np.float64)
    if not cfg.thought_gradients:
        w[np.array([tag is RegionTag.THOUGHT for tag in tagged.spans])] = 0.0
    return w


def normalize_weights(
    tagged: TaggedResponse, state: CurriculumState, cfg: WeightConfig = WeightConfig()
) -> FloatArray:
    """Per-token weights omega_t = w_t / (mean_t w_t + delta_w).

    With delta_w = 0 the weights of every sequence sum to its length.

    Raises:
        EmptySequence: If the response has no tokens.
    """
    w = _token_weights(tagged, state, cfg)
    denominator = math.fsum(w) / len(w) + cfg.delta_w
    if denominator == 0.0:
        # Only possible when every token is a thought token with thought gradients off
        return np.zeros_like(w)
    return np.asarray(w / denominator, dtype=np.float64)


def normalize_group_weights(
    tagged: Sequence[TaggedResponse],
    state: CurriculumState,
    cfg: WeightConfig = WeightConfig(),
) -> list[FloatArray]:
    """Per-token weights of every response of a group.

    "sequence" normalizes each response on its own. "global" divides by the
    mean weight over all tokens of the group.
    """
    if cfg.normalization == "sequence":
        return [normalize_weights(t, state, cfg) for t in tagged]
    raw = [_token_weights(t, state, cfg) for t in tagged]
    total = math.fsum(float(x) for w in raw for x in w)
    count = sum(len(w) for w in raw)
    denominator = total / count + cfg.delta_w
    if denominator == 0.0:
        return [np.zeros_like(w) for w in raw]
    return [np.asarray(w / denominator, dtype=np.float64) for w in raw]
