"""Small sequence environments for softmax policies.

An environment has a vocabulary of V tokens, a fixed horizon T and a handful of
contexts. A response is the token sequence y_0..y_{T-1}; it is rendered to text
by picking slots[t][y_t] at each step, and rewarded either by the tool-call
reward against the context's gold calls or by per-step agreement with target
tokens.
"""

import dataclasses
import logging
import math
from collections import Counter
from typing import Any, Mapping, Sequence

import numpy as np

from ..data.constants import (
    DEFAULT_TEMPLATE,
    PROB_FLOOR,
    WEIGHTED_REGIONS,
    RegionTag,
    ResponseTemplate,
)
from ..data.exceptions import ConfigError
from ..reward.RewardScorer import RewardConfig, score_response
from ..tagging.RegionTagger import TaggedResponse, tag_regions
from ..tooldata.ToolCall import ToolCallSet
from .SoftmaxPolicy import (
    ConstantFeatures,
    FeatureFn,
    FloatArray,
    SharedFeatures,
    SoftmaxPolicy,
    TabularFeatures,
)

logger = logging.getLogger(__name__)

FEATURE_KINDS = ("tabular", "shared", "constant")
REWARD_KINDS = ("tool_call", "token_match")


@dataclasses.dataclass(frozen=True)
class StepRecord:
    """Everything recorded about one sampled step."""

    features: FloatArray
    logits: FloatArray
    probs: FloatArray
    token: int
    logprob: float
    old_logprob: float | None
    entropy: float


@dataclasses.dataclass(frozen=True)
class Trajectory:
    """One sampled response with its per-step records and reward.

    Attributes:
        context (int): Index of the context the response was sampled for.
        steps (tuple[StepRecord, ...]): One record per generated token.
        reward (float): Reward used for advantages (with dynamic scaling).
        unscaled_reward (float): The same reward before dynamic scaling.
        response (str): Rendered text of the response.
        tagged (TaggedResponse): Region of every step.
    """

    context: int
    steps: tuple[StepRecord, ...]
    reward: float
    unscaled_reward: float
    response: str
    tagged: TaggedResponse

    def __post_init__(self) -> None:
        assert len(self.steps) >= 1, "ERROR: A trajectory needs at least one step"

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def tokens(self) -> tuple[int, ...]:
        return tuple(step.token for step in self.steps)

    @property
    def entropies(self) -> list[float]:
        return [step.entropy for step in self.steps]


@dataclasses.dataclass(frozen=True)
class EnvContext:
    """A prompt of the environment: gold tool calls or target tokens."""

    id: str
    gold_calls: ToolCallSet = ToolCallSet()
    targets: tuple[int, ...] = ()


@dataclasses.dataclass(frozen=True)
class ToyEnv:
    """A finite sequence environment (see module docstring).

    Parameters:
        name (str): Environment name.
        vocab_size (int): V, tokens per step.
        horizon (int): T, steps per response.
        contexts (tuple[EnvContext, ...]): Contexts, drawn uniformly.
        feature_kind (str): One of "tabular", "shared" or "constant".
        step_scales (tuple[float, ...]): Per-step feature scale (tabular only).
        reward_kind (str): "tool_call" or "token_match".
        slots (tuple[tuple[str, ...], ...]): T lists of V text snippets.
        regions (tuple[RegionTag, ...]): Fixed step regions, used when there are no slots.
        init_scale (float): Std of the Gaussian initial parameters.
        init_seed (int): Seed of the initial parameters.
        reward_cfg (RewardConfig): Reward weights for tool-call rewards.
        template (ResponseTemplate): Delimiters for rendering and tagging.
    """

    name: str
    vocab_size: int
    horizon: int
    contexts: tuple[EnvContext, ...]
    feature_kind: str = "tabular"
    step_scales: tuple[float, ...] = ()
    reward_kind: str = "token_match"
    slots: tuple[tuple[str, ...], ...] = ()
    regions: tuple[RegionTag, ...] = ()
    constant_features: tuple[float, ...] = (1.0,)
    init_scale: float = 0.0
    init_seed: int = 0
    reward_cfg: RewardConfig = RewardConfig()
    template: ResponseTemplate = DEFAULT_TEMPLATE

    def __post_init__(self) -> None:
        if self.vocab_size < 2 or self.horizon < 1 or not self.contexts:
            raise ConfigError(
                f"Environment {self.name!r} needs V >= 2, T >= 1 and at least one context"
            )
        if self.feature_kind not in FEATURE_KINDS:
            raise ConfigError(f"Unknown feature kind: {self.feature_kind!r}")
        if self.reward_kind not in REWARD_KINDS:
            raise ConfigError(f"Unknown reward kind: {self.reward_kind!r}")
        if self.step_scales and len(self.step_scales) != self.horizon:
            raise ConfigError("step_scales must have one entry per step")
        if self.slots and (
            len(self.slots) != self.horizon
            or any(len(slot) != self.vocab_size for slot in self.slots)
        ):
            raise ConfigError("slots must be T lists of V snippets")
        if self.regions and len(self.regions) != self.horizon:
            raise ConfigError("regions must have one entry per step")
        if self.reward_kind == "tool_call" and not self.slots:
            raise ConfigError("Tool-call rewards need text slots to render responses")
        if self.reward_kind == "token_match":
            for context in self.contexts:
                if len(context.targets) != self.horizon:
                    raise ConfigError(f"Context {context.id!r} needs T target tokens")

    @property
    def n_contexts(self) -> int:
        return len(self.contexts)

    @property
    def n_trajectories(self) -> int:
        """Number of distinct (context, response) pairs."""
        return self.n_contexts * self.vocab_size**self.horizon

    def feature_fn(self) -> FeatureFn:
        if self.feature_kind == "tabular":
            return TabularFeatures(
                self.n_contexts, self.horizon, self.vocab_size, self.step_scales
            )
        if self.feature_kind == "shared":
            return SharedFeatures(self.n_contexts, self.vocab_size)
        return ConstantFeatures(self.constant_features)

    def initial_policy(
        self, init_scale: float | None = None, seed: int | None = None
    ) -> SoftmaxPolicy:
        """A policy with N(0, init_scale^2) parameters (zeros give uniform steps)."""
        features = self.feature_fn()
        dim = int(getattr(features, "dim"))
        scale = self.init_scale if init_scale is None else init_scale
        rng = np.random.default_rng(self.init_seed if seed is None else seed)
        theta = scale * rng.standard_normal((dim, self.vocab_size))
        return SoftmaxPolicy(theta, features)

    def render(self, tokens: Sequence[int]) -> tuple[str, list[tuple[int, int]]]:
        """Response text and the byte span of every step's snippet."""
        if not self.slots:
            return " ".join(str(y) for y in tokens), [(0, 0)] * len(tokens)
        pieces = []
        spans = []
        offset = 0
        for t, y in enumerate(tokens):
            piece = self.slots[t][y]
            length = len(piece.encode("utf-8"))
            pieces.append(piece)
            spans.append((offset, offset + length))
            offset += length
        return "".join(pieces), spans

    def tag_steps(self, tokens: Sequence[int]) -> tuple[str, TaggedResponse]:
        """Renders a response and assigns one region to every step.

        A step's region is the most frequent weighted region among the bytes
        of its snippet in the tagged rendering, or OTHER if it has none.
        """
        response, spans = self.render(tokens)
        if not self.slots:
            regions = self.regions or (RegionTag.OTHER,) * len(tokens)
            return response, TaggedResponse(tuple(tokens), tuple(regions), tuple(spans))
        byte_tags = tag_regions(response, self.template).spans
        regions = []
        for start, end in spans:
            counts = Counter(tag for tag in byte_tags[start:end] if tag is not RegionTag.OTHER)
            if not counts:
                regions.append(RegionTag.OTHER)
                continue
            top = max(counts.values())
            # Ties go to the first region in weighting order
            regions.append(next(tag for tag in WEIGHTED_REGIONS if counts.get(tag) == top))
        return response, TaggedResponse(tuple(tokens), tuple(regions), tuple(spans))

    def reward(
        self, context: int, tokens: Sequence[int], nu: float = 0.0
    ) -> tuple[float, float]:
        """(scaled, unscaled) reward of a response.

        Args:
            context (int): Context index.
            tokens (Sequence[int]): The response tokens.
            nu (float): Training progress in [0, 1).

        Returns:
            tuple[float, float]: Reward with and without dynamic scaling.
        """
        if self.reward_kind == "tool_call":
            response, _ = self.render(tokens)
            breakdown = score_response(
                response, self.contexts[context].gold_calls, self.template, self.reward_cfg, nu
            )
            return breakdown.r_final, breakdown.unscaled(self.reward_cfg)
        targets = self.contexts[context].targets
        matched = sum(1 for y, target in zip(tokens, targets) if y == target) / self.horizon
        if self.reward_cfg.dynamic_scaling:
            if not 0.0 <= nu < 1.0:
                raise ValueError(f"Training progress must be in [0, 1), got {nu}")
            return (1.0 - nu) * matched, matched
        return matched, matched

    @classmethod
    def from_record(
        cls,
        record: Mapping[str, Any],
        reward_cfg: RewardConfig = RewardConfig(),
        template: ResponseTemplate = DEFAULT_TEMPLATE,
    ) -> "ToyEnv":
        """Builds an environment from its JSON description.

        Raises:
            ConfigError: If a field is missing or inconsistent.
        """
        try:
            features = record.get("features", {})
            contexts = tuple(
                EnvContext(
                    id=str(c["id"]),
                    gold_calls=ToolCallSet.from_records(c.get("gold_calls", [])),
                    targets=tuple(int(y) for y in c.get("targets", [])),
                )
                for c in record["contexts"]
            )
            return cls(
                name=str(record.get("name", "env")),
                vocab_size=int(record["vocab_size"]),
                horizon=int(record["horizon"]),
                contexts=contexts,
                feature_kind=str(features.get("kind", "tabular")),
                step_scales=tuple(float(s) for s in features.get("step_scales", [])),
                constant_features=tuple(float(v) for v in features.get("values", [1.0])),
                reward_kind=str(record.get("reward", {}).get("kind", "token_match")),
                slots=tuple(tuple(str(s) for s in slot) for slot in record.get("slots", [])),
                regions=tuple(RegionTag(r) for r in record.get("regions", [])),
                init_scale=float(record.get("init_scale", 0.0)),
                init_seed=int(record.get("init_seed", 0)),
                reward_cfg=reward_cfg,
                template=template,
            )
        except (KeyError, TypeError, ValueError) as e:
            if isinstance(e, ConfigError):
                raise
            raise ConfigError(f"Invalid environment description: {e}") from e


def _draw(probs: FloatArray, rng: np.random.Generator) -> int:
    cumulative = np.cumsum(probs)
    y = int(np.searchsorted(cumulative, rng.random() * cumulative[-1], side="right"))
    return min(y, len(probs) - 1)


def sample_trajectory(
    policy: SoftmaxPolicy,
    env: ToyEnv,
    rng_seed: int | np.random.Generator,
    context: int | None = None,
    nu: float = 0.0,
) -> Trajectory:
    """Samples one response from the policy and scores it.

    The rollout policy is the current one, so old_logprob == logprob.

    Args:
        policy (SoftmaxPolicy): The sampling policy.
        env (ToyEnv): The environment.
        rng_seed (int | np.random.Generator): A seed or an explicit random stream.
        context (int | None): Fixed context, otherwise drawn uniformly.
        nu (float): Training progress for dynamic reward scaling.

    Returns:
        Trajectory: The fully populated trajectory.
    """
    rng = (
        rng_seed
        if isinstance(rng_seed, np.random.Generator)
        else np.random.default_rng(rng_seed)
    )
    x = int(rng.integers(env.n_contexts)) if context is None else context
    history: list[int] = []
    steps = []
    for t in range(env.horizon):
        dist = policy.distribution(x, history, t)
        y = _draw(dist.probs, rng)
        logprob = math.log(max(float(dist.probs[y]), PROB_FLOOR))
        steps.append(
            StepRecord(
                features=dist.features,
                logits=dist.logits,
                probs=dist.probs,
                token=y,
                logprob=logprob,
                old_logprob=logprob,
                entropy=dist.entropy,
            )
        )
        history.append(y)
    reward, unscaled = env.reward(x, history, nu)
    response, tagged = env.tag_steps(history)
    return Trajectory(x, tuple(steps), reward, unscaled, response, tagged)
