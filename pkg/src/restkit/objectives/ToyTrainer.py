"""Training loop for softmax policies with the token-weighted or unweighted loss.

Each step samples one context, rolls out a group of G responses with dynamic
reward scaling at progress nu = step / steps, standardizes the rewards within
the group and takes inner_steps gradient steps on the clipped loss.
"""

import dataclasses
import logging
from typing import Sequence

import numpy as np

from ..data.exceptions import ConfigError
from ..estimators.GradientEstimators import TrajectoryGroup
from ..policy.SoftmaxPolicy import SoftmaxPolicy
from ..policy.ToyEnv import ToyEnv, sample_trajectory
from ..tagging.RegionTagger import pooled_region_entropy
from ..utils.stats import tail_mean
from .ClippedObjectives import LossResult, grpo_loss, rest_loss
from .Curriculum import (
    CurriculumState,
    WeightConfig,
    curriculum_update,
    init_region_weights,
    normalize_group_weights,
)

logger = logging.getLogger(__name__)

ALGORITHMS = ("rest", "grpo")


@dataclasses.dataclass(frozen=True)
class TrainConfig:
    """Optimization settings of train_toy.

    Parameters:
        group_size (int): G, responses per step (default: 8).
        learning_rate (float): Step size of plain gradient descent.
        inner_steps (int): Updates per sampled group.
        init_scale (float): Std of the Gaussian initial parameters.
        weights (WeightConfig): Region weighting and loss settings.
    """

    group_size: int = 8
    learning_rate: float = 0.5
    inner_steps: int = 1
    init_scale: float = 0.0
    weights: WeightConfig = WeightConfig()

    def __post_init__(self) -> None:
        if self.group_size < 2:
            raise ConfigError(f"group_size must be at least 2, got {self.group_size}")
        if self.learning_rate < 0.0:
            raise ConfigError("learning_rate must be non-negative")
        if self.inner_steps < 1:
            raise ConfigError("inner_steps must be at least 1")


@dataclasses.dataclass(frozen=True)
class TraceRow:
    """Progress of one training step."""

    step: int
    mean_reward: float
    entropy: float
    resp_len: float
    loss: float


@dataclasses.dataclass(frozen=True)
class TrainResult:
    trace: tuple[TraceRow, ...]
    policy: SoftmaxPolicy
    final_state: CurriculumState | None = None

    @property
    def final_reward(self) -> float:
        return tail_mean([row.mean_reward for row in self.trace])

    @property
    def final_entropy(self) -> float:
        return tail_mean([row.entropy for row in self.trace])


def _step_loss(
    algo: str,
    policy: SoftmaxPolicy,
    group: TrajectoryGroup,
    weights: Sequence[np.ndarray] | None,
    cfg: WeightConfig,
    ref_policy: SoftmaxPolicy,
) -> LossResult:
    if algo == "rest":
        assert weights is not None, "ERROR: Token-weighted loss needs weights"
        return rest_loss(policy, group, weights, cfg, ref_policy)
    return grpo_loss(policy, group, cfg, ref_policy)


def train_toy(
    env: ToyEnv,
    algo: str,
    steps: int,
    seed: int,
    cfg: TrainConfig = TrainConfig(),
) -> TrainResult:
    """Trains a policy from scratch and records a per-step trace.

    Args:
        env (ToyEnv): The environment.
        algo (str): "rest" for region-weighted tokens, "grpo" for uniform ones.
        steps (int): Number of sampled groups.
        seed (int): Seed of the initial parameters and every rollout.
        cfg (TrainConfig): Optimization settings.

    Raises:
        ConfigError: If algo or steps is invalid.

    Returns:
        TrainResult: The trace (mean unscaled reward, mean entropy, mean
        response length in bytes and loss before the update) and the final policy.
    """
    if algo not in ALGORITHMS:
        raise ConfigError(f"Unknown algorithm {algo!r}, expected one of {ALGORITHMS}")
    if steps < 1:
        raise ConfigError(f"steps must be at least 1, got {steps}")
    wcfg = cfg.weights
    rng = np.random.default_rng(seed)
    policy = env.initial_policy(cfg.init_scale, seed)
    ref_policy = policy
    trace = []
    state: CurriculumState | None = None
    for step in range(steps):
        nu = step / steps
        context = int(rng.integers(env.n_contexts))
        trajectories = [
            sample_trajectory(policy, env, rng, context=context, nu=nu)
            for _ in range(cfg.group_size)
        ]
        group = TrajectoryGroup.from_trajectories(trajectories, wcfg.delta)
        weights = None
        if algo == "rest":
            pooled = pooled_region_entropy((traj.tagged, traj.entropies) for traj in trajectories)
            state = curriculum_update(init_region_weights(pooled, wcfg), wcfg, nu)
            weights = normalize_group_weights([traj.tagged for traj in trajectories], state, wcfg)

        first_loss = None
        for _ in range(cfg.inner_steps):
            result = _step_loss(algo, policy, group, weights, wcfg, ref_policy)
            if first_loss is None:
                first_loss = result.loss
            if cfg.learning_rate > 0.0:
                policy = policy.with_theta(policy.flat_theta - cfg.learning_rate * result.grad)

        assert first_loss is not None
        trace.append(
            TraceRow(
                step=step,
                mean_reward=float(np.mean([t.unscaled_reward for t in trajectories])),
                entropy=float(np.mean([h for t in trajectories for h in t.entropies])),
                resp_len=float(np.mean([len(t.response.encode("utf-8")) for t in trajectories])),
                loss=first_loss,
            )
        )
        if (step + 1) % max(1, steps // 10) == 0:
            logger.info(
                "%s step %d/%d: reward %.4f entropy %.4f",
                algo,
                step + 1,
                steps,
                trace[-1].mean_reward,
                trace[-1].entropy,
            )
    return TrainResult(tuple(trace), policy, state)


@dataclasses.dataclass(frozen=True)
class ComparisonRow:
    seed: int
    algo: str
    final_reward: float
    final_entropy: float


def paired_comparison(
    env: ToyEnv,
    steps: int,
    seeds: Sequence[int],
    cfg: TrainConfig = TrainConfig(),
) -> list[ComparisonRow]:
    """Trains both algorithms on the same seeds; one row per (seed, algo)."""
    rows = []
    for seed in seeds:
        for algo in ALGORITHMS:
            result = train_toy(env, algo, steps, seed, cfg)
            rows.append(ComparisonRow(seed, algo, result.final_reward, result.final_entropy))
    return rows


def comparison_medians(rows: Sequence[ComparisonRow]) -> dict[str, tuple[float, float]]:
    """Median (final reward, final entropy) per algorithm."""
    medians = {}
    for algo in ALGORITHMS:
        selected = [row for row in rows if row.algo == algo]
        if selected:
            medians[algo] = (
                float(np.median([row.final_reward for row in selected])),
                float(np.median([row.final_entropy for row in selected])),
            )
    return medians
