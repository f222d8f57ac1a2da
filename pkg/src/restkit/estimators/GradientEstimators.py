"""Group-normalized advantages and (re)weighted policy-gradient estimators.

For a trajectory with advantage A and per-step weights w, the estimator is

    g = A * sum_t w_t J_t^T s_t

and the mini-batch estimate is the mean of g over the group.
"""

import dataclasses
import math
from typing import Sequence

import numpy as np

from ..data.constants import DEFAULT_ADVANTAGE_DELTA, AdvantageMode
from ..data.exceptions import GroupTooSmall, LengthMismatch
from ..policy.SoftmaxPolicy import FloatArray, score_gradient
from ..policy.ToyEnv import Trajectory

StepWeights = Sequence[float] | FloatArray


def group_advantages(
    rewards: Sequence[float], delta: float = DEFAULT_ADVANTAGE_DELTA
) -> FloatArray:
    """A_i = (r_i - mean) / (std + delta) with the population std.

    Args:
        rewards (Sequence[float]): The G rewards of one group.
        delta (float): Stability constant added to the std.

    Raises:
        GroupTooSmall: If fewer than two rewards are given.

    Returns:
        FloatArray: The G advantages.
    """
    if len(rewards) < 2:
        raise GroupTooSmall(f"Need at least two rewards, got {len(rewards)}")
    r = np.asarray(rewards, dtype=np.float64)
    centered = r - np.mean(r)
    std = float(np.sqrt(np.mean(np.square(centered))))
    if std + delta == 0.0:
        return np.zeros_like(r)
    return np.asarray(centered / (std + delta), dtype=np.float64)


def advantages_for(
    rewards: Sequence[float],
    mode: AdvantageMode = AdvantageMode.GROUP,
    delta: float = DEFAULT_ADVANTAGE_DELTA,
    population: tuple[float, float] | None = None,
) -> FloatArray:
    """Advantages under one of the baseline modes.

    GROUP standardizes within the group. POPULATION and CENTERED use the exact
    population (mean, std), which makes the per-trajectory terms independent.
    """
    if mode is AdvantageMode.GROUP:
        return group_advantages(rewards, delta)
    assert population is not None, f"ERROR: {mode} needs population reward moments"
    mean, std = population
    r = np.asarray(rewards, dtype=np.float64)
    if mode is AdvantageMode.CENTERED:
        return r - mean
    return np.asarray((r - mean) / (std + delta), dtype=np.float64)


@dataclasses.dataclass(frozen=True)
class TrajectoryGroup:
    """G trajectories sampled for one context together with their advantages."""

    trajectories: tuple[Trajectory, ...]
    advantages: tuple[float, ...]
    delta: float = DEFAULT_ADVANTAGE_DELTA

    def __post_init__(self) -> None:
        if len(self.trajectories) != len(self.advantages):
            raise LengthMismatch(
                f"{len(self.trajectories)} trajectories but {len(self.advantages)} advantages"
            )
        assert self.trajectories, "ERROR: A group needs at least one trajectory"

    def __len__(self) -> int:
        return len(self.trajectories)

    @property
    def rewards(self) -> list[float]:
        return [traj.reward for traj in self.trajectories]

    @classmethod
    def from_trajectories(
        cls,
        trajectories: Sequence[Trajectory],
        delta: float = DEFAULT_ADVANTAGE_DELTA,
        mode: AdvantageMode = AdvantageMode.GROUP,
        population: tuple[float, float] | None = None,
    ) -> "TrajectoryGroup":
        rewards = [traj.reward for traj in trajectories]
        advantages = advantages_for(rewards, mode, delta, population)
        return cls(tuple(trajectories), tuple(float(a) for a in advantages), delta)


def step_gradients(traj: Trajectory) -> FloatArray:
    """(T, P) matrix whose rows are J_t^T s_t."""
    return np.array(
        [score_gradient(step.features, step.probs, step.token) for step in traj.steps]
    )


def trajectory_gradient(
    traj: Trajectory, advantage: float, weights: StepWeights | None = None
) -> FloatArray:
    """A * sum_t w_t J_t^T s_t, with uniform weights when none are given.

    Raises:
        LengthMismatch: If the weights do not have one entry per step.
    """
    grads = step_gradients(traj)
    if weights is None:
        return np.asarray(advantage * grads.sum(axis=0), dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (len(traj),):
        raise LengthMismatch(f"{w.size} weights for a trajectory of {len(traj)} steps")
    return np.asarray(advantage * (w @ grads), dtype=np.float64)


def minibatch_gradient(
    group: TrajectoryGroup,
    weights: StepWeights | Sequence[StepWeights] | None = None,
) -> FloatArray:
    """(1/G) sum_i g_i.

    Args:
        group (TrajectoryGroup): The sampled group.
        weights: None for uniform weights, one weight vector shared by every
            trajectory, or one weight vector per trajectory.

    Returns:
        FloatArray: The mini-batch gradient estimate.
    """
    per_trajectory: Sequence[StepWeights | None]
    if weights is None:
        per_trajectory = [None] * len(group)
    elif len(weights) > 0 and np.ndim(weights[0]) == 1:
        per_trajectory = list(weights)  # type: ignore[arg-type]
        if len(per_trajectory) != len(group):
            raise LengthMismatch(
                f"{len(per_trajectory)} weight vectors for {len(group)} trajectories"
            )
    else:
        per_trajectory = [weights] * len(group)  # type: ignore[list-item]
    grads = [
        trajectory_gradient(traj, adv, w)
        for traj, adv, w in zip(group.trajectories, group.advantages, per_trajectory)
    ]
    return np.asarray(np.sum(grads, axis=0) / len(group), dtype=np.float64)


def weight_sum(weights: StepWeights) -> float:
    """Compensated sum of a weight vector."""
    return math.fsum(float(w) for w in weights)
