"""Exact expectations by enumerating every trajectory of a small environment.

These are the reference values the Monte-Carlo estimators are checked against:
expected return, the policy gradient, per-step variance contributions, score
cross-moments and population reward moments.
"""

import dataclasses
import logging
import math
from typing import Iterator, Sequence

import numpy as np

from ..data.constants import MAX_ENUMERATION, BetaKind
from ..data.exceptions import StateSpaceTooLarge
from .SoftmaxPolicy import (
    FloatArray,
    SoftmaxPolicy,
    StepDistribution,
    expected_score_sq_norm,
    score_gradient,
    step_beta,
)
from .ToyEnv import ToyEnv

logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class EnumeratedTrajectory:
    """One (context, response) pair with its exact probability."""

    context: int
    tokens: tuple[int, ...]
    prob: float
    dists: tuple[StepDistribution, ...]

    def score_gradients(self) -> list[FloatArray]:
        """J_t^T s_t of every step."""
        return [
            score_gradient(dist.features, dist.probs, y)
            for dist, y in zip(self.dists, self.tokens)
        ]


def enumerate_trajectories(
    policy: SoftmaxPolicy, env: ToyEnv
) -> Iterator[EnumeratedTrajectory]:
    """Yields every trajectory of the environment with its probability.

    Raises:
        StateSpaceTooLarge: If there are more than MAX_ENUMERATION trajectories.
    """
    if env.n_trajectories > MAX_ENUMERATION:
        raise StateSpaceTooLarge(
            f"{env.name}: {env.n_trajectories} trajectories exceed the "
            f"enumeration limit of {MAX_ENUMERATION}"
        )
    context_prob = 1.0 / env.n_contexts

    def expand(
        context: int, prefix: list[int], prob: float, dists: list[StepDistribution]
    ) -> Iterator[EnumeratedTrajectory]:
        t = len(prefix)
        if t == env.horizon:
            yield EnumeratedTrajectory(context, tuple(prefix), prob, tuple(dists))
            return
        dist = policy.distribution(context, prefix, t)
        for y in range(env.vocab_size):
            yield from expand(context, prefix + [y], prob * dist.probs[y], dists + [dist])

    for context in range(env.n_contexts):
        yield from expand(context, [], context_prob, [])


def exact_return(policy: SoftmaxPolicy, env: ToyEnv, nu: float = 0.0) -> float:
    """J(theta) = E[R(tau)] by enumeration."""
    return math.fsum(
        traj.prob * env.reward(traj.context, traj.tokens, nu)[0]
        for traj in enumerate_trajectories(policy, env)
    )


def exact_policy_gradient(
    policy: SoftmaxPolicy, env: ToyEnv, nu: float = 0.0
) -> FloatArray:
    """grad J = E[R(tau) sum_t J_t^T s_t] by enumeration.

    Raises:
        StateSpaceTooLarge: If the environment cannot be enumerated.
    """
    grad = np.zeros(policy.n_params)
    for traj in enumerate_trajectories(policy, env):
        reward = env.reward(traj.context, traj.tokens, nu)[0]
        if reward == 0.0:
            continue
        grad += traj.prob * reward * np.sum(traj.score_gradients(), axis=0)
    return grad


def exact_reweighted_gradient(
    policy: SoftmaxPolicy,
    env: ToyEnv,
    weights: Sequence[float],
    baseline: float = 0.0,
) -> FloatArray:
    """E[(R - b) sum_t w_t J_t^T s_t]; equals grad J for uniform weights."""
    assert len(weights) == env.horizon, "ERROR: Need one weight per step"
    grad = np.zeros(policy.n_params)
    for traj in enumerate_trajectories(policy, env):
        centered = env.reward(traj.context, traj.tokens)[0] - baseline
        for w, g in zip(weights, traj.score_gradients()):
            grad += traj.prob * centered * w * g
    return grad


def exact_beta(
    policy: SoftmaxPolicy, env: ToyEnv, kind: BetaKind = BetaKind.EXACT_TOY
) -> FloatArray:
    """Per-step variance contributions by enumeration.

    EXACT_TOY gives E[||J_t||_F^2 (1 - e^{-H_t})] and EXACT_PLAIN gives
    E[||J_t||_F^2 ||s_t||^2], the quantity the entropy form bounds.
    """
    assert kind in (BetaKind.EXACT_TOY, BetaKind.EXACT_PLAIN), (
        f"ERROR: {kind} is not an enumeration estimate"
    )
    sums: list[list[float]] = [[] for _ in range(env.horizon)]
    for traj in enumerate_trajectories(policy, env):
        for t, dist in enumerate(traj.dists):
            jac_sq = policy.vocab_size * float(np.dot(dist.features, dist.features))
            if kind is BetaKind.EXACT_TOY:
                value = step_beta(jac_sq, dist.entropy)
            else:
                value = jac_sq * expected_score_sq_norm(dist.probs)
            sums[t].append(traj.prob * value)
    return np.array([math.fsum(s) for s in sums])


def score_cross_moments(policy: SoftmaxPolicy, env: ToyEnv) -> FloatArray:
    """T x T matrix of E[<J_a^T s_a, J_b^T s_b>]; zero off the diagonal."""
    moments = np.zeros((env.horizon, env.horizon))
    for traj in enumerate_trajectories(policy, env):
        grads = np.array(traj.score_gradients())
        moments += traj.prob * (grads @ grads.T)
    return moments


def reward_moments(
    policy: SoftmaxPolicy, env: ToyEnv, nu: float = 0.0
) -> tuple[float, float]:
    """Population mean and standard deviation of the reward."""
    pairs = [
        (traj.prob, env.reward(traj.context, traj.tokens, nu)[0])
        for traj in enumerate_trajectories(policy, env)
    ]
    mean = math.fsum(p * r for p, r in pairs)
    variance = math.fsum(p * (r - mean) ** 2 for p, r in pairs)
    return mean, math.sqrt(max(variance, 0.0))


def gradient_second_moment(
    policy: SoftmaxPolicy, env: ToyEnv, delta: float = 0.0, standardize: bool = True
) -> tuple[float, float]:
    """Both sides of E[A^2 ||sum_t J_t^T s_t||^2] <= E[A^2] sum_t beta_t.

    A is the population-standardized reward (R - mu) / (sigma + delta), or 1
    when standardize is False. Only the A = 1 form is an identity-backed
    inequality; with a reward-dependent A the two sides are reported.

    Returns:
        tuple[float, float]: (left-hand side, right-hand side).
    """
    mean, std = reward_moments(policy, env)
    lhs = []
    adv_sq = []
    for traj in enumerate_trajectories(policy, env):
        advantage = (
            (env.reward(traj.context, traj.tokens)[0] - mean) / (std + delta)
            if standardize
            else 1.0
        )
        total = np.sum(traj.score_gradients(), axis=0)
        lhs.append(traj.prob * advantage**2 * float(np.dot(total, total)))
        adv_sq.append(traj.prob * advantage**2)
    beta = exact_beta(policy, env, BetaKind.EXACT_TOY)
    return math.fsum(lhs), math.fsum(adv_sq) * math.fsum(beta)
