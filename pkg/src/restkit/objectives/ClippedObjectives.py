"""Clipped surrogate losses with exact gradients for softmax policies.

Both losses minimize

    L = -(1/G) sum_i sum_t c_{i,t} min(r A_i, clip(r, 1 - eps, 1 + eps) A_i)

with r = pi_theta(y_t) / pi_old(y_t). The token-weighted loss uses
c_{i,t} = omega_{i,t} / T_i, the unweighted one c_{i,t} = 1 / T_i. An optional
KL(pi_theta || pi_ref) penalty is added per step in closed form.
"""

import dataclasses
import logging
import math
from typing import Sequence

import numpy as np

from ..data.constants import PROB_FLOOR
from ..data.exceptions import LengthMismatch, MissingOldLogProbs
from ..estimators.GradientEstimators import TrajectoryGroup
from ..policy.SoftmaxPolicy import FloatArray, SoftmaxPolicy, score_vector
from .Curriculum import WeightConfig

logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class LossResult:
    """Loss value, its gradient with respect to the flattened theta, and diagnostics."""

    loss: float
    grad: FloatArray
    clip_fraction: float = 0.0
    kl: float = 0.0


def kl_divergence(p: FloatArray, q: FloatArray) -> float:
    """KL(p || q) in nats."""
    log_p = np.log(np.maximum(p, PROB_FLOOR))
    log_q = np.log(np.maximum(q, PROB_FLOOR))
    return float(np.sum(p * (log_p - log_q)))


def kl_logit_gradient(p: FloatArray, q: FloatArray) -> FloatArray:
    """d KL(softmax(z) || q) / dz = p * (log p - log q - KL)."""
    log_ratio = np.log(np.maximum(p, PROB_FLOOR)) - np.log(np.maximum(q, PROB_FLOOR))
    return np.asarray(p * (log_ratio - np.sum(p * log_ratio)), dtype=np.float64)


def _clipped_objective(
    policy: SoftmaxPolicy,
    group: TrajectoryGroup,
    coefficients: Sequence[FloatArray],
    epsilon: float,
    kl_coeff: float,
    ref_policy: SoftmaxPolicy | None,
) -> LossResult:
    n_groups = len(group)
    loss_terms: list[float] = []
    kl_terms: list[float] = []
    grad = np.zeros(policy.n_params)
    clipped = 0
    total = 0
    use_kl = kl_coeff > 0.0 and ref_policy is not None
    for traj, advantage, coeff in zip(group.trajectories, group.advantages, coefficients):
        if len(coeff) != len(traj):
            raise LengthMismatch(f"{len(coeff)} token weights for {len(traj)} tokens")
        history: list[int] = []
        for t, step in enumerate(traj.steps):
            if step.old_logprob is None:
                raise MissingOldLogProbs(f"Step {t} of a trajectory has no rollout log-prob")
            dist = policy.distribution(traj.context, history, t)
            logprob = math.log(max(float(dist.probs[step.token]), PROB_FLOOR))
            ratio = math.exp(logprob - step.old_logprob)
            unclipped = ratio * advantage
            bounded = min(max(ratio, 1.0 - epsilon), 1.0 + epsilon) * advantage
            c = float(coeff[t])
            total += 1
            if unclipped <= bounded:
                loss_terms.append(-c * unclipped / n_groups)
                if c != 0.0 and advantage != 0.0:
                    # d ratio / d z = ratio * (e_y - p)
                    g_logits = -c * advantage * ratio * score_vector(dist.probs, step.token)
                    grad += np.outer(dist.features, g_logits).ravel() / n_groups
            else:
                clipped += 1
                loss_terms.append(-c * bounded / n_groups)
            if use_kl:
                assert ref_policy is not None
                q = ref_policy.distribution(traj.context, history, t).probs
                scale = kl_coeff / (len(traj) * n_groups)
                kl_terms.append(scale * kl_divergence(dist.probs, q))
                grad += np.outer(dist.features, scale * kl_logit_gradient(dist.probs, q)).ravel()
            history.append(step.token)
    kl_total = math.fsum(kl_terms)
    return LossResult(
        loss=math.fsum(loss_terms) + kl_total,
        grad=grad,
        clip_fraction=clipped / total if total else 0.0,
        kl=kl_total / kl_coeff if use_kl else 0.0,
    )


def _divisors(group: TrajectoryGroup, cfg: WeightConfig) -> list[int]:
    if cfg.normalization == "global":
        longest = max(len(traj) for traj in group.trajectories)
        return [longest] * len(group)
    return [len(traj) for traj in group.trajectories]


def rest_loss(
    policy: SoftmaxPolicy,
    group: TrajectoryGroup,
    per_token_weights: Sequence[Sequence[float] | FloatArray],
    cfg: WeightConfig = WeightConfig(),
    ref_policy: SoftmaxPolicy | None = None,
) -> LossResult:
    """Token-weighted clipped loss and its exact gradient.

    Ties between the two branches take the unclipped one; the clipped branch
    contributes no gradient.

    Args:
        policy (SoftmaxPolicy): The current policy.
        group (TrajectoryGroup): Trajectories with rollout log-probs and advantages.
        per_token_weights: One omega vector per trajectory.
        cfg (WeightConfig): Clip range, KL strength and normalization.
        ref_policy (SoftmaxPolicy | None): Reference policy of the KL penalty.

    Raises:
        MissingOldLogProbs: If a step has no rollout log-prob.
        LengthMismatch: If a weight vector does not match its trajectory.

    Returns:
        LossResult: Loss, gradient and clipping statistics.
    """
    if len(per_token_weights) != len(group):
        raise LengthMismatch(
            f"{len(per_token_weights)} weight vectors for {len(group)} trajectories"
        )
    coefficients = [
        np.asarray(w, dtype=np.float64) / divisor
        for w, divisor in zip(per_token_weights, _divisors(group, cfg))
    ]
    return _clipped_objective(
        policy, group, coefficients, cfg.epsilon_clip, cfg.kl_coeff, ref_policy
    )


def grpo_loss(
    policy: SoftmaxPolicy,
    group: TrajectoryGroup,
    cfg: WeightConfig = WeightConfig(),
    ref_policy: SoftmaxPolicy | None = None,
) -> LossResult:
    """Unweighted clipped loss plus kl_coeff * KL(pi_theta || pi_ref)."""
    coefficients = [
        np.ones(len(traj)) / divisor
        for traj, divisor in zip(group.trajectories, _divisors(group, cfg))
    ]
    return _clipped_objective(
        policy, group, coefficients, cfg.epsilon_clip, cfg.kl_coeff, ref_policy
    )
