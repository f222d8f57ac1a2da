"""Per-step variance profiles, optimal inverse weighting and entropy surrogates.

With beta_t the variance contribution of step t, the reweighted estimator's
variance is bounded by E[A^2] sum_t beta_t w_t^2 over weights with sum w_t = T.
The minimizer is w*_t = (T / sum_u 1/beta_u) / beta_t with minimum
T^2 / sum_u 1/beta_u.
"""

import dataclasses
import logging
import math
from typing import Sequence

import numpy as np

from ..data.constants import (
    BETA_FLOOR,
    DEFAULT_W_MAX,
    WEIGHTED_REGIONS,
    BetaKind,
    RegionTag,
    SurrogateRule,
)
from ..data.exceptions import EmptySequence
from ..policy.ExactOracle import exact_beta
from ..policy.SoftmaxPolicy import SoftmaxPolicy, step_beta
from ..policy.ToyEnv import ToyEnv, sample_trajectory
from ..tagging.RegionTagger import RegionEntropy

logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class BetaProfile:
    """Per-step variance contributions and how they were obtained."""

    beta: tuple[float, ...]
    estimator_kind: BetaKind
    stderr: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if not self.beta:
            raise EmptySequence("A variance profile needs at least one step")
        assert all(math.isfinite(b) and b >= 0.0 for b in self.beta), (
            f"ERROR: Variance contributions must be finite and non-negative: {self.beta}"
        )

    def __len__(self) -> int:
        return len(self.beta)


@dataclasses.dataclass(frozen=True)
class WeightVector:
    """Per-step weights satisfying sum w_t = T."""

    w: tuple[float, ...]

    def __post_init__(self) -> None:
        assert all(x >= 0.0 for x in self.w), f"ERROR: Negative weight in {self.w}"
        assert math.fsum(self.w) == len(self.w), (
            f"ERROR: Weights sum to {math.fsum(self.w)}, expected {len(self.w)}"
        )

    def __len__(self) -> int:
        return len(self.w)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.w, dtype=np.float64)

    @classmethod
    def uniform(cls, horizon: int) -> "WeightVector":
        return cls((1.0,) * horizon)

    @classmethod
    def proportional(cls, raw: Sequence[float]) -> "WeightVector":
        """Rescales non-negative raw weights so they sum to T."""
        total = math.fsum(raw)
        assert total > 0.0, "ERROR: Raw weights must not all be zero"
        scale = len(raw) / total
        return cls(_fix_sum([scale * x for x in raw]))


def _fix_sum(w: list[float]) -> tuple[float, ...]:
    """Moves the rounding residue of sum(w) - T onto the largest entry.

    The entry is stepped one ulp at a time once the residue is too small to
    change it, until the compensated sum equals T exactly.
    """
    target = float(len(w))
    largest = max(range(len(w)), key=lambda t: w[t])
    for _ in range(64):
        residue = target - math.fsum(w)
        if residue == 0.0:
            break
        adjusted = w[largest] + residue
        if adjusted == w[largest]:
            adjusted = math.nextafter(w[largest], math.copysign(math.inf, residue))
        w[largest] = adjusted
    assert math.fsum(w) == target, f"ERROR: Could not make {w} sum to {target}"
    return tuple(w)


def beta_estimate(
    policy: SoftmaxPolicy,
    env: ToyEnv,
    n_samples: int = 1,
    kind: BetaKind = BetaKind.EXACT_TOY,
    seed: int = 0,
) -> BetaProfile:
    """Per-step variance contributions beta_t = E[||J_t||_F^2 (1 - e^{-H_t})].

    Args:
        policy (SoftmaxPolicy): The policy.
        env (ToyEnv): The environment.
        n_samples (int): Trajectories to sample for the Monte-Carlo kinds.
        kind (BetaKind): EXACT_TOY and EXACT_PLAIN enumerate every trajectory;
            MONTE_CARLO averages sampled trajectories and reports standard
            errors; ENTROPY_ONLY uses 1 - e^{-mean H_t}, ignoring Jacobian norms.
        seed (int): Seed of the sampled trajectories.

    Raises:
        StateSpaceTooLarge: For the exact kinds on environments too large to enumerate.

    Returns:
        BetaProfile: The profile.
    """
    if kind in (BetaKind.EXACT_TOY, BetaKind.EXACT_PLAIN):
        return BetaProfile(tuple(float(b) for b in exact_beta(policy, env, kind)), kind)

    assert n_samples >= 1, "ERROR: Need at least one sample"
    rng = np.random.default_rng(seed)
    values = np.zeros((n_samples, env.horizon))
    entropies = np.zeros((n_samples, env.horizon))
    for n in range(n_samples):
        traj = sample_trajectory(policy, env, rng)
        for t, step in enumerate(traj.steps):
            jac_sq = policy.vocab_size * float(np.dot(step.features, step.features))
            values[n, t] = step_beta(jac_sq, step.entropy)
            entropies[n, t] = step.entropy

    if kind is BetaKind.ENTROPY_ONLY:
        beta = 1.0 - np.exp(-entropies.mean(axis=0))
        return BetaProfile(tuple(float(b) for b in beta), kind)

    stderr = (
        values.std(axis=0, ddof=1) / math.sqrt(n_samples)
        if n_samples > 1
        else np.full(env.horizon, math.inf)
    )
    return BetaProfile(
        tuple(float(b) for b in values.mean(axis=0)),
        kind,
        tuple(float(s) for s in stderr),
    )


def optimal_weights(beta: BetaProfile | Sequence[float]) -> WeightVector:
    """Closed-form minimizer of sum_t beta_t w_t^2 subject to sum_t w_t = T.

    Steps with beta_t = 0 cost nothing, so when any exist all the mass goes
    to them, spread uniformly.
    """
    values = list(beta.beta if isinstance(beta, BetaProfile) else beta)
    if not values:
        raise EmptySequence("Cannot weight an empty profile")
    horizon = len(values)
    zeros = [t for t, b in enumerate(values) if b == 0.0]
    if zeros:
        logger.info("%d of %d steps have zero variance contribution", len(zeros), horizon)
        share = horizon / len(zeros)
        return WeightVector(_fix_sum([share if b == 0.0 else 0.0 for b in values]))
    inverse_sum = math.fsum(1.0 / b for b in values)
    scale = horizon / inverse_sum
    return WeightVector(_fix_sum([scale / b for b in values]))


def variance_bound(
    beta: BetaProfile | Sequence[float],
    weights: WeightVector | Sequence[float],
    adv_second_moment: float = 1.0,
) -> float:
    """E[A^2] * sum_t beta_t w_t^2."""
    values = beta.beta if isinstance(beta, BetaProfile) else tuple(beta)
    w = weights.w if isinstance(weights, WeightVector) else tuple(weights)
    assert len(values) == len(w), "ERROR: Need one weight per step"
    return adv_second_moment * math.fsum(b * x * x for b, x in zip(values, w))


def minimized_bound(beta: BetaProfile | Sequence[float]) -> float:
    """T^2 / sum_t 1/beta_t, which is 0 if any beta_t is 0."""
    values = beta.beta if isinstance(beta, BetaProfile) else tuple(beta)
    if any(b == 0.0 for b in values):
        return 0.0
    return len(values) ** 2 / math.fsum(1.0 / b for b in values)


def surrogate_weight(
    h_avg: float, rule: SurrogateRule, w_max: float = DEFAULT_W_MAX
) -> float:
    """Entropy-only stand-in for 1/beta, clipped to w_max.

    Args:
        h_avg (float): Mean entropy of a region in nats.
        rule (SurrogateRule): 1/(1 - e^{-H}) or 1/H.
        w_max (float): Upper clip, reached as H goes to 0.
    """
    denominator = 1.0 - math.exp(-h_avg) if rule is SurrogateRule.INV_ONE_MINUS_EXP else h_avg
    if denominator <= BETA_FLOOR:
        return w_max
    return min(w_max, 1.0 / denominator)


def surrogate_weights(
    region_entropy: RegionEntropy,
    rule: SurrogateRule = SurrogateRule.INV_ONE_MINUS_EXP,
    w_max: float = DEFAULT_W_MAX,
) -> dict[RegionTag, float | None]:
    """Raw per-region weights from region mean entropies.

    Regions without tokens map to None.
    """
    weights: dict[RegionTag, float | None] = {}
    for tag in WEIGHTED_REGIONS:
        h_avg = region_entropy.h_avg(tag)
        weights[tag] = None if h_avg is None else surrogate_weight(h_avg, rule, w_max)
    return weights


def profile_from_entropies(entropies: Sequence[float]) -> BetaProfile:
    """Entropy-only profile beta_t = 1 - e^{-H_t} of one entropy trace."""
    return BetaProfile(
        tuple(float(1.0 - math.exp(-h)) for h in entropies), BetaKind.ENTROPY_ONLY
    )
