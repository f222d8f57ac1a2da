"""Monte-Carlo measurement of estimator variance over seeded replicate groups.

Replicate r draws its group from numpy.random.default_rng(seed + r), so results
depend only on (seed, n_groups) and never on how replicates are spread over
workers.
"""

import dataclasses
import logging
from concurrent.futures import ThreadPoolExecutor
from enum import Enum
from typing import Sequence

import numpy as np

from ..data.constants import (
    DEFAULT_ADVANTAGE_DELTA,
    DEFAULT_BOOTSTRAP_RESAMPLES,
    AdvantageMode,
    BetaKind,
)
from ..policy.ExactOracle import exact_reweighted_gradient, reward_moments
from ..policy.SoftmaxPolicy import FloatArray, SoftmaxPolicy
from ..policy.ToyEnv import ToyEnv, sample_trajectory
from ..utils.seeding import replicate_seed
from ..utils.stats import percentile_interval
from .GradientEstimators import advantages_for, trajectory_gradient
from .OptimalWeights import (
    WeightVector,
    beta_estimate,
    minimized_bound,
    optimal_weights,
    variance_bound,
)

logger = logging.getLogger(__name__)


class WeightsSource(Enum):
    """Where the per-step weights of a simulated estimator come from."""

    UNIFORM = "uniform"
    SURROGATE = "surrogate"
    OPTIMAL = "optimal"


@dataclasses.dataclass(frozen=True)
class VarianceReport:
    """Empirical variance of the mini-batch estimator for one weighting.

    Attributes:
        source (WeightsSource): The weighting that was measured.
        weights (WeightVector): The per-step weights used.
        per_coordinate (FloatArray): Variance of each gradient coordinate.
        trace (float): Sum of per_coordinate.
        ci_low (float): Lower end of the bootstrap 95% interval of trace.
        ci_high (float): Upper end of the bootstrap 95% interval of trace.
        bound_value (float): E[A^2] sum_t beta_t w_t^2 / G for these weights.
        minimized_bound (float): T^2 / sum_t 1/beta_t / G.
    """

    source: WeightsSource
    weights: WeightVector
    per_coordinate: FloatArray
    trace: float
    ci_low: float
    ci_high: float
    bound_value: float
    minimized_bound: float


@dataclasses.dataclass(frozen=True)
class CovarianceDecomposition:
    """Trace of Var(mean of G) split into its diagonal and cross terms."""

    total: float
    diagonal: float
    cross: float


def resolve_weights(
    policy: SoftmaxPolicy,
    env: ToyEnv,
    source: WeightsSource,
    beta_samples: int = 2000,
    seed: int = 0,
) -> WeightVector:
    """Per-step weights for a weighting source.

    OPTIMAL uses the exact variance profile, SURROGATE its entropy-only
    approximation estimated from sampled trajectories.
    """
    if source is WeightsSource.UNIFORM:
        return WeightVector.uniform(env.horizon)
    if source is WeightsSource.OPTIMAL:
        return optimal_weights(beta_estimate(policy, env, kind=BetaKind.EXACT_TOY))
    return optimal_weights(
        beta_estimate(policy, env, beta_samples, BetaKind.ENTROPY_ONLY, seed)
    )


def replicate_gradients(
    policy: SoftmaxPolicy,
    env: ToyEnv,
    weights: WeightVector | Sequence[float] | None,
    n_groups: int,
    group_size: int,
    seed: int,
    advantage_mode: AdvantageMode = AdvantageMode.GROUP,
    delta: float = DEFAULT_ADVANTAGE_DELTA,
    workers: int = 1,
) -> FloatArray:
    """Per-trajectory gradients g_i of n_groups independent groups.

    Returns:
        FloatArray: Array of shape (n_groups, group_size, P).
    """
    w = None
    if weights is not None:
        w = weights.as_array() if isinstance(weights, WeightVector) else np.asarray(weights)
    population = None
    if advantage_mode is not AdvantageMode.GROUP:
        population = reward_moments(policy, env)

    def one_group(r: int) -> FloatArray:
        rng = np.random.default_rng(replicate_seed(seed, r))
        trajectories = [sample_trajectory(policy, env, rng) for _ in range(group_size)]
        advantages = advantages_for(
            [traj.reward for traj in trajectories], advantage_mode, delta, population
        )
        return np.array(
            [trajectory_gradient(t, a, w) for t, a in zip(trajectories, advantages)]
        )

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            groups = list(pool.map(one_group, range(n_groups)))
    else:
        groups = [one_group(r) for r in range(n_groups)]
    return np.stack(groups)


def _bootstrap_traces(
    samples: FloatArray, n_boot: int, rng: np.random.Generator
) -> FloatArray:
    """Trace of the sample covariance over n_boot resamples of the rows."""
    n = samples.shape[0]
    squares = np.square(samples)
    traces = np.empty(n_boot)
    for b in range(n_boot):
        counts = np.bincount(rng.integers(0, n, n), minlength=n).astype(np.float64)
        mean = counts @ samples / n
        second = counts @ squares / n
        traces[b] = float(np.sum(second - np.square(mean))) * n / (n - 1)
    return traces


def mc_variance(
    policy: SoftmaxPolicy,
    env: ToyEnv,
    source: WeightsSource,
    n_groups: int,
    group_size: int = 8,
    seed: int = 0,
    n_boot: int = DEFAULT_BOOTSTRAP_RESAMPLES,
    advantage_mode: AdvantageMode = AdvantageMode.GROUP,
    delta: float = DEFAULT_ADVANTAGE_DELTA,
    workers: int = 1,
    beta_samples: int = 2000,
) -> VarianceReport:
    """Variance of the (re)weighted mini-batch estimator across replicate groups.

    Args:
        policy (SoftmaxPolicy): Policy the groups are sampled from.
        env (ToyEnv): The environment.
        source (WeightsSource): Which per-step weights to apply.
        n_groups (int): Number of replicate groups, at least 100.
        group_size (int): G, trajectories per group.
        seed (int): Base seed; replicate r uses seed + r.
        n_boot (int): Bootstrap resamples for the trace interval.
        advantage_mode (AdvantageMode): Baseline of the advantages.
        delta (float): Advantage stability constant.
        workers (int): Threads used to sample replicates.
        beta_samples (int): Samples for the surrogate profile.

    Returns:
        VarianceReport: Per-coordinate variances, trace and its 95% interval.
    """
    assert n_groups >= 100, f"ERROR: Need at least 100 groups, got {n_groups}"
    weights = resolve_weights(policy, env, source, beta_samples, seed)
    grads = replicate_gradients(
        policy, env, weights, n_groups, group_size, seed, advantage_mode, delta, workers
    )
    means = grads.mean(axis=1)
    per_coordinate = means.var(axis=0, ddof=1)
    boot_rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(1)[0])
    low, high = percentile_interval(_bootstrap_traces(means, n_boot, boot_rng), 0.95)
    beta = beta_estimate(policy, env, kind=BetaKind.EXACT_TOY)
    report = VarianceReport(
        source=source,
        weights=weights,
        per_coordinate=per_coordinate,
        trace=float(per_coordinate.sum()),
        ci_low=low,
        ci_high=high,
        bound_value=variance_bound(beta, weights) / group_size,
        minimized_bound=minimized_bound(beta) / group_size,
    )
    logger.info(
        "%s weights: trace %.6g [%.6g, %.6g]", source.value, report.trace, low, high
    )
    return report


def covariance_decomposition(grads: FloatArray) -> CovarianceDecomposition:
    """Splits tr Var((1/G) sum_i g_i) into diagonal and cross-covariance terms.

    Args:
        grads (FloatArray): Shape (replicates, G, P), as from replicate_gradients.

    Returns:
        CovarianceDecomposition: total == diagonal + cross up to rounding.
    """
    n, group_size, _ = grads.shape
    assert n >= 2, "ERROR: Need at least two replicates"
    centered = grads - grads.mean(axis=0, keepdims=True)
    # cov[i, j] = tr Cov(g_i, g_j) over replicates
    cov = np.einsum("rip,rjp->ij", centered, centered) / (n - 1)
    diagonal = float(np.trace(cov)) / group_size**2
    cross = float(cov.sum() - np.trace(cov)) / group_size**2
    means = grads.mean(axis=1)
    total = float(means.var(axis=0, ddof=1).sum())
    return CovarianceDecomposition(total=total, diagonal=diagonal, cross=cross)


def reweighting_bias(
    policy: SoftmaxPolicy, env: ToyEnv, weights: WeightVector
) -> tuple[float, float]:
    """How far the exact reweighted gradient is from the true gradient.

    Returns:
        tuple[float, float]: (cosine similarity, relative norm of the difference).
    """
    mean, _ = reward_moments(policy, env)
    true_grad = exact_reweighted_gradient(policy, env, [1.0] * env.horizon, mean)
    reweighted = exact_reweighted_gradient(policy, env, list(weights.w), mean)
    norm_true = float(np.linalg.norm(true_grad))
    norm_rw = float(np.linalg.norm(reweighted))
    if norm_true == 0.0 or norm_rw == 0.0:
        return 1.0, 0.0
    cosine = float(np.dot(true_grad, reweighted)) / (norm_true * norm_rw)
    return cosine, float(np.linalg.norm(reweighted - true_grad)) / norm_true


def variance_table(
    policy: SoftmaxPolicy,
    env: ToyEnv,
    n_groups: int,
    group_size: int,
    seed: int,
    **kwargs: object,
) -> list[VarianceReport]:
    """mc_variance for every weighting source, on the same replicate seeds."""
    return [
        mc_variance(policy, env, source, n_groups, group_size, seed, **kwargs)  # type: ignore[arg-type]
        for source in WeightsSource
    ]
