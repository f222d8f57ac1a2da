"""Tests for advantages, reweighted gradient estimators and optimal weights."""

import math

import numpy as np
import pytest

from restkit.configs.configs import load_env
from restkit.data.constants import AdvantageMode, BetaKind, RegionTag, SurrogateRule
from restkit.data.exceptions import EmptySequence, GroupTooSmall, LengthMismatch
from restkit.estimators.GradientEstimators import (
    TrajectoryGroup,
    advantages_for,
    group_advantages,
    minibatch_gradient,
    step_gradients,
    trajectory_gradient,
    weight_sum,
)
from restkit.estimators.OptimalWeights import (
    BetaProfile,
    WeightVector,
    beta_estimate,
    minimized_bound,
    optimal_weights,
    profile_from_entropies,
    surrogate_weight,
    surrogate_weights,
    variance_bound,
)
from restkit.estimators.VarianceSimulation import replicate_gradients
from restkit.policy.ExactOracle import exact_beta, exact_policy_gradient, reward_moments
from restkit.policy.ToyEnv import sample_trajectory
from restkit.tagging.RegionTagger import RegionEntropy

FD_STEP = 1e-5


def test_group_advantage_examples() -> None:
    np.testing.assert_allclose(group_advantages([1.0, 0.0], 0.0), [1.0, -1.0], atol=1e-15)
    np.testing.assert_array_equal(group_advantages([0.7, 0.7, 0.7]), 0.0)
    np.testing.assert_array_equal(group_advantages([0.7, 0.7], 0.0), 0.0)


def test_group_advantages_are_standardized() -> None:
    rng = np.random.default_rng(3)
    for _ in range(20):
        rewards = rng.random(int(rng.integers(2, 16)))
        if np.ptp(rewards) == 0:
            continue
        adv = group_advantages(rewards, 0.0)
        assert abs(adv.mean()) < 1e-12
        assert np.sqrt(np.mean(adv**2)) == pytest.approx(1.0, abs=1e-12)
        scaled = group_advantages(3.5 * rewards + 2.0, 0.0)
        np.testing.assert_allclose(scaled, adv, atol=1e-12)


def test_single_reward_group_is_rejected() -> None:
    with pytest.raises(GroupTooSmall):
        group_advantages([1.0])
    env = load_env("enumerable")
    traj = sample_trajectory(env.initial_policy(), env, 0)
    with pytest.raises(GroupTooSmall):
        TrajectoryGroup.from_trajectories([traj])


def test_population_advantage_modes() -> None:
    rewards = [0.0, 0.5, 1.0]
    np.testing.assert_allclose(
        advantages_for(rewards, AdvantageMode.CENTERED, population=(0.5, 0.25)),
        [-0.5, 0.0, 0.5],
    )
    np.testing.assert_allclose(
        advantages_for(rewards, AdvantageMode.POPULATION, 0.0, population=(0.5, 0.25)),
        [-2.0, 0.0, 2.0],
    )


def test_zero_advantage_gives_zero_gradient() -> None:
    env = load_env("enumerable")
    traj = sample_trajectory(env.initial_policy(), env, 1)
    np.testing.assert_array_equal(trajectory_gradient(traj, 0.0), 0.0)
    np.testing.assert_array_equal(trajectory_gradient(traj, 0.0, [2.0, 0.0]), 0.0)


def test_uniform_weights_match_unweighted() -> None:
    env = load_env("enumerable")
    traj = sample_trajectory(env.initial_policy(), env, 2)
    np.testing.assert_allclose(
        trajectory_gradient(traj, 0.7, [1.0, 1.0]), trajectory_gradient(traj, 0.7), atol=1e-15
    )
    with pytest.raises(LengthMismatch):
        trajectory_gradient(traj, 0.7, [1.0, 1.0, 1.0])


def test_step_gradients_match_log_prob_differences() -> None:
    env = load_env("enumerable")
    policy = env.initial_policy()
    traj = sample_trajectory(policy, env, 9)
    grads = step_gradients(traj)
    theta = policy.flat_theta
    for t, y in enumerate(traj.tokens):
        history = list(traj.tokens[:t])
        fd = np.zeros_like(theta)
        for k in range(theta.size):
            bump = np.zeros_like(theta)
            bump[k] = FD_STEP
            fd[k] = (
                policy.with_theta(theta + bump).log_prob(traj.context, history, t, y)
                - policy.with_theta(theta - bump).log_prob(traj.context, history, t, y)
            ) / (2 * FD_STEP)
        np.testing.assert_allclose(fd, grads[t], rtol=1e-6, atol=1e-9)


def test_minibatch_of_one() -> None:
    env = load_env("enumerable")
    traj = sample_trajectory(env.initial_policy(), env, 4)
    group = TrajectoryGroup((traj,), (0.5,))
    np.testing.assert_allclose(minibatch_gradient(group), trajectory_gradient(traj, 0.5))


def test_minibatch_weight_forms() -> None:
    env = load_env("enumerable")
    policy = env.initial_policy()
    trajectories = [sample_trajectory(policy, env, s) for s in range(4)]
    group = TrajectoryGroup(tuple(trajectories), (1.0, -1.0, 0.5, -0.5))
    shared = minibatch_gradient(group, [1.5, 0.5])
    per_traj = minibatch_gradient(group, [[1.5, 0.5]] * 4)
    np.testing.assert_allclose(shared, per_traj, atol=1e-15)
    with pytest.raises(LengthMismatch):
        minibatch_gradient(group, [[1.0, 1.0]] * 3)
    with pytest.raises(LengthMismatch):
        TrajectoryGroup(tuple(trajectories), (1.0,))
    assert weight_sum([0.1] * 10) == 1.0


def test_population_standardized_estimator_is_unbiased() -> None:
    env = load_env("enumerable")
    policy = env.initial_policy()
    _, std = reward_moments(policy, env)
    target = exact_policy_gradient(policy, env) / std
    grads = replicate_gradients(
        policy, env, None, 2500, 8, 0, AdvantageMode.POPULATION, delta=0.0
    )
    samples = grads.reshape(-1, grads.shape[-1])
    stderr = samples.std(axis=0, ddof=1) / math.sqrt(samples.shape[0])
    assert np.all(np.abs(samples.mean(axis=0) - target) <= 4 * stderr + 1e-12)


def test_optimal_weight_examples() -> None:
    assert optimal_weights([2.0, 2.0, 2.0]).w == (1.0, 1.0, 1.0)
    np.testing.assert_allclose(optimal_weights([1.0, 4.0]).w, [1.6, 0.4], atol=1e-15)
    np.testing.assert_allclose(optimal_weights([0.0, 2.0, 0.0]).w, [1.5, 0.0, 1.5])
    with pytest.raises(EmptySequence):
        optimal_weights([])


def test_bound_examples() -> None:
    beta = BetaProfile((1.0, 4.0), BetaKind.EXACT_TOY)
    assert variance_bound(beta, WeightVector.uniform(2)) == 5.0
    assert variance_bound(beta, optimal_weights(beta)) == pytest.approx(3.2, abs=1e-12)
    assert minimized_bound(beta) == pytest.approx(3.2, abs=1e-12)
    assert variance_bound(beta, WeightVector.uniform(2), adv_second_moment=2.0) == 10.0
    assert minimized_bound([0.0, 1.0]) == 0.0


@pytest.mark.slow
def test_optimal_weights_minimize_the_bound() -> None:
    rng = np.random.default_rng(11)
    for _ in range(1000):
        horizon = int(rng.integers(1, 65))
        beta = rng.uniform(0.01, 10.0, horizon)
        best = optimal_weights(beta)
        assert math.fsum(best.w) == horizon
        best_bound = variance_bound(beta, best)
        assert best_bound == pytest.approx(minimized_bound(beta), rel=1e-12)
        w = rng.dirichlet(np.ones(horizon), size=10_000) * horizon
        bounds = w**2 @ beta
        assert best_bound <= bounds.min() * (1.0 + 1e-12)


def test_optimal_weights_sum_exactly_to_horizon() -> None:
    rng = np.random.default_rng(3)
    for _ in range(2000):
        horizon = int(rng.integers(1, 65))
        beta = rng.uniform(0.01, 10.0, horizon) ** 3
        assert math.fsum(optimal_weights(beta).w) == horizon
        raw = rng.uniform(0.0, 5.0, horizon) + 1e-3
        assert math.fsum(WeightVector.proportional(raw).w) == horizon


def test_weight_vector_contract() -> None:
    assert WeightVector.proportional([2.0, 1.0, 1.0]).w == pytest.approx((1.5, 0.75, 0.75))
    with pytest.raises(AssertionError):
        WeightVector((1.0, 2.0))
    with pytest.raises(EmptySequence):
        BetaProfile((), BetaKind.EXACT_TOY)


def test_surrogate_weight_examples() -> None:
    ln2 = math.log(2)
    assert surrogate_weight(ln2, SurrogateRule.INV_ONE_MINUS_EXP) == pytest.approx(2.0)
    assert surrogate_weight(ln2, SurrogateRule.INV_ENTROPY) == pytest.approx(1.4427, abs=1e-4)
    for rule in SurrogateRule:
        assert surrogate_weight(0.0, rule, w_max=3.0) == 3.0
        assert surrogate_weight(1e-4, rule, w_max=3.0) == 3.0


def test_surrogate_weights_skip_absent_regions() -> None:
    stats = RegionEntropy.from_sums(
        {RegionTag.FORMAT: [math.log(2)] * 2, RegionTag.THOUGHT: [2.0, 3.0]}
    )
    weights = surrogate_weights(stats)
    assert weights[RegionTag.FORMAT] == pytest.approx(2.0)
    assert weights[RegionTag.PARAMETER] is None
    assert weights[RegionTag.THOUGHT] == pytest.approx(1.0 / (1.0 - math.exp(-2.5)))


def test_monte_carlo_profile_agrees_with_enumeration() -> None:
    env = load_env("enumerable")
    policy = env.initial_policy(init_scale=1.0, seed=5)
    exact = exact_beta(policy, env)
    estimate = beta_estimate(policy, env, 4000, BetaKind.MONTE_CARLO, seed=1)
    assert estimate.stderr is not None
    for b, e, se in zip(exact, estimate.beta, estimate.stderr):
        assert abs(b - e) <= 4 * se + 1e-12


def test_entropy_only_profile() -> None:
    env = load_env("heterogeneous_beta")
    profile = beta_estimate(env.initial_policy(), env, 50, BetaKind.ENTROPY_ONLY)
    np.testing.assert_allclose(profile.beta, [0.75, 0.75], atol=1e-12)
    assert optimal_weights(profile).w == pytest.approx((1.0, 1.0))
    assert profile_from_entropies([math.log(4), 0.0]).beta == pytest.approx((0.75, 0.0))
