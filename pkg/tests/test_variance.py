"""Tests for the Monte-Carlo variance measurements."""

import numpy as np
import pytest

from restkit.configs.configs import load_env
from restkit.data.constants import AdvantageMode
from restkit.estimators.OptimalWeights import WeightVector
from restkit.estimators.VarianceSimulation import (
    WeightsSource,
    covariance_decomposition,
    mc_variance,
    replicate_gradients,
    resolve_weights,
    reweighting_bias,
    variance_table,
)
from restkit.policy.ExactOracle import (
    exact_policy_gradient,
    gradient_second_moment,
    reward_moments,
)


def test_resolved_weights_on_heterogeneous_env() -> None:
    env = load_env("heterogeneous_beta")
    policy = env.initial_policy()
    optimal = resolve_weights(policy, env, WeightsSource.OPTIMAL)
    np.testing.assert_allclose(optimal.w, [1.8, 0.2], atol=1e-12)
    surrogate = resolve_weights(policy, env, WeightsSource.SURROGATE, beta_samples=100)
    np.testing.assert_allclose(surrogate.w, [1.0, 1.0], atol=1e-12)
    assert resolve_weights(policy, env, WeightsSource.UNIFORM) == WeightVector.uniform(2)


def test_replicates_are_deterministic_across_workers() -> None:
    env = load_env("enumerable")
    policy = env.initial_policy()
    single = replicate_gradients(policy, env, None, 40, 4, 5)
    threaded = replicate_gradients(policy, env, None, 40, 4, 5, workers=2)
    assert single.shape == (40, 4, policy.n_params)
    np.testing.assert_array_equal(single, threaded)


def test_mc_variance_is_reproducible() -> None:
    env = load_env("enumerable")
    policy = env.initial_policy()
    first = mc_variance(policy, env, WeightsSource.UNIFORM, 100, 4, seed=3, n_boot=50)
    second = mc_variance(policy, env, WeightsSource.UNIFORM, 100, 4, seed=3, n_boot=50)
    np.testing.assert_array_equal(first.per_coordinate, second.per_coordinate)
    assert (first.trace, first.ci_low, first.ci_high) == (
        second.trace,
        second.ci_low,
        second.ci_high,
    )
    assert first.ci_low <= first.ci_high
    assert first.trace == pytest.approx(float(first.per_coordinate.sum()))


def test_too_few_groups_are_refused() -> None:
    env = load_env("enumerable")
    with pytest.raises(AssertionError):
        mc_variance(env.initial_policy(), env, WeightsSource.UNIFORM, 50)


@pytest.mark.slow
def test_optimal_weights_reduce_variance() -> None:
    env = load_env("heterogeneous_beta")
    policy = env.initial_policy()
    uniform = mc_variance(policy, env, WeightsSource.UNIFORM, 10_000, 8, seed=1, n_boot=200)
    optimal = mc_variance(policy, env, WeightsSource.OPTIMAL, 10_000, 8, seed=1, n_boot=200)
    assert optimal.ci_high < uniform.ci_low
    assert optimal.bound_value == pytest.approx(1.35, abs=1e-12)
    assert optimal.minimized_bound == pytest.approx(1.35, abs=1e-12)
    assert uniform.bound_value == pytest.approx(3.75, abs=1e-12)


@pytest.mark.parametrize("group_size", [2, 8, 32])
def test_variance_scales_with_group_size(group_size: int) -> None:
    env = load_env("enumerable")
    policy = env.initial_policy()
    _, std = reward_moments(policy, env)
    lhs, _ = gradient_second_moment(policy, env, delta=0.0, standardize=True)
    mean_grad = exact_policy_gradient(policy, env) / std
    per_trajectory = lhs - float(np.dot(mean_grad, mean_grad))
    report = mc_variance(
        policy,
        env,
        WeightsSource.UNIFORM,
        1000,
        group_size,
        seed=2,
        n_boot=200,
        advantage_mode=AdvantageMode.POPULATION,
        delta=0.0,
    )
    boot_sigma = (report.ci_high - report.ci_low) / 3.92
    assert abs(report.trace * group_size - per_trajectory) <= 4 * boot_sigma * group_size


def test_covariance_decomposition_adds_up() -> None:
    env = load_env("enumerable")
    policy = env.initial_policy()
    grads = replicate_gradients(policy, env, None, 200, 4, 0)
    parts = covariance_decomposition(grads)
    assert parts.total == pytest.approx(parts.diagonal + parts.cross, rel=1e-9)
    assert parts.diagonal > 0.0


def test_reweighting_bias() -> None:
    env = load_env("enumerable")
    policy = env.initial_policy()
    cosine, rel = reweighting_bias(policy, env, WeightVector.uniform(2))
    assert cosine == pytest.approx(1.0, abs=1e-12)
    assert rel == 0.0
    cosine, rel = reweighting_bias(policy, env, WeightVector((1.5, 0.5)))
    assert -1.0 <= cosine <= 1.0 + 1e-12
    assert rel > 0.0


def test_variance_table_covers_every_source() -> None:
    env = load_env("heterogeneous_beta")
    reports = variance_table(
        env.initial_policy(), env, 100, 4, 0, n_boot=20, beta_samples=100
    )
    assert [r.source for r in reports] == list(WeightsSource)
    for report in reports:
        assert len(report.weights) == env.horizon
        assert report.per_coordinate.shape == (env.initial_policy().n_params,)
