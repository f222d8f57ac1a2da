"""Tests for the enumeration oracles."""

import math

import numpy as np
import pytest

from restkit.configs.configs import load_env
from restkit.data.constants import BetaKind
from restkit.data.exceptions import StateSpaceTooLarge
from restkit.policy.ExactOracle import (
    enumerate_trajectories,
    exact_beta,
    exact_policy_gradient,
    exact_return,
    exact_reweighted_gradient,
    gradient_second_moment,
    reward_moments,
    score_cross_moments,
)
from restkit.policy.SoftmaxPolicy import SoftmaxPolicy
from restkit.policy.ToyEnv import EnvContext, ToyEnv

FD_STEP = 1e-5


def _single_step_env() -> ToyEnv:
    return ToyEnv(
        "single",
        vocab_size=3,
        horizon=1,
        contexts=(EnvContext("c", targets=(0,)),),
        feature_kind="constant",
    )


def _finite_difference_gradient(policy: SoftmaxPolicy, env: ToyEnv) -> np.ndarray:
    theta = policy.flat_theta
    fd = np.zeros_like(theta)
    for k in range(theta.size):
        bump = np.zeros_like(theta)
        bump[k] = FD_STEP
        fd[k] = (
            exact_return(policy.with_theta(theta + bump), env)
            - exact_return(policy.with_theta(theta - bump), env)
        ) / (2 * FD_STEP)
    return fd


def test_probabilities_sum_to_one() -> None:
    env = load_env("enumerable")
    trajectories = list(enumerate_trajectories(env.initial_policy(), env))
    assert len(trajectories) == env.n_trajectories
    assert math.fsum(traj.prob for traj in trajectories) == pytest.approx(1.0, abs=1e-12)


def test_constant_reward_has_zero_gradient() -> None:
    env = ToyEnv(
        "constant",
        vocab_size=2,
        horizon=1,
        contexts=(EnvContext("c"),),
        reward_kind="tool_call",
        slots=(("x", "x"),),
    )
    policy = SoftmaxPolicy(np.array([[0.3, -1.2]]), env.feature_fn())
    assert exact_return(policy, env) == pytest.approx(0.8, abs=1e-15)
    np.testing.assert_allclose(exact_policy_gradient(policy, env), 0.0, atol=1e-15)


def test_single_step_closed_form() -> None:
    env = _single_step_env()
    policy = SoftmaxPolicy(np.array([[0.4, -0.3, 1.1]]), env.feature_fn())
    p = policy.distribution(0, [], 0).probs
    expected = p[0] * (np.eye(3)[0] - p)
    assert exact_return(policy, env) == pytest.approx(p[0], abs=1e-15)
    np.testing.assert_allclose(exact_policy_gradient(policy, env), expected, atol=1e-15)


@pytest.mark.parametrize("env_name", ["enumerable", "heterogeneous_beta"])
def test_gradient_matches_finite_differences(env_name: str) -> None:
    env = load_env(env_name)
    policy = env.initial_policy(init_scale=0.7, seed=11)
    analytic = exact_policy_gradient(policy, env)
    fd = _finite_difference_gradient(policy, env)
    assert np.linalg.norm(fd - analytic) <= 1e-8 * max(np.linalg.norm(analytic), 1.0)


def test_return_is_within_reward_range() -> None:
    env = load_env("enumerable")
    rewards = [
        env.reward(c, (a, b))[0]
        for c in range(env.n_contexts)
        for a in range(env.vocab_size)
        for b in range(env.vocab_size)
    ]
    for seed in range(5):
        value = exact_return(env.initial_policy(init_scale=2.0, seed=seed), env)
        assert min(rewards) <= value <= max(rewards)


def test_uniform_reweighting_with_baseline_is_the_policy_gradient() -> None:
    env = load_env("enumerable")
    policy = env.initial_policy()
    mean, _ = reward_moments(policy, env)
    np.testing.assert_allclose(
        exact_reweighted_gradient(policy, env, [1.0, 1.0], baseline=mean),
        exact_policy_gradient(policy, env),
        atol=1e-12,
    )


def test_cross_moments_vanish_off_the_diagonal() -> None:
    env = load_env("enumerable")
    policy = env.initial_policy()
    moments = score_cross_moments(policy, env)
    assert moments.shape == (2, 2)
    assert abs(moments[0, 1]) < 1e-12
    assert abs(moments[1, 0]) < 1e-12
    plain = exact_beta(policy, env, BetaKind.EXACT_PLAIN)
    np.testing.assert_allclose(np.diag(moments) * env.vocab_size, plain, rtol=1e-12)


def test_heterogeneous_profile() -> None:
    env = load_env("heterogeneous_beta")
    beta = exact_beta(env.initial_policy(), env)
    np.testing.assert_allclose(beta, [3.0, 27.0], rtol=1e-12)


def test_entropy_form_bounds_plain_contributions() -> None:
    env = load_env("enumerable")
    for seed in range(5):
        policy = env.initial_policy(init_scale=1.5, seed=seed)
        toy = exact_beta(policy, env, BetaKind.EXACT_TOY)
        plain = exact_beta(policy, env, BetaKind.EXACT_PLAIN)
        assert np.all(plain <= toy + 1e-12)


def test_unit_advantage_second_moment_bound() -> None:
    for env_name in ("enumerable", "heterogeneous_beta"):
        env = load_env(env_name)
        policy = env.initial_policy(init_scale=0.9, seed=4)
        lhs, rhs = gradient_second_moment(policy, env, standardize=False)
        assert 0.0 < lhs <= rhs + 1e-12


def test_reward_moments_at_uniform_policy() -> None:
    env = load_env("heterogeneous_beta")
    mean, std = reward_moments(env.initial_policy(), env)
    assert mean == pytest.approx(0.25, abs=1e-15)
    assert std == pytest.approx(math.sqrt(0.09375), abs=1e-15)


def test_large_state_space_is_refused() -> None:
    env = ToyEnv(
        "large",
        vocab_size=10,
        horizon=7,
        contexts=(EnvContext("c", targets=(0,) * 7),),
        feature_kind="constant",
    )
    policy = env.initial_policy()
    with pytest.raises(StateSpaceTooLarge):
        exact_return(policy, env)
    with pytest.raises(StateSpaceTooLarge):
        next(enumerate_trajectories(policy, env))


def test_population_advantage_second_moment_on_disjoint_steps() -> None:
    env = load_env("heterogeneous_beta")
    lhs, rhs = gradient_second_moment(env.initial_policy(), env, delta=0.0)
    assert lhs == pytest.approx(7.5, rel=1e-12)
    assert rhs == pytest.approx(30.0, rel=1e-12)
