"""Linear-softmax sequence policies with exact distributions and Jacobians.

The logits at step t are z_t = theta^T phi(x, y_<t, t) for a parameter matrix
theta of shape (d, V) and a deterministic feature vector phi in R^d. With theta
flattened row-major, the logit Jacobian is J_t = phi^T (kron) I_V, so

    grad_theta log pi(y_t) = J_t^T s_t = outer(phi, e_{y_t} - p_t).ravel()

and ||J_t||_F^2 = V * ||phi||^2.
"""

import dataclasses
import math
from typing import Callable, Sequence

import numpy as np
import numpy.typing as npt

from ..data.constants import PROB_FLOOR
from ..data.exceptions import NonFiniteLogits

FloatArray = npt.NDArray[np.float64]
FeatureFn = Callable[[int, Sequence[int], int], FloatArray]


def softmax(z: FloatArray) -> FloatArray:
    """Softmax with max-subtraction."""
    shifted = z - np.max(z)
    e = np.exp(shifted)
    return np.asarray(e / np.sum(e), dtype=np.float64)


def shannon_entropy(p: FloatArray) -> float:
    """-sum p log p in nats, with 0 log 0 taken as 0."""
    return float(max(0.0, -np.sum(p * np.log(np.maximum(p, PROB_FLOOR)))))


def renyi2_entropy(p: FloatArray) -> float:
    """Collision entropy -log sum p^2; never larger than the Shannon entropy."""
    return float(max(0.0, -np.log(np.sum(np.square(p)))))


def score_vector(p: FloatArray, y: int) -> FloatArray:
    """Logit-space score s = e_y - p."""
    assert 0 <= y < len(p), f"ERROR: Token {y} outside vocabulary of size {len(p)}"
    s = -np.asarray(p, dtype=np.float64)
    s[y] += 1.0
    return s


def expected_score_sq_norm(p: FloatArray) -> float:
    """E_{y~p} ||e_y - p||^2 by enumerating the V outcomes."""
    return float(sum(p[y] * np.sum(np.square(score_vector(p, y))) for y in range(len(p))))


def step_beta(jacobian_sq_norm: float, entropy: float) -> float:
    """Variance contribution ||J||_F^2 (1 - e^{-H}) of a single step."""
    return float(jacobian_sq_norm * (1.0 - np.exp(-entropy)))


@dataclasses.dataclass(frozen=True)
class TabularFeatures:
    """One-hot features over (context, position[, previous token]).

    Every step gets its own block of coordinates, scaled by step_scales[t], so
    per-step gradient contributions never share a parameter.
    """

    n_contexts: int
    horizon: int
    vocab_size: int
    step_scales: tuple[float, ...] = ()
    include_prev_token: bool = True

    @property
    def dim(self) -> int:
        per_step = self.vocab_size + 1 if self.include_prev_token else 1
        return self.n_contexts * self.horizon * per_step

    def __call__(self, context: int, history: Sequence[int], t: int) -> FloatArray:
        per_step = self.vocab_size + 1 if self.include_prev_token else 1
        prev = (history[-1] + 1 if history else 0) if self.include_prev_token else 0
        index = (context * self.horizon + t) * per_step + prev
        phi = np.zeros(self.dim)
        phi[index] = self.step_scales[t] if self.step_scales else 1.0
        return phi


@dataclasses.dataclass(frozen=True)
class SharedFeatures:
    """Bias, context one-hot and previous-token one-hot, shared by all steps.

    Steps reuse the same coordinates, so their gradient contributions overlap.
    """

    n_contexts: int
    vocab_size: int

    @property
    def dim(self) -> int:
        return 1 + self.n_contexts + self.vocab_size + 1

    def __call__(self, context: int, history: Sequence[int], t: int) -> FloatArray:
        phi = np.zeros(self.dim)
        phi[0] = 1.0
        phi[1 + context] = 1.0
        prev = history[-1] + 1 if history else 0
        phi[1 + self.n_contexts + prev] = 1.0
        return phi


@dataclasses.dataclass(frozen=True)
class ConstantFeatures:
    """The same feature vector at every step."""

    values: tuple[float, ...]

    @property
    def dim(self) -> int:
        return len(self.values)

    def __call__(self, context: int, history: Sequence[int], t: int) -> FloatArray:
        return np.asarray(self.values, dtype=np.float64)


@dataclasses.dataclass(frozen=True)
class StepDistribution:
    """Logits, probabilities and Shannon entropy of one step."""

    features: FloatArray
    logits: FloatArray
    probs: FloatArray
    entropy: float


@dataclasses.dataclass(frozen=True, eq=False)
class SoftmaxPolicy:
    """A linear-softmax policy over a vocabulary of size V.

    Attributes:
        theta (FloatArray): Parameter matrix of shape (d, V).
        feature_fn (FeatureFn): Maps (context, history, position) to R^d.
    """

    theta: FloatArray
    feature_fn: FeatureFn

    def __post_init__(self) -> None:
        theta = np.array(self.theta, dtype=np.float64)
        assert theta.ndim == 2, "ERROR: theta must be a (d, V) matrix"
        assert theta.shape[0] >= 1 and theta.shape[1] >= 2, (
            f"ERROR: Need d >= 1 and V >= 2, got {theta.shape}"
        )
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    @property
    def dim(self) -> int:
        return int(self.theta.shape[0])

    @property
    def vocab_size(self) -> int:
        return int(self.theta.shape[1])

    @property
    def n_params(self) -> int:
        return int(self.theta.size)

    @property
    def flat_theta(self) -> FloatArray:
        return np.asarray(self.theta.ravel(), dtype=np.float64)

    def with_theta(self, theta: FloatArray) -> "SoftmaxPolicy":
        """A policy with the same features and new (flat or matrix) parameters."""
        return SoftmaxPolicy(np.reshape(theta, self.theta.shape), self.feature_fn)

    def features(self, context: int, history: Sequence[int], t: int) -> FloatArray:
        phi = np.asarray(self.feature_fn(context, history, t), dtype=np.float64)
        assert phi.shape == (self.dim,), (
            f"ERROR: Feature vector has shape {phi.shape}, expected ({self.dim},)"
        )
        return phi

    def distribution(
        self, context: int, history: Sequence[int], t: int
    ) -> StepDistribution:
        phi = self.features(context, history, t)
        z = phi @ self.theta
        if not np.all(np.isfinite(z)):
            raise NonFiniteLogits(f"Non-finite logits at step {t}: {z}")
        p = softmax(z)
        return StepDistribution(phi, z, p, shannon_entropy(p))

    def log_prob(self, context: int, history: Sequence[int], t: int, y: int) -> float:
        p = self.distribution(context, history, t).probs
        return math.log(max(float(p[y]), PROB_FLOOR))

    def jacobian(self, context: int, history: Sequence[int], t: int) -> FloatArray:
        """Exact dz_t/dtheta of shape (V, d * V) for the flattened theta."""
        phi = self.features(context, history, t)
        return np.asarray(np.kron(phi[None, :], np.eye(self.vocab_size)), dtype=np.float64)


def step_distribution(
    policy: SoftmaxPolicy, context: int, history: Sequence[int], t: int
) -> tuple[FloatArray, FloatArray, float]:
    """(z_t, p_t, H_t) of one step.

    Raises:
        NonFiniteLogits: If any logit is NaN or infinite.
    """
    dist = policy.distribution(context, history, t)
    return dist.logits, dist.probs, dist.entropy


def step_jacobian(
    policy: SoftmaxPolicy, context: int, history: Sequence[int], t: int
) -> FloatArray:
    return policy.jacobian(context, history, t)


def score_gradient(features: FloatArray, probs: FloatArray, y: int) -> FloatArray:
    """J_t^T s_t for a linear-softmax step, without forming J_t."""
    return np.asarray(np.outer(features, score_vector(probs, y)).ravel(), dtype=np.float64)
