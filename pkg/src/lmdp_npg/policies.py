"""Log-linear policies over polynomial or one-hot feature maps.

Both environments have exactly two actions, so the policy is parameterized by
the difference feature of a state: accept probability is the sigmoid of
``theta . phi(s)``.  Equivalently the state-action features are
``phi(s, accept) = phi(s)`` and ``phi(s, reject) = 0``, which is the
convention used for score vectors:

    grad ln pi(accept | s) = (1 - pi(s)) * phi(s)
    grad ln pi(reject | s) = -pi(s) * phi(s)
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ACCEPT, REJECT, LatentMdpSpec, Policy
from .rng import stream

#: Logits are clamped here before exponentiation; sigmoid(40) differs from 1
#: by ~4e-18, far below every tolerance in the package.
LOGIT_CLAMP = 40.0


class ParameterOverflowError(FloatingPointError):
    def __init__(self):
        super().__init__("parameter overflow")


class FeatureMap:
    """Maps an encoded observation to the difference feature vector."""

    dim: int

    def state_features(self, obs: tuple) -> np.ndarray:
        raise NotImplementedError

    def features(self, obs: tuple, action: int) -> np.ndarray:
        if action == ACCEPT:
            return self.state_features(obs)
        return np.zeros(self.dim)

    def analytic_norm_bound(self) -> float | None:
        return None

    def describe(self) -> dict:
        raise NotImplementedError


class SpPolyFeatures(FeatureMap):
    """Polynomial basis in (fraction, best-so-far flag): dimension 2 * degree.

    phi(f, x) = (1, f, ..., f^(d0-1), x, f x, ..., f^(d0-1) x).
    """

    def __init__(self, degree: int = 4):
        if degree < 1:
            raise ValueError("degree must be >= 1")
        self.degree = int(degree)
        self.dim = 2 * self.degree
        self._exps = np.arange(self.degree)

    def state_features(self, obs: tuple) -> np.ndarray:
        f, x = obs
        powers = np.power(f, self._exps)
        return np.concatenate([powers, x * powers])

    def analytic_norm_bound(self) -> float | None:
        return math.sqrt(self.dim)

    def describe(self) -> dict:
        return {"kind": "sp_poly", "d0": self.degree}


class OkdPolyFeatures(FeatureMap):
    """All monomials in the five knapsack state coordinates with exponents < d0."""

    def __init__(self, degree: int = 3):
        if degree < 1:
            raise ValueError("degree must be >= 1")
        self.degree = int(degree)
        self.dim = self.degree ** 5
        self._exps = np.arange(self.degree)

    def state_features(self, obs: tuple) -> np.ndarray:
        d0 = self.degree
        pows = [np.power(c, self._exps) for c in obs]
        out = pows[0]
        for p in pows[1:]:
            out = np.multiply.outer(out, p)
        return out.reshape(self.dim)

    def analytic_norm_bound(self) -> float | None:
        return math.sqrt(self.dim)

    def describe(self) -> dict:
        return {"kind": "okd_poly", "d0": self.degree}


class OneHotFeatures(FeatureMap):
    """One coordinate per listed observation; unlisted (terminal) states map to 0.

    Mapping terminal states to the zero vector makes them contribute nothing to
    scores, Fisher forms or fitting losses, matching how the absorbing state is
    treated in the threshold-policy condition-number analysis.
    """

    def __init__(self, observations: list[tuple]):
        self._index = {obs: i for i, obs in enumerate(observations)}
        if len(self._index) != len(observations):
            raise ValueError("duplicate observations in one-hot basis")
        self.dim = len(observations)
        self.observations = list(observations)

    def state_features(self, obs: tuple) -> np.ndarray:
        vec = np.zeros(self.dim)
        i = self._index.get(obs)
        if i is not None:
            vec[i] = 1.0
        return vec

    def analytic_norm_bound(self) -> float | None:
        return 1.0

    def describe(self) -> dict:
        return {"kind": "one_hot", "d0": self.dim}


def _stable_sigmoid(z: float) -> float:
    if z >= 0.0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


class LogLinearPolicy:
    """Immutable softmax policy over two actions with difference features."""

    def __init__(self, features: FeatureMap, theta: np.ndarray | None = None):
        self.features = features
        if theta is None:
            theta = np.zeros(features.dim)
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (features.dim,):
            raise ValueError(f"theta must have shape ({features.dim},)")
        self.theta = theta
        self.theta.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.features.dim

    def with_theta(self, theta: np.ndarray) -> "LogLinearPolicy":
        return type(self)(self.features, theta) if type(self) is LogLinearPolicy \
            else LogLinearPolicy(self.features, theta)

    def logit(self, obs: tuple) -> float:
        z = float(self.theta @ self.features.state_features(obs))
        if not math.isfinite(z):
            raise ParameterOverflowError()
        return max(-LOGIT_CLAMP, min(LOGIT_CLAMP, z))

    def prob_accept(self, obs: tuple) -> float:
        return _stable_sigmoid(self.logit(obs))

    def action_probs(self, obs: tuple) -> np.ndarray:
        p = self.prob_accept(obs)
        return np.array([1.0 - p, p])

    def log_prob(self, obs: tuple, action: int) -> float:
        z = self.logit(obs)
        # ln sigmoid(z) and ln sigmoid(-z) without cancellation
        if action == ACCEPT:
            return -math.log1p(math.exp(-z)) if z >= 0 else z - math.log1p(math.exp(z))
        return -z - math.log1p(math.exp(-z)) if z >= 0 else -math.log1p(math.exp(z))

    def entropy(self, obs: tuple) -> float:
        p = self.prob_accept(obs)
        q = 1.0 - p
        out = 0.0
        if p > 0.0:
            out -= p * math.log(p)
        if q > 0.0:
            out -= q * math.log(q)
        return out

    def grad_log_prob(self, obs: tuple, action: int) -> np.ndarray:
        p = self.prob_accept(obs)
        phi = self.features.state_features(obs)
        if action == ACCEPT:
            return (1.0 - p) * phi
        return -p * phi


class OneHotPolicy(LogLinearPolicy):
    """Log-linear policy with one parameter per observation."""

    def __init__(self, observations: list[tuple], theta: np.ndarray | None = None):
        super().__init__(OneHotFeatures(observations), theta)

    def with_theta(self, theta: np.ndarray) -> "OneHotPolicy":
        out = OneHotPolicy.__new__(OneHotPolicy)
        LogLinearPolicy.__init__(out, self.features, theta)
        return out


class NaiveRandomPolicy:
    """Accepts with probability 1/2 at every state."""

    def prob_accept(self, obs: tuple) -> float:
        return 0.5

    def action_probs(self, obs: tuple) -> np.ndarray:
        return np.array([0.5, 0.5])


@dataclass
class FeatureNormBound:
    empirical: float
    analytic: float | None

    @property
    def bound(self) -> float:
        return self.analytic if self.analytic is not None else self.empirical


def feature_norm_bound(
    features: FeatureMap, spec: LatentMdpSpec, samples: int, seed
) -> FeatureNormBound:
    """Empirical max feature norm over states visited by random play.

    For polynomial features on [0, 1]-valued observations every monomial is at
    most 1, so sqrt(dim) is an exact analytic bound and is reported alongside.
    """
    if samples < 1:
        raise ValueError("need at least one sample episode")
    rng = stream(seed, "feature-norm")
    explorer = NaiveRandomPolicy()
    best = 0.0
    for _ in range(samples):
        comp = spec.sample_component(rng)
        state = comp.reset_state()
        for _ in range(spec.horizon):
            best = max(best, float(np.linalg.norm(features.state_features(comp.encode(state)))))
            if comp.is_terminal(state):
                break
            action = ACCEPT if rng.random() < explorer.prob_accept(comp.encode(state)) else REJECT
            state, _ = comp.step(state, action)
    return FeatureNormBound(best, features.analytic_norm_bound())


def build_features(kind: str, d0: int, observations: list[tuple] | None = None) -> FeatureMap:
    """Reconstruct a feature map from its checkpoint description."""
    if kind == "sp_poly":
        return SpPolyFeatures(d0)
    if kind == "okd_poly":
        return OkdPolyFeatures(d0)
    if kind == "one_hot":
        if observations is None:
            raise ValueError("one_hot features need the observation list")
        return OneHotFeatures(observations)
    raise ValueError(f"unknown feature kind: {kind}")
