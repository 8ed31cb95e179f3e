"""Bandit learners used as per-state LOCAL algorithms.

Every learner follows the same duck-typed contract:

``act(t)``
    distribution over actions used at global step ``t``; registers ``t`` as pending.
``feed(t, action, reward)``
    feedback for the decision taken at step ``t``; rewards lie in ``[0, 1/(1-gamma)]``.
``snapshot(t)``
    distribution the learner would play at step ``t``, without side effects.

Learners never sample; the orchestrator owns all randomness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

REWARD_SLACK = 1e-12


class RoutingError(RuntimeError):
    """Feedback arrived for a decision the learner has no record of."""


def reward_bound(gamma: float) -> float:
    return 1.0 / (1.0 - gamma)


def _check_reward(reward: float, gamma: float) -> float:
    hi = reward_bound(gamma)
    if not (-REWARD_SLACK <= reward <= hi * (1 + REWARD_SLACK)):
        raise ValueError(f"reward {reward!r} outside [0, {hi}]")
    return min(max(float(reward), 0.0), hi)


def exp3_distribution(log_weights, eta: float) -> np.ndarray:
    """``(1 - eta) w / W + eta / A`` computed from log-weights."""
    lw = np.asarray(log_weights, dtype=float)
    w = np.exp(lw - lw.max())
    return (1.0 - eta) * w / w.sum() + eta / lw.size


def exp3_update(log_weights, eta: float, gamma: float, action: int, reward: float, probs) -> np.ndarray:
    """Importance-weighted exponential update of the chosen action's weight.

    ``probs`` is the distribution the action was drawn from. The exponent is
    ``(1 - gamma) eta (reward / p(action)) / A``, at most 1 because
    ``p(action) >= eta / A`` and ``reward <= 1 / (1 - gamma)``.
    """
    lw = np.array(log_weights, dtype=float)
    A = lw.size
    if not 0 <= action < A:
        raise ValueError(f"action {action} out of range for {A} actions")
    reward = _check_reward(reward, gamma)
    lw[action] += (1.0 - gamma) * eta * (reward / probs[action]) / A
    return lw


def exp3_default_eta(num_actions: int, horizon: int, gamma: float = 0.0) -> float:
    """Standard EXP3 tuning ``min(1, sqrt(A ln A / ((e - 1) T)))``.

    ``gamma`` does not enter: rewards are rescaled by ``1 - gamma`` inside the update.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if num_actions < 2:
        return 1.0
    return min(1.0, math.sqrt(num_actions * math.log(num_actions) / ((math.e - 1.0) * horizon)))


class Exp3:
    """EXP3 with exploration mixing ``eta`` and rewards in ``[0, 1/(1-gamma)]``.

    Weights start at one. Each pending decision keeps the distribution it was
    drawn from so delayed feedback is importance-weighted correctly.
    """

    kind = "exp3"

    def __init__(self, num_actions: int, eta: float, gamma: float = 0.0):
        if not 0.0 < eta <= 1.0:
            raise ValueError("eta must lie in (0, 1]")
        if not 0.0 <= gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        self.num_actions = int(num_actions)
        self.eta = float(eta)
        self.gamma = float(gamma)
        self.log_weights = np.zeros(self.num_actions)
        self.pending = {}
        self._probs = None

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    def distribution(self) -> np.ndarray:
        if self._probs is None:
            self._probs = exp3_distribution(self.log_weights, self.eta)
        return self._probs

    def act(self, t: int) -> np.ndarray:
        p = self.distribution()
        self.pending[t] = p
        return p

    def feed(self, t: int, action: int, reward: float) -> None:
        try:
            probs = self.pending.pop(t)
        except KeyError:
            raise RoutingError(f"no pending decision at step {t}") from None
        self.log_weights = exp3_update(self.log_weights, self.eta, self.gamma, action, reward, probs)
        self._probs = None

    def snapshot(self, t=None) -> np.ndarray:
        return self.distribution()


class UniformLearner:
    """Non-learning baseline that always plays the uniform distribution."""

    kind = "uniform"

    def __init__(self, num_actions: int, gamma: float = 0.0):
        self.num_actions = int(num_actions)
        self.gamma = float(gamma)
        self._probs = np.full(self.num_actions, 1.0 / self.num_actions)
        self.pending = set()

    def act(self, t):
        self.pending.add(t)
        return self._probs

    def feed(self, t, action, reward):
        if t not in self.pending:
            raise RoutingError(f"no pending decision at step {t}")
        self.pending.discard(t)
        _check_reward(reward, self.gamma)

    def snapshot(self, t=None):
        return self._probs


class FixedLearner(UniformLearner):
    """Plays a fixed distribution; used to pin a state to a given policy row."""

    kind = "fixed"

    def __init__(self, probs, gamma: float = 0.0):
        super().__init__(len(probs), gamma)
        self._probs = np.asarray(probs, dtype=float).copy()


class DelayWrapper:
    """Constant-delay reduction: ``H + 1`` base learners played round-robin.

    Step ``t`` is served by base ``t mod (H + 1)``, so the feedback for step
    ``t`` (arriving at ``t + H``) always returns to the base that acted, and
    that base has no other decision outstanding.
    """

    kind = "delay_wrapper"

    def __init__(self, base_factory, horizon: int):
        if horizon < 0:
            raise ValueError("horizon must be >= 0")
        self.horizon = int(horizon)
        self.bases = [base_factory() for _ in range(self.horizon + 1)]
        self.outstanding = {}
        self.routing_log = []

    def clock(self, t: int) -> int:
        return t % (self.horizon + 1)

    def act(self, t: int) -> np.ndarray:
        h = self.clock(t)
        if h in self.outstanding:
            raise RoutingError(f"base {h} already has an outstanding decision at step {self.outstanding[h]}")
        self.outstanding[h] = t
        self.routing_log.append(("act", t, h))
        return self.bases[h].act(t)

    def feed(self, t: int, action: int, reward: float) -> None:
        h = self.clock(t)
        if self.outstanding.get(h) != t:
            raise RoutingError(f"feedback for step {t} but base {h} has no outstanding decision there")
        del self.outstanding[h]
        self.routing_log.append(("feed", t, h))
        self.bases[h].feed(t, action, reward)

    def snapshot(self, t: int) -> np.ndarray:
        return self.bases[self.clock(t)].snapshot(t)

    def base_distributions(self) -> np.ndarray:
        return np.array([b.snapshot() for b in self.bases])


def change_rate(pi_prev, pi_next) -> float:
    """``||pi_next - pi_prev||_{1,inf}``, the per-step change of a policy."""
    a = np.asarray(pi_prev, dtype=float)
    b = np.asarray(pi_next, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    if a.ndim == 1:
        a, b = a[None], b[None]
    return float(np.max(np.abs(b - a).sum(axis=-1)))


def audit_routing(wrapper: DelayWrapper) -> bool:
    """True when every feed went to the base that made that decision, exactly once."""
    acted = {}
    fed = set()
    for kind, t, h in wrapper.routing_log:
        if kind == "act":
            acted[t] = h
        else:
            if acted.get(t) != h or t in fed:
                return False
            fed.add(t)
    return True


LEARNER_KINDS = ("exp3", "uniform")


def make_local_factory(kind: str, num_actions: int, gamma: float, *, eta=None, horizon: int = 0,
                       wrapper: bool = True, run_length: int = 1):
    """Build a zero-argument factory for the per-state LOCAL learner.

    With ``wrapper`` each LOCAL is a :class:`DelayWrapper` over ``horizon + 1``
    bases; otherwise the base learner absorbs the delay directly.
    Returns ``(factory, eta_used)``.
    """
    if kind not in LEARNER_KINDS:
        raise ValueError(f"unknown learner kind {kind!r}; expected one of {LEARNER_KINDS}")
    if kind == "exp3":
        eta_used = float(eta) if eta is not None else exp3_default_eta(num_actions, run_length, gamma)

        def base():
            return Exp3(num_actions, eta_used, gamma)
    else:
        eta_used = None

        def base():
            return UniformLearner(num_actions, gamma)

    if wrapper:
        return (lambda: DelayWrapper(base, horizon)), eta_used
    return base, eta_used


@dataclass(frozen=True)
class LearnerSpec:
    """LOCAL learner choice: ``kind``, optional ``eta`` override and whether to wrap."""

    kind: str = "exp3"
    eta: float = None
    wrapper: bool = True

    def __post_init__(self):
        if self.kind not in LEARNER_KINDS:
            raise ValueError(f"unknown learner kind {self.kind!r}; expected one of {LEARNER_KINDS}")
        if self.eta is not None and not 0.0 < self.eta <= 1.0:
            raise ValueError("eta must lie in (0, 1]")

    def run_length(self, T: int, horizon: int) -> int:
        """Rounds each base learner sees: ``ceil(T / (H + 1))`` when wrapped, else ``T``."""
        return -(-T // (horizon + 1)) if self.wrapper else T

    def factory(self, num_actions: int, gamma: float, T: int, horizon: int):
        """``(factory, eta_used)`` for a run of length ``T`` with Monte Carlo horizon ``horizon``."""
        return make_local_factory(self.kind, num_actions, gamma, eta=self.eta, horizon=horizon,
                                  wrapper=self.wrapper, run_length=self.run_length(T, horizon))
