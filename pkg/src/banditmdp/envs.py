"""Built-in environments: the hard chain, random ergodic MDPs and tiny analytic MDPs."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import mdp as mdpcore
from .mdp import TabularMdp

ENV_KINDS = ("hard_chain", "random_ergodic", "two_state", "cycle", "file")
LEFT_ACTIONS = (0, 1)
RIGHT_ACTION = 2


def default_chain_reward(num_states: int) -> float:
    return float(min(2.0**num_states, 1e6))


def hard_chain(num_states: int, big_reward=None, gamma: float = 0.9) -> TabularMdp:
    """Deterministic chain where the uniform policy performs a left-biased walk.

    Interior states offer two left moves paying 1 and one right move paying 0;
    the last state jumps back to the first paying ``big_reward``. The first and
    last states have a single real action, duplicated so every state has three.
    All rewards are divided by ``big_reward`` so they stay in [0, 1]; this
    rescales every value and regret by ``1 / big_reward`` and nothing else.
    """
    N = int(num_states)
    if N < 3:
        raise ValueError("hard_chain needs at least 3 states")
    R = default_chain_reward(N) if big_reward is None else float(big_reward)
    if R < 1:
        raise ValueError("big_reward must be >= 1")
    scale = 1.0 / R
    P = np.zeros((N, 3, N))
    r = np.zeros((N, 3))
    P[0, :, 1] = 1.0
    for i in range(1, N - 1):
        for a in LEFT_ACTIONS:
            P[i, a, i - 1] = 1.0
            r[i, a] = 1.0 * scale
        P[i, RIGHT_ACTION, i + 1] = 1.0
    P[N - 1, :, 0] = 1.0
    r[N - 1, :] = R * scale
    return TabularMdp(P, r, gamma)


def random_ergodic(num_states: int, num_actions: int, epsilon: float, gamma: float, seed=0,
                   reward_kind: str = "deterministic") -> TabularMdp:
    """Random MDP whose every transition row mixes in ``epsilon`` of the uniform distribution.

    Every entry is at least ``epsilon / S``, so each policy's kernel is ergodic
    and contracts by at least ``1 - epsilon`` per step.
    """
    if not 0.0 < epsilon <= 1.0:
        raise ValueError("epsilon must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    S, A = int(num_states), int(num_actions)
    raw = rng.dirichlet(np.ones(S), size=(S, A))
    P = (1.0 - epsilon) * raw + epsilon / S
    r = rng.random((S, A))
    return TabularMdp(P, r, gamma, reward_kind)


def two_state(gamma: float = 0.9) -> TabularMdp:
    """Lazy uniform chain: every action moves to either state with probability 1/2."""
    P = np.full((2, 2, 2), 0.5)
    r = np.array([[1.0, 0.0], [0.0, 1.0]])
    return TabularMdp(P, r, gamma)


def cycle(num_states: int = 2, gamma: float = 0.5, num_actions: int = 1) -> TabularMdp:
    """Deterministic cycle ``0 -> 1 -> ... -> 0``; state 0 pays 1, the rest pay 0."""
    n = int(num_states)
    P = np.zeros((n, num_actions, n))
    for s in range(n):
        P[s, :, (s + 1) % n] = 1.0
    r = np.zeros((n, num_actions))
    r[0, :] = 1.0
    return TabularMdp(P, r, gamma)


def sticky_reward_stream(period: int = 10, phase_split: int = 5):
    """Two-action adversarial stream: action 0 pays on residues ``1..phase_split`` of ``t mod period``.

    Returns ``reward(t, action)``.
    """
    if not 0 < phase_split < period:
        raise ValueError("phase_split must lie strictly between 0 and period")

    def reward(t: int, action: int) -> float:
        first = 1 <= t % period <= phase_split
        if action not in (0, 1):
            raise ValueError("sticky stream has exactly two actions")
        return float(first if action == 0 else not first)

    return reward


def chain_hitting_time(num_states: int) -> float:
    """Expected first-hit time of the last state from the first under the uniform policy."""
    chain = hard_chain(num_states, gamma=0.5)
    K = mdpcore.induced_kernel(chain, mdpcore.uniform_policy(num_states, 3))
    return float(mdpcore.hitting_times(K, num_states - 1)[0])


@dataclass
class EnvSpec:
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ENV_KINDS:
            raise ValueError(f"unknown env kind {self.kind!r}; expected one of {ENV_KINDS}")


ENV_PARAMS = {
    "hard_chain": {"num_states", "big_reward", "gamma"},
    "random_ergodic": {"num_states", "num_actions", "epsilon", "gamma", "seed", "reward_kind"},
    "two_state": {"gamma"},
    "cycle": {"num_states", "gamma", "num_actions"},
    "file": {"path"},
}

DEFAULTS = {
    "hard_chain": {"num_states": 8, "gamma": 0.9},
    "random_ergodic": {"num_states": 4, "num_actions": 3, "epsilon": 0.3, "gamma": 0.9, "seed": 0},
    "two_state": {"gamma": 0.9},
    "cycle": {"num_states": 2, "gamma": 0.5},
    "file": {},
}


def make_env(spec: EnvSpec) -> TabularMdp:
    unknown = set(spec.params) - ENV_PARAMS[spec.kind]
    if unknown:
        raise ValueError(f"env {spec.kind}: unknown parameter(s) {sorted(unknown)}")
    p = {**DEFAULTS[spec.kind], **spec.params}
    if spec.kind == "hard_chain":
        return hard_chain(p["num_states"], p.get("big_reward"), p["gamma"])
    if spec.kind == "random_ergodic":
        return random_ergodic(p["num_states"], p["num_actions"], p["epsilon"], p["gamma"], p["seed"],
                              p.get("reward_kind", "deterministic"))
    if spec.kind == "two_state":
        return two_state(p["gamma"])
    if spec.kind == "cycle":
        return cycle(p["num_states"], p["gamma"], p.get("num_actions", 1))
    if "path" not in p:
        raise ValueError("env file: 'path' is required")
    return mdpcore.load(p["path"])
