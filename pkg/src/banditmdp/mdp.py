"""Exact finite-MDP mathematics.

Policies are plain ``(S, A)`` row-stochastic arrays and state distributions are
length-``S`` simplex vectors; :class:`TabularMdp` is the only structured type.
Every function here is a pure function of its arguments.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

CONSTRUCT_TOL = 1e-12
ARITH_TOL = 1e-10
REWARD_KINDS = ("deterministic", "bernoulli")


class NotErgodicError(ValueError):
    """The kernel has more than one stationary distribution."""


class AssumptionViolation(ValueError):
    """A sampled policy breaks one of the standing MDP assumptions."""

    def __init__(self, message, policy=None):
        super().__init__(message)
        self.policy = policy


@dataclass(frozen=True, eq=False)
class TabularMdp:
    """Finite discounted MDP with a dense ``P[s, a, s']`` tensor."""

    transitions: np.ndarray
    mean_rewards: np.ndarray
    gamma: float
    reward_kind: str = "deterministic"

    def __post_init__(self):
        P = np.array(self.transitions, dtype=float)
        r = np.array(self.mean_rewards, dtype=float)
        if P.ndim != 3 or P.shape[0] != P.shape[2]:
            raise ValueError(f"transitions must have shape (S, A, S), got {P.shape}")
        if r.shape != P.shape[:2]:
            raise ValueError(f"mean_rewards shape {r.shape} does not match (S, A) = {P.shape[:2]}")
        if np.any(P < 0):
            raise ValueError("negative transition probability")
        worst = np.max(np.abs(P.sum(axis=2) - 1.0))
        if worst > CONSTRUCT_TOL:
            raise ValueError(f"transition rows must sum to 1 (max deviation {worst:.3e})")
        if np.any(r < 0) or np.any(r > 1):
            raise ValueError("mean rewards must lie in [0, 1]")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must lie in [0, 1), got {self.gamma}")
        if self.reward_kind not in REWARD_KINDS:
            raise ValueError(f"reward_kind must be one of {REWARD_KINDS}")
        P.setflags(write=False)
        r.setflags(write=False)
        object.__setattr__(self, "transitions", P)
        object.__setattr__(self, "mean_rewards", r)
        object.__setattr__(self, "gamma", float(self.gamma))

    @property
    def num_states(self) -> int:
        return self.transitions.shape[0]

    @property
    def num_actions(self) -> int:
        return self.transitions.shape[1]

    def __eq__(self, other):
        if not isinstance(other, TabularMdp):
            return NotImplemented
        return (
            self.gamma == other.gamma
            and self.reward_kind == other.reward_kind
            and np.array_equal(self.transitions, other.transitions)
            and np.array_equal(self.mean_rewards, other.mean_rewards)
        )

    __hash__ = None


@dataclass
class ValueTables:
    v: np.ndarray
    q: np.ndarray
    residual: float = 0.0


@dataclass(frozen=True, eq=False)
class AugmentedMdp:
    """Base MDP crossed with a cyclic clock of length ``clock_len``.

    Augmented state ``s∘h`` has index ``h * S + s`` so the kernel is laid out
    in ``clock_len`` blocks of size ``S``, block ``h`` feeding block ``h + 1``.
    """

    base: TabularMdp
    clock_len: int
    mdp: TabularMdp = field(repr=False)

    def index(self, state: int, clock: int) -> int:
        return clock * self.base.num_states + state

    def lift_policy(self, policy: np.ndarray) -> np.ndarray:
        return np.tile(np.asarray(policy, dtype=float), (self.clock_len, 1))


# -- validation helpers -------------------------------------------------------


def check_policy(policy, num_states=None, num_actions=None, tol=CONSTRUCT_TOL) -> np.ndarray:
    pi = np.asarray(policy, dtype=float)
    if pi.ndim != 2:
        raise ValueError(f"policy must be a 2-D (S, A) array, got shape {pi.shape}")
    if num_states is not None and pi.shape[0] != num_states:
        raise ValueError(f"policy has {pi.shape[0]} states, expected {num_states}")
    if num_actions is not None and pi.shape[1] != num_actions:
        raise ValueError(f"policy has {pi.shape[1]} actions, expected {num_actions}")
    if np.any(pi < -tol) or np.max(np.abs(pi.sum(axis=1) - 1.0)) > tol:
        raise ValueError("policy rows must be probability vectors")
    return pi


def check_distribution(dist, size=None, tol=CONSTRUCT_TOL) -> np.ndarray:
    d = np.asarray(dist, dtype=float)
    if d.ndim != 1 or (size is not None and d.shape[0] != size):
        raise ValueError(f"distribution must be a length-{size} vector, got shape {d.shape}")
    if np.any(d < -tol) or abs(d.sum() - 1.0) > tol:
        raise ValueError("distribution must be non-negative and sum to 1")
    return d


def uniform_policy(num_states: int, num_actions: int) -> np.ndarray:
    return np.full((num_states, num_actions), 1.0 / num_actions)


def deterministic_policy(actions, num_actions: int) -> np.ndarray:
    actions = np.asarray(actions, dtype=int)
    pi = np.zeros((actions.size, num_actions))
    pi[np.arange(actions.size), actions] = 1.0
    return pi


def norm_1inf(matrix) -> float:
    """``max_x sum_y |M(y|x)|`` for a conditional matrix."""
    m = np.asarray(matrix, dtype=float)
    return float(np.max(np.abs(m).sum(axis=-1)))


# -- kernels and values -------------------------------------------------------


def induced_kernel(mdp: TabularMdp, policy) -> np.ndarray:
    """State-to-state kernel ``K[s, s'] = sum_a pi(a|s) P[s, a, s']``.

    Accepts a single policy or a stack of shape ``(..., S, A)``.
    """
    pi = np.asarray(policy, dtype=float)
    if pi.shape[-2:] != (mdp.num_states, mdp.num_actions):
        raise ValueError(
            f"policy shape {pi.shape} does not match MDP (S, A) = ({mdp.num_states}, {mdp.num_actions})"
        )
    return np.einsum("...sa,sat->...st", pi, mdp.transitions)


def policy_rewards(mdp: TabularMdp, policy) -> np.ndarray:
    return np.einsum("...sa,sa->...s", np.asarray(policy, dtype=float), mdp.mean_rewards)


def policy_evaluation(mdp: TabularMdp, policy, tol: float = 1e-10, v0=None, max_iter=None) -> ValueTables:
    """Iterate the Bellman expectation operator until the sup-norm error is below ``tol``.

    ``v0`` warm-starts the iteration; during a run consecutive policies are
    close, so the previous value vector converges in few sweeps.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    pi = check_policy(policy, mdp.num_states, mdp.num_actions, tol=ARITH_TOL)
    gamma = mdp.gamma
    K = induced_kernel(mdp, pi)
    r_pi = policy_rewards(mdp, pi)
    v = np.zeros(mdp.num_states) if v0 is None else np.array(v0, dtype=float)
    if gamma == 0.0:
        v, residual = r_pi.copy(), 0.0
    else:
        # ||v_{k+1} - v_k|| <= tol (1-g)/g  implies  ||v_{k+1} - v*|| <= tol
        stop = tol * (1.0 - gamma) / gamma
        delta = math.inf
        for _ in range(max_iter or 1_000_000):
            v_next = r_pi + gamma * (K @ v)
            delta = float(np.max(np.abs(v_next - v)))
            v = v_next
            if delta <= stop:
                break
        residual = delta * gamma / (1.0 - gamma)
    q = mdp.mean_rewards + gamma * (mdp.transitions @ v)
    return ValueTables(v=v, q=q, residual=float(residual))


def evaluate_policies(mdp: TabularMdp, policies) -> ValueTables:
    """Exact values for a stack of policies of shape ``(T, S, A)`` via batched linear solves.

    Returns ``v`` of shape ``(T, S)`` and ``q`` of shape ``(T, S, A)``.
    """
    pi = np.asarray(policies, dtype=float)
    S = mdp.num_states
    K = induced_kernel(mdp, pi)
    r_pi = policy_rewards(mdp, pi)
    system = np.eye(S) - mdp.gamma * K
    v = np.linalg.solve(system, r_pi[..., None])[..., 0]
    q = mdp.mean_rewards + mdp.gamma * np.einsum("sat,...t->...sa", mdp.transitions, v)
    resid = r_pi + mdp.gamma * np.einsum("...st,...t->...s", K, v) - v
    return ValueTables(v=v, q=q, residual=float(np.max(np.abs(resid))) if resid.size else 0.0)


def finite_horizon_q(mdp: TabularMdp, policy, horizon: int) -> np.ndarray:
    """Action values truncated after ``horizon + 1`` rewards, by backward recursion."""
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    pi = check_policy(policy, mdp.num_states, mdp.num_actions, tol=ARITH_TOL)
    q = mdp.mean_rewards.copy()
    for _ in range(horizon):
        v = np.einsum("sa,sa->s", pi, q)
        q = mdp.mean_rewards + mdp.gamma * (mdp.transitions @ v)
    return q


def optimal_policy(mdp: TabularMdp, tol: float = 1e-10):
    """Greedy policy from value iteration; ties go to the lowest action index.

    Iterates until successive values differ by at most ``tol (1-g) / (2g)`` so
    the greedy policy is ``tol``-optimal. Returns ``(policy, ValueTables)`` with
    the values of the returned policy.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    gamma = mdp.gamma
    v = np.zeros(mdp.num_states)
    if gamma == 0.0:
        q = mdp.mean_rewards.copy()
    else:
        stop = tol * (1.0 - gamma) / (2.0 * gamma)
        while True:
            q = mdp.mean_rewards + gamma * (mdp.transitions @ v)
            v_next = q.max(axis=1)
            done = np.max(np.abs(v_next - v)) <= stop
            v = v_next
            if done:
                q = mdp.mean_rewards + gamma * (mdp.transitions @ v)
                break
    pi = deterministic_policy(np.argmax(q, axis=1), mdp.num_actions)
    values = evaluate_policies(mdp, pi[None])
    return pi, ValueTables(v=values.v[0], q=values.q[0], residual=values.residual)


# -- stationary behaviour -----------------------------------------------------


def stationary_distribution(kernel, tol: float = ARITH_TOL) -> np.ndarray:
    """Solve ``mu K = mu``, ``sum(mu) = 1`` directly (periodic chains are fine).

    Raises :class:`NotErgodicError` when the stationary distribution is not unique.
    """
    K = np.asarray(kernel, dtype=float)
    S = K.shape[0]
    if K.shape != (S, S):
        raise ValueError("kernel must be square")
    system = np.eye(S) - K
    sv = np.linalg.svd(system, compute_uv=False)
    null_dim = int(np.sum(sv <= 1e-10 * max(1.0, sv[0] if sv.size else 1.0)))
    if null_dim > 1:
        raise NotErgodicError(f"kernel has {null_dim} independent stationary distributions")
    mu = np.linalg.solve((system + np.ones((S, S))).T, np.ones(S))
    mu = np.clip(mu, 0.0, None)
    mu /= mu.sum()
    residual = float(np.abs(mu @ K - mu).sum())
    if residual > tol:
        raise NotErgodicError(f"stationary solve residual {residual:.3e} exceeds {tol:.1e}")
    return mu


def stationary_distributions(kernels) -> np.ndarray:
    """Batched stationary distributions for a stack ``(T, S, S)`` of kernels.

    Rows whose stationary distribution is not unique come back as NaN.
    """
    K = np.asarray(kernels, dtype=float)
    S = K.shape[-1]
    sv = np.linalg.svd(np.eye(S) - K, compute_uv=False)
    scale = np.maximum(1.0, sv[..., :1])
    multi = (sv <= 1e-10 * scale).sum(axis=-1) > 1
    system = np.eye(S) - K + np.ones((S, S))
    system[multi] = np.eye(S)
    mu = np.linalg.solve(np.swapaxes(system, -1, -2), np.ones(K.shape[:-1])[..., None])[..., 0]
    mu = np.clip(mu, 0.0, None)
    mu = mu / mu.sum(axis=-1, keepdims=True)
    mu[multi] = np.nan
    return mu


def contraction_factor(kernel, blocks=None) -> float:
    """One-step L1 contraction ``max ||(d - d')K||_1 / ||d - d'||_1``.

    By convexity the maximum is attained at ``d - d' = e_i - e_j``, giving the
    Dobrushin coefficient ``max_{i,j} ||K_i - K_j||_1 / 2``. With ``blocks``
    (an integer label per state) only pairs within one block are compared,
    i.e. differences of distributions that agree on the block marginal.
    """
    K = np.asarray(kernel, dtype=float)
    diffs = np.abs(K[:, None, :] - K[None, :, :]).sum(axis=-1) / 2.0
    if blocks is not None:
        labels = np.asarray(blocks)
        diffs = np.where(labels[:, None] == labels[None, :], diffs, 0.0)
    return float(diffs.max()) if diffs.size else 0.0


def _policy_samples(mdp: TabularMdp, policy_samples: int, seed, cap: int):
    S, A = mdp.num_states, mdp.num_actions
    if A**S <= cap:
        for actions in itertools.product(range(A), repeat=S):
            yield deterministic_policy(actions, A)
        return
    rng = np.random.default_rng(seed)
    n_corner = policy_samples // 2
    for _ in range(n_corner):
        yield deterministic_policy(rng.integers(A, size=S), A)
    for _ in range(policy_samples - n_corner):
        yield rng.dirichlet(np.full(A, 0.5), size=S)


@dataclass
class BetaEstimate:
    beta: float
    policy: np.ndarray
    state: int
    samples: int
    exhaustive: bool


@dataclass
class MixingEstimate:
    tau: float
    factor: float
    policy: np.ndarray
    samples: int
    exhaustive: bool


def estimate_beta(mdp: TabularMdp, policy_samples: int = 4096, seed=0, cap: int = 4096) -> BetaEstimate:
    """Smallest stationary mass over sampled policies and states.

    All deterministic policies are enumerated when ``A**S <= cap``; otherwise
    ``policy_samples`` random corners and Dirichlet mixtures are drawn. The
    result upper-bounds the true infimum.
    """
    exhaustive = mdp.num_actions**mdp.num_states <= cap
    best = BetaEstimate(math.inf, None, -1, 0, exhaustive)
    for pi in _policy_samples(mdp, policy_samples, seed, cap):
        try:
            mu = stationary_distribution(induced_kernel(mdp, pi))
        except NotErgodicError as exc:
            raise AssumptionViolation(f"policy is not ergodic: {exc}\n{pi}", policy=pi) from exc
        best.samples += 1
        s = int(np.argmin(mu))
        if mu[s] < best.beta:
            best.beta, best.policy, best.state = float(mu[s]), pi, s
    return best


def estimate_mixing(mdp: TabularMdp, policy_samples: int = 4096, seed=0, cap: int = 4096) -> MixingEstimate:
    """Worst one-step contraction over sampled policies and ``tau = -1/ln(factor)``, floored at 1.

    The contraction factor is convex in each kernel row, so deterministic
    enumeration (when feasible) gives the exact supremum over all policies.
    """
    exhaustive = mdp.num_actions**mdp.num_states <= cap
    worst, worst_pi, n = -1.0, None, 0
    for pi in _policy_samples(mdp, policy_samples, seed, cap):
        n += 1
        f = contraction_factor(induced_kernel(mdp, pi))
        if f > worst:
            worst, worst_pi = f, pi
    if worst >= 1.0 - CONSTRUCT_TOL:
        raise AssumptionViolation(
            f"one-step contraction violated: factor {worst:.6f} >= 1 for policy\n{worst_pi}", policy=worst_pi
        )
    return MixingEstimate(tau_from_factor(worst), worst, worst_pi, n, exhaustive)


def tau_from_factor(factor: float) -> float:
    if factor <= 0.0:
        return 1.0
    return max(1.0, -1.0 / math.log(factor))


def k_step_factor(mdp: TabularMdp, policy, max_k: int = 64):
    """Diagnostic only: smallest ``k`` with ``contraction_factor(K^k) < 1``, or ``None``."""
    K = induced_kernel(mdp, policy)
    Kk = np.eye(mdp.num_states)
    for k in range(1, max_k + 1):
        Kk = Kk @ K
        f = contraction_factor(Kk)
        if f < 1.0 - CONSTRUCT_TOL:
            return k, f
    return None


def rollforward(nu1, schedule, mdp: TabularMdp, horizon=None) -> np.ndarray:
    """Plug-in distributions ``nu_1..nu_horizon`` with ``nu_{t+1} = nu_t K^{pi_t}``.

    ``schedule[t-1]`` is ``pi_t``; returns an array of shape ``(horizon, S)``.
    """
    pis = np.asarray(schedule, dtype=float)
    if horizon is None:
        horizon = len(pis)
    if horizon > len(pis) + 1:
        raise ValueError("schedule shorter than the requested horizon")
    nu = check_distribution(nu1, mdp.num_states, tol=ARITH_TOL)
    out = np.empty((horizon, mdp.num_states))
    if horizon == 0:
        return out
    out[0] = nu
    kernels = induced_kernel(mdp, pis[: horizon - 1])
    for t in range(1, horizon):
        nu = nu @ kernels[t - 1]
        out[t] = nu
    return out


def hitting_times(kernel, target: int) -> np.ndarray:
    """Expected first-hit times of ``target`` from every state (absorbing-chain solve)."""
    K = np.asarray(kernel, dtype=float)
    S = K.shape[0]
    rest = [s for s in range(S) if s != target]
    sub = K[np.ix_(rest, rest)]
    h = np.linalg.solve(np.eye(S - 1) - sub, np.ones(S - 1))
    out = np.zeros(S)
    out[rest] = h
    return out


def discounted_occupancy(mdp: TabularMdp, policy, s0: int) -> np.ndarray:
    """Normalized discounted occupancy from ``s0``: solves ``d = (1-g) e_s0 + g d K``."""
    K = induced_kernel(mdp, policy)
    S = mdp.num_states
    e = np.zeros(S)
    e[s0] = 1.0
    d = np.linalg.solve((np.eye(S) - mdp.gamma * K).T, (1.0 - mdp.gamma) * e)
    return d


# -- augmentation ---------------------------------------------------------------


def augment(mdp: TabularMdp, horizon: int, max_states: int = 200_000) -> AugmentedMdp:
    """Cross ``mdp`` with a clock of length ``horizon + 1`` that advances every step."""
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    S, A = mdp.num_states, mdp.num_actions
    L = horizon + 1
    if S * L > max_states:
        raise ValueError(f"augmented state space {S * L} exceeds cap {max_states}")
    P = np.zeros((L * S, A, L * S))
    for h in range(L):
        nxt = (h + 1) % L
        P[h * S : (h + 1) * S, :, nxt * S : (nxt + 1) * S] = mdp.transitions
    r = np.tile(mdp.mean_rewards, (L, 1))
    return AugmentedMdp(mdp, L, TabularMdp(P, r, mdp.gamma, mdp.reward_kind))


def augmented_kernel(kernel, horizon: int) -> np.ndarray:
    """Block-cyclic kernel of the clock-augmented chain for a base kernel."""
    K = np.asarray(kernel, dtype=float)
    S, L = K.shape[0], horizon + 1
    out = np.zeros((L * S, L * S))
    for h in range(L):
        nxt = (h + 1) % L
        out[h * S : (h + 1) * S, nxt * S : (nxt + 1) * S] = K
    return out


def clock_labels(num_states: int, horizon: int) -> np.ndarray:
    return np.repeat(np.arange(horizon + 1), num_states)


# -- text format ------------------------------------------------------------------

_HEADER = "tabular-mdp 1"


def dumps(mdp: TabularMdp) -> str:
    """Serialize to the line-oriented text format; floats use shortest round-trip repr."""
    lines = [
        _HEADER,
        f"num_states {mdp.num_states}",
        f"num_actions {mdp.num_actions}",
        f"gamma {mdp.gamma!r}",
        f"reward_kind {mdp.reward_kind}",
        "transitions",
    ]
    for s in range(mdp.num_states):
        for a in range(mdp.num_actions):
            lines.append(f"{s} {a} " + " ".join(repr(float(x)) for x in mdp.transitions[s, a]))
    lines.append("rewards")
    for s in range(mdp.num_states):
        lines.append(f"{s} " + " ".join(repr(float(x)) for x in mdp.mean_rewards[s]))
    return "\n".join(lines) + "\n"


def loads(text: str) -> TabularMdp:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines or lines[0] != _HEADER:
        raise ValueError(f"line 1: expected header {_HEADER!r}")
    header = {}
    i = 1
    while i < len(lines) and lines[i] != "transitions":
        key, _, value = lines[i].partition(" ")
        header[key] = value
        i += 1
    try:
        S, A = int(header["num_states"]), int(header["num_actions"])
        gamma = float(header["gamma"])
        kind = header["reward_kind"]
    except KeyError as exc:
        raise ValueError(f"missing header field {exc.args[0]}") from None
    P = np.zeros((S, A, S))
    i += 1
    for _ in range(S * A):
        parts = lines[i].split()
        if len(parts) != S + 2:
            raise ValueError(f"transition row {lines[i]!r}: expected {S + 2} fields")
        P[int(parts[0]), int(parts[1])] = [float(x) for x in parts[2:]]
        i += 1
    if lines[i] != "rewards":
        raise ValueError(f"expected 'rewards' section, got {lines[i]!r}")
    i += 1
    r = np.zeros((S, A))
    for _ in range(S):
        parts = lines[i].split()
        if len(parts) != A + 1:
            raise ValueError(f"reward row {lines[i]!r}: expected {A + 1} fields")
        r[int(parts[0])] = [float(x) for x in parts[1:]]
        i += 1
    return TabularMdp(P, r, gamma, kind)


def save(mdp: TabularMdp, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(mdp))


def load(path) -> TabularMdp:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())
