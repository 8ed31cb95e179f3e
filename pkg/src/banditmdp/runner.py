"""The interaction loop: one LOCAL learner per state fed truncated Monte Carlo returns."""

from __future__ import annotations

import json
import math
import zlib
from dataclasses import dataclass, field

import numpy as np

from .learners import DelayWrapper, change_rate
from .mdp import TabularMdp

TRACE_HEADER = "# banditmdp-trace 1"
TRACE_COLUMNS = ("t", "s", "a", "r", "fed_step", "fed_state", "gbar")


def horizon(gamma: float, T: int) -> int:
    """Smallest ``H`` with ``gamma**H <= (1 - gamma) / sqrt(T)``, clamped at 0.

    The discounted tail beyond ``H`` is then at most ``1 / sqrt(T)``.
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    if not 0.0 <= gamma < 1.0:
        raise ValueError("gamma must lie in [0, 1)")
    if gamma == 0.0:
        return 0
    x = math.log((1.0 - gamma) / math.sqrt(T)) / math.log(gamma)
    # absorb log rounding so exact powers land on the integer
    H = max(0, math.ceil(x - 1e-9))
    if gamma ** (H + 1) / (1.0 - gamma) > 1.0 / math.sqrt(T):
        H += 1
    return H


def mc_return(rewards, gamma: float, horizon=None) -> float:
    """Truncated discounted return ``sum_k gamma**k r_k`` over a window of ``horizon + 1`` rewards."""
    r = np.asarray(rewards, dtype=float)
    if horizon is not None and r.size != horizon + 1:
        raise ValueError(f"reward window has length {r.size}, expected {horizon + 1}")
    return float(np.dot(gamma ** np.arange(r.size), r))


def rng_stream(seed: int, label: str) -> np.random.Generator:
    """Independent generator per purpose, derived from the master seed and a fixed label."""
    return np.random.default_rng([int(seed), zlib.crc32(label.encode())])


def doubling_schedule(T_max: int) -> list:
    """Epoch lengths ``1, 2, 4, ...`` with the last one truncated so they sum to ``T_max``."""
    if T_max < 1:
        raise ValueError("T_max must be >= 1")
    lengths, total, k = [], 0, 0
    while total < T_max:
        n = min(2**k, T_max - total)
        lengths.append(n)
        total += n
        k += 1
    return lengths


@dataclass
class RunTrace:
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    fed_at: np.ndarray
    fed_step: np.ndarray
    fed_state: np.ndarray
    gbar: np.ndarray
    meta: dict = field(default_factory=dict)
    policies: np.ndarray = None
    snapshot_every: int = 1
    base_changes: np.ndarray = None
    mutations: np.ndarray = None

    @property
    def T(self) -> int:
        return int(self.states.size)

    def __eq__(self, other):
        if not isinstance(other, RunTrace):
            return NotImplemented
        arrays = ("states", "actions", "rewards", "fed_at", "fed_step", "fed_state", "gbar")
        return self.meta == other.meta and all(np.array_equal(getattr(self, k), getattr(other, k)) for k in arrays)


def _sample(cdf_row: np.ndarray, u: float) -> int:
    i = int(np.searchsorted(cdf_row, u, side="right"))
    return min(i, cdf_row.size - 1)


def run_main(mdp: TabularMdp, T: int, local_factory, seed: int, *, H=None, initial_state: int = 0,
             snapshot_every: int = 1, raw_discount: bool = False, audit: bool = False,
             meta=None, learners_out=None) -> RunTrace:
    """Run ``T`` steps with one LOCAL learner per state.

    At step ``t`` the learner of ``S_t`` gives ``pi_t(.|S_t)``, an action is
    drawn and its reward observed; for ``t > H`` the return over rewards
    ``t-H..t`` discounted from ``t-H`` is fed to the learner of ``S_{t-H}``.
    ``raw_discount`` instead weights reward ``i`` by ``gamma**i``.
    With ``audit`` every feedback step records how many learners changed and
    the largest row change of the composite table stacking every base of
    every learner (the policy in the clock-augmented indexing).
    A list passed as ``learners_out`` receives the learner objects.
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    if snapshot_every < 1:
        raise ValueError("snapshot_every must be >= 1")
    S, A, gamma = mdp.num_states, mdp.num_actions, mdp.gamma
    if H is None:
        H = horizon(gamma, T)
    locals_ = [local_factory() for _ in range(S)]
    if learners_out is not None:
        learners_out.extend(locals_)
    u_act = rng_stream(seed, "actions").random(T)
    u_next = rng_stream(seed, "transitions").random(T)
    u_rew = rng_stream(seed, "rewards").random(T)
    cdf = np.cumsum(mdp.transitions, axis=2)
    bernoulli = mdp.reward_kind == "bernoulli"
    discounts = gamma ** np.arange(H + 1)

    states = np.empty(T, dtype=np.int64)
    actions = np.empty(T, dtype=np.int64)
    rewards = np.empty(T)
    n_fb = max(T - H, 0)
    fed_at = np.empty(n_fb, dtype=np.int64)
    fed_step = np.empty(n_fb, dtype=np.int64)
    fed_state = np.empty(n_fb, dtype=np.int64)
    gbar = np.empty(n_fb)
    n_snap = (T + snapshot_every - 1) // snapshot_every
    policies = np.empty((n_snap, S, A))
    mutations = np.zeros(n_fb, dtype=np.int64) if audit else None
    base_changes = np.zeros(n_fb) if audit else None

    s = int(initial_state)
    k = 0
    for t in range(1, T + 1):
        i = t - 1
        if i % snapshot_every == 0:
            policies[i // snapshot_every] = [loc.snapshot(t) for loc in locals_]
        probs = locals_[s].act(t)
        a = _sample(np.cumsum(probs), u_act[i])
        mean = mdp.mean_rewards[s, a]
        r = float(u_rew[i] < mean) if bernoulli else float(mean)
        states[i], actions[i], rewards[i] = s, a, r
        s_next = _sample(cdf[s, a], u_next[i])
        if t > H:
            j = t - H
            window = rewards[j - 1 : t]
            if raw_discount:
                g = float(np.dot(gamma ** np.arange(j, t + 1), window))
            else:
                g = float(np.dot(discounts, window))
            target = int(states[j - 1])
            if audit:
                before = [_local_table(loc) for loc in locals_]
            locals_[target].feed(j, int(actions[j - 1]), g)
            if audit:
                after = [_local_table(loc) for loc in locals_]
                mutations[k] = sum(not np.array_equal(b, c) for b, c in zip(before, after))
                base_changes[k] = max(float(np.max(np.abs(c - b).sum(axis=-1))) for b, c in zip(before, after))
            fed_at[k], fed_step[k], fed_state[k], gbar[k] = t, j, target, g
            k += 1
        s = s_next

    info = {
        "seed": int(seed),
        "gamma": gamma,
        "T": int(T),
        "H": int(H),
        "num_states": S,
        "num_actions": A,
        "initial_state": int(initial_state),
        "next_state": int(s),
        "raw_discount": bool(raw_discount),
    }
    info.update(meta or {})
    return RunTrace(states, actions, rewards, fed_at, fed_step, fed_state, gbar, info, policies,
                    snapshot_every, base_changes, mutations)


def _local_table(local) -> np.ndarray:
    if isinstance(local, DelayWrapper):
        return local.base_distributions()
    return np.asarray(local.snapshot(None))[None]


def measured_change_rate(trace: RunTrace):
    """Largest per-step policy change and the series ``||pi_{t+1} - pi_t||_{1,inf}``."""
    if trace.policies is None or trace.snapshot_every != 1:
        raise ValueError("measured change rate needs a policy snapshot at every step")
    diffs = np.abs(np.diff(trace.policies, axis=0)).sum(axis=-1)
    series = diffs.max(axis=-1) if diffs.size else np.zeros(0)
    return (float(series.max()) if series.size else 0.0), series


def changed_rows(trace: RunTrace) -> np.ndarray:
    """Number of states whose policy row differs between consecutive snapshots."""
    diffs = np.abs(np.diff(trace.policies, axis=0)).sum(axis=-1)
    return (diffs > 0).sum(axis=-1)


def replay_policies(trace: RunTrace, local_factory, num_states: int) -> np.ndarray:
    """Recompute every-step policy snapshots by replaying the recorded decisions and feedback."""
    locals_ = [local_factory() for _ in range(num_states)]
    by_time = {int(t): k for k, t in enumerate(trace.fed_at)}
    out = []
    for t in range(1, trace.T + 1):
        out.append([loc.snapshot(t) for loc in locals_])
        locals_[int(trace.states[t - 1])].act(t)
        k = by_time.get(t)
        if k is not None:
            locals_[int(trace.fed_state[k])].feed(int(trace.fed_step[k]), int(trace.actions[trace.fed_step[k] - 1]),
                                                  float(trace.gbar[k]))
    return np.array(out)


def audit_feedback(trace: RunTrace, gamma: float) -> list:
    """Problems found replaying the feedback log against the trajectory; empty when clean."""
    problems = []
    H = trace.meta["H"]
    raw = trace.meta.get("raw_discount", False)
    expected = max(trace.T - H, 0)
    if trace.fed_at.size != expected:
        problems.append(f"{trace.fed_at.size} deliveries, expected {expected}")
    if len(set(trace.fed_step.tolist())) != trace.fed_step.size:
        problems.append("some step received feedback twice")
    top = (1.0 - gamma ** (H + 1)) / (1.0 - gamma)
    for t, j, s, g in zip(trace.fed_at, trace.fed_step, trace.fed_state, trace.gbar):
        if j != t - H:
            problems.append(f"step {t}: fed step {j}, expected {t - H}")
        if s != trace.states[j - 1]:
            problems.append(f"step {t}: fed state {s}, learner that acted was {trace.states[j - 1]}")
        window = trace.rewards[j - 1 : t]
        weights = gamma ** np.arange(j, t + 1) if raw else gamma ** np.arange(t - j + 1)
        if g != float(np.dot(weights, window)):
            problems.append(f"step {t}: feedback {g!r} does not match the reward window")
        if not 0.0 <= g <= top * (1 + 1e-12):
            problems.append(f"step {t}: feedback {g!r} outside [0, {top}]")
    return problems


def run_doubling(mdp: TabularMdp, T_max: int, factory_for, seed: int, *, initial_state: int = 0,
                 raw_discount: bool = False) -> RunTrace:
    """Restart learners on epochs of length ``1, 2, 4, ...``.

    ``factory_for(epoch_length, H)`` returns ``(local_factory, eta)`` tuned for
    the nominal epoch length ``2**k``; the environment state carries over.
    """
    parts = []
    s0 = initial_state
    offset = 0
    for k, n in enumerate(doubling_schedule(T_max)):
        nominal = 2**k
        H = horizon(mdp.gamma, nominal)
        factory, eta = factory_for(nominal, H)
        part = run_main(mdp, n, factory, seed * 1_000_003 + k, H=H, initial_state=s0, raw_discount=raw_discount,
                        meta={"eta": eta})
        parts.append((offset, part))
        s0 = part.meta["next_state"]
        offset += n
    cat = lambda name: np.concatenate([getattr(p, name) for _, p in parts])  # noqa: E731
    shift = lambda name: np.concatenate([getattr(p, name) + off for off, p in parts])  # noqa: E731
    meta = {
        "seed": int(seed),
        "gamma": mdp.gamma,
        "T": int(T_max),
        "H": [p.meta["H"] for _, p in parts],
        "eta": [p.meta["eta"] for _, p in parts],
        "epochs": [p.T for _, p in parts],
        "doubling": True,
        "initial_state": int(initial_state),
        "next_state": int(s0),
        "raw_discount": bool(raw_discount),
    }
    return RunTrace(cat("states"), cat("actions"), cat("rewards"), shift("fed_at"), shift("fed_step"),
                    cat("fed_state"), cat("gbar"), meta, cat("policies"), 1)


# -- persistence ----------------------------------------------------------------


def _fmt(x) -> str:
    return repr(float(x))


def dumps_trace(trace: RunTrace) -> str:
    """Columnar text: metadata header then one tab-separated row per step."""
    lines = [TRACE_HEADER, "# meta " + json.dumps(trace.meta, sort_keys=True), "\t".join(TRACE_COLUMNS)]
    fb = {int(t): k for k, t in enumerate(trace.fed_at)}
    for i in range(trace.T):
        t = i + 1
        row = [str(t), str(int(trace.states[i])), str(int(trace.actions[i])), _fmt(trace.rewards[i])]
        k = fb.get(t)
        if k is None:
            row += ["-", "-", "-"]
        else:
            row += [str(int(trace.fed_step[k])), str(int(trace.fed_state[k])), _fmt(trace.gbar[k])]
        lines.append("\t".join(row))
    return "\n".join(lines) + "\n"


def loads_trace(text: str) -> RunTrace:
    lines = text.splitlines()
    if not lines or lines[0] != TRACE_HEADER:
        raise ValueError("line 1: not a trace file")
    if not lines[1].startswith("# meta "):
        raise ValueError("line 2: missing metadata")
    meta = json.loads(lines[1][len("# meta "):])
    if tuple(lines[2].split("\t")) != TRACE_COLUMNS:
        raise ValueError("line 3: unexpected column header")
    states, actions, rewards = [], [], []
    fed_at, fed_step, fed_state, gbar = [], [], [], []
    for n, line in enumerate(lines[3:], start=4):
        parts = line.split("\t")
        if len(parts) != len(TRACE_COLUMNS):
            raise ValueError(f"line {n}: expected {len(TRACE_COLUMNS)} fields")
        t = int(parts[0])
        states.append(int(parts[1]))
        actions.append(int(parts[2]))
        rewards.append(float(parts[3]))
        if parts[4] != "-":
            fed_at.append(t)
            fed_step.append(int(parts[4]))
            fed_state.append(int(parts[5]))
            gbar.append(float(parts[6]))
    as_int = lambda x: np.array(x, dtype=np.int64)  # noqa: E731
    return RunTrace(as_int(states), as_int(actions), np.array(rewards, dtype=float), as_int(fed_at),
                    as_int(fed_step), as_int(fed_state), np.array(gbar, dtype=float), meta)


def save_trace(trace: RunTrace, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_trace(trace))


def load_trace(path) -> RunTrace:
    with open(path, encoding="utf-8") as fh:
        return loads_trace(fh.read())


__all__ = [
    "RunTrace",
    "audit_feedback",
    "change_rate",
    "changed_rows",
    "doubling_schedule",
    "horizon",
    "load_trace",
    "mc_return",
    "measured_change_rate",
    "replay_policies",
    "run_doubling",
    "run_main",
    "save_trace",
]
