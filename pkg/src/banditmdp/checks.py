"""Randomized verification suite: kernel inequalities, value identities, the
augmented chain, learner rates and run-level regret bounds.

Each check reduces many trials to one :class:`BoundCheck` holding the trial
with the smallest slack.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import analysis as an
from . import mdp as mdpcore
from .analysis import FAIL, PASS, UNMET, WARN, BoundCheck
from .learners import DelayWrapper, Exp3, LearnerSpec, audit_routing
from .mdp import TabularMdp
from .runner import audit_feedback, horizon, run_main

REFUTED = "refuted"
INFO = "info"
KERNEL_TOL = 1e-10
IDENTITY_TOL = 1e-8


@dataclass
class VerifySettings:
    trials: int = 1000
    run_T: int = 2000
    run_seeds: int = 20
    probes: int = 200
    exp3_streams: int = 20
    exp3_steps: int = 2000
    seed: int = 0
    only: tuple = ()


@dataclass
class SuiteReport:
    checks: list
    env: dict = field(default_factory=dict)

    @property
    def hard_failures(self):
        return [c for c in self.checks if c.verdict == FAIL]

    @property
    def warnings(self):
        return [c for c in self.checks if c.verdict in (UNMET, WARN, REFUTED)]

    @property
    def ok(self) -> bool:
        return not self.hard_failures

    def records(self):
        return [
            {"name": c.name, "anchor": c.anchor, "lhs": c.lhs, "rhs": c.rhs, "slack": c.slack,
             "trials": c.trials, "verdict": c.verdict, "note": c.note}
            for c in self.checks
        ]

    def to_text(self) -> str:
        cols = ("name", "anchor", "lhs", "rhs", "slack", "trials", "verdict", "note")
        lines = ["\t".join(cols)]
        for r in self.records():
            lines.append("\t".join(_cell(r[k]) for k in cols))
        return "\n".join(lines) + "\n"

    def summary_table(self) -> str:
        rows = [(c.name, c.verdict, _cell(c.slack), str(c.trials)) for c in self.checks]
        w = [max(len(r[i]) for r in rows + [("check", "verdict", "slack", "trials")]) for i in range(4)]
        head = ("check", "verdict", "slack", "trials")
        out = ["  ".join(h.ljust(w[i]) for i, h in enumerate(head))]
        out += ["  ".join(v.ljust(w[i]) for i, v in enumerate(r)) for r in rows]
        n_fail, n_warn = len(self.hard_failures), len(self.warnings)
        out.append(f"{len(self.checks)} checks, {n_fail} failed, {n_warn} warnings")
        return "\n".join(out) + "\n"


def _cell(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


class _Worst:
    """Keeps the trial with the smallest ``rhs - lhs``."""

    def __init__(self):
        self.lhs = self.rhs = None
        self.n = 0
        self.note = ""

    def add(self, lhs, rhs, note=""):
        self.n += 1
        lhs, rhs = float(lhs), float(rhs)
        if self.lhs is None or rhs - lhs < self.rhs - self.lhs:
            self.lhs, self.rhs, self.note = lhs, rhs, note

    def check(self, name, anchor, tol=KERNEL_TOL, verdict="") -> BoundCheck:
        if self.lhs is None:
            return BoundCheck(name, anchor, math.nan, math.nan, 0, UNMET, "no trials")
        return BoundCheck(name, anchor, self.lhs, self.rhs, self.n, verdict, self.note).judge(tol)


# -- random instances -------------------------------------------------------------


def random_policy(rng, S, A):
    return rng.dirichlet(np.ones(A), size=S)


def random_distribution(rng, S):
    return rng.dirichlet(np.ones(S))


def random_mdp(rng, max_states=6, max_actions=3, ergodic=False) -> TabularMdp:
    S = int(rng.integers(2, max_states + 1))
    A = int(rng.integers(1, max_actions + 1))
    P = rng.dirichlet(np.full(S, 0.5), size=(S, A))
    if ergodic:
        eps = rng.uniform(0.05, 1.0)
        P = (1.0 - eps) * P + eps / S
    return TabularMdp(P, rng.random((S, A)), float(rng.uniform(0.0, 0.99)))


def slow_schedule(rng, S, A, length, rate):
    """Policies drifting toward random targets; consecutive change at most ``rate``."""
    pis = [random_policy(rng, S, A)]
    for _ in range(length - 1):
        lam = rng.uniform(0.0, rate / 2.0)
        pis.append((1.0 - lam) * pis[-1] + lam * random_policy(rng, S, A))
    pis = np.array(pis)
    c = max(mdpcore.norm_1inf(pis[i + 1] - pis[i]) for i in range(length - 1))
    return pis, c


def _l1(x) -> float:
    return float(np.abs(x).sum())


def _chain(d, kernels):
    for K in kernels:
        d = d @ K
    return d


# -- kernel and norm checks -----------------------------------------------------------


def check_norm(rng, trials):
    w = _Worst()
    for _ in range(trials):
        n, m = rng.integers(1, 7, size=2)
        X, Y = rng.normal(size=(n, m)), rng.normal(size=(n, m))
        a = rng.normal()
        w.add(mdpcore.norm_1inf(X + Y), mdpcore.norm_1inf(X) + mdpcore.norm_1inf(Y), "triangle")
        nx = mdpcore.norm_1inf(X)
        w.add(abs(mdpcore.norm_1inf(a * X) - abs(a) * nx), 1e-12 * (1.0 + abs(a) * nx), "homogeneity")
        Z = np.zeros((n, m))
        Z[rng.integers(n), rng.integers(m)] = rng.choice([0.0, rng.normal()])
        definite = (mdpcore.norm_1inf(Z) == 0.0) == (not Z.any())
        w.add(0.0 if definite and nx >= 0 else 1.0, 0.0, "definiteness")
    return [w.check("norm_1inf", "1-inf norm axioms")]


def check_multi_step(rng, trials):
    w = _Worst()
    for _ in range(trials):
        S, A = rng.integers(1, 6), rng.integers(2, 4)
        pis, c = slow_schedule(rng, S, A, 30, rng.uniform(0, 0.5))
        t = int(rng.integers(0, 29))
        k = int(rng.integers(0, 30 - t))
        w.add(mdpcore.norm_1inf(pis[t + k] - pis[t]), k * c, f"k={k}")
    return [w.check("multi_step_change", "k-step change <= k * rate")]


def check_kernel_inequalities(rng, trials):
    pert, contr, one, prop = _Worst(), _Worst(), _Worst(), _Worst()
    for _ in range(trials):
        m = random_mdp(rng)
        S, A = m.num_states, m.num_actions
        d, d2 = random_distribution(rng, S), random_distribution(rng, S)
        pi, pi2 = random_policy(rng, S, A), random_policy(rng, S, A)
        K, K2 = mdpcore.induced_kernel(m, pi), mdpcore.induced_kernel(m, pi2)
        c, delta = mdpcore.norm_1inf(pi - pi2), _l1(d - d2)
        pert.add(_l1(d @ K - d @ K2), c)
        contr.add(_l1(d @ K - d2 @ K), delta)
        one.add(_l1(d @ K - d2 @ K2), c + delta)
        n = int(rng.integers(1, 11))
        seq = np.array([random_policy(rng, S, A) for _ in range(n)])
        scale = rng.uniform(0, 1)
        seq2 = np.array([(1 - scale) * p + scale * random_policy(rng, S, A) for p in seq])
        cmax = max(mdpcore.norm_1inf(a - b) for a, b in zip(seq, seq2))
        lhs = _l1(_chain(d, mdpcore.induced_kernel(m, seq)) - _chain(d2, mdpcore.induced_kernel(m, seq2)))
        prop.add(lhs, n * cmax + delta, f"K={n}")
    return [
        pert.check("kernel_perturbation", "||dP^pi - dP^pi'|| <= ||pi - pi'||"),
        contr.check("kernel_contraction", "||dP - d'P|| <= ||d - d'||"),
        one.check("one_step_error", "||dP^pi - d'P^pi'|| <= c + delta"),
        prop.check("error_propagation", "K-step products drift <= Kc + delta"),
    ]


def check_schedule_products(rng, trials):
    rep, frozen, shifted = _Worst(), _Worst(), _Worst()
    for _ in range(trials):
        m = random_mdp(rng)
        S, A = m.num_states, m.num_actions
        pis, c = slow_schedule(rng, S, A, 40, rng.uniform(0, 0.4))
        Ks = mdpcore.induced_kernel(m, pis)
        d = random_distribution(rng, S)
        t = int(rng.integers(0, 15))
        n = int(rng.integers(0, 12))
        K = int(rng.integers(1, 13))
        lhs = _l1(_chain(d, [Ks[t + n]] * K) - _chain(d, [Ks[t]] * K))
        rep.add(lhs, K * n * c, f"K={K} n={n}")
        lhs = _l1(_chain(d, Ks[t : t + K]) - _chain(d, [Ks[t]] * K))
        frozen.add(lhs, K * K * c, f"K={K}")
        lhs = _l1(_chain(d, Ks[t + n : t + n + K]) - _chain(d, Ks[t : t + K]))
        shifted.add(lhs, K * n * c, f"K={K} n={n}")
    return [
        rep.check("repeated_kernel_drift", "||d(P_{t+n})^K - d(P_t)^K|| <= Knc"),
        frozen.check("schedule_vs_frozen", "||d P_t..P_{t+K-1} - d(P_t)^K|| <= K^2 c"),
        shifted.check("shifted_schedule", "||d P_{t+n}.. - d P_t..|| <= Knc"),
    ]


# -- value identities -----------------------------------------------------------------


def performance_difference_gap(m: TabularMdp, pi, pi2, s0: int) -> float:
    """``|V'(s0) - V(s0) - E_{d'}[E_{pi'}[Q - V]] / (1 - gamma)|`` with exact solves."""
    vals = mdpcore.evaluate_policies(m, np.stack([pi, pi2]))
    v, q, v2 = vals.v[0], vals.q[0], vals.v[1]
    d = mdpcore.discounted_occupancy(m, pi2, s0)
    adv = np.einsum("sa,sa->s", pi2, q) - v
    return abs(v2[s0] - v[s0] - float(d @ adv) / (1.0 - m.gamma))


def check_performance_difference(rng, trials):
    w = _Worst()
    for _ in range(trials):
        m = random_mdp(rng)
        S, A = m.num_states, m.num_actions
        s0 = int(rng.integers(S))
        w.add(performance_difference_gap(m, random_policy(rng, S, A), random_policy(rng, S, A), s0), IDENTITY_TOL)
    return [w.check("performance_difference", "performance difference identity", tol=0.0)]


TAIL_GRID = [(g, T) for g in (0.5, 0.9, 0.99) for T in (10**2, 10**3, 10**4, 10**5)]


def check_horizon_tail(rng, trials):
    tail, trunc = _Worst(), _Worst()
    for g, T in TAIL_GRID:
        H = horizon(g, T)
        tail.add(g ** (H + 1) / (1 - g), 1 / math.sqrt(T), f"gamma={g} T={T} H={H}")
    for _ in range(max(1, trials // 5)):
        m = random_mdp(rng)
        T = int(rng.integers(1, 10**5))
        H = horizon(m.gamma, T)
        pi = random_policy(rng, m.num_states, m.num_actions)
        q = mdpcore.evaluate_policies(m, pi[None]).q[0]
        qbar = mdpcore.finite_horizon_q(m, pi, H)
        bound = m.gamma ** (H + 1) / (1 - m.gamma)
        trunc.add(float(np.max(np.abs(qbar - q))), bound, f"H={H}")
        trunc.add(bound, 1 / math.sqrt(T), f"T={T}")
    return [tail.check("horizon_tail", "tail of truncated return <= 1/sqrt(T)", tol=0.0),
            trunc.check("truncated_q", "|Qbar - Q| <= gamma^(H+1)/(1-gamma) <= 1/sqrt(T)")]


# -- augmented chain ------------------------------------------------------------------


def augmented_instance(rng, max_horizon=10):
    m = random_mdp(rng, ergodic=True)
    pi = random_policy(rng, m.num_states, m.num_actions)
    H = int(rng.integers(0, max_horizon + 1))
    return m, pi, H


def augmented_stats(m: TabularMdp, pi, H: int) -> dict:
    K = mdpcore.induced_kernel(m, pi)
    mu = mdpcore.stationary_distribution(K)
    Kt = mdpcore.augmented_kernel(K, H)
    mut = mdpcore.stationary_distribution(Kt)
    return {
        "stationary_gap": float(np.max(np.abs(mut - np.tile(mu, H + 1) / (H + 1)))),
        "floor": float(mut.min()),
        "floor_bound": float(mu.min()) / (H + 1),
        "base_factor": mdpcore.contraction_factor(K),
        "aug_factor": mdpcore.contraction_factor(Kt),
        "aligned_factor": mdpcore.contraction_factor(Kt, blocks=mdpcore.clock_labels(m.num_states, H)),
    }


def check_augmented(rng, trials):
    stat, floor, aligned, unrestricted = _Worst(), _Worst(), _Worst(), _Worst()
    for _ in range(trials):
        m, pi, H = augmented_instance(rng)
        st = augmented_stats(m, pi, H)
        stat.add(st["stationary_gap"], KERNEL_TOL, f"H={H}")
        floor.add(st["floor_bound"], st["floor"] + 1e-12, f"H={H}")
        aligned.add(st["aligned_factor"], st["base_factor"], f"H={H}")
        unrestricted.add(st["aug_factor"], st["base_factor"], f"H={H}")
    out = [
        stat.check("augmented_stationary", "augmented stationary law = [mu..mu]/(H+1)", tol=0.0),
        floor.check("augmented_floor", "augmented stationary mass >= beta/(H+1)"),
        aligned.check("augmented_contraction", "clock-aligned augmented contraction <= base"),
    ]
    u = unrestricted.check("augmented_contraction_unrestricted", "augmented contraction <= base, all pairs")
    if u.verdict == FAIL:
        u.verdict = REFUTED
        u.note += "; block-cyclic kernel: pairs on different clocks never contract"
    return out + [u]


# -- learner rates ------------------------------------------------------------------


def exp3_stream_audit(rng, num_actions: int, eta: float, gamma: float, steps: int):
    """Standalone EXP3 on uniform random feedback: largest one-step L1 change and smallest probability."""
    learner = Exp3(num_actions, eta, gamma)
    prev = learner.act(0)
    worst, floor = 0.0, float(prev.min())
    ys = rng.uniform(0.0, 1.0 / (1.0 - gamma), size=steps)
    us = rng.random(steps)
    for t in range(steps):
        a = min(int(np.searchsorted(np.cumsum(prev), us[t], side="right")), num_actions - 1)
        learner.feed(t, a, ys[t])
        nxt = learner.act(t + 1)
        worst = max(worst, _l1(nxt - prev))
        floor = min(floor, float(nxt.min()))
        prev = nxt
    return worst, floor


def check_exp3(rng, streams, steps):
    rate, floor = _Worst(), _Worst()
    for _ in range(streams):
        A = int(rng.integers(2, 7))
        eta = float(rng.uniform(0.001, 1.0))
        g = float(rng.uniform(0.0, 0.99))
        worst, lo = exp3_stream_audit(rng, A, eta, g, steps)
        rate.add(worst, 2 * eta / A, f"A={A} eta={eta:.4g}")
        floor.add(eta / A, lo, f"A={A} eta={eta:.4g}")
    return [rate.check("exp3_slow_change", "EXP3 one-step change <= 2 eta/A", tol=1e-12),
            floor.check("exp3_floor", "EXP3 probabilities >= eta/A", tol=1e-15)]


# -- environment assumptions and runs -----------------------------------------------------


@dataclass
class Assumptions:
    ergodic_start: bool
    beta: float = math.nan
    tau: float = math.nan
    factor: float = math.nan
    beta_note: str = ""
    mixing_note: str = ""

    @property
    def met(self) -> bool:
        return self.ergodic_start and np.isfinite(self.beta) and np.isfinite(self.tau)


def assess_assumptions(m: TabularMdp, policy_samples: int = 4096, seed: int = 0) -> Assumptions:
    """Estimate the stationary floor and one-step mixing; never raises on violation."""
    try:
        mdpcore.stationary_distribution(mdpcore.induced_kernel(m, mdpcore.uniform_policy(m.num_states,
                                                                                          m.num_actions)))
        ergodic = True
    except mdpcore.NotErgodicError:
        ergodic = False
    out = Assumptions(ergodic)
    try:
        b = mdpcore.estimate_beta(m, policy_samples, seed)
        out.beta = b.beta
        out.beta_note = f"{b.samples} policies, {'exhaustive' if b.exhaustive else 'sampled'}"
    except mdpcore.AssumptionViolation as exc:
        out.beta_note = str(exc).splitlines()[0]
    try:
        mx = mdpcore.estimate_mixing(m, policy_samples, seed)
        out.tau, out.factor = mx.tau, mx.factor
        out.mixing_note = f"{mx.samples} policies, {'exhaustive' if mx.exhaustive else 'sampled'}"
    except mdpcore.AssumptionViolation as exc:
        out.factor = 1.0
        out.mixing_note = str(exc).splitlines()[0]
    return out


def assumption_checks(asm: Assumptions):
    bad = FAIL if not asm.ergodic_start else UNMET
    floor = BoundCheck("stationary_floor", "every policy's stationary mass bounded away from 0",
                       0.0, asm.beta if np.isfinite(asm.beta) else 0.0, 1,
                       PASS if np.isfinite(asm.beta) and asm.beta > 0 else bad, asm.beta_note)
    mix = BoundCheck("one_step_mixing", "every policy contracts in one step", asm.factor, 1.0, 1,
                     PASS if np.isfinite(asm.tau) else bad, asm.mixing_note)
    erg = BoundCheck("ergodic_start", "starting policy has a unique stationary law", 0.0, 0.0, 1,
                     PASS if asm.ergodic_start else FAIL,
                     "" if asm.ergodic_start else "uniform policy is not ergodic")
    return [erg, floor, mix]


def suite_runs(m: TabularMdp, learner: LearnerSpec, T: int, seeds, audit: bool = True):
    """One audited Main run per seed; yields ``(trace, learners, eta)``."""
    H = horizon(m.gamma, T)
    factory, eta = learner.factory(m.num_actions, m.gamma, T, H)
    for seed in seeds:
        locs = []
        tr = run_main(m, T, factory, seed, H=H, audit=audit, learners_out=locs, meta={"eta": eta})
        yield tr, locs, eta


def run_checks(m: TabularMdp, learner: LearnerSpec, asm: Assumptions, settings: VerifySettings):
    seeds = range(settings.seed, settings.seed + settings.run_seeds)
    names = ("decomposition", "split_identity", "observed_surrogate", "tracking", "frozen_value_gap", "q_drift")
    worst = {k: _Worst() for k in names}
    anchors = {}
    routing, replay, decentral, wrapper_rate = _Worst(), _Worst(), _Worst(), _Worst()
    gaps = [[] for _ in range(m.num_states)]
    sq_gaps = [[] for _ in range(m.num_states)]
    un_tilde, span_rhs = [], []
    tau = asm.tau if np.isfinite(asm.tau) else math.nan
    for tr, locs, eta in suite_runs(m, learner, settings.run_T, seeds):
        seed = tr.meta["seed"]
        ta = an.TraceAnalysis(tr, m)
        rep = an.analyze_run(tr, m, tau_hat=tau, probes=settings.probes, seed=seed, analysis=ta)
        for c in rep.bound_checks:
            worst[c.name].add(c.lhs, c.rhs, f"seed {seed}: {c.note}".rstrip(": "))
            anchors[c.name] = c.anchor
        wrappers = [x for x in locs if isinstance(x, DelayWrapper)]
        routing.add(sum(not audit_routing(x) for x in wrappers), 0.0, f"{len(wrappers)} wrappers")
        replay.add(len(audit_feedback(tr, m.gamma)), 0.0, f"seed {seed}")
        if tr.mutations is not None and tr.mutations.size:
            decentral.add(int(tr.mutations.max()), 1.0, f"seed {seed}")
            base_rate = 2 * eta / m.num_actions if eta is not None else 0.0
            wrapper_rate.add(float(tr.base_changes.max()), base_rate, f"seed {seed}")
        if np.isfinite(asm.beta) and asm.beta > 0:
            for s in range(m.num_states):
                try:
                    st = an.sticky_stats(tr.states, s, asm.beta)
                except an.InsufficientVisits:
                    continue
                gaps[s].append(st.mean_gap)
                sq_gaps[s].append(st.mean_sq_gap)
            ut, rhs = an.full_span_check(ta, asm.beta)
            un_tilde.append(ut)
            span_rhs.append(rhs)

    out = []
    for k in names:
        if worst[k].n:
            out.append(worst[k].check(k, anchors[k], tol=1e-9 if k == "split_identity" else 0.0))
        else:
            out.append(BoundCheck(k, "", math.nan, math.nan, 0, UNMET, "not computable for this environment"))
    out.append(routing.check("routing", "each base fed only its own decisions", tol=0.0))
    out.append(replay.check("feedback_replay", "feedback recomputed from the reward window", tol=0.0))
    if decentral.n:
        out.append(decentral.check("decentralization", "at most one learner changes per step", tol=0.0))
        out.append(wrapper_rate.check("wrapper_slow_change", "clock-augmented policy change <= base rate",
                                      tol=1e-12))
    out.extend(_sticky_checks(gaps, sq_gaps, asm.beta))
    if len(un_tilde) >= 2:
        out.append(an.seed_average_check("full_span", "unobserved <= observed/beta + slow-change terms",
                                         un_tilde, span_rhs))
    else:
        out.append(BoundCheck("full_span", "", math.nan, math.nan, 0, UNMET, "stationary floor unavailable"))
    if not asm.met:
        for c in out:
            if c.verdict == FAIL or c.name in ("tracking", "inter_visit_mean", "inter_visit_square", "full_span"):
                c.verdict = UNMET
    return out


def _sticky_checks(gaps, sq_gaps, beta):
    if not (np.isfinite(beta) and beta > 0):
        return [BoundCheck(n, "", math.nan, math.nan, 0, UNMET, "stationary floor unavailable")
                for n in ("inter_visit_mean", "inter_visit_square")]
    out = []
    for name, anchor, vals, bound in (
        ("inter_visit_mean", "mean inter-visit time <= 1/beta", gaps, 1.0 / beta),
        ("inter_visit_square", "mean squared inter-visit time <= 2/beta^3", sq_gaps, 2.0 / beta**3),
    ):
        per_state = [an.seed_average_check(name, anchor, v, [bound] * len(v)) for v in vals if len(v) >= 2]
        if not per_state:
            out.append(BoundCheck(name, anchor, math.nan, math.nan, 0, UNMET, "states visited too rarely"))
            continue
        worst = min(per_state, key=lambda c: c.slack)
        skipped = sum(len(v) < 2 for v in vals)
        worst.note += f"; {len(per_state)} states" + (f", {skipped} too rarely visited" if skipped else "")
        if skipped:
            worst.verdict = UNMET
        out.append(worst)
    return out


RANDOM_CHECKS = {
    "norm_1inf": lambda rng, s: check_norm(rng, s.trials),
    "multi_step_change": lambda rng, s: check_multi_step(rng, s.trials),
    "kernel": lambda rng, s: check_kernel_inequalities(rng, s.trials),
    "schedule": lambda rng, s: check_schedule_products(rng, s.trials),
    "performance_difference": lambda rng, s: check_performance_difference(rng, max(1, s.trials // 5)),
    "horizon_tail": lambda rng, s: check_horizon_tail(rng, s.trials),
    "augmented": lambda rng, s: check_augmented(rng, max(1, s.trials // 20)),
    "exp3": lambda rng, s: check_exp3(rng, s.exp3_streams, s.exp3_steps),
}

# check name -> group that produces it
CHECK_GROUPS = {
    "norm_1inf": "norm_1inf",
    "multi_step_change": "multi_step_change",
    "kernel_perturbation": "kernel",
    "kernel_contraction": "kernel",
    "one_step_error": "kernel",
    "error_propagation": "kernel",
    "repeated_kernel_drift": "schedule",
    "schedule_vs_frozen": "schedule",
    "shifted_schedule": "schedule",
    "performance_difference": "performance_difference",
    "horizon_tail": "horizon_tail",
    "truncated_q": "horizon_tail",
    "augmented_stationary": "augmented",
    "augmented_floor": "augmented",
    "augmented_contraction": "augmented",
    "augmented_contraction_unrestricted": "augmented",
    "exp3_slow_change": "exp3",
    "exp3_floor": "exp3",
    "ergodic_start": "assumptions",
    "stationary_floor": "assumptions",
    "one_step_mixing": "assumptions",
}
RUN_CHECKS = ("decomposition", "split_identity", "observed_surrogate", "tracking", "frozen_value_gap", "q_drift",
              "routing", "feedback_replay", "decentralization", "wrapper_slow_change", "inter_visit_mean",
              "inter_visit_square", "full_span")
CHECK_GROUPS.update({name: "runs" for name in RUN_CHECKS})
CHECK_NAMES = tuple(CHECK_GROUPS)


def verify_suite(m: TabularMdp, learner: LearnerSpec = LearnerSpec(), settings: VerifySettings = None,
                 env_label: str = "") -> SuiteReport:
    """Run every selected check; ``settings.only`` takes check or group names."""
    settings = settings or VerifySettings()
    groups = set(CHECK_GROUPS.values())
    wanted = set(settings.only) if settings.only else set(CHECK_NAMES)
    unknown = wanted - set(CHECK_NAMES) - groups
    if unknown:
        raise ValueError(f"unknown check(s) {sorted(unknown)}; known: {', '.join(CHECK_NAMES)}")
    names = {n for n in CHECK_NAMES if n in wanted or CHECK_GROUPS[n] in wanted}
    active = {CHECK_GROUPS[n] for n in names}
    checks = []
    for k, group in enumerate(RANDOM_CHECKS):
        if group in active:
            rng = np.random.default_rng([settings.seed, k])
            checks.extend(RANDOM_CHECKS[group](rng, settings))
    env = {"label": env_label, "num_states": m.num_states, "num_actions": m.num_actions, "gamma": m.gamma}
    if active & {"assumptions", "runs"}:
        asm = assess_assumptions(m, seed=settings.seed)
        env.update(beta_hat=asm.beta, tau_hat=asm.tau, factor=asm.factor)
        if "assumptions" in active:
            checks.extend(assumption_checks(asm))
        if "runs" in active:
            if asm.ergodic_start:
                checks.extend(run_checks(m, learner, asm, settings))
            else:
                checks.extend(BoundCheck(n, "", math.nan, math.nan, 0, FAIL, "starting policy is not ergodic")
                              for n in RUN_CHECKS)
    checks = [c for c in checks if c.name in names]
    return SuiteReport(checks, env)
