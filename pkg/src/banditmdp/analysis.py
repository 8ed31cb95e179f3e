"""Regret accounting and bound checks over recorded runs, using exact oracles."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import mdp as mdpcore
from .mdp import TabularMdp
from .runner import RunTrace, horizon, measured_change_rate

PASS, FAIL, UNMET, WARN = "pass", "fail", "assumptions_unmet", "warn"


@dataclass
class BoundCheck:
    """One inequality ``lhs <= rhs``; ``slack = rhs - lhs``."""

    name: str
    anchor: str
    lhs: float
    rhs: float
    trials: int = 1
    verdict: str = ""
    note: str = ""

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    def judge(self, tol: float = 0.0) -> "BoundCheck":
        if not self.verdict:
            self.verdict = PASS if self.slack >= -tol else FAIL
        return self


@dataclass
class RegretReport:
    global_series: np.ndarray
    local: np.ndarray
    fs: float
    ob: float
    un: float
    ob_tilde: float
    un_tilde: float
    beta_hat: float = math.nan
    tau_hat: float = math.nan
    c_hat: float = math.nan
    bound_checks: list = field(default_factory=list)

    @property
    def global_total(self) -> float:
        return float(self.global_series.sum())


class TraceAnalysis:
    """Exact per-step quantities for a trace with every-step policy snapshots.

    Holds ``V_t``, ``Q_t``, ``mu_t`` and the plug-in ``nu_t`` for all ``t`` plus
    the optimal policy, computed once and shared by every check.
    """

    def __init__(self, trace: RunTrace, mdp: TabularMdp, tol: float = 1e-10, nu1=None):
        if trace.policies is None or trace.snapshot_every != 1:
            raise ValueError("analysis needs a policy snapshot at every step")
        self.trace, self.mdp, self.tol = trace, mdp, tol
        self.policies = trace.policies
        self.pi_star, self.star = mdpcore.optimal_policy(mdp, tol)
        values = mdpcore.evaluate_policies(mdp, self.policies)
        self.v, self.q = values.v, values.q
        # advantage of pi* over pi_t under Q_t at every state: <pi*_s - pi_{t,s}, Q_{t,s}>
        self.adv = np.einsum("tsa,tsa->ts", self.pi_star[None] - self.policies, self.q)
        kernels = mdpcore.induced_kernel(mdp, self.policies)
        self.kernels = kernels
        self.mu = mdpcore.stationary_distributions(kernels)
        self.nonergodic = np.isnan(self.mu).any(axis=1)
        if nu1 is None:
            nu1 = np.zeros(mdp.num_states)
            nu1[int(trace.states[0])] = 1.0
        self.nu = mdpcore.rollforward(nu1, self.policies, mdp, trace.T)
        self.c_hat, self.change_series = measured_change_rate(trace)

    @property
    def T(self) -> int:
        return self.trace.T


def global_regret(an: TraceAnalysis):
    """Per-step ``V*(s_t) - V_t(s_t)`` and its total."""
    t = np.arange(an.T)
    s = an.trace.states
    series = an.star.v[s] - an.v[t, s]
    return series, math.fsum(series)


def local_regret(an: TraceAnalysis, state=None):
    """Local regret with oracle feedback, ``sum_t <pi*_s - pi_{t,s}, Q_{t,s}>``; all states when ``state`` is None."""
    per_state = np.array([math.fsum(an.adv[:, s]) for s in range(an.mdp.num_states)])
    return per_state if state is None else float(per_state[state])


def split_regret(an: TraceAnalysis) -> dict:
    """Full-span, observed (``nu_t``-weighted) and unobserved regret, plus ``mu_t``-weighted surrogates."""
    fs = math.fsum(an.adv.ravel())
    ob = math.fsum((an.nu * an.adv).ravel())
    ob_t = math.fsum((an.mu * an.adv).ravel())
    un_t = math.fsum(((1.0 - an.mu) * an.adv).ravel())
    return {"fs": fs, "ob": ob, "un": fs - ob, "ob_tilde": ob_t, "un_tilde": un_t,
            "nonergodic_steps": int(an.nonergodic.sum())}


def ubar_exact(mdp: TabularMdp, schedule, s: int, a: int) -> float:
    """Expected truncated return from ``(s, a)`` when step ``k`` follows ``schedule[k]``.

    ``schedule`` holds ``pi_t, ..., pi_{t+H}``; the first action is fixed to ``a``.
    """
    pis = np.asarray(schedule, dtype=float)
    if pis.ndim != 3 or pis.shape[1:] != (mdp.num_states, mdp.num_actions):
        raise ValueError("schedule must have shape (H + 1, S, A)")
    total = float(mdp.mean_rewards[s, a])
    d = mdp.transitions[s, a].copy()
    g = 1.0
    for k in range(1, len(pis)):
        g *= mdp.gamma
        total += g * float(d @ np.einsum("xa,xa->x", pis[k], mdp.mean_rewards))
        d = d @ mdpcore.induced_kernel(mdp, pis[k])
    return total


def frozen_gap_rhs(S, A, H, gamma, c_hat, T):
    return H * (S + H * A) / (1.0 - gamma) * c_hat + 1.0 / math.sqrt(T)


def drift_rhs(S, A, H, gamma, c_hat, n, T):
    return (S + H * A) * n * c_hat / (1.0 - gamma) + 2.0 / math.sqrt(T)


def q_drift(mdp: TabularMdp, pi_t, pi_tn, n: int, c_hat: float, T: int, H=None):
    """``max |Q_{t+n} - Q_t|`` and its bound; ``ok`` is False when the rate hypothesis fails."""
    if H is None:
        H = horizon(mdp.gamma, T)
    ok = mdpcore.norm_1inf(np.asarray(pi_tn) - np.asarray(pi_t)) <= n * c_hat + 1e-12
    vals = mdpcore.evaluate_policies(mdp, np.stack([pi_t, pi_tn]))
    lhs = float(np.max(np.abs(vals.q[1] - vals.q[0])))
    rhs = drift_rhs(mdp.num_states, mdp.num_actions, H, mdp.gamma, c_hat, n, T)
    return lhs, rhs, ok


def tracking_bound(t, tau: float, c_hat: float):
    """``tau (tau + 1) c + 2 exp(-(t - 1) / tau)`` for 1-based steps ``t``."""
    t = np.asarray(t, dtype=float)
    return tau * (tau + 1.0) * c_hat + 2.0 * np.exp(-(t - 1.0) / tau)


def nu_mu_tracking(an: TraceAnalysis, tau_hat: float, c_hat=None):
    """Per-step ``||nu_t - mu_t||_1`` and the tracking bound with measured rate and mixing time."""
    if an.nonergodic.any():
        raise mdpcore.NotErgodicError(f"{int(an.nonergodic.sum())} snapshots are not ergodic")
    c = an.c_hat if c_hat is None else c_hat
    gaps = np.abs(an.nu - an.mu).sum(axis=1)
    return gaps, tracking_bound(np.arange(1, an.T + 1), tau_hat, c)


class InsufficientVisits(ValueError):
    pass


@dataclass
class StickyStats:
    state: int
    visits: int
    mean_gap: float
    mean_sq_gap: float
    se_gap: float
    se_sq_gap: float
    gap_bound: float
    sq_bound: float


def sticky_stats(states, state: int, beta_hat: float, min_visits: int = 30) -> StickyStats:
    """Inter-visit time moments of ``state`` against ``1/beta`` and ``2/beta**3``."""
    visits = np.flatnonzero(np.asarray(states) == state)
    if visits.size < min_visits:
        raise InsufficientVisits(f"state {state} visited {visits.size} times, need {min_visits}")
    gaps = np.diff(visits).astype(float)
    sq = gaps**2
    n = gaps.size
    return StickyStats(
        state, int(visits.size), float(gaps.mean()), float(sq.mean()),
        float(gaps.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0,
        float(sq.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0,
        1.0 / beta_hat, 2.0 / beta_hat**3,
    )


def full_span_rhs(ob_tilde, beta, S, A, H, gamma, c_hat, T):
    return ob_tilde / beta + 2.0 * (S + H * A) * c_hat * T / (beta**3 * (1.0 - gamma)) + 4.0 * S * math.sqrt(T)


def full_span_check(an: TraceAnalysis, beta_hat: float):
    """``(un_tilde, bound)`` for one run; the inequality is meant for seed averages."""
    sp = split_regret(an)
    H = an.trace.meta["H"]
    rhs = full_span_rhs(sp["ob_tilde"], beta_hat, an.mdp.num_states, an.mdp.num_actions, H, an.mdp.gamma,
                        an.c_hat, an.T)
    return sp["un_tilde"], rhs


def probe_frozen_gap(an: TraceAnalysis, rng, n_probes: int = 200):
    """Exact ``|Ubar_t(s,a) - Q_t(s,a)|`` against its bound at random ``(t, s, a)``."""
    H = an.trace.meta["H"]
    S, A = an.mdp.num_states, an.mdp.num_actions
    rhs = frozen_gap_rhs(S, A, H, an.mdp.gamma, an.c_hat, an.T)
    out = []
    last = an.T - H
    if last < 1:
        return out
    for _ in range(n_probes):
        t = int(rng.integers(1, last + 1))
        s, a = int(rng.integers(S)), int(rng.integers(A))
        ub = ubar_exact(an.mdp, an.policies[t - 1 : t + H], s, a)
        out.append((t, s, a, abs(ub - an.q[t - 1, s, a]), rhs))
    return out


def probe_drift(an: TraceAnalysis, rng, n_probes: int = 200, max_n=None):
    """Exact ``|Q_{t+n}(s,a) - Q_t(s,a)|`` against its bound at random ``(t, s, a, n)``."""
    H = an.trace.meta["H"]
    S, A = an.mdp.num_states, an.mdp.num_actions
    max_n = max_n or max(1, 4 * (H + 1))
    out = []
    for _ in range(n_probes):
        t = int(rng.integers(1, an.T + 1))
        n = int(rng.integers(0, min(max_n, an.T - t) + 1))
        s, a = int(rng.integers(S)), int(rng.integers(A))
        lhs = abs(an.q[t - 1 + n, s, a] - an.q[t - 1, s, a])
        out.append((t, s, a, n, lhs, drift_rhs(S, A, H, an.mdp.gamma, an.c_hat, n, an.T)))
    return out


def analyze_run(trace: RunTrace, mdp: TabularMdp, *, beta_hat=math.nan, tau_hat=math.nan, probes: int = 200,
                seed: int = 0, tol: float = 1e-10, assumptions_met: bool = True, analysis=None) -> RegretReport:
    """Regret report with per-run bound checks; pass ``analysis`` to reuse precomputed oracles."""
    an = analysis if analysis is not None else TraceAnalysis(trace, mdp, tol)
    series, total = global_regret(an)
    local = local_regret(an)
    sp = split_regret(an)
    gamma = mdp.gamma
    checks = []
    unmet = "" if assumptions_met else UNMET

    checks.append(BoundCheck("decomposition", "discounted global regret <= sum of local regrets", (1 - gamma) * total, math.fsum(local) + an.T * 1e-6,
                             an.T, unmet).judge())
    checks.append(BoundCheck("split_identity", "full span = observed + unobserved", abs(sp["fs"] - (sp["ob"] + sp["un"])), 1e-9).judge())
    if not an.nonergodic.any():
        holder = math.fsum(np.abs(an.nu - an.mu).sum(axis=1)) / (1 - gamma)
        checks.append(BoundCheck("observed_surrogate", "observed vs stationary-weighted regret", abs(sp["ob"] - sp["ob_tilde"]), holder,
                                 an.T).judge(1e-9))
    if np.isfinite(tau_hat) and not an.nonergodic.any():
        gaps, bounds = nu_mu_tracking(an, tau_hat)
        worst = int(np.argmin(bounds - gaps))
        checks.append(BoundCheck("tracking", "state distribution tracks stationary distribution", float(gaps[worst]), float(bounds[worst]), an.T,
                                 unmet, note=f"worst step {worst + 1}").judge())
    rng = np.random.default_rng([seed, 3])
    p3 = probe_frozen_gap(an, rng, probes)
    if p3:
        worst = min(p3, key=lambda x: x[4] - x[3])
        checks.append(BoundCheck("frozen_value_gap", "frozen-schedule return vs Q", worst[3], worst[4], len(p3), unmet,
                                 note=f"worst probe t={worst[0]} s={worst[1]} a={worst[2]}").judge())
    p4 = probe_drift(an, rng, probes)
    if p4:
        worst = min(p4, key=lambda x: x[5] - x[4])
        checks.append(BoundCheck("q_drift", "Q drift under slow policy change", worst[4], worst[5], len(p4), unmet,
                                 note=f"worst probe t={worst[0]} n={worst[3]}").judge())
    return RegretReport(series, local, sp["fs"], sp["ob"], sp["un"], sp["ob_tilde"], sp["un_tilde"],
                        beta_hat, tau_hat, an.c_hat, checks)


def seed_average_check(name, anchor, lhs_values, rhs_values, verdict=""):
    """Expectation-level inequality on seed averages, passing when ``mean(lhs) <= mean(rhs) + 2 SE``."""
    lhs = np.asarray(lhs_values, dtype=float)
    rhs = np.asarray(rhs_values, dtype=float)
    diff = rhs - lhs
    se = float(diff.std(ddof=1) / math.sqrt(diff.size)) if diff.size > 1 else 0.0
    chk = BoundCheck(name, anchor, float(lhs.mean()), float(rhs.mean()), int(lhs.size), verdict,
                     note=f"2SE={2 * se:.4g}")
    return chk.judge(2 * se)


def run_series(an: TraceAnalysis) -> dict:
    """Per-step columns for reporting: cumulative global and local regret, policy change, tracking gap.

    ``change_rate[t]`` is ``||pi_t - pi_{t-1}||_{1,inf}`` (0 at the first step).
    """
    series, _ = global_regret(an)
    change = np.concatenate([[0.0], an.change_series])
    return {
        "cumulative_global_regret": np.cumsum(series),
        "cumulative_local_regret": np.cumsum(an.adv, axis=0),
        "change_rate": change,
        "nu_mu_gap": np.abs(an.nu - an.mu).sum(axis=1),
    }
