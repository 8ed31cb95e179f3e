import math

import numpy as np
import pytest

from banditmdp import checks as C
from banditmdp import envs
from banditmdp import mdp as M
from banditmdp.analysis import FAIL, PASS, UNMET

SMALL = dict(trials=40, run_T=300, run_seeds=3, probes=20, exp3_streams=3, exp3_steps=300)


def small(**kw):
    return C.VerifySettings(**{**SMALL, **kw})


class TestRandomGroups:
    @pytest.mark.parametrize("group", list(C.RANDOM_CHECKS))
    def test_group_passes(self, group):
        rep = C.verify_suite(envs.two_state(), settings=small(only=(group,)))
        assert rep.checks
        for c in rep.checks:
            if c.name == "augmented_contraction_unrestricted":
                assert c.verdict in (PASS, C.REFUTED)
            else:
                assert c.verdict == PASS, c

    def test_only_single_check(self):
        rep = C.verify_suite(envs.two_state(), settings=small(only=("truncated_q",)))
        assert [c.name for c in rep.checks] == ["truncated_q"]

    def test_unknown_name(self):
        with pytest.raises(ValueError, match="no_such_check"):
            C.verify_suite(envs.two_state(), settings=small(only=("no_such_check",)))

    def test_same_seed_same_report(self):
        a = C.verify_suite(envs.two_state(), settings=small(only=("kernel",)))
        b = C.verify_suite(envs.two_state(), settings=small(only=("kernel",)))
        assert a.to_text() == b.to_text()


class TestAugmentedChain:
    def test_clock_is_block_cyclic(self):
        # the augmented kernel only moves clock h to h+1, so unaligned pairs never meet
        m = envs.random_ergodic(3, 2, 0.5, 0.8, seed=0)
        pi = M.uniform_policy(3, 2)
        stats = C.augmented_stats(m, pi, 2)
        assert stats["aug_factor"] == pytest.approx(1.0)
        assert stats["aligned_factor"] == pytest.approx(stats["base_factor"], abs=1e-12)
        assert stats["stationary_gap"] < 1e-10
        assert stats["floor"] >= stats["floor_bound"] - 1e-12

    def test_horizon_zero_is_base(self):
        m = envs.random_ergodic(3, 2, 0.5, 0.8, seed=1)
        stats = C.augmented_stats(m, M.uniform_policy(3, 2), 0)
        assert stats["aug_factor"] == pytest.approx(stats["base_factor"], abs=1e-12)


class TestPerformanceDifference:
    def test_identity_holds(self):
        m = envs.random_ergodic(4, 3, 0.2, 0.9, seed=7)
        rng = np.random.default_rng(0)
        gap = C.performance_difference_gap(m, C.random_policy(rng, 4, 3), C.random_policy(rng, 4, 3), 2)
        assert abs(gap) < 1e-9


class TestAssumptions:
    def test_ergodic_env(self):
        asm = C.assess_assumptions(envs.random_ergodic(3, 2, 0.4, 0.8, seed=0), policy_samples=64)
        assert asm.met
        assert all(c.verdict == PASS for c in C.assumption_checks(asm))

    def test_hard_chain_unmet_not_failed(self):
        asm = C.assess_assumptions(envs.hard_chain(6), policy_samples=256)
        assert asm.ergodic_start and not asm.met
        verdicts = {c.name: c.verdict for c in C.assumption_checks(asm)}
        assert verdicts["ergodic_start"] == PASS
        assert UNMET in verdicts.values() and FAIL not in verdicts.values()

    def test_identity_kernel_fails(self):
        m = M.TabularMdp(np.eye(3)[:, None, :].repeat(2, axis=1), np.zeros((3, 2)), 0.9)
        asm = C.assess_assumptions(m, policy_samples=16)
        assert not asm.ergodic_start
        assert all(c.verdict == FAIL for c in C.assumption_checks(asm))


class TestRunGroup:
    def test_ergodic_runs_pass(self):
        rep = C.verify_suite(envs.random_ergodic(3, 2, 0.4, 0.8, seed=0), settings=small(only=("runs",)))
        assert {c.name for c in rep.checks} == set(C.RUN_CHECKS)
        bad = [c for c in rep.checks if c.verdict not in (PASS, UNMET)]
        assert not bad, bad

    def test_hard_chain_exits_clean(self):
        rep = C.verify_suite(envs.hard_chain(6), settings=small(only=("runs", "assumptions")))
        assert rep.ok
        assert rep.warnings

    def test_nonergodic_runs_fail(self):
        m = M.TabularMdp(np.eye(2)[:, None, :], np.array([[1.0], [0.0]]), 0.5)
        rep = C.verify_suite(m, settings=small(only=("runs",)))
        assert not rep.ok
        assert all(c.verdict == FAIL for c in rep.checks)


class TestReport:
    def test_text_and_table(self):
        rep = C.verify_suite(envs.two_state(), settings=small(only=("norm_1inf", "exp3_floor")))
        lines = rep.to_text().splitlines()
        assert lines[0].split("\t") == ["name", "anchor", "lhs", "rhs", "slack", "trials", "verdict", "note"]
        assert len(lines) == 3
        assert rep.summary_table().strip().endswith("2 checks, 0 failed, 0 warnings")

    def test_worst_keeps_min_slack(self):
        w = C._Worst()
        w.add(1.0, 3.0, "a")
        w.add(2.0, 2.5, "b")
        w.add(0.0, 9.0, "c")
        chk = w.check("x", "", tol=0.0)
        assert (chk.lhs, chk.rhs, chk.trials) == (2.0, 2.5, 3) and "b" in chk.note
        assert math.isclose(chk.slack, 0.5)
