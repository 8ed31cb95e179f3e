"""Tabular MDP online learning via per-state adversarial bandits, with exact oracles."""

from .mdp import TabularMdp, NotErgodicError, AssumptionViolation
from .runner import RunTrace, run_main, horizon

__all__ = ["TabularMdp", "NotErgodicError", "AssumptionViolation", "RunTrace", "run_main", "horizon"]
__version__ = "0.1.0"
