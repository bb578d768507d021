"""Planning and learning for MDPs with omega-regular objectives and constraints."""

from omegaplan.model import LabeledMDP, RabinAutomaton, ProductMDP, build_product
from omegaplan.graph import EndComponent, MECDecomposition, mec_decompose, classify
from omegaplan.lp import build_lp, solve, decompose
from omegaplan.synthesis import StationaryPolicy, MixturePolicy, plan, plan_product
from omegaplan.evaluation import evaluate, monte_carlo
from omegaplan.learn import run_experiment, explore, EmpiricalModel
from omegaplan.rewardmachine import (RewardMachineTranslation, RMState,
                                     simulate_limit_average,
                                     independent_translation_counterexample)
from omegaplan.lagrange import lambda_bound, solve_weighted, check_feasibility_gap
from omegaplan.fixtures import fixture_names, get_fixture

__all__ = [
    "LabeledMDP",
    "RabinAutomaton",
    "ProductMDP",
    "build_product",
    "EndComponent",
    "MECDecomposition",
    "mec_decompose",
    "classify",
    "build_lp",
    "solve",
    "decompose",
    "StationaryPolicy",
    "MixturePolicy",
    "plan",
    "plan_product",
    "evaluate",
    "monte_carlo",
    "run_experiment",
    "explore",
    "EmpiricalModel",
    "RewardMachineTranslation",
    "RMState",
    "simulate_limit_average",
    "independent_translation_counterexample",
    "lambda_bound",
    "solve_weighted",
    "check_feasibility_gap",
    "fixture_names",
    "get_fixture",
]
