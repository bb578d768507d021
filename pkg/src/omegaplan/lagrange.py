"""Lagrangian relaxation for almost-sure constraints.

Instead of enforcing the constraint as an inequality, fold it into the
objective with a multiplier: maximise P[objective] + lambda * P[constraint].
The weighted problem is an unconstrained planning problem over the same
occupancy variables and flow rows, so it reuses the exact LP machinery, and
its basic optima have at most one positive variable per end component — a
single stationary policy, no mixing needed.

Any weighted optimum satisfies P[constraint] >= 1 - 1/lambda whenever the
almost-sure problem is feasible, so a large enough multiplier makes the
violation arbitrarily small; with knowledge of the smallest positive
transition probability, lambda_bound gives a concrete sufficient multiplier.
"""

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from . import lp as lpmod
from .evaluation import evaluate_stationary
from .graph import classify, mec_decompose
from .model import ProductMDP, format_fraction
from .synthesis import StationaryPolicy, policy_from_point

ZERO = Fraction(0)
ONE = Fraction(1)


class LagrangeError(ValueError):
    pass


def lambda_bound(p_min: Fraction, nstates: int, nobj: int, ncon: int = 1) -> Fraction:
    """Sufficient multiplier from model knowledge.

    With p_min a positive lower bound on all positive transition
    probabilities and the exponent the product-state budget
    nstates * nobj * ncon, the bound is 2 / (1 - p_min^exponent).  The
    exponent multiplies in both automaton sizes, which is the conservative
    reading for a product with two automata.
    """
    p_min = Fraction(p_min)
    if not ZERO < p_min < ONE:
        raise LagrangeError("p_min must lie strictly between 0 and 1")
    if nstates < 1 or nobj < 1 or ncon < 1:
        raise LagrangeError("state and automaton sizes must be at least 1")
    exponent = nstates * nobj * ncon
    return 2 / (ONE - p_min ** exponent)


@dataclass
class WeightedResult:
    """Outcome of one weighted (unconstrained) planning run."""

    status: str
    lam: Fraction
    weighted_value: Optional[Fraction] = None
    assignment: Optional[dict] = None
    policy: Optional[StationaryPolicy] = None
    objective_prob: Optional[Fraction] = None
    constraint_prob: Optional[Fraction] = None

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "lambda": format_fraction(self.lam),
            "weighted_value": format_fraction(self.weighted_value)
            if self.weighted_value is not None else None,
            "objective_prob": format_fraction(self.objective_prob)
            if self.objective_prob is not None else None,
            "constraint_prob": format_fraction(self.constraint_prob)
            if self.constraint_prob is not None else None,
        }


def solve_weighted(product: ProductMDP, dec, lam: Fraction) -> WeightedResult:
    """Maximise P[objective] + lam * P[constraint] exactly.

    Reuses the constrained LP's variables and flow rows with the inequality
    dropped; the per-variable weight is its objective coefficient plus lam
    times its constraint coefficient, so jointly accepting mass earns 1+lam.
    The basic optimum has at most one positive variable per end component and
    synthesises to a single stationary policy, evaluated exactly.
    """
    lam = Fraction(lam)
    if lam < ZERO:
        raise LagrangeError("multiplier must be nonnegative")
    base = lpmod.build_lp(dec, product, ZERO)
    weighted = [o + lam * c for o, c in zip(base.objective, base.constraint)]
    sol = lpmod.solve_unconstrained(weighted, base.eq_rows, base.eq_rhs,
                                    base.variables)
    if sol.status != lpmod.OPTIMAL:
        return WeightedResult(status=sol.status, lam=lam)
    policy = policy_from_point(dec, product, sol.assignment)
    report = evaluate_stationary(product, policy)
    return WeightedResult(
        status=lpmod.OPTIMAL,
        lam=lam,
        weighted_value=sol.value,
        assignment=sol.assignment,
        policy=policy,
        objective_prob=report.objective,
        constraint_prob=report.constraint,
    )


def solve_weighted_product(product: ProductMDP, lam: Fraction) -> WeightedResult:
    dec = classify(mec_decompose(product), product)
    return solve_weighted(product, dec, lam)


@dataclass
class FeasibilityGap:
    """How a policy fares against the 1 - 1/lambda guarantee."""

    lam: Fraction
    bound: Fraction
    constraint_prob: Fraction
    slack: Fraction
    holds: bool

    def to_dict(self) -> dict:
        return {
            "lambda": format_fraction(self.lam),
            "bound": format_fraction(self.bound),
            "constraint_prob": format_fraction(self.constraint_prob),
            "slack": format_fraction(self.slack),
            "holds": self.holds,
        }


def check_feasibility_gap(policy: StationaryPolicy, product: ProductMDP,
                          lam: Fraction) -> FeasibilityGap:
    """Exact check of P[constraint] >= 1 - 1/lambda for a given policy."""
    lam = Fraction(lam)
    # lam = 0 would make 1 - 1/lam undefined; any probability qualifies
    bound = ONE - ONE / lam if lam > ZERO else ZERO - ONE
    report = evaluate_stationary(product, policy)
    slack = report.constraint - bound
    return FeasibilityGap(lam=lam, bound=bound,
                          constraint_prob=report.constraint,
                          slack=slack, holds=slack >= ZERO)
