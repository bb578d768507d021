"""Model-based learning loop: explore with uniform random actions and
periodic resets, estimate the kernel from raw counts, replan with the exact
LP pipeline, and track constraint violation / sub-optimality against the true
model.
"""

from __future__ import annotations

import csv
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from omegaplan import lp as lpmod
from omegaplan.evaluation import evaluate_mixture
from omegaplan.graph import classify, mec_decompose
from omegaplan.model import LabeledMDP, RabinAutomaton, build_product
from omegaplan.synthesis import (
    MixturePolicy,
    StationaryPolicy,
    plan_product,
    policy_from_point,
)

ZERO = Fraction(0)
ONE = Fraction(1)


class EmpiricalModel:
    """Raw visit counts and the induced exact-frequency estimate.

    No smoothing: unseen successors get probability zero, unseen state-action
    pairs have no estimate at all (coverage gates replanning).
    """

    def __init__(self, mdp: LabeledMDP):
        self.template = mdp
        self.pair_counts = {}  # (s, a) -> int
        self.counts = {}  # (s, a, s2) -> int

    def record(self, s, a, s2):
        self.pair_counts[(s, a)] = self.pair_counts.get((s, a), 0) + 1
        self.counts[(s, a, s2)] = self.counts.get((s, a, s2), 0) + 1

    def n(self, s, a) -> int:
        return self.pair_counts.get((s, a), 0)

    @property
    def covered(self) -> bool:
        return all(self.n(s, a) > 0
                   for s in self.template.states
                   for a in self.template.enabled(s))

    def to_mdp(self) -> LabeledMDP:
        """Estimate MDP over the covered pairs (requires full coverage so
        every state keeps an enabled action)."""
        kernel = {}
        for (s, a), total in self.pair_counts.items():
            row = [(s2, Fraction(c, total))
                   for (s1, a1, s2), c in sorted(self.counts.items())
                   if s1 == s and a1 == a]
            kernel[(s, a)] = row
        t = self.template
        return LabeledMDP(t.aps, t.states, t.initial, t.actions, kernel,
                          {s: set(t.labels[s]) for s in t.states})


class MDPSimulator:
    """Samples successor states of a known MDP (the environment side of the
    learning loop; the learner only sees the transitions)."""

    def __init__(self, mdp: LabeledMDP):
        self.mdp = mdp
        self._rows = {key: ([s2 for s2, _ in row],
                            self._cumulative(row))
                      for key, row in mdp.kernel.items()}

    @staticmethod
    def _cumulative(row):
        acc = 0.0
        out = []
        for _, p in row:
            acc += float(p)
            out.append(acc)
        out[-1] = 1.0
        return out

    def step(self, s, a, rng) -> str:
        succs, cum = self._rows[(s, a)]
        u = rng.random()
        for s2, c in zip(succs, cum):
            if u < c:
                return s2
        return succs[-1]


def explore(mdp: LabeledMDP, steps: int, reset_period: int, seed,
            model: Optional[EmpiricalModel] = None) -> EmpiricalModel:
    """Uniform-random exploration with resets every reset_period steps."""
    if reset_period < 1:
        raise ValueError("reset_period must be >= 1")
    model = model if model is not None else EmpiricalModel(mdp)
    sim = MDPSimulator(mdp)
    rng = random.Random(seed)
    s = mdp.initial
    for t in range(steps):
        if t > 0 and t % reset_period == 0:
            s = mdp.initial
        a = rng.choice(mdp.enabled(s))
        s2 = sim.step(s, a, rng)
        model.record(s, a, s2)
        s = s2
    return model


def hoeffding_radius(n: int, delta, pairs: int, nstates: int) -> float:
    """Per-row L-infinity confidence radius after n samples of a row, by a
    union bound over all pairs and successors.  Diagnostic only."""
    if n <= 0:
        return 1.0
    return min(1.0, math.sqrt(math.log(2 * pairs * nstates / delta) / (2 * n)))


@dataclass
class ReplanResult:
    status: str  # "optimal", "fallback", "exploring"
    policy: Optional[MixturePolicy] = None


def replan(model: EmpiricalModel, obj: RabinAutomaton, con: RabinAutomaton,
           p: Fraction) -> ReplanResult:
    """Plan on the empirical estimate.  Before full coverage no estimate
    exists and the caller keeps exploring; if the estimate deems the problem
    infeasible, fall back to maximising the constraint probability alone."""
    if not model.covered:
        return ReplanResult(status="exploring")
    est = model.to_mdp()
    product = build_product(est, obj, con)
    res = plan_product(product, p)
    if res.status == "optimal":
        return ReplanResult(status="optimal", policy=res.policy)
    dec = res.decomposition
    lp = lpmod.build_lp(dec, product, ZERO)
    best = lpmod.solve_unconstrained(
        [c for c in lp.constraint], lp.eq_rows, lp.eq_rhs, lp.variables)
    pol = policy_from_point(dec, product, best.assignment)
    return ReplanResult(status="fallback", policy=MixturePolicy(ONE, pol, pol))


def uniform_policy(product) -> StationaryPolicy:
    table = {}
    for v in product.states:
        acts = product.enabled(v)
        share = Fraction(1, len(acts))
        table[v] = {a: share for a in acts}
    return StationaryPolicy(table)


def extend_policy(mix: MixturePolicy, product) -> MixturePolicy:
    """Complete a policy learned on the estimate so that it is defined on
    every state of the true product (uniform over enabled elsewhere)."""
    def fill(pol: StationaryPolicy) -> StationaryPolicy:
        table = dict(pol.table)
        for v in product.states:
            if v not in table or not any(p > ZERO for p in table[v].values()):
                acts = product.enabled(v)
                table[v] = {a: Fraction(1, len(acts)) for a in acts}
            else:
                # drop mass on actions the true product does not enable
                enabled = set(product.enabled(v))
                row = {a: p for a, p in table[v].items()
                       if p > ZERO and a in enabled}
                total = sum(row.values(), ZERO)
                if total == ZERO:
                    acts = product.enabled(v)
                    row = {a: Fraction(1, len(acts)) for a in acts}
                else:
                    row = {a: p / total for a, p in row.items()}
                table[v] = row
        return StationaryPolicy(table)

    return MixturePolicy(mix.lam, fill(mix.policy1), fill(mix.policy2))


@dataclass
class ConvergenceRecord:
    seed: object
    k: int
    eps_constraint: Fraction
    eps_suboptimality: Fraction
    status: str


def default_schedule(max_power: int = 17, min_power: int = 4):
    return [2 ** i for i in range(min_power, max_power + 1)]


def run_experiment(mdp: LabeledMDP, obj: RabinAutomaton, con: RabinAutomaton,
                   p: Fraction, schedule, seeds, reset_period: int = 10,
                   reference_value: Optional[Fraction] = None) -> list:
    """Replan at each sample count in the schedule and score the learned
    policy on the true model.  eps_constraint is the clamped constraint
    violation max(0, p - P[constraint]); eps_suboptimality is the absolute
    gap to the true optimum (computed here if not supplied).  The gap is
    reported as a magnitude because a learned policy can overshoot the
    objective while violating the constraint, and signed values would let the
    two errors cancel in summaries.
    """
    p = Fraction(p)
    product = build_product(mdp, obj, con)
    if reference_value is None:
        ref = plan_product(product, p)
        if ref.status != "optimal":
            raise ValueError("true problem is infeasible; no reference optimum")
        reference_value = ref.value
    explore_mix = MixturePolicy(ONE, uniform_policy(product), uniform_policy(product))

    schedule = sorted(set(int(k) for k in schedule))
    records = []
    for seed in seeds:
        model = EmpiricalModel(mdp)
        sim = MDPSimulator(mdp)
        rng = random.Random(seed)
        s = mdp.initial
        done = 0
        for k in schedule:
            for t in range(done, k):
                if t > 0 and t % reset_period == 0:
                    s = mdp.initial
                a = rng.choice(mdp.enabled(s))
                s2 = sim.step(s, a, rng)
                model.record(s, a, s2)
                s = s2
            done = k
            result = replan(model, obj, con, p)
            if result.policy is None:
                mix = explore_mix
            else:
                mix = extend_policy(result.policy, product)
            report = evaluate_mixture(product, mix)
            eps_c = max(ZERO, p - report.constraint)
            eps_o = abs(reference_value - report.objective)
            records.append(ConvergenceRecord(seed=seed, k=k,
                                             eps_constraint=eps_c,
                                             eps_suboptimality=eps_o,
                                             status=result.status))
    return records


def write_curve_csv(records, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["seed", "k", "eps_constraint", "eps_suboptimality", "status"])
        for r in records:
            w.writerow([r.seed, r.k, float(r.eps_constraint),
                        float(r.eps_suboptimality), r.status])


def median(values):
    vs = sorted(values)
    n = len(vs)
    if n == 0:
        raise ValueError("median of empty sequence")
    mid = n // 2
    if n % 2:
        return vs[mid]
    return (vs[mid - 1] + vs[mid]) / 2
