"""Exact and Monte Carlo evaluation of acceptance probabilities.

Stationary policies induce a finite Markov chain on the product; almost every
run settles into exactly one bottom SCC, so acceptance probability equals the
exact absorption mass of the accepting bottom SCCs.  The Monte Carlo path is a
deliberately heuristic cross-check, not a verifier.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from fractions import Fraction

from omegaplan.graph import strongly_connected_components
from omegaplan.model import ProductMDP, format_fraction
from omegaplan.synthesis import MixturePolicy, StationaryPolicy

ZERO = Fraction(0)
ONE = Fraction(1)


class EvaluationError(ValueError):
    pass


@dataclass
class EvaluationReport:
    objective: Fraction
    constraint: Fraction
    bsccs: list  # dicts: states, accepting_objective, accepting_constraint, probability

    def to_dict(self) -> dict:
        return {
            "objective": format_fraction(self.objective),
            "constraint": format_fraction(self.constraint),
            "bsccs": [
                {
                    "states": sorted(b["states"]),
                    "accepting_objective": b["accepting_objective"],
                    "accepting_constraint": b["accepting_constraint"],
                    "probability": format_fraction(b["probability"]),
                }
                for b in self.bsccs
            ],
        }


def _chain(product: ProductMDP, policy: StationaryPolicy) -> dict:
    chain = {}
    for v in product.states:
        try:
            row = policy.act(v)
        except KeyError as exc:
            raise EvaluationError(f"policy undefined at {v!r}") from exc
        out = {}
        for a, pa in row.items():
            if pa == ZERO:
                continue
            for v2, p in product.row(v, a):
                out[v2] = out.get(v2, ZERO) + pa * p
        chain[v] = out
    return chain


def _accepting(states: frozenset, pairs) -> bool:
    return any(states & inf and not states & fin for inf, fin in pairs)


def evaluate_stationary(product: ProductMDP, policy: StationaryPolicy) -> EvaluationReport:
    """Exact acceptance probabilities of a stationary policy: classify bottom
    SCCs of the induced chain and solve for absorption probabilities."""
    chain = _chain(product, policy)
    order = product.order
    sccs = strongly_connected_components(
        sorted(chain, key=order.__getitem__),
        lambda v: sorted(chain[v], key=order.__getitem__),
    )
    comp_of = {}
    for i, comp in enumerate(sccs):
        for v in comp:
            comp_of[v] = i
    bottom = []
    for i, comp in enumerate(sccs):
        if all(comp_of[v2] == i for v in comp for v2 in chain[v]):
            bottom.append(frozenset(comp))

    absorbed = _absorption(product, chain, bottom)
    reports = []
    objective = ZERO
    constraint = ZERO
    for states, prob in zip(bottom, absorbed):
        acc_a = _accepting(states, product.pairs_obj)
        acc_b = _accepting(states, product.pairs_con)
        if acc_a:
            objective += prob
        if acc_b:
            constraint += prob
        reports.append({
            "states": states,
            "accepting_objective": acc_a,
            "accepting_constraint": acc_b,
            "probability": prob,
        })
    return EvaluationReport(objective=objective, constraint=constraint, bsccs=reports)


def _absorption(product, chain, bottom):
    """Absorption probability of each bottom SCC from the initial state, via
    exact Gaussian elimination on the transient states."""
    in_bottom = {}
    for i, states in enumerate(bottom):
        for v in states:
            in_bottom[v] = i
    transient = [v for v in product.states if v not in in_bottom]
    init = product.initial
    if not transient:
        return [ONE if init in states else ZERO for states in bottom]

    idx = {v: j for j, v in enumerate(transient)}
    t = len(transient)
    k = len(bottom)
    # [I - P_tt | inflow per bottom class], solved for all classes at once
    aug = []
    for v in transient:
        row = [ZERO] * (t + k)
        row[idx[v]] = ONE
        for v2, p in chain[v].items():
            if v2 in idx:
                row[idx[v2]] -= p
            else:
                row[t + in_bottom[v2]] += p
        aug.append(row)
    for col in range(t):
        piv = next(i for i in range(col, t) if aug[i][col] != ZERO)
        aug[col], aug[piv] = aug[piv], aug[col]
        pv = aug[col][col]
        aug[col] = [x / pv for x in aug[col]]
        for i in range(t):
            if i != col and aug[i][col] != ZERO:
                f = aug[i][col]
                aug[i] = [x - f * y for x, y in zip(aug[i], aug[col])]

    if init in in_bottom:
        return [ONE if init in states else ZERO for states in bottom]
    row = aug[idx[init]]
    return [row[t + i] for i in range(k)]


def evaluate_mixture(product: ProductMDP, mix: MixturePolicy) -> EvaluationReport:
    r1 = evaluate_stationary(product, mix.policy1)
    r2 = evaluate_stationary(product, mix.policy2)
    lam = mix.lam
    return EvaluationReport(
        objective=lam * r1.objective + (ONE - lam) * r2.objective,
        constraint=lam * r1.constraint + (ONE - lam) * r2.constraint,
        bsccs=r1.bsccs + r2.bsccs,
    )


def evaluate(product: ProductMDP, policy) -> EvaluationReport:
    if isinstance(policy, MixturePolicy):
        return evaluate_mixture(product, policy)
    return evaluate_stationary(product, policy)


@dataclass
class MonteCarloReport:
    objective_estimate: float
    objective_halfwidth: float
    constraint_estimate: float
    constraint_halfwidth: float
    episodes: int
    note: str = "heuristic tail-window end-component test"


def _sample(rng, items):
    """items: iterable of (value, Fraction probability)."""
    u = rng.random()
    acc = 0.0
    last = None
    for v, p in items:
        acc += float(p)
        last = v
        if u < acc:
            return v
    return last


def monte_carlo(product: ProductMDP, policy, episodes, horizon, seed) -> MonteCarloReport:
    """Simulate episodes; an episode counts as accepting if the states visited
    in the second half of the horizon form an end component (under the actions
    actually taken) whose lifted Rabin classification accepts.  Heuristic: the
    window may not have settled.  Per-episode RNG streams keep the result
    independent of scheduling."""
    if horizon < 2:
        raise EvaluationError("horizon must be >= 2")
    hits_a = 0
    hits_b = 0
    for ep in range(episodes):
        rng = random.Random(f"{seed}:{ep}")
        if isinstance(policy, MixturePolicy):
            pol = policy.policy1 if rng.random() < float(policy.lam) else policy.policy2
        else:
            pol = policy
        v = product.initial
        window_states = set()
        window_acts = {}
        for step in range(horizon):
            a = _sample(rng, sorted(pol.act(v).items()))
            if step >= horizon // 2:
                window_states.add(v)
                window_acts.setdefault(v, set()).add(a)
            v = _sample(rng, product.row(v, a))
        if not _window_is_ec(product, window_states, window_acts):
            continue
        w = frozenset(window_states)
        if _accepting(w, product.pairs_obj):
            hits_a += 1
        if _accepting(w, product.pairs_con):
            hits_b += 1

    def interval(hits):
        est = hits / episodes
        return est, 1.96 * math.sqrt(est * (1.0 - est) / episodes)

    ea, ha = interval(hits_a)
    eb, hb = interval(hits_b)
    return MonteCarloReport(objective_estimate=ea, objective_halfwidth=ha,
                            constraint_estimate=eb, constraint_halfwidth=hb,
                            episodes=episodes)


def _window_is_ec(product, states, acts) -> bool:
    if not states:
        return False
    for v in states:
        for a in acts.get(v, ()):
            if any(v2 not in states for v2 in product.successors(v, a)):
                return False
    comps = strongly_connected_components(
        sorted(states, key=product.order.__getitem__),
        lambda v: sorted(
            {v2 for a in acts.get(v, ()) for v2 in product.successors(v, a)},
            key=product.order.__getitem__),
    )
    return len(comps) == 1
