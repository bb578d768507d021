"""Policy synthesis from LP optima.

Each vertex of the LP's equality polytope (at most one positive variable per
MEC) induces a stationary policy; the optimum itself is realised as a convex
mixture of two such policies, chosen once by an initial coin flip, or
equivalently as a two-memory-state finite-memory policy.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from omegaplan import lp as lpmod
from omegaplan.graph import MECDecomposition, classify, mec_decompose
from omegaplan.model import (
    LabeledMDP,
    ModelError,
    PolicyMemoryKernel,
    ProductMDP,
    RabinAutomaton,
    build_product,
    format_fraction,
    parse_fraction,
)

ZERO = Fraction(0)
ONE = Fraction(1)


class SynthesisError(ValueError):
    pass


@dataclass(frozen=True)
class StationaryPolicy:
    """Memoryless randomised policy over product states."""

    table: dict  # state -> dict action -> Fraction

    def act(self, v) -> dict:
        return self.table[v]

    def support(self, v) -> tuple:
        return tuple(a for a, p in sorted(self.table[v].items()) if p > ZERO)

    def to_dict(self) -> dict:
        return {
            v: {a: format_fraction(p) for a, p in sorted(row.items()) if p > ZERO}
            for v, row in sorted(self.table.items())
        }

    @classmethod
    def from_dict(cls, data) -> "StationaryPolicy":
        return cls({v: {a: parse_fraction(p) for a, p in row.items()}
                    for v, row in data.items()})


@dataclass(frozen=True)
class MixturePolicy:
    """Pick policy1 with probability lam (once, up front), else policy2."""

    lam: Fraction
    policy1: StationaryPolicy
    policy2: StationaryPolicy

    def to_dict(self) -> dict:
        return {
            "lambda": format_fraction(self.lam),
            "policy1": self.policy1.to_dict(),
            "policy2": self.policy2.to_dict(),
        }

    @classmethod
    def from_dict(cls, data) -> "MixturePolicy":
        return cls(parse_fraction(data["lambda"]),
                   StationaryPolicy.from_dict(data["policy1"]),
                   StationaryPolicy.from_dict(data["policy2"]))

    @classmethod
    def from_file(cls, path) -> "MixturePolicy":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _uniform(actions) -> dict:
    actions = tuple(actions)
    share = Fraction(1, len(actions))
    return {a: share for a in actions}


def _witness_for(dec: MECDecomposition, i: int, kind: str):
    """Accepting sub-EC the committed mass of MEC i should settle in.  A MEC
    holding a jointly accepting EC always settles there: that serves both
    the objective and the constraint at once, whichever variable carried the
    mass."""
    if dec.has_both[i]:
        return dec.witness_both[i]
    if kind == "obj" and dec.has_obj[i]:
        return dec.witness_obj[i]
    if kind == "con" and dec.has_con[i]:
        return dec.witness_con[i]
    # non-counting mass: any accepting EC is as good as the whole MEC
    return None


def policy_from_point(dec: MECDecomposition, product: ProductMDP,
                      assignment: dict) -> StationaryPolicy:
    """Stationary policy from a vertex assignment (at most one positive
    variable per MEC; raises otherwise).

    An EC variable commits the MEC: inside the witness accepting EC play
    uniformly over its actions, elsewhere in the MEC play uniformly over the
    MEC's internal actions until absorbed.  An exit variable leaves: the
    carrying state plays its exit action deterministically, the rest of the
    MEC funnels toward it.  States with no mass default to staying put
    (uniform internal actions) or, for trivial singletons, uniform over
    everything enabled.
    """
    per_mec = {}
    for key, val in assignment.items():
        if val == ZERO:
            continue
        i = key[1] if key[0] == "ec" else dec.index_of[key[1]]
        per_mec.setdefault(i, []).append(key)

    table = {}
    for i, mec in enumerate(dec.mecs):
        keys = per_mec.get(i, [])
        if len(keys) > 1:
            raise SynthesisError(
                f"not a vertex: MEC {i} carries {len(keys)} positive variables")
        key = keys[0] if keys else None
        if key is not None and key[0] == "exit":
            _, v_exit, a_exit = key
            for v in mec.states:
                if v == v_exit:
                    table[v] = {a_exit: ONE}
                elif mec.act[v]:
                    table[v] = _uniform(sorted(mec.act[v]))
                else:
                    table[v] = _uniform(product.enabled(v))
            continue
        witness = None
        if key is not None and key[0] == "ec":
            witness = _witness_for(dec, i, key[2])
        for v in mec.states:
            if witness is not None and v in witness:
                table[v] = _uniform(sorted(witness.act[v]))
            elif mec.act[v]:
                table[v] = _uniform(sorted(mec.act[v]))
            else:
                table[v] = _uniform(product.enabled(v))
    return StationaryPolicy(table)


def uniform_ec_policy(product: ProductMDP, dec: MECDecomposition,
                      witnesses) -> StationaryPolicy:
    """Stationary policy that plays uniformly inside the given witness ECs
    (indexed by MEC) and uniformly over internal MEC actions elsewhere."""
    table = {}
    for i, mec in enumerate(dec.mecs):
        witness = witnesses.get(i)
        for v in mec.states:
            if witness is not None and v in witness:
                table[v] = _uniform(sorted(witness.act[v]))
            elif mec.act[v]:
                table[v] = _uniform(sorted(mec.act[v]))
            else:
                table[v] = _uniform(product.enabled(v))
    return StationaryPolicy(table)


def as_memory_policy(mix: MixturePolicy) -> PolicyMemoryKernel:
    """Two-memory-state realisation of a mixture: the initial memory draw
    picks the component and is never revised."""
    dist = {1: mix.lam, 2: ONE - mix.lam}
    pols = {1: mix.policy1, 2: mix.policy2}

    def update(u, _tr):
        return {u: ONE}

    def selector(u, v):
        return pols[u].act(v)

    return PolicyMemoryKernel(memory_states=(1, 2), initial_dist=dist,
                              update=update, selector=selector)


def single_mec_mixture(product: ProductMDP, dec: MECDecomposition,
                       p: Fraction) -> Optional[MixturePolicy]:
    """When the whole product is one MEC containing both an objective-
    accepting and a constraint-accepting EC, the optimum is reached without
    solving anything: stay with the objective witness with probability 1-p
    and with the constraint witness with probability p (value 1-p), or stay
    with a joint witness outright (value 1)."""
    if len(dec.mecs) != 1 or dec.mecs[0].trivial:
        return None
    if dec.has_both[0]:
        pol = uniform_ec_policy(product, dec, {0: dec.witness_both[0]})
        return MixturePolicy(ONE, pol, pol)
    if not (dec.has_obj[0] and dec.has_con[0]):
        return None
    pol_a = uniform_ec_policy(product, dec, {0: dec.witness_obj[0]})
    pol_b = uniform_ec_policy(product, dec, {0: dec.witness_con[0]})
    return MixturePolicy(ONE - p, pol_a, pol_b)


@dataclass
class PlanResult:
    status: str  # "optimal" or "infeasible"
    product: ProductMDP
    decomposition: MECDecomposition
    lp: Optional[lpmod.ConstrainedLP] = None
    solution: Optional[lpmod.LPSolution] = None
    value: Optional[Fraction] = None
    lam: Optional[Fraction] = None
    point1: Optional[dict] = None
    point2: Optional[dict] = None
    policy: Optional[MixturePolicy] = None

    def to_dict(self) -> dict:
        out = {"status": self.status,
               "decomposition": self.decomposition.to_dict()}
        if self.status == "optimal":
            out["value"] = format_fraction(self.value)
            out["policy"] = self.policy.to_dict()
        return out


def plan_product(product: ProductMDP, p: Fraction) -> PlanResult:
    """Solve the constrained synthesis problem on an already-built product."""
    p = Fraction(p)
    dec = classify(mec_decompose(product), product)
    lp = lpmod.build_lp(dec, product, p)
    sol = lpmod.solve(lp)
    if sol.status != lpmod.OPTIMAL:
        return PlanResult(status="infeasible", product=product,
                          decomposition=dec, lp=lp, solution=sol)
    lam, a1, a2 = lpmod.decompose(lp, sol)
    mix = MixturePolicy(lam,
                        policy_from_point(dec, product, a1),
                        policy_from_point(dec, product, a2))
    return PlanResult(status="optimal", product=product, decomposition=dec,
                      lp=lp, solution=sol, value=sol.value, lam=lam,
                      point1=a1, point2=a2, policy=mix)


def plan(mdp: LabeledMDP, obj: RabinAutomaton, con: RabinAutomaton,
         p: Fraction) -> PlanResult:
    """End-to-end: build the product and solve the constrained problem."""
    return plan_product(build_product(mdp, obj, con), Fraction(p))
