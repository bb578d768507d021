"""End-component analysis of product MDPs.

Maximal end components, accepting end components per Rabin condition, joint
accepting ECs, and the DAG between MECs.  The core routines work over
callables (enabled actions, successor supports) so they can also be applied
to subgraphs, e.g. the transition graphs induced by a partially observed
transition set.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

from omegaplan.model import ProductMDP


@dataclass(frozen=True)
class EndComponent:
    """A set of states with per-state action choices, closed and strongly
    connected.  act maps every member state to a (possibly empty) frozenset;
    a singleton with an empty action set is a trivial EC."""

    states: frozenset
    act: dict

    @property
    def trivial(self) -> bool:
        return all(not acts for acts in self.act.values())

    def __contains__(self, v) -> bool:
        return v in self.states


def strongly_connected_components(nodes, succ):
    """Iterative Tarjan; returns SCCs as lists, deterministic for a fixed
    node order."""
    index = {}
    low = {}
    onstack = set()
    stack = []
    sccs = []
    counter = 0
    for root in nodes:
        if root in index:
            continue
        work = [(root, iter(succ(root)))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        onstack.add(root)
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    onstack.add(w)
                    work.append((w, iter(succ(w))))
                    advanced = True
                    break
                if w in onstack:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                u = work[-1][0]
                low[u] = min(low[u], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    onstack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                sccs.append(comp)
    return sccs


def mec_partition(states, enabled, successors, order):
    """Maximal ECs of the graph given by enabled/successors, covering every
    state: states in no nontrivial EC come back as trivial singletons.

    Standard refinement: restrict each candidate set to actions whose whole
    successor support stays inside, re-split by SCC, repeat to fixpoint.
    """
    work = [frozenset(states)]
    found = []
    trivial = []
    while work:
        part = work.pop()
        act = {
            v: frozenset(a for a in enabled(v)
                         if all(u in part for u in successors(v, a)))
            for v in part
        }

        def succ(v):
            out = set()
            for a in act[v]:
                out.update(successors(v, a))
            return sorted(out, key=order.__getitem__)

        nodes = sorted(part, key=order.__getitem__)
        comps = strongly_connected_components(nodes, succ)
        if len(comps) == 1 and all(act[v] for v in part):
            found.append(EndComponent(part, act))
        elif len(part) == 1:
            (v,) = part
            trivial.append(EndComponent(part, {v: frozenset()}))
        else:
            for comp in comps:
                work.append(frozenset(comp))
    out = found + trivial
    out.sort(key=lambda ec: min(order[v] for v in ec.states))
    return out


@dataclass
class MECDecomposition:
    mecs: list  # list of EndComponent, maximal, disjoint, covering all states
    index_of: dict  # state -> mec index
    dag: list = field(default_factory=list)  # edges (i, j) between MEC indices
    has_obj: list = field(default_factory=list)
    has_con: list = field(default_factory=list)
    has_both: list = field(default_factory=list)
    witness_obj: list = field(default_factory=list)
    witness_con: list = field(default_factory=list)
    witness_both: list = field(default_factory=list)

    @property
    def classified(self) -> bool:
        return bool(self.has_obj) or not self.mecs

    def to_dict(self) -> dict:
        return {
            "mecs": [
                {
                    "states": sorted(ec.states),
                    "actions": {v: sorted(ec.act[v]) for v in sorted(ec.states)},
                    "has_A": self.has_obj[i] if self.classified else None,
                    "has_B": self.has_con[i] if self.classified else None,
                    "has_AB": self.has_both[i] if self.classified else None,
                }
                for i, ec in enumerate(self.mecs)
            ],
            "dag": [list(e) for e in self.dag],
        }


def mec_decompose(product: ProductMDP) -> MECDecomposition:
    """MEC decomposition of the product, including the MEC DAG, without
    acceptance classification (see classify)."""
    mecs = mec_partition(product.states, product.enabled, product.successors,
                         product.order)
    index_of = {}
    for i, ec in enumerate(mecs):
        for v in ec.states:
            index_of[v] = i
    dec = MECDecomposition(mecs=mecs, index_of=index_of)
    dec.dag = mec_dag(dec, product)
    return dec


def mec_dag(dec: MECDecomposition, product: ProductMDP):
    """Directed edges between distinct MECs.

    Acyclic on the shipped fixtures; in general, branching exit actions can
    induce cycles between components that no controllable behaviour can
    actually sustain, so consumers only rely on reachability, never on a
    topological order.
    """
    edges = set()
    for (v, a), row in product.kernel.items():
        i = dec.index_of[v]
        for v2, _ in row:
            j = dec.index_of[v2]
            if i != j:
                edges.add((i, j))
    return sorted(edges)


def _accepting_candidates(product, mec, restricted, inf, order, containing=None):
    """Nontrivial sub-ECs of mec within the restricted state set that touch
    inf; sorted so the one holding the smallest accepting state comes first."""
    if not restricted:
        return []
    subs = mec_partition(
        restricted,
        lambda v: mec.act[v],
        product.successors,
        order,
    )
    cands = [ec for ec in subs if not ec.trivial and ec.states & inf
             and (containing is None or containing in ec.states)]
    cands.sort(key=lambda ec: min(order[v] for v in ec.states & inf))
    return cands


def find_aec(product: ProductMDP, mec: EndComponent, pairs) -> Optional[EndComponent]:
    """Witness accepting EC inside mec for the given Rabin pairs, or None.

    Tie-breaking: first pair in file order, then the sub-EC containing the
    smallest accepting state.
    """
    if mec.trivial:
        return None
    for inf, fin in pairs:
        cands = _accepting_candidates(product, mec, mec.states - fin, inf,
                                      product.order)
        if cands:
            return cands[0]
    return None


def find_joint_aec(product: ProductMDP, mec: EndComponent, pairs_obj,
                   pairs_con) -> Optional[EndComponent]:
    """Witness EC accepting for both automata simultaneously, or None."""
    if mec.trivial:
        return None
    for inf_a, fin_a in pairs_obj:
        for inf_b, fin_b in pairs_con:
            restricted = mec.states - (fin_a | fin_b)
            for cand in _accepting_candidates(product, mec, restricted, inf_a,
                                              product.order):
                if cand.states & inf_b:
                    return cand
    return None


def accepting_ec_containing(product, mec, pairs, v) -> Optional[EndComponent]:
    """Maximal accepting sub-EC of mec that contains v, or None."""
    if mec.trivial or v not in mec.states:
        return None
    for inf, fin in pairs:
        cands = _accepting_candidates(product, mec, mec.states - fin, inf,
                                      product.order, containing=v)
        if cands:
            return cands[0]
    return None


def joint_accepting_ec_containing(product, mec, pairs_obj, pairs_con, v):
    """Maximal jointly accepting sub-EC of mec containing v, or None."""
    if mec.trivial or v not in mec.states:
        return None
    for inf_a, fin_a in pairs_obj:
        for inf_b, fin_b in pairs_con:
            restricted = mec.states - (fin_a | fin_b)
            for cand in _accepting_candidates(product, mec, restricted, inf_a,
                                              product.order, containing=v):
                if cand.states & inf_b:
                    return cand
    return None


def ec_accepting_states(ec: EndComponent, pairs) -> frozenset:
    """States of ec that witness acceptance: members of some Inf-set whose
    paired Fin-set the EC avoids."""
    out = set()
    for inf, fin in pairs:
        if not ec.states & fin:
            out |= ec.states & inf
    return frozenset(out)


def is_accepting_ec(ec: EndComponent, pairs) -> bool:
    if ec.trivial:
        return False
    return any(ec.states & inf and not ec.states & fin for inf, fin in pairs)


def classify(dec: MECDecomposition, product: ProductMDP) -> MECDecomposition:
    """Fill in per-MEC acceptance flags and witness AECs (in place)."""
    dec.has_obj = []
    dec.has_con = []
    dec.has_both = []
    dec.witness_obj = []
    dec.witness_con = []
    dec.witness_both = []
    for mec in dec.mecs:
        wa = find_aec(product, mec, product.pairs_obj)
        wb = find_aec(product, mec, product.pairs_con)
        wab = find_joint_aec(product, mec, product.pairs_obj, product.pairs_con)
        dec.witness_obj.append(wa)
        dec.witness_con.append(wb)
        dec.witness_both.append(wab)
        dec.has_obj.append(wa is not None)
        dec.has_con.append(wb is not None)
        dec.has_both.append(wab is not None)
    return dec


def reachable_mecs(dec: MECDecomposition, initial_state) -> list:
    """MEC indices reachable in the DAG from the MEC holding initial_state."""
    start = dec.index_of[initial_state]
    succ = {}
    for i, j in dec.dag:
        succ.setdefault(i, []).append(j)
    seen = {start}
    stack = [start]
    while stack:
        i = stack.pop()
        for j in succ.get(i, ()):
            if j not in seen:
                seen.add(j)
                stack.append(j)
    return sorted(seen)
