"""Core domain types: labelled MDPs, deterministic Rabin automata, product MDPs.

All probabilities are exact rationals (`fractions.Fraction`); nothing in this
package ever touches floating point for correctness-relevant arithmetic.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Optional, Sequence

ZERO = Fraction(0)
ONE = Fraction(1)

Letter = frozenset  # a letter of the alphabet 2^AP: a frozenset of ap names


class ModelError(ValueError):
    """Raised for malformed model inputs (bad files, mismatched alphabets)."""


def parse_fraction(text) -> Fraction:
    """Parse an exact rational written as "num/den" or an integer string.

    Decimal notation is rejected on purpose: exactness is part of the file
    format contract.
    """
    if isinstance(text, int):
        return Fraction(text)
    if not isinstance(text, str):
        raise ModelError(f"expected rational string, got {text!r}")
    if "." in text or "e" in text.lower():
        raise ModelError(f"decimal notation not allowed, use num/den: {text!r}")
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise ModelError(f"bad rational {text!r}") from exc


def format_fraction(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple

    @property
    def ok(self) -> bool:
        return not self.violations


class LabeledMDP:
    """Finite MDP with atomic-proposition labels and exact transition kernel.

    kernel maps (state, action) -> tuple of (successor, probability) pairs.
    A pair (s, a) absent from the kernel means a is not enabled in s.
    """

    def __init__(self, aps, states, initial, actions, kernel, labels):
        self.aps = tuple(aps)
        self.states = tuple(states)
        self.initial = initial
        self.actions = tuple(actions)
        self.kernel = {
            (s, a): tuple((s2, Fraction(p)) for s2, p in row)
            for (s, a), row in kernel.items()
        }
        self.labels = {s: frozenset(labels.get(s, ())) for s in self.states}
        self._enabled = {s: tuple(a for a in self.actions if (s, a) in self.kernel)
                         for s in self.states}

    def enabled(self, s) -> tuple:
        return self._enabled[s]

    def row(self, s, a):
        return self.kernel[(s, a)]

    def label(self, s) -> frozenset:
        return self.labels[s]

    def p_min(self) -> Fraction:
        return min(p for row in self.kernel.values() for _, p in row)

    @classmethod
    def from_dict(cls, data) -> "LabeledMDP":
        try:
            aps = data["atomic_propositions"]
            states = data["states"]
            initial = data["initial"]
            actions = data["actions"]
            labels = {s: set(v) for s, v in data.get("labels", {}).items()}
            kernel = {}
            for tr in data["transitions"]:
                key = (tr["from"], tr["action"])
                if key in kernel:
                    raise ModelError(f"duplicate transition row for {key}")
                kernel[key] = [(s2, parse_fraction(p)) for s2, p in tr["to"]]
        except KeyError as exc:
            raise ModelError(f"missing key in MDP file: {exc}") from exc
        return cls(aps, states, initial, actions, kernel, labels)

    @classmethod
    def from_file(cls, path) -> "LabeledMDP":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return {
            "atomic_propositions": list(self.aps),
            "states": list(self.states),
            "initial": self.initial,
            "actions": list(self.actions),
            "labels": {s: sorted(self.labels[s]) for s in self.states},
            "transitions": [
                {"from": s, "action": a,
                 "to": [[s2, format_fraction(p)] for s2, p in row]}
                for (s, a), row in self.kernel.items()
            ],
        }


def validate(mdp: LabeledMDP) -> ValidationReport:
    """Check the LabeledMDP invariants, reporting every violation found."""
    bad = []
    state_set = set(mdp.states)
    if mdp.initial not in state_set:
        bad.append(f"initial state {mdp.initial!r} not in state list")
    for (s, a), row in mdp.kernel.items():
        if s not in state_set:
            bad.append(f"kernel row for unknown state {s!r}")
            continue
        if a not in mdp.actions:
            bad.append(f"kernel row for unknown action {a!r} at {s!r}")
        total = sum((p for _, p in row), ZERO)
        if total != ONE:
            bad.append(f"row sum != 1 for ({s},{a}): {format_fraction(total)}")
        for s2, p in row:
            if p <= ZERO:
                bad.append(f"non-positive probability for ({s},{a})->{s2}")
            if s2 not in state_set:
                bad.append(f"successor {s2!r} of ({s},{a}) not in state list")
    for s in mdp.states:
        if not mdp.enabled(s):
            bad.append(f"dead state {s!r}: no enabled action")
    for s, lab in mdp.labels.items():
        extra = lab - set(mdp.aps)
        if extra:
            bad.append(f"label of {s!r} uses unknown aps {sorted(extra)}")
    return ValidationReport(tuple(bad))


class RabinAutomaton:
    """Deterministic Rabin automaton over the alphabet 2^aps.

    delta is total after default expansion: explicit entries win, and a
    per-state default successor covers every unlisted letter.
    """

    def __init__(self, states, initial, aps, delta, pairs, default=None):
        self.states = tuple(states)
        self.initial = initial
        self.aps = tuple(aps)
        self.delta = {(q, frozenset(letter)): q2 for (q, letter), q2 in delta.items()}
        self.default = dict(default or {})
        self.pairs = tuple((frozenset(a), frozenset(r)) for a, r in pairs)
        self._check()

    def _check(self):
        qs = set(self.states)
        if self.initial not in qs:
            raise ModelError(f"initial automaton state {self.initial!r} unknown")
        for (q, letter), q2 in self.delta.items():
            if q not in qs or q2 not in qs:
                raise ModelError(f"transition ({q},{set(letter)})->{q2} uses unknown state")
            if not set(letter) <= set(self.aps):
                raise ModelError(f"letter {set(letter)} uses unknown aps")
        for q, q2 in self.default.items():
            if q not in qs or q2 not in qs:
                raise ModelError(f"default {q}->{q2} uses unknown state")
        n_letters = 2 ** len(self.aps)
        for q in self.states:
            if q in self.default:
                continue
            explicit = sum(1 for (q1, _) in self.delta if q1 == q)
            if explicit < n_letters:
                raise ModelError(f"delta not total at state {q!r} and no default given")
        for a, r in self.pairs:
            if not (a <= qs and r <= qs):
                raise ModelError("acceptance pair mentions unknown states")

    def step(self, q, letter) -> object:
        letter = frozenset(letter)
        hit = self.delta.get((q, letter))
        if hit is not None:
            return hit
        return self.default[q]

    @classmethod
    def from_dict(cls, data) -> "RabinAutomaton":
        try:
            delta = {}
            for tr in data["transitions"]:
                key = (tr["from"], frozenset(tr["letter"]))
                if key in delta:
                    raise ModelError(f"duplicate automaton transition for {key}")
                delta[key] = tr["to"]
            pairs = [(p["inf"], p["fin"]) for p in data.get("rabin_pairs", [])]
            return cls(data["states"], data["initial"], data["aps"], delta, pairs,
                       default=data.get("default"))
        except KeyError as exc:
            raise ModelError(f"missing key in DRA file: {exc}") from exc

    @classmethod
    def from_file(cls, path) -> "RabinAutomaton":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return {
            "states": list(self.states),
            "initial": self.initial,
            "aps": list(self.aps),
            "transitions": [
                {"from": q, "letter": sorted(letter), "to": q2}
                for (q, letter), q2 in self.delta.items()
            ],
            "default": dict(self.default),
            "rabin_pairs": [{"inf": sorted(a), "fin": sorted(r)} for a, r in self.pairs],
        }


def accepts_lasso(aut: RabinAutomaton, prefix: Sequence, cycle: Sequence) -> bool:
    """Does the ultimately-periodic word prefix . cycle^omega satisfy the automaton?

    The automaton state at cycle boundaries is pumped until it repeats (at most
    |Q| rounds by pigeonhole); the Rabin condition is then checked against the
    set of states visited inside the repeating segment.
    """
    cycle = [frozenset(l) for l in cycle]
    if not cycle:
        raise ModelError("lasso cycle must be nonempty")
    q = aut.initial
    for letter in prefix:
        q = aut.step(q, letter)
    seen_at_boundary = {q: 0}
    boundary_states = [q]
    visited_per_round = []
    for _ in range(len(aut.states) + 1):
        visited = set()
        for letter in cycle:
            q = aut.step(q, letter)
            visited.add(q)
        visited_per_round.append(visited)
        if q in seen_at_boundary:
            start = seen_at_boundary[q]
            recurrent = set()
            for r in visited_per_round[start:]:
                recurrent |= r
            return _rabin_accepts(aut.pairs, recurrent)
        seen_at_boundary[q] = len(boundary_states)
        boundary_states.append(q)
    raise AssertionError("cycle boundary state failed to repeat")  # unreachable


def _rabin_accepts(pairs, recurrent) -> bool:
    return any(recurrent & inf and not recurrent & fin for inf, fin in pairs)


class ProductMDP:
    """Synchronised product of an MDP with objective and constraint DRAs.

    States are the reachable fragment of S x Q x Q', encoded as pipe-joined id
    strings.  Acceptance pairs are lifted to product-state sets, so downstream
    graph analysis never needs to look inside the automata again.  A product
    can also be built directly from an explicit graph with product-level
    acceptance pairs (used by test fixtures that live on product level).
    """

    def __init__(self, states, initial, actions, kernel, pairs_obj, pairs_con,
                 mdp=None, obj_aut=None, con_aut=None, projections=None):
        self.states = tuple(states)
        self.initial = initial
        self.actions = tuple(actions)
        self.kernel = {
            (v, a): tuple((v2, Fraction(p)) for v2, p in row)
            for (v, a), row in kernel.items()
        }
        self.pairs_obj = tuple((frozenset(a), frozenset(r)) for a, r in pairs_obj)
        self.pairs_con = tuple((frozenset(a), frozenset(r)) for a, r in pairs_con)
        self.mdp = mdp
        self.obj_aut = obj_aut
        self.con_aut = con_aut
        self.projections = dict(projections or {})
        self._enabled = {v: tuple(a for a in self.actions if (v, a) in self.kernel)
                         for v in self.states}
        self.order = {v: i for i, v in enumerate(self.states)}

    def enabled(self, v) -> tuple:
        return self._enabled[v]

    def row(self, v, a):
        return self.kernel[(v, a)]

    def successors(self, v, a) -> tuple:
        return tuple(v2 for v2, _ in self.kernel[(v, a)])

    def project(self, v):
        """Return the (mdp state, obj state, con state) triple behind v."""
        if self.projections:
            return self.projections[v]
        return (v, None, None)

    def mdp_transition(self, v, a, v2):
        """Project a product transition to the MDP-level triple (s, a, s')."""
        if self.projections:
            return (self.projections[v][0], a, self.projections[v2][0])
        return (v, a, v2)

    def mdp_state_count(self) -> int:
        if self.mdp is not None:
            return len(self.mdp.states)
        return len(self.states)

    @classmethod
    def from_explicit(cls, states, initial, actions, kernel, pairs_obj, pairs_con):
        """Build a product fixture directly from a product-level graph."""
        return cls(states, initial, actions, kernel, pairs_obj, pairs_con)


def product_state_id(s, q, qc) -> str:
    return f"{s}|{q}|{qc}"


def build_product(mdp: LabeledMDP, obj: RabinAutomaton, con: RabinAutomaton) -> ProductMDP:
    """Synchronise the MDP with both automata, restricted to reachable states.

    Exploration is breadth-first from the initial triple; ties follow the
    component orderings, so the state enumeration is reproducible.
    """
    if set(mdp.aps) != set(obj.aps) or set(mdp.aps) != set(con.aps):
        raise ModelError("MDP and automata must share the same atomic propositions")

    init = (mdp.initial, obj.initial, con.initial)
    queue = deque([init])
    seen = {init}
    order = []
    kernel = {}
    while queue:
        s, q, qc = queue.popleft()
        order.append((s, q, qc))
        letter = mdp.label(s)
        q2 = obj.step(q, letter)
        qc2 = con.step(qc, letter)
        for a in mdp.enabled(s):
            row = []
            for s2, p in mdp.row(s, a):
                tgt = (s2, q2, qc2)
                row.append((product_state_id(*tgt), p))
                if tgt not in seen:
                    seen.add(tgt)
                    queue.append(tgt)
            kernel[(product_state_id(s, q, qc), a)] = tuple(row)

    ids = [product_state_id(*t) for t in order]
    projections = {product_state_id(*t): t for t in order}

    def lift(pairs, coord):
        lifted = []
        for inf, fin in pairs:
            inf_v = frozenset(i for i, t in zip(ids, order) if t[coord] in inf)
            fin_v = frozenset(i for i, t in zip(ids, order) if t[coord] in fin)
            lifted.append((inf_v, fin_v))
        return lifted

    return ProductMDP(
        states=ids,
        initial=product_state_id(*init),
        actions=mdp.actions,
        kernel=kernel,
        pairs_obj=lift(obj.pairs, 1),
        pairs_con=lift(con.pairs, 2),
        mdp=mdp,
        obj_aut=obj,
        con_aut=con,
        projections=projections,
    )


@dataclass(frozen=True)
class PolicyMemoryKernel:
    """General finite-memory policy: memory set, initial distribution, memory
    update kernel over transitions, and per-(memory, state) action selector."""

    memory_states: tuple
    initial_dist: Mapping  # memory -> Fraction
    update: Callable  # (memory, (s, a, s2)) -> Mapping memory -> Fraction
    selector: Callable  # (memory, state) -> Mapping action -> Fraction

    def check_rows(self, transitions: Iterable, states: Iterable) -> bool:
        if sum(self.initial_dist.values(), ZERO) != ONE:
            return False
        for u in self.memory_states:
            for tr in transitions:
                if sum(self.update(u, tr).values(), ZERO) != ONE:
                    return False
            for s in states:
                if sum(self.selector(u, s).values(), ZERO) != ONE:
                    return False
        return True
