"""Built-in example problems, addressable by name from the CLI and tests.

Each fixture bundles an MDP with objective/constraint automata (or a directly
specified product graph with product-level acceptance pairs) and a default
constraint threshold.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from omegaplan.model import LabeledMDP, ProductMDP, RabinAutomaton, build_product

F = Fraction


@dataclass
class Fixture:
    name: str
    description: str
    default_threshold: Fraction
    mdp: Optional[LabeledMDP] = None
    objective: Optional[RabinAutomaton] = None
    constraint: Optional[RabinAutomaton] = None
    direct_product: Optional[ProductMDP] = None

    def product(self) -> ProductMDP:
        if self.direct_product is not None:
            return self.direct_product
        return build_product(self.mdp, self.objective, self.constraint)


def _dra_eventually(ap, aps):
    """Accepts words where ap eventually holds (absorbing success state)."""
    return RabinAutomaton(
        states=["q0", "q1"], initial="q0", aps=aps,
        delta={("q0", frozenset(l)): "q1"
               for l in _letters_with(ap, aps)},
        default={"q0": "q0", "q1": "q1"},
        pairs=[({"q1"}, set())],
    )


def _dra_always_not(ap, aps):
    """Accepts words where ap never holds (trap on violation)."""
    return RabinAutomaton(
        states=["ok", "dead"], initial="ok", aps=aps,
        delta={("ok", frozenset(l)): "dead" for l in _letters_with(ap, aps)},
        default={"ok": "ok", "dead": "dead"},
        pairs=[({"ok"}, {"dead"})],
    )


def _dra_infinitely_often(ap, aps):
    """Accepts words where ap holds infinitely often (last-letter tracker)."""
    return RabinAutomaton(
        states=["no", "yes"], initial="no", aps=aps,
        delta={(q, frozenset(l)): "yes"
               for q in ("no", "yes") for l in _letters_with(ap, aps)},
        default={"no": "no", "yes": "no"},
        pairs=[({"yes"}, set())],
    )


def _dra_finitely_often(ap, aps):
    """Accepts words where ap holds only finitely often (the complement of
    the infinitely-often tracker: same transitions, dual pairs)."""
    aut = _dra_infinitely_often(ap, aps)
    return RabinAutomaton(states=aut.states, initial=aut.initial, aps=aps,
                          delta=aut.delta, default=aut.default,
                          pairs=[({"no"}, {"yes"})])


def _letters_with(ap, aps):
    base = [x for x in aps if x != ap]
    out = []
    for mask in range(2 ** len(base)):
        letter = {ap} | {x for i, x in enumerate(base) if mask >> i & 1}
        out.append(letter)
    return out


def _fig1() -> Fixture:
    """Reach-the-target / stay-safe MDP: a is safe with a 50% success branch,
    b succeeds more often but risks the unsafe sink."""
    mdp = LabeledMDP(
        aps=["t", "u"],
        states=["s0", "s1", "s2", "s3"],
        initial="s0",
        actions=["a", "b"],
        kernel={
            ("s0", "a"): [("s1", F(1, 2)), ("s2", F(1, 2))],
            ("s0", "b"): [("s2", F(3, 5)), ("s3", F(2, 5))],
            ("s1", "a"): [("s1", F(1))],
            ("s2", "a"): [("s2", F(1))],
            ("s3", "a"): [("s3", F(1))],
        },
        labels={"s2": {"t"}, "s3": {"u"}},
    )
    return Fixture(
        name="fig1",
        description="reach target (eventually t) subject to safety (never u)",
        default_threshold=F(9, 10),
        mdp=mdp,
        objective=_dra_eventually("t", ["t", "u"]),
        constraint=_dra_always_not("u", ["t", "u"]),
    )


def _fig2() -> Fixture:
    """Two-state deterministic MDP where the objective (infinitely often the
    marked state) and the constraint (its complement) force a genuine mixture:
    no stationary policy beats the coin flip."""
    mdp = LabeledMDP(
        aps=["mark"],
        states=["s0", "s1"],
        initial="s0",
        actions=["a", "b"],
        kernel={
            ("s0", "a"): [("s0", F(1))],
            ("s0", "b"): [("s1", F(1))],
            ("s1", "a"): [("s1", F(1))],
            ("s1", "b"): [("s1", F(1))],
        },
        labels={"s0": {"mark"}},
    )
    return Fixture(
        name="fig2",
        description="infinitely-often objective vs complementary constraint",
        default_threshold=F(9, 10),
        mdp=mdp,
        objective=_dra_infinitely_often("mark", ["mark"]),
        constraint=_dra_finitely_often("mark", ["mark"]),
    )


def _fig3_product() -> Fixture:
    """Seven-state product graph with a five-MEC DAG; the standard worked
    example for the constrained LP."""
    product = ProductMDP.from_explicit(
        states=["v0", "v1", "v2", "v3", "v4", "v5", "v6"],
        initial="v0",
        actions=["a", "b"],
        kernel={
            ("v0", "a"): [("v0", F(1, 5)), ("v1", F(3, 5)), ("v2", F(1, 5))],
            ("v0", "b"): [("v3", F(1))],
            ("v1", "a"): [("v4", F(1))],
            ("v1", "b"): [("v5", F(1))],
            ("v2", "a"): [("v2", F(1))],
            ("v2", "b"): [("v2", F(1))],
            ("v3", "a"): [("v3", F(1))],
            ("v3", "b"): [("v6", F(1))],
            ("v4", "a"): [("v1", F(1))],
            ("v4", "b"): [("v1", F(1))],
            ("v5", "a"): [("v3", F(1))],
            ("v5", "b"): [("v1", F(1))],
            ("v6", "a"): [("v6", F(1))],
            ("v6", "b"): [("v6", F(1))],
        },
        pairs_obj=[({"v4", "v6"}, set())],
        pairs_con=[({"v5", "v3"}, set())],
    )
    return Fixture(
        name="fig3-product",
        description="five-MEC DAG product graph (worked LP example)",
        default_threshold=F(9, 10),
        direct_product=product,
    )


def _single_mec() -> Fixture:
    """Whole product is one MEC holding an objective-accepting EC and a
    constraint-accepting EC, but no joint one: the special-case fast path
    applies and the optimum is 1 - p."""
    product = ProductMDP.from_explicit(
        states=["w0", "w1"],
        initial="w0",
        actions=["a", "b"],
        kernel={
            ("w0", "a"): [("w0", F(1))],
            ("w0", "b"): [("w1", F(1))],
            ("w1", "a"): [("w0", F(1))],
            ("w1", "b"): [("w1", F(1))],
        },
        pairs_obj=[({"w0"}, {"w1"})],
        pairs_con=[({"w1"}, {"w0"})],
    )
    return Fixture(
        name="single-mec",
        description="entire product one MEC; optimum 1-p via the fast path",
        default_threshold=F(9, 10),
        direct_product=product,
    )


def _ex_dep() -> Fixture:
    """Two actions, four sinks: a hits the joint sink or the objective-only
    sink evenly; b hits the joint sink with probability 3/4 and the
    constraint-only sink otherwise.  Weighted planning prefers a exactly when
    1 + lambda/2 > 3/4 + lambda."""
    mdp = LabeledMDP(
        aps=["win", "safe"],
        states=["s0", "jt", "ob", "cn"],
        initial="s0",
        actions=["a", "b"],
        kernel={
            ("s0", "a"): [("jt", F(1, 2)), ("ob", F(1, 2))],
            ("s0", "b"): [("jt", F(3, 4)), ("cn", F(1, 4))],
            ("jt", "a"): [("jt", F(1))],
            ("ob", "a"): [("ob", F(1))],
            ("cn", "a"): [("cn", F(1))],
        },
        labels={"jt": {"win", "safe"}, "ob": {"win"}, "cn": {"safe"}},
    )
    return Fixture(
        name="ex-dep",
        description="multiplier-dependent preference between a and b",
        default_threshold=F(1),
        mdp=mdp,
        objective=_dra_eventually("win", ["win", "safe"]),
        constraint=_dra_eventually("safe", ["win", "safe"]),
    )


def _appendix_c() -> Fixture:
    """Deterministic two-state MDP (a stays, b switches) with objective
    'infinitely often the left state' and constraint 'infinitely often the
    right state'."""
    mdp = LabeledMDP(
        aps=["p0", "p1"],
        states=["s0", "s1"],
        initial="s0",
        actions=["a", "b"],
        kernel={
            ("s0", "a"): [("s0", F(1))],
            ("s0", "b"): [("s1", F(1))],
            ("s1", "a"): [("s1", F(1))],
            ("s1", "b"): [("s0", F(1))],
        },
        labels={"s0": {"p0"}, "s1": {"p1"}},
    )
    return Fixture(
        name="appendix-c",
        description="two-state alternation problem (independent-translation counterexample)",
        default_threshold=F(1),
        mdp=mdp,
        objective=_dra_infinitely_often("p0", ["p0", "p1"]),
        constraint=_dra_infinitely_often("p1", ["p0", "p1"]),
    )


_BUILDERS = {
    "fig1": _fig1,
    "fig2": _fig2,
    "fig3-product": _fig3_product,
    "single-mec": _single_mec,
    "ex-dep": _ex_dep,
    "appendix-c": _appendix_c,
}


def fixture_names():
    return sorted(_BUILDERS)


def get_fixture(name: str) -> Fixture:
    try:
        return _BUILDERS[name]()
    except KeyError:
        raise KeyError(f"unknown fixture {name!r}; known: {', '.join(fixture_names())}")
