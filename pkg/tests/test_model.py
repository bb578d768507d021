import json
from fractions import Fraction

import pytest

from omegaplan.fixtures import get_fixture
from omegaplan.model import (LabeledMDP, ModelError, PolicyMemoryKernel,
                             RabinAutomaton, accepts_lasso, build_product,
                             format_fraction, parse_fraction, validate)


def test_parse_fraction_exact():
    assert parse_fraction("3/10") == Fraction(3, 10)
    assert parse_fraction("1") == Fraction(1)
    assert format_fraction(Fraction(9, 10)) == "9/10"


def test_parse_fraction_rejects_decimals():
    with pytest.raises((ModelError, ValueError)):
        parse_fraction("0.9")


def test_fig1_mdp_validates_clean():
    report = validate(get_fixture("fig1").mdp)
    assert report.ok
    assert report.violations == ()


def _broken_row_mdp():
    return dict(
        atomic_propositions=["t"],
        states=["s0", "s1"],
        initial="s0",
        actions=["a"],
        labels={"s0": [], "s1": ["t"]},
        transitions=[
            {"from": "s0", "action": "a",
             "to": [["s0", "1/2"], ["s1", "2/5"]]},
            {"from": "s1", "action": "a", "to": [["s1", "1/1"]]},
        ],
    )


def test_validate_flags_bad_row_sum():
    mdp = LabeledMDP.from_dict(_broken_row_mdp())
    report = validate(mdp)
    assert not report.ok
    assert any("row sum != 1" in msg for msg in report.violations)


def test_validate_flags_dead_state():
    data = _broken_row_mdp()
    data["transitions"] = [
        {"from": "s0", "action": "a", "to": [["s1", "1/1"]]},
    ]
    mdp = LabeledMDP.from_dict(data)
    report = validate(mdp)
    assert not report.ok
    assert any("dead state" in msg for msg in report.violations)


def test_mdp_file_roundtrip(tmp_path):
    fx = get_fixture("fig1")
    path = tmp_path / "mdp.json"
    path.write_text(json.dumps(fx.mdp.to_dict()))
    again = LabeledMDP.from_file(path)
    assert again.to_dict() == fx.mdp.to_dict()


def test_rabin_automaton_totality_enforced():
    with pytest.raises(ModelError):
        RabinAutomaton(
            states=["q0"], initial="q0", aps=["t"],
            delta={("q0", frozenset()): "q0"},  # letter {t} missing, no default
            pairs=[(["q0"], [])],
        )


def test_product_rows_are_stochastic_and_lifted_exactly():
    fx = get_fixture("fig1")
    prod = fx.product()
    for (v, a), row in prod.kernel.items():
        assert sum((p for _, p in row), Fraction(0)) == 1
        s, _, _ = prod.project(v)
        mdp_row = dict(fx.mdp.row(s, a))
        for v2, p in row:
            s2, _, _ = prod.project(v2)
            assert mdp_row[s2] == p


def test_product_automaton_coordinates_follow_delta():
    fx = get_fixture("fig1")
    prod = fx.product()
    for (v, _a), row in prod.kernel.items():
        s, q, qc = prod.project(v)
        letter = fx.mdp.label(s)
        for v2, _p in row:
            _s2, q2, qc2 = prod.project(v2)
            assert q2 == fx.objective.step(q, letter)
            assert qc2 == fx.constraint.step(qc, letter)


def test_product_initial_and_size():
    fx = get_fixture("fig1")
    prod = fx.product()
    assert prod.initial.startswith("s0|")
    assert len(prod.states) <= len(fx.mdp.states) * \
        len(fx.objective.states) * len(fx.constraint.states)


def test_one_state_product_identity():
    mdp = LabeledMDP.from_dict(dict(
        atomic_propositions=["t"], states=["s0"], initial="s0",
        actions=["a"], labels={"s0": ["t"]},
        transitions=[{"from": "s0", "action": "a", "to": [["s0", "1/1"]]}],
    ))
    aut = RabinAutomaton(states=["q0"], initial="q0", aps=["t"],
                         delta={}, pairs=[(["q0"], [])],
                         default={"q0": "q0"})
    prod = build_product(mdp, aut, aut)
    assert len(prod.states) == 1
    assert prod.kernel[(prod.initial, "a")] == ((prod.initial, Fraction(1)),)


def test_product_ap_mismatch_rejected():
    fx = get_fixture("fig1")
    other = RabinAutomaton(states=["q0"], initial="q0", aps=["zzz"],
                           delta={}, pairs=[], default={"q0": "q0"})
    with pytest.raises(ModelError):
        build_product(fx.mdp, other, other)


def test_accepts_lasso_eventually():
    fx = get_fixture("fig1")
    aut = fx.objective  # reach a t-labelled state eventually
    assert accepts_lasso(aut, [frozenset()], [frozenset({"t"})])
    assert not accepts_lasso(aut, [frozenset()], [frozenset()])


def test_accepts_lasso_safety_violated():
    aut = get_fixture("fig1").constraint  # never see u
    assert not accepts_lasso(aut, [frozenset({"u"})], [frozenset()])
    assert accepts_lasso(aut, [frozenset()], [frozenset()])


def test_accepts_lasso_empty_pairs_rejects_everything():
    aut = RabinAutomaton(states=["q0"], initial="q0", aps=["t"],
                         delta={}, pairs=[], default={"q0": "q0"})
    assert not accepts_lasso(aut, [], [frozenset()])


def test_accepts_lasso_requires_cycle():
    aut = get_fixture("fig1").objective
    with pytest.raises(ModelError):
        accepts_lasso(aut, [frozenset()], [])


def test_accepts_lasso_matches_long_simulation():
    import random
    rng = random.Random("lasso-oracle")
    aut = get_fixture("fig2").objective  # infinitely often mark
    letters = [frozenset(), frozenset({"mark"})]
    for _ in range(50):
        prefix = [letters[rng.randrange(2)] for _ in range(rng.randrange(4))]
        cycle = [letters[rng.randrange(2)] for _ in range(1 + rng.randrange(4))]
        expected = accepts_lasso(aut, prefix, cycle)
        # run the prefix, burn in long enough to reach the periodic orbit,
        # then collect every state of one full period of the orbit
        q = aut.initial
        for letter in prefix:
            q = aut.step(q, letter)
        for _ in range(10 * len(aut.states)):
            for letter in cycle:
                q = aut.step(q, letter)
        recurrent = set()
        q2 = q
        while True:
            for letter in cycle:
                q2 = aut.step(q2, letter)
                recurrent.add(q2)
            if q2 == q:
                break
        simulated = any(recurrent & inf and not recurrent & fin
                        for inf, fin in aut.pairs)
        assert simulated == expected


def test_memory_kernel_row_check():
    one = Fraction(1)
    kernel = PolicyMemoryKernel(
        memory_states=("u",),
        initial_dist={"u": one},
        update=lambda u, tr: {"u": one},
        selector=lambda u, s: {"a": one},
    )
    assert kernel.check_rows([("s", "a", "s")], ["s"])
    bad = PolicyMemoryKernel(
        memory_states=("u",),
        initial_dist={"u": Fraction(1, 2)},
        update=lambda u, tr: {"u": one},
        selector=lambda u, s: {"a": one},
    )
    assert not bad.check_rows([], ["s"])
