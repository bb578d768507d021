import random
from fractions import Fraction

import pytest

from helpers import random_product

from omegaplan.evaluation import evaluate
from omegaplan.fixtures import get_fixture
from omegaplan.graph import classify, mec_decompose
from omegaplan.model import ProductMDP
from omegaplan.synthesis import (MixturePolicy, StationaryPolicy,
                                 SynthesisError, as_memory_policy, plan,
                                 plan_product, policy_from_point,
                                 single_mec_mixture, uniform_ec_policy)

F = Fraction


def test_chain_plan_endpoint_policies():
    prod = get_fixture("fig3-product").product()
    res = plan_product(prod, F(9, 10))
    assert res.status == "optimal"
    assert res.value == F(3, 10)
    assert res.lam == F(2, 5)
    # first endpoint: leave v0 by a, settle in the jointly accepting class
    assert res.policy.policy1.act("v0") == {"a": 1}
    for v in ("v1", "v4", "v5"):
        row = res.policy.policy1.act(v)
        assert sum(row.values()) == 1
        assert set(row) <= set(prod.enabled(v))
    # second endpoint: leave v0 by b, stay at v3 forever
    assert res.policy.policy2.act("v0") == {"b": 1}
    assert res.policy.policy2.act("v3") == {"a": 1}


def test_five_state_mixture_value():
    fx = get_fixture("fig2")
    res = plan(fx.mdp, fx.objective, fx.constraint, fx.default_threshold)
    assert res.status == "optimal"
    assert res.value == F(1, 10)
    assert {res.lam, 1 - res.lam} == {F(1, 10), F(9, 10)}
    report = evaluate(res.product, res.policy)
    assert report.objective == F(1, 10)
    assert report.constraint == F(9, 10)


def test_sure_constraint_gives_degenerate_mixture():
    fx = get_fixture("fig1")
    res = plan(fx.mdp, fx.objective, fx.constraint, F(1))
    assert res.status == "optimal"
    assert res.value == F(1, 2)
    assert res.lam == 1
    assert res.point1 == res.point2


def test_infeasible_plan_has_no_policy():
    prod = ProductMDP.from_explicit(
        ["v0"], "v0", ["a"], {("v0", "a"): [("v0", F(1))]},
        pairs_obj=[({"v0"}, set())], pairs_con=[])
    res = plan_product(prod, F(1, 2))
    assert res.status == "infeasible"
    assert res.policy is None
    assert res.to_dict()["status"] == "infeasible"
    assert "value" not in res.to_dict()


def test_policy_from_point_rejects_non_vertex():
    prod = get_fixture("fig3-product").product()
    dec = classify(mec_decompose(prod), prod)
    bad = {("ec", 1, "obj"): F(1, 2), ("ec", 1, "con"): F(1, 2)}
    with pytest.raises(SynthesisError):
        policy_from_point(dec, prod, bad)


def test_uniform_ec_policy_stays_in_witness():
    prod = get_fixture("fig3-product").product()
    dec = classify(mec_decompose(prod), prod)
    i = next(i for i in range(len(dec.mecs)) if dec.has_both[i])
    witness = dec.witness_both[i]
    pol = uniform_ec_policy(prod, dec, {i: witness})
    for v in witness.states:
        row = pol.act(v)
        assert set(row) == set(witness.act[v])
        assert all(p == F(1, len(row)) for p in row.values())
        for a in row:
            assert set(prod.successors(v, a)) <= witness.states


def test_memory_realisation_matches_mixture():
    prod = get_fixture("fig3-product").product()
    res = plan_product(prod, F(9, 10))
    kernel = as_memory_policy(res.policy)
    assert kernel.memory_states == (1, 2)
    assert kernel.initial_dist == {1: res.lam, 2: 1 - res.lam}
    transitions = [(v, a, v2) for v in prod.states for a in prod.enabled(v)
                   for v2 in prod.successors(v, a)]
    assert kernel.check_rows(transitions, prod.states)
    for v in prod.states:
        assert kernel.selector(1, v) == res.policy.policy1.act(v)
        assert kernel.selector(2, v) == res.policy.policy2.act(v)
        assert kernel.update(1, (v, "a", v)) == {1: F(1)}
        assert kernel.update(2, (v, "a", v)) == {2: F(1)}


def test_single_mec_shortcut_agrees_with_lp():
    fx = get_fixture("single-mec")
    prod = fx.product()
    dec = classify(mec_decompose(prod), prod)
    mix = single_mec_mixture(prod, dec, fx.default_threshold)
    assert mix is not None
    res = plan_product(prod, fx.default_threshold)
    direct = evaluate(prod, mix)
    via_lp = evaluate(prod, res.policy)
    assert direct.objective == via_lp.objective == res.value
    assert direct.constraint >= fx.default_threshold
    assert via_lp.constraint >= fx.default_threshold


def test_single_mec_shortcut_declines_multi_mec_products():
    prod = get_fixture("fig3-product").product()
    dec = classify(mec_decompose(prod), prod)
    assert single_mec_mixture(prod, dec, F(1, 2)) is None


def test_policy_rows_are_stochastic_on_random_products():
    rng = random.Random("synthesis-random")
    planned = 0
    for trial in range(40):
        prod = random_product(rng)
        res = plan_product(prod, F(0))
        if res.status != "optimal":
            continue
        planned += 1
        for pol in (res.policy.policy1, res.policy.policy2):
            for v in prod.states:
                row = pol.act(v)
                assert sum(row.values()) == 1
                assert all(p > 0 for p in row.values())
                assert set(row) <= set(prod.enabled(v))
    assert planned >= 30


def test_mixture_serialisation_roundtrip(tmp_path):
    prod = get_fixture("fig3-product").product()
    res = plan_product(prod, F(9, 10))
    data = res.policy.to_dict()
    assert data["lambda"] == "2/5"
    again = MixturePolicy.from_dict(data)
    assert again.lam == res.policy.lam
    assert again.policy1.table == res.policy.policy1.table
    path = tmp_path / "policy.json"
    res.policy.save(path)
    from_file = MixturePolicy.from_file(path)
    assert from_file.policy2.table == res.policy.policy2.table


def test_stationary_policy_support_sorted():
    pol = StationaryPolicy({"v": {"b": F(1, 2), "a": F(1, 2), "c": F(0)}})
    assert pol.support("v") == ("a", "b")
