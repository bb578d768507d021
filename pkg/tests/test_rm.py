import csv
from fractions import Fraction
from random import Random

import pytest

from omegaplan.fixtures import get_fixture
from omegaplan.rewardmachine import (BOT, CON, OBJ, TOP, CommitmentPolicy,
                                     RewardMachineError,
                                     RewardMachineTranslation, RMState,
                                     commitment_policy, enumerate_ecs,
                                     enumerate_two_memory_policies,
                                     independent_translation_counterexample,
                                     machine_limit_average,
                                     shortest_path_actions,
                                     simulate_limit_average,
                                     stratified_limit_average, wrap_policy)
from omegaplan.synthesis import plan_product

F = Fraction


def full_E(product):
    return frozenset(product.mdp_transition(v, a, v2)
                     for v in product.states
                     for a in product.enabled(v)
                     for v2 in product.successors(v, a))


def chain():
    return get_fixture("fig3-product").product()


def observe_all(translation, product):
    """Feed every environment transition once; returns the TOP state with
    the complete graph observed."""
    state = translation.initial_state()
    for v in product.states:
        for a in product.enabled(v):
            for v2 in product.successors(v, a):
                state = translation.rm_step(state, v, a, v2)
    assert state.flag == TOP
    assert state.E == full_E(product)
    return state


# ---------------------------------------------------------------------------
# End-component index
# ---------------------------------------------------------------------------

def test_empty_observation_has_empty_index():
    prod = chain()
    assert len(enumerate_ecs(frozenset(), prod)) == 0


def test_full_observation_index_slots():
    prod = chain()
    index = enumerate_ecs(full_E(prod), prod)
    slots = index.slots
    joint_states = {"v1", "v4", "v5"}
    for v in joint_states:
        j = prod.order[v]
        slot = slots[2 * j + 1]
        assert slot.kind == "joint"
        assert slot.ec.states == joint_states
        assert 2 * j + 2 not in slots  # joint occupies the first slot only
    con_slot = slots[2 * prod.order["v3"] + 2]
    assert con_slot.kind == CON
    assert con_slot.ec.states == {"v3"}
    obj_slot = slots[2 * prod.order["v6"] + 1]
    assert obj_slot.kind == OBJ
    assert obj_slot.ec.states == {"v6"}
    # nothing for the transient state v0 or the inert class v2
    owners = {i for i in slots}
    assert not owners & {2 * prod.order["v0"] + 1, 2 * prod.order["v0"] + 2,
                         2 * prod.order["v2"] + 1, 2 * prod.order["v2"] + 2}


def test_partial_observation_hides_components():
    prod = chain()
    # hide the transition that closes the recurrent class at v5: the joint
    # component degrades to its objective-only core {v1, v4}
    E = full_E(prod) - {prod.mdp_transition("v5", "b", "v1")}
    index = enumerate_ecs(E, prod)
    assert index.get(2 * prod.order["v5"] + 1) is None
    assert index.get(2 * prod.order["v5"] + 2) is None
    degraded = index.get(2 * prod.order["v4"] + 1)
    assert degraded is not None
    assert degraded.kind == OBJ
    assert degraded.ec.states == {"v1", "v4"}
    assert index.get(2 * prod.order["v4"] + 2) is None


def test_distance_decreasing_action_sets():
    prod = chain()
    slot = enumerate_ecs(full_E(prod), prod).slots[2 * prod.order["v1"] + 1]
    assert slot.targets_obj == {"v4"}
    assert slot.targets_con == {"v5"}
    assert slot.allowed_obj["v1"] == {"a"}
    assert slot.allowed_obj["v4"] == {"a", "b"}
    assert slot.allowed_obj["v5"] == {"b"}


def test_shortest_path_requires_reachable_targets():
    prod = chain()
    slot = enumerate_ecs(full_E(prod), prod).slots[2 * prod.order["v1"] + 1]
    with pytest.raises(RewardMachineError):
        shortest_path_actions(slot.ec, {"v6"}, prod.successors)


# ---------------------------------------------------------------------------
# Shared machine state updates
# ---------------------------------------------------------------------------

def test_new_transition_grows_graph_and_resets_flag():
    prod = chain()
    tr = RewardMachineTranslation(prod)
    state = tr.rm_step(RMState(frozenset(), BOT), "v0", "a",
                       next(iter(prod.successors("v0", "a"))))
    assert state.flag == TOP
    assert len(state.E) == 1


def test_committal_on_empty_slot_fails():
    prod = chain()
    tr = RewardMachineTranslation(prod)
    state = tr.rm_step(tr.initial_state(), "v0", 1, "v0")
    assert state.flag == BOT


def test_committal_requires_stationary_environment():
    prod = chain()
    tr = RewardMachineTranslation(prod)
    with pytest.raises(RewardMachineError):
        tr.rm_step(tr.initial_state(), "v0", 1, "v1")


def test_commit_toggle_and_failure():
    prod = chain()
    tr = RewardMachineTranslation(prod)
    state = observe_all(tr, prod)
    slot_index = 2 * prod.order["v1"] + 1
    committed = tr.rm_step(state, "v1", slot_index, "v1")
    assert committed.flag == (slot_index, OBJ)  # objective leg first
    slot = tr.index(state.E).get(slot_index)
    # walk one distance-decreasing step into the objective target
    a = min(slot.allowed_obj["v1"])
    v2 = next(u for u in prod.successors("v1", a) if u in slot.targets_obj)
    toggled = tr.rm_step(committed, "v1", a, v2)
    assert toggled.flag == (slot_index, CON)  # reached target: chase the other
    # while chasing the constraint target only b is distance-decreasing at
    # v1; stepping back toward v4 kills the commitment
    assert slot.allowed_con["v1"] == {"b"}
    dead = tr.rm_step(toggled, "v1", "a", "v4")
    assert dead.flag == BOT
    # and failure is absorbing on known transitions
    again = tr.rm_step(dead, "v4", "a", next(iter(prod.successors("v4", "a"))))
    assert again.flag == BOT


def test_commit_to_constraint_only_component():
    prod = chain()
    tr = RewardMachineTranslation(prod)
    state = observe_all(tr, prod)
    slot_index = 2 * prod.order["v3"] + 2
    committed = tr.rm_step(state, "v3", slot_index, "v3")
    assert committed.flag == (slot_index, CON)
    assert tr.rm_rewards(committed, "v3") == (0, 1)
    assert tr.rm_rewards(committed, "v0") == (0, 0)  # outside the component


def test_rewards_follow_commitment():
    prod = chain()
    tr = RewardMachineTranslation(prod)
    state = observe_all(tr, prod)
    assert tr.rm_rewards(state, "v1") == (0, 0)
    slot_index = 2 * prod.order["v1"] + 1
    committed = tr.rm_step(state, "v1", slot_index, "v1")
    assert tr.rm_rewards(committed, "v1") == (1, 1)
    assert tr.rm_rewards(RMState(state.E, BOT), "v1") == (0, 0)


def test_committal_action_recognition():
    prod = chain()
    tr = RewardMachineTranslation(prod)
    assert tr.committal_actions == tuple(range(1, 15))
    assert tr.is_committal(1) and tr.is_committal(14)
    assert not tr.is_committal(0)
    assert not tr.is_committal(15)
    assert not tr.is_committal("a")
    assert not tr.is_committal(True)


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------

def test_never_committing_policy_earns_nothing():
    prod = chain()
    tr = RewardMachineTranslation(prod)
    res = plan_product(prod, F(9, 10))

    def base_only(v, rm_state, rng):
        row = res.policy.policy1.act(v)
        return max(row, key=lambda a: row[a])

    avg = simulate_limit_average(prod, base_only, tr, horizon=500, seed=0)
    assert avg == (0, 0)


def test_commitment_pipeline_limit_averages():
    prod = chain()
    tr = RewardMachineTranslation(prod)
    res = plan_product(prod, F(9, 10))
    dec = res.decomposition
    pol1 = commitment_policy(prod, tr, dec, res.point1, res.policy.policy1)
    pol2 = commitment_policy(prod, tr, dec, res.point2, res.policy.policy2)
    a1, b1 = stratified_limit_average(prod, pol1, tr, 3000, "t1",
                                      res.policy.policy1.act(prod.initial))
    a2, b2 = stratified_limit_average(prod, pol2, tr, 3000, "t2",
                                      res.policy.policy2.act(prod.initial))
    # first endpoint settles jointly with probability 3/4, second feeds the
    # constraint-only component almost surely
    assert abs(a1 - F(3, 4)) < F(1, 20) and abs(b1 - F(3, 4)) < F(1, 20)
    assert a2 == 0 and b2 > F(9, 10)
    lam = res.lam
    combined_obj = lam * a1 + (1 - lam) * a2
    combined_con = lam * b1 + (1 - lam) * b2
    assert abs(combined_obj - F(3, 10)) < F(1, 20)
    assert abs(combined_con - F(9, 10)) < F(1, 20)


def test_rewards_only_while_committed_during_simulation():
    prod = chain()
    tr = RewardMachineTranslation(prod)
    res = plan_product(prod, F(9, 10))
    pol = commitment_policy(prod, tr, res.decomposition, res.point1,
                            res.policy.policy1)
    rng = Random("coupling")
    v = prod.initial
    state = tr.initial_state()
    for _ in range(400):
        action = pol(v, state, rng)
        if tr.is_committal(action):
            v2 = v
        else:
            v2 = rng.choice(sorted(prod.successors(v, action)))
        state = tr.rm_step(state, v, action, v2)
        r_a, r_b = tr.rm_rewards(state, v2)
        if r_a or r_b:
            assert state.committed
        v = v2


def test_trace_csv_columns(tmp_path):
    prod = chain()
    tr = RewardMachineTranslation(prod)
    res = plan_product(prod, F(9, 10))
    pol = commitment_policy(prod, tr, res.decomposition, res.point1,
                            res.policy.policy1)
    path = tmp_path / "trace.csv"
    simulate_limit_average(prod, pol, tr, horizon=50, seed=5, trace_path=path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["step", "env_state", "action", "E_size", "flag",
                       "r_A", "r_B"]
    assert len(rows) == 51
    assert rows[1][1] == prod.initial
    assert all(r[4] in ("top", "bot") or ":" in r[4] for r in rows[1:])


def test_simulation_rejects_bad_horizon():
    prod = chain()
    tr = RewardMachineTranslation(prod)
    with pytest.raises(RewardMachineError):
        simulate_limit_average(prod, lambda v, s, r: "a", tr, 0, 0)


# ---------------------------------------------------------------------------
# Wrapping back onto the original MDP
# ---------------------------------------------------------------------------

def test_wrapped_policy_structure():
    fx = get_fixture("fig1")
    prod = fx.product()
    tr = RewardMachineTranslation(prod)
    res = plan_product(prod, fx.default_threshold)
    pol = commitment_policy(prod, tr, res.decomposition, res.point1,
                            res.policy.policy1)
    wrapped = wrap_policy(prod, tr, pol)
    rng = Random("wrap")
    memory = wrapped.initial_memory()
    q, qc, rm = memory
    assert q == fx.objective.initial and qc == fx.constraint.initial
    assert rm.flag == TOP and rm.E == frozenset()
    s = fx.mdp.initial
    for _ in range(200):
        action, memory = wrapped.act(memory, s, rng)
        # the environment only ever sees original MDP actions
        assert action in fx.mdp.enabled(s)
        s2 = rng.choice(sorted({s2 for s2, _ in fx.mdp.kernel[(s, action)]}))
        new_memory = wrapped.observe(memory, s, action, s2)
        letter = fx.mdp.label(s)
        assert new_memory[0] == fx.objective.step(memory[0], letter)
        assert new_memory[1] == fx.constraint.step(memory[1], letter)
        memory, s = new_memory, s2


def test_wrapped_policy_detects_committal_livelock():
    prod = chain()
    tr = RewardMachineTranslation(prod)
    state = observe_all(tr, prod)
    wrapped = wrap_policy(prod, tr, lambda v, rm, rng: 2 * prod.order["v1"] + 1)
    with pytest.raises(RewardMachineError):
        wrapped.act((None, None, state), "v1", Random(0))


# ---------------------------------------------------------------------------
# Independent per-property translation loses joint satisfiability
# ---------------------------------------------------------------------------

def test_counterexample_hand_policies():
    bundle = independent_translation_counterexample()
    stay = {(0, "s0"): "a", (0, "s1"): "a", (1, "s0"): "a", (1, "s1"): "a"}
    keep = {(m, s, a): m for m in (0, 1) for s in ("s0", "s1")
            for a in ("a", "b")}
    assert machine_limit_average(bundle, stay, keep) == (0, 0)
    # switch right once, then stay: the constraint machine pays every step
    switch_once = {(0, "s0"): "b", (0, "s1"): "a",
                   (1, "s0"): "b", (1, "s1"): "a"}
    assert machine_limit_average(bundle, switch_once, keep) == (0, 1)
    # alternating forever kills the constraint machine outright
    flip = {(m, s, a): 1 - m for m in (0, 1) for s in ("s0", "s1")
            for a in ("a", "b")}
    alternate = {(0, "s0"): "b", (0, "s1"): "b",
                 (1, "s0"): "a", (1, "s1"): "a"}
    obj_avg, con_avg = machine_limit_average(bundle, alternate, flip)
    assert con_avg == 0


def test_counterexample_exhaustive_enumeration():
    bundle = independent_translation_counterexample()
    policies = list(enumerate_two_memory_policies(bundle))
    assert len(policies) == 16 * 256
    perfect_constraint = 0
    for selector, updater in policies:
        obj_avg, con_avg = machine_limit_average(bundle, selector, updater)
        if con_avg == 1:
            perfect_constraint += 1
            assert obj_avg == 0
    assert perfect_constraint > 0


def test_joint_translation_achieves_both():
    fx = get_fixture("appendix-c")
    prod = fx.product()
    tr = RewardMachineTranslation(prod)
    res = plan_product(prod, fx.default_threshold)
    assert res.value == 1  # alternation satisfies both recurrence goals
    pol = commitment_policy(prod, tr, res.decomposition, res.point1,
                            res.policy.policy1)
    a, b = simulate_limit_average(prod, pol, tr, horizon=2000, seed="joint")
    assert a > F(9, 10) and b > F(9, 10)
