"""Translation to constrained limit-average reward machines.

The constrained planning problem is recast as a pair of reward machines that
share their state and run synchronously with the environment.  The shared
state is (E, f): E is the set of MDP transitions observed so far and f is a
status flag that records which indexed accepting end component the agent has
committed to (if any).  The action space is extended with committal actions
1..2|V| (V = product states); these are environment no-ops whose only effect
is to move the flag.  Once committed, the agent earns reward 1 on the machine
whose acceptance its committed end component witnesses, for every step it
spends inside that end component while following distance-decreasing actions
toward the accepting target states; deviating sets the flag to a failure
state that only a newly observed transition can clear.

The module also ships the classic two-state counterexample showing that
translating objective and constraint *independently* (one machine each, no
shared state) is not optimality preserving, together with an exact
limit-average evaluator and an exhaustive two-memory-state policy enumerator
for it.
"""

from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from random import Random
from typing import Callable, Optional
import csv

from .graph import (
    EndComponent,
    accepting_ec_containing,
    ec_accepting_states,
    joint_accepting_ec_containing,
    mec_partition,
)
from .model import ProductMDP
from .synthesis import StationaryPolicy

TOP = "top"
BOT = "bot"

OBJ = "obj"
CON = "con"


class RewardMachineError(ValueError):
    pass


@dataclass(frozen=True)
class RMState:
    """Shared reward-machine state: observed transition set and status flag.

    The flag is TOP (uncommitted), BOT (failed), or a pair (i, kind) meaning
    "committed to indexed end component i, currently steering toward the
    kind-accepting target states" with kind in {"obj", "con"}.
    """

    E: frozenset  # of MDP-level transitions (s, a, s')
    flag: object  # TOP | BOT | (index, "obj"/"con")

    @property
    def committed(self) -> bool:
        return isinstance(self.flag, tuple)

    def flag_text(self) -> str:
        if self.committed:
            return f"{self.flag[0]}:{self.flag[1]}"
        return self.flag


@dataclass(frozen=True)
class IndexedEC:
    """One slot of the end-component index for a fixed observed graph E."""

    index: int
    ec: EndComponent
    kind: str  # "joint", "obj" or "con"
    targets_obj: frozenset
    targets_con: frozenset
    allowed_obj: dict  # state -> frozenset of distance-decreasing actions
    allowed_con: dict

    @property
    def obj_accepting(self) -> bool:
        return self.kind in ("joint", OBJ)

    @property
    def con_accepting(self) -> bool:
        return self.kind in ("joint", CON)

    def allowed(self, kind: str):
        return self.allowed_obj if kind == OBJ else self.allowed_con


class ECIndex:
    """Canonical indexing of accepting end components of an observed graph.

    The product state at order position j owns two slots: slot 2j+1 holds the
    jointly accepting end component containing that state if one exists
    (slot 2j+2 then stays empty), otherwise slot 2j+1 holds the
    objective-accepting end component containing it and slot 2j+2 the
    constraint-accepting one; empty slots are simply absent.  Indices are
    therefore bounded by 2|V|.
    """

    def __init__(self, slots: dict):
        self.slots = dict(slots)

    def get(self, index: int) -> Optional[IndexedEC]:
        return self.slots.get(index)

    def __len__(self) -> int:
        return len(self.slots)


def shortest_path_actions(ec: EndComponent, targets, successors) -> dict:
    """Distance-decreasing action sets toward a target set inside an EC.

    dist is the BFS distance to the targets in the EC's graph (an edge v->v'
    exists when some action of v reaches v' with positive probability);
    allowed(v) keeps the actions with a successor one step closer, and target
    states allow all of their EC actions.
    """
    inside = {v for v in targets if v in ec.states}
    if not inside:
        raise RewardMachineError("target set unreachable inside end component")
    preds = {v: set() for v in ec.states}
    for v in ec.states:
        for a in ec.act[v]:
            for u in successors(v, a):
                if u in preds:
                    preds[u].add(v)
    dist = {v: 0 for v in inside}
    queue = deque(inside)
    while queue:
        u = queue.popleft()
        for v in preds[u]:
            if v not in dist:
                dist[v] = dist[u] + 1
                queue.append(v)
    allowed = {}
    for v in ec.states:
        if v in inside:
            allowed[v] = frozenset(ec.act[v])
            continue
        if v not in dist:
            raise RewardMachineError("end component is not strongly connected")
        allowed[v] = frozenset(
            a for a in ec.act[v]
            if any(dist.get(u, -1) == dist[v] - 1 for u in successors(v, a))
        )
    return allowed


def _observed_enabled(product: ProductMDP, E: frozenset) -> Callable:
    """Actions whose full successor support has been observed in E."""

    def enabled(v):
        return tuple(
            a for a in product.enabled(v)
            if all(product.mdp_transition(v, a, u) in E
                   for u in product.successors(v, a))
        )

    return enabled


def _indexed(index, ec, kind, product) -> IndexedEC:
    targets_obj = ec_accepting_states(ec, product.pairs_obj)
    targets_con = ec_accepting_states(ec, product.pairs_con)
    allowed_obj = {}
    allowed_con = {}
    if kind in ("joint", OBJ):
        allowed_obj = shortest_path_actions(ec, targets_obj, product.successors)
    if kind in ("joint", CON):
        allowed_con = shortest_path_actions(ec, targets_con, product.successors)
    return IndexedEC(index=index, ec=ec, kind=kind,
                     targets_obj=targets_obj, targets_con=targets_con,
                     allowed_obj=allowed_obj, allowed_con=allowed_con)


def enumerate_ecs(E: frozenset, product: ProductMDP) -> ECIndex:
    """Index the accepting end components of the graph observed so far.

    Only actions whose complete successor support appears in E take part; the
    maximal accepting sub-ECs per state are found with the same machinery the
    planner uses, applied to the observed subgraph.
    """
    enabled = _observed_enabled(product, E)
    mecs = mec_partition(product.states, enabled, product.successors,
                         product.order)
    mec_of = {}
    for ec in mecs:
        for v in ec.states:
            mec_of[v] = ec
    slots = {}
    for j, v in enumerate(product.states):
        mec = mec_of[v]
        if mec.trivial:
            continue
        joint = joint_accepting_ec_containing(
            product, mec, product.pairs_obj, product.pairs_con, v)
        if joint is not None:
            slots[2 * j + 1] = _indexed(2 * j + 1, joint, "joint", product)
            continue
        ec_a = accepting_ec_containing(product, mec, product.pairs_obj, v)
        if ec_a is not None:
            slots[2 * j + 1] = _indexed(2 * j + 1, ec_a, OBJ, product)
        ec_b = accepting_ec_containing(product, mec, product.pairs_con, v)
        if ec_b is not None:
            slots[2 * j + 2] = _indexed(2 * j + 2, ec_b, CON, product)
    return ECIndex(slots)


class RewardMachineTranslation:
    """The synchronised reward-machine pair for one product MDP.

    Exposes the shared transition function (rm_step), the two reward
    functions (rm_rewards) and the extended action alphabet.  End-component
    indices are recomputed lazily per observed graph and cached, so the
    machines behave as a (very large but finite) pair of Mealy machines.
    """

    def __init__(self, product: ProductMDP):
        self.product = product
        self.committal_actions = tuple(range(1, 2 * len(product.states) + 1))
        self._indices = {}

    def initial_state(self) -> RMState:
        return RMState(frozenset(), TOP)

    def index(self, E: frozenset) -> ECIndex:
        cached = self._indices.get(E)
        if cached is None:
            cached = enumerate_ecs(E, self.product)
            self._indices[E] = cached
        return cached

    def is_committal(self, action) -> bool:
        return isinstance(action, int) and not isinstance(action, bool) \
            and 1 <= action <= 2 * len(self.product.states)

    def rm_step(self, state: RMState, v, action, v2) -> RMState:
        """Shared state update for one observed extended transition.

        Rules, in priority order: (1) a previously unseen environment
        transition grows E and clears the flag to TOP; (2) from TOP, a
        committal action i locks onto slot i (objective leg first if the slot
        accepts the objective), or fails if the slot is empty; (3) inside a
        jointly accepting commitment, reaching the current target toggles the
        leg; (4) a committed step off the distance-decreasing action set (or
        outside the committed component) fails; (5) otherwise nothing moves.
        """
        committal = self.is_committal(action)
        if committal:
            if v2 != v:
                raise RewardMachineError(
                    "committal actions do not move the environment")
        else:
            if action not in self.product.enabled(v):
                raise RewardMachineError(f"action {action!r} not enabled")
            tr = self.product.mdp_transition(v, action, v2)
            if tr not in state.E:
                return RMState(state.E | {tr}, TOP)
        if state.flag == TOP and committal:
            slot = self.index(state.E).get(action)
            if slot is None:
                return RMState(state.E, BOT)
            kind = OBJ if slot.obj_accepting else CON
            return RMState(state.E, (action, kind))
        if state.committed:
            i, kind = state.flag
            slot = self.index(state.E).get(i)
            if slot.kind == "joint":
                targets = slot.targets_obj if kind == OBJ else slot.targets_con
                if v2 in targets:
                    return RMState(state.E, (i, CON if kind == OBJ else OBJ))
            allowed = slot.allowed(kind)
            if v not in slot.ec or action not in allowed.get(v, frozenset()):
                return RMState(state.E, BOT)
        return state

    def rm_rewards(self, state: RMState, v):
        """Per-step reward pair (objective machine, constraint machine)."""
        if not state.committed:
            return (0, 0)
        slot = self.index(state.E).get(state.flag[0])
        if slot is None or v not in slot.ec:
            return (0, 0)
        return (int(slot.obj_accepting), int(slot.con_accepting))


def simulate_limit_average(product: ProductMDP, policy,
                           translation: RewardMachineTranslation,
                           horizon: int, seed, trace_path=None,
                           first_transition=None):
    """Run the extended product for `horizon` steps; return average rewards.

    `policy` is called as policy(v, rm_state, rng) and may return original
    actions or committal actions; committal actions leave the environment in
    place.  Rewards are read after each transition at the new state.  With a
    trace_path, a CSV with columns step, env_state, action, E_size, flag,
    r_A, r_B is written alongside.  first_transition=(action, successor)
    forces the outcome of step 0, which supports conditional (stratified)
    estimation over the initial branching.
    """
    if horizon < 1:
        raise RewardMachineError("horizon must be at least 1")
    rng = Random(str(seed))
    v = product.initial
    state = translation.initial_state()
    total_a = 0
    total_b = 0
    rows = []
    for step in range(horizon):
        if step == 0 and first_transition is not None:
            action, v2 = first_transition
        else:
            action = policy(v, state, rng)
            if translation.is_committal(action):
                v2 = v
            else:
                v2 = _sample_row(rng, product.row(v, action))
        state = translation.rm_step(state, v, action, v2)
        r_a, r_b = translation.rm_rewards(state, v2)
        total_a += r_a
        total_b += r_b
        if trace_path is not None:
            rows.append([step, v, action, len(state.E), state.flag_text(),
                         r_a, r_b])
        v = v2
    if trace_path is not None:
        with open(trace_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "env_state", "action", "E_size", "flag",
                        "r_A", "r_B"])
            w.writerows(rows)
    return (Fraction(total_a, horizon), Fraction(total_b, horizon))


def stratified_limit_average(product: ProductMDP, policy,
                             translation: RewardMachineTranslation,
                             horizon: int, seed, first_dist: dict):
    """Conditional Monte Carlo estimate of the expected finite-horizon
    average: branch exactly over the step-0 action distribution and its
    successor probabilities, simulate each branch once, and combine with the
    true branch weights.  Unbiased for the same expectation as
    simulate_limit_average, with the initial branching noise removed.
    """
    total_a = Fraction(0)
    total_b = Fraction(0)
    init = product.initial
    for action, pa in sorted(first_dist.items(), key=lambda kv: str(kv[0])):
        if pa <= 0:
            continue
        for v2, pv in product.row(init, action):
            a, b = simulate_limit_average(
                product, policy, translation, horizon,
                f"{seed}:{action}:{v2}", first_transition=(action, v2))
            total_a += pa * pv * a
            total_b += pa * pv * b
    return (total_a, total_b)


def _sample_row(rng: Random, row):
    x = rng.random()
    acc = 0.0
    for v2, p in row:
        acc += float(p)
        if x < acc:
            return v2
    return row[-1][0]


def _sample_dist(rng: Random, dist: dict):
    items = sorted(dist.items(), key=lambda kv: str(kv[0]))
    x = rng.random()
    acc = 0.0
    for a, p in items:
        acc += float(p)
        if x < acc:
            return a
    return items[-1][0]


class CommitmentPolicy:
    """Extended-action policy realising one occupancy point of the planner.

    Drives the product with the stationary policy of the point; once the run
    sits on a state whose intended accepting end component has been fully
    observed (its slot exists in the current index), plays that slot's
    committal action and from then on follows the distance-decreasing action
    sets of the commitment.
    """

    def __init__(self, product: ProductMDP,
                 translation: RewardMachineTranslation,
                 base: StationaryPolicy, intent: dict):
        self.product = product
        self.translation = translation
        self.base = base
        self.intent = dict(intent)  # product state -> "joint"/"obj"/"con"

    def __call__(self, v, rm_state: RMState, rng: Random):
        if rm_state.committed:
            i, kind = rm_state.flag
            slot = self.translation.index(rm_state.E).get(i)
            if slot is not None and v in slot.ec:
                choices = sorted(slot.allowed(kind).get(v, ()))
                if choices:
                    return choices[rng.randrange(len(choices))]
        elif rm_state.flag == TOP and v in self.intent:
            want = self.intent[v]
            j = self.product.order[v]
            slot_index = 2 * j + 1 if want in ("joint", OBJ) else 2 * j + 2
            slot = self.translation.index(rm_state.E).get(slot_index)
            if slot is not None and v in slot.ec and (
                    slot.kind == want
                    or (slot.kind == "joint" and want == OBJ)):
                return slot_index
        return _sample_dist(rng, self.base.act(v))


def commitment_policy(product: ProductMDP,
                      translation: RewardMachineTranslation,
                      dec, assignment: dict,
                      base: StationaryPolicy) -> CommitmentPolicy:
    """Build the commitment policy for one planner occupancy point.

    The intent map sends every state of a witness accepting end component
    with positive steady-state mass to the acceptance kind that mass pays
    for; jointly classified components always intend the joint witness.
    """
    intent = {}
    for key, value in assignment.items():
        if value <= 0 or key[0] != "ec":
            continue
        _, i, kind = key
        if dec.has_both[i]:
            witness, want = dec.witness_both[i], "joint"
        elif kind == OBJ and dec.has_obj[i]:
            witness, want = dec.witness_obj[i], OBJ
        elif kind == CON and dec.has_con[i]:
            witness, want = dec.witness_con[i], CON
        else:
            continue
        if witness is None:
            continue
        for v in witness.states:
            intent[v] = want
    return CommitmentPolicy(product, translation, base, intent)


class WrappedPolicy:
    """Finite-memory policy on the original MDP induced by an extended one.

    Memory is (objective automaton state, constraint automaton state, shared
    reward-machine state).  Committal actions are compressed into memory-only
    updates, so the environment only ever sees original actions.
    """

    def __init__(self, product: ProductMDP,
                 translation: RewardMachineTranslation, policy):
        self.product = product
        self.translation = translation
        self.policy = policy

    def initial_memory(self):
        obj = self.product.obj_aut.initial if self.product.obj_aut else None
        con = self.product.con_aut.initial if self.product.con_aut else None
        return (obj, con, self.translation.initial_state())

    def _product_state(self, memory, s):
        from .model import product_state_id
        if self.product.projections:
            return product_state_id(s, memory[0], memory[1])
        return s

    def act(self, memory, s, rng: Random):
        """Choose the next environment action, folding committal actions into
        the memory; returns (action in A, memory after those updates)."""
        q, qc, rm = memory
        v = self._product_state(memory, s)
        for _ in range(3):
            action = self.policy(v, rm, rng)
            if not self.translation.is_committal(action):
                return action, (q, qc, rm)
            rm = self.translation.rm_step(rm, v, action, v)
        raise RewardMachineError("policy kept emitting committal actions")

    def observe(self, memory, s, action, s2):
        """Advance the memory over an environment transition."""
        q, qc, rm = memory
        v = self._product_state(memory, s)
        if self.product.mdp is not None:
            letter = self.product.mdp.label(s)
            q = self.product.obj_aut.step(q, letter)
            qc = self.product.con_aut.step(qc, letter)
        v2 = self._product_state((q, qc, None), s2)
        rm = self.translation.rm_step(rm, v, action, v2)
        return (q, qc, rm)


def wrap_policy(product: ProductMDP, translation: RewardMachineTranslation,
                policy) -> WrappedPolicy:
    return WrappedPolicy(product, translation, policy)


# --------------------------------------------------------------------------
# Independent-translation counterexample
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SimpleRewardMachine:
    """A stand-alone Mealy-style reward machine keyed on actions only."""

    states: tuple
    initial: object
    delta: dict  # (state, action) -> (state, reward)

    def step(self, u, action):
        return self.delta[(u, action)]


def _repeat_machine_s0() -> SimpleRewardMachine:
    delta = {
        ("u0", "a"): ("u1", 0),
        ("u0", "b"): ("u2", 0),
        ("u2", "a"): ("u2", 0),
        ("u2", "b"): ("u1", 0),
        ("u1", "a"): ("u1", 0),
        ("u1", "b"): ("dead", 0),
        ("dead", "a"): ("dead", 0),
        ("dead", "b"): ("dead", 0),
    }
    return SimpleRewardMachine(("u0", "u1", "u2", "dead"), "u0", delta)


def _repeat_machine_s1() -> SimpleRewardMachine:
    delta = {
        ("u0", "a"): ("u0", 0),
        ("u0", "b"): ("u1", 0),
        ("u1", "a"): ("u1", 1),
        ("u1", "b"): ("dead", 0),
        ("dead", "a"): ("dead", 0),
        ("dead", "b"): ("dead", 0),
    }
    return SimpleRewardMachine(("u0", "u1", "dead"), "u0", delta)


@dataclass(frozen=True)
class CounterexampleBundle:
    """Two-state deterministic MDP with one reward machine per property.

    The machines translate "visit the left state infinitely often"
    (objective) and "visit the right state infinitely often" (constraint)
    independently of each other.  Every policy earning limit average 1 on
    the constraint machine must switch right once and then stay, which the
    objective machine rewards with limit average 0 — the independent
    translation cannot express alternating between the two.
    """

    transition: dict  # (state, action) -> state
    initial: str
    actions: tuple
    machine_obj: SimpleRewardMachine
    machine_con: SimpleRewardMachine


def independent_translation_counterexample() -> CounterexampleBundle:
    transition = {
        ("s0", "a"): "s0",
        ("s0", "b"): "s1",
        ("s1", "a"): "s1",
        ("s1", "b"): "s0",
    }
    return CounterexampleBundle(
        transition=transition,
        initial="s0",
        actions=("a", "b"),
        machine_obj=_repeat_machine_s0(),
        machine_con=_repeat_machine_s1(),
    )


def machine_limit_average(bundle: CounterexampleBundle, selector: dict,
                          updater: dict, initial_memory=0):
    """Exact limit averages of a deterministic two-memory policy.

    selector maps (memory, state) to an action; updater maps (memory, state,
    action) to the next memory.  The closed system (state, memory, machine
    states) is deterministic and finite, so the limit average is the exact
    average over the eventually reached cycle.
    """
    s = bundle.initial
    m = initial_memory
    u1 = bundle.machine_obj.initial
    u2 = bundle.machine_con.initial
    seen = {}
    rewards = []  # (r_obj, r_con) emitted on step t
    t = 0
    while True:
        key = (s, m, u1, u2)
        if key in seen:
            start = seen[key]
            cycle = rewards[start:]
            n = len(cycle)
            return (Fraction(sum(r for r, _ in cycle), n),
                    Fraction(sum(r for _, r in cycle), n))
        seen[key] = t
        action = selector[(m, s)]
        m = updater[(m, s, action)]
        s2 = bundle.transition[(s, action)]
        u1, r1 = bundle.machine_obj.step(u1, action)
        u2, r2 = bundle.machine_con.step(u2, action)
        rewards.append((r1, r2))
        s = s2
        t += 1


def enumerate_two_memory_policies(bundle: CounterexampleBundle):
    """All deterministic policies with two memory states for the bundle.

    Yields (selector, updater) pairs covering every choice of action per
    (memory, state) and every memory update per (memory, state, action).
    """
    mem = (0, 1)
    sel_keys = [(m, s) for m in mem for s in ("s0", "s1")]
    upd_keys = [(m, s, a) for m in mem for s in ("s0", "s1")
                for a in bundle.actions]
    n_sel = len(bundle.actions) ** len(sel_keys)
    n_upd = len(mem) ** len(upd_keys)
    for si in range(n_sel):
        selector = {}
        x = si
        for key in sel_keys:
            selector[key] = bundle.actions[x % len(bundle.actions)]
            x //= len(bundle.actions)
        for ui in range(n_upd):
            updater = {}
            y = ui
            for key in upd_keys:
                updater[key] = mem[y % len(mem)]
                y //= len(mem)
            yield selector, updater
