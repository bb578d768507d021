"""Shared generators and oracles for the test suite."""

import itertools
import random
from fractions import Fraction

from omegaplan.graph import strongly_connected_components
from omegaplan.model import ProductMDP


def random_product(rng: random.Random) -> ProductMDP:
    """Small random product-level MDP (<= 6 states, <= 2 actions)."""
    n = rng.randrange(2, 7)
    states = [f"v{i}" for i in range(n)]
    actions = ["a", "b"][: rng.randrange(1, 3)]
    kernel = {}
    for v in states:
        for act in actions[: rng.randrange(1, len(actions) + 1)]:
            k = rng.randrange(1, 3)
            succs = rng.sample(states, min(k, n))
            if len(succs) == 1:
                kernel[(v, act)] = [(succs[0], Fraction(1))]
            else:
                kernel[(v, act)] = [(succs[0], Fraction(1, 2)),
                                    (succs[1], Fraction(1, 2))]
    inf_a = set(rng.sample(states, rng.randrange(0, n + 1)))
    fin_a = set(rng.sample(states, rng.randrange(0, 2)))
    inf_b = set(rng.sample(states, rng.randrange(0, n + 1)))
    pairs_obj = [(inf_a, fin_a - inf_a)] if inf_a else []
    pairs_con = [(inf_b, set())] if inf_b else []
    return ProductMDP.from_explicit(states, "v0", actions, kernel,
                                    pairs_obj, pairs_con)


def exhaustive_mecs(prod: ProductMDP):
    """All maximal nontrivial end components by brute-force subset search."""
    ecs = []
    states = list(prod.states)
    for r in range(1, len(states) + 1):
        for subset in itertools.combinations(states, r):
            inside = set(subset)
            act = {v: frozenset(a for a in prod.enabled(v)
                                if all(u in inside
                                       for u in prod.successors(v, a)))
                   for v in subset}
            if not all(act[v] for v in subset):
                continue
            succ = {v: sorted({u for a in act[v]
                               for u in prod.successors(v, a)})
                    for v in subset}
            comps = strongly_connected_components(
                sorted(subset), lambda v: succ[v])
            if len(comps) != 1:
                continue
            ecs.append(inside)
    return [ec for ec in ecs
            if not any(other > ec for other in ecs)]


def solve_square(rows, rhs):
    """Exact solve of a square rational system; None if singular."""
    n = len(rows)
    aug = [list(row) + [b] for row, b in zip(rows, rhs)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if aug[r][col] != 0), None)
        if pivot is None:
            return None
        aug[col], aug[pivot] = aug[pivot], aug[col]
        inv = Fraction(1) / aug[col][col]
        aug[col] = [x * inv for x in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                factor = aug[r][col]
                aug[r] = [x - factor * y for x, y in zip(aug[r], aug[col])]
    return [aug[r][n] for r in range(n)]


def enumerate_basic_optima(A, b, c):
    """Brute-force LP oracle: best objective over basic feasible solutions of
    {Ax = b, x >= 0}; returns (status, value)."""
    m = len(A)
    n = len(A[0]) if A else 0
    best = None
    feasible = False
    if all(x == 0 for x in b):
        feasible = True
        best = Fraction(0)
    for size in range(1, min(m, n) + 1):
        for cols in itertools.combinations(range(n), size):
            for rows in itertools.combinations(range(m), size):
                sub = [[A[r][cc] for cc in cols] for r in rows]
                rhs = [b[r] for r in rows]
                sol = solve_square(sub, rhs)
                if sol is None or any(x < 0 for x in sol):
                    continue
                x = [Fraction(0)] * n
                for cc, val in zip(cols, sol):
                    x[cc] = val
                if any(sum((A[r][j] * x[j] for j in range(n)), Fraction(0))
                       != b[r] for r in range(m)):
                    continue
                feasible = True
                value = sum((c[j] * x[j] for j in range(n)), Fraction(0))
                if best is None or value > best:
                    best = value
    if not feasible:
        return ("infeasible", None)
    return ("optimal", best)
