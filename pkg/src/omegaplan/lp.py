"""The constrained linear program over MEC variables, its exact solution,
and the two-vertex convex decomposition of the optimum.

Variables, keyed by structured tuples:
  ("ec", i, "obj") / ("ec", i, "con")  mass entering and never leaving an
                                       accepting EC inside MEC i
  ("exit", v, a)                       mass taking the possibly-leaving
                                       action a in state v of its MEC
Rows: one mass-flow equality per (reachable) MEC, one inequality for the
constraint threshold.  MECs that hold a jointly accepting EC contribute both
of their EC variables to both the objective and the constraint row; mass
committed to a joint EC satisfies both conditions at once.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from omegaplan import simplex
from omegaplan.graph import MECDecomposition, reachable_mecs
from omegaplan.model import ProductMDP, format_fraction

ZERO = Fraction(0)
ONE = Fraction(1)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED_GUARD = "unbounded-guard"


class LPError(ValueError):
    pass


@dataclass
class ConstrainedLP:
    variables: list  # structured keys, canonical order
    index: dict  # key -> column
    objective: list  # Fractions per column
    constraint: list  # Fractions per column (row of c.x >= p)
    threshold: Fraction
    eq_rows: list  # list of rows (lists of Fractions)
    eq_rhs: list
    mec_of_row: list  # mec index per equality row
    kept_mecs: list  # mec indices that survived reachability pruning

    def dump(self) -> str:
        """Plain-text rendering with exact rationals, for diagnostics."""
        def render(coeffs):
            terms = [f"{format_fraction(c)}*{_var_name(k)}"
                     for k, c in zip(self.variables, coeffs) if c != ZERO]
            return " + ".join(terms) if terms else "0"

        lines = [f"maximize {render(self.objective)}",
                 f"subject to {render(self.constraint)} >= {format_fraction(self.threshold)}"]
        for row, rhs in zip(self.eq_rows, self.eq_rhs):
            lines.append(f"  {render(row)} = {format_fraction(rhs)}")
        return "\n".join(lines)


def _var_name(key) -> str:
    if key[0] == "ec":
        return f"x[ec{key[1]},{key[2]}]"
    return f"x[{key[1]},{key[2]}]"


@dataclass
class LPSolution:
    status: str
    value: Optional[Fraction] = None
    assignment: Optional[dict] = None  # key -> Fraction
    vector: Optional[list] = None
    decomposition: Optional[tuple] = None  # (lam, x1, x2) as assignments


def build_lp(dec: MECDecomposition, product: ProductMDP, p: Fraction) -> ConstrainedLP:
    """Assemble the LP for constraint threshold p over the classified
    decomposition.  MECs unreachable in the DAG from the initial MEC are
    dropped; flow conservation forces their variables to zero anyway."""
    p = Fraction(p)
    if not (ZERO <= p <= ONE):
        raise LPError(f"threshold must be in [0,1], got {p}")
    if not dec.classified:
        raise LPError("decomposition must be classified before building the LP")

    kept = reachable_mecs(dec, product.initial)
    kept_set = set(kept)

    variables = []
    for i in kept:
        variables.append(("ec", i, "obj"))
        variables.append(("ec", i, "con"))
        mec = dec.mecs[i]
        for v in sorted(mec.states, key=product.order.__getitem__):
            for a in product.enabled(v):
                if a not in mec.act[v]:
                    variables.append(("exit", v, a))
    index = {k: j for j, k in enumerate(variables)}
    ncols = len(variables)

    # Conditional exit probabilities: for exit var (v, a) in MEC i, the mass
    # reaching MEC j is weighted by P(v,a,T_j) / P(v,a, outside T_i).
    exit_weight = {}  # (v, a) -> {target mec j: Fraction}
    for key in variables:
        if key[0] != "exit":
            continue
        _, v, a = key
        i = dec.index_of[v]
        home = dec.mecs[i].states
        denom = sum((pr for v2, pr in product.row(v, a) if v2 not in home), ZERO)
        targets = {}
        for v2, pr in product.row(v, a):
            if v2 in home:
                continue
            j = dec.index_of[v2]
            targets[j] = targets.get(j, ZERO) + pr / denom
        exit_weight[(v, a)] = targets

    init_mec = dec.index_of[product.initial]
    eq_rows = []
    eq_rhs = []
    mec_of_row = []
    for i in kept:
        row = [ZERO] * ncols
        row[index[("ec", i, "obj")]] = ONE
        row[index[("ec", i, "con")]] = ONE
        for key in variables:
            if key[0] == "exit" and dec.index_of[key[1]] == i:
                row[index[key]] = ONE
        # inflow from exit variables of other kept MECs
        for (v, a), targets in exit_weight.items():
            w = targets.get(i)
            if w is not None and dec.index_of[v] != i:
                row[index[("exit", v, a)]] -= w
        eq_rows.append(row)
        eq_rhs.append(ONE if i == init_mec else ZERO)
        mec_of_row.append(i)

    objective = [ZERO] * ncols
    constraint = [ZERO] * ncols
    for i in kept:
        if dec.has_obj[i]:
            objective[index[("ec", i, "obj")]] = ONE
        if dec.has_con[i]:
            constraint[index[("ec", i, "con")]] = ONE
        if dec.has_both[i]:
            objective[index[("ec", i, "con")]] = ONE
            constraint[index[("ec", i, "obj")]] = ONE

    return ConstrainedLP(
        variables=variables,
        index=index,
        objective=objective,
        constraint=constraint,
        threshold=p,
        eq_rows=eq_rows,
        eq_rhs=eq_rhs,
        mec_of_row=mec_of_row,
        kept_mecs=kept,
    )


def solve(lp: ConstrainedLP) -> LPSolution:
    """Exact optimum of the LP via two-phase primal simplex (Bland's rule).

    The constraint c.x >= p gets one surplus column.  The feasible region is
    bounded by the flow rows, so an unbounded verdict signals a construction
    bug, not a property of the input.
    """
    ncols = len(lp.variables)
    A = [row + [ZERO] for row in lp.eq_rows]
    A.append(list(lp.constraint) + [-ONE])
    b = list(lp.eq_rhs) + [lp.threshold]
    c = list(lp.objective) + [ZERO]
    status, x, value = simplex.solve_standard_form(A, b, c)
    if status == simplex.INFEASIBLE:
        return LPSolution(status=INFEASIBLE)
    if status == simplex.UNBOUNDED:
        return LPSolution(status=UNBOUNDED_GUARD)
    vector = x[:ncols]
    assignment = {k: v for k, v in zip(lp.variables, vector) if v != ZERO}
    return LPSolution(status=OPTIMAL, value=value, assignment=assignment,
                      vector=vector)


def solve_unconstrained(lp_like_objective, eq_rows, eq_rhs, variables):
    """Helper for weighted / fallback programs: max objective s.t. the
    equality rows only."""
    status, x, value = simplex.solve_standard_form(eq_rows, eq_rhs,
                                                   lp_like_objective)
    if status != simplex.OPTIMAL:
        return LPSolution(status=INFEASIBLE if status == simplex.INFEASIBLE
                          else UNBOUNDED_GUARD)
    assignment = {k: v for k, v in zip(variables, x) if v != ZERO}
    return LPSolution(status=OPTIMAL, value=value, assignment=assignment, vector=x)


def is_feasible(lp: ConstrainedLP, vector) -> bool:
    if any(v < ZERO for v in vector):
        return False
    for row, rhs in zip(lp.eq_rows, lp.eq_rhs):
        if sum((r * v for r, v in zip(row, vector)), ZERO) != rhs:
            return False
    lhs = sum((r * v for r, v in zip(lp.constraint, vector)), ZERO)
    return lhs >= lp.threshold


def decompose(lp: ConstrainedLP, solution: LPSolution):
    """Split the optimum into lam * x1 + (1-lam) * x2 where each endpoint is
    a vertex of the equality polytope (at most one positive variable per MEC).

    A basic optimum either is such a vertex already (lam = 1), or sits where
    the threshold hyperplane cuts an edge of the equality polytope; in the
    latter case the support admits exactly one equality-kernel direction and
    we walk it to both endpoints.
    """
    if solution.status != OPTIMAL or solution.vector is None:
        raise LPError("decompose needs an optimal solution")
    x = list(solution.vector)
    if not is_feasible(lp, x):
        raise LPError("solution vector is not feasible")
    support = [j for j, v in enumerate(x) if v != ZERO]
    direction = _kernel_direction(lp.eq_rows, support, len(x))
    if direction is None:
        assignment = dict(solution.assignment or {})
        return ONE, assignment, dict(assignment)

    # Normalise: first nonzero entry (canonical variable order) positive.
    for j in range(len(x)):
        if direction[j] != ZERO:
            if direction[j] < ZERO:
                direction = [-d for d in direction]
            break

    def max_step(sign):
        t = None
        for j, d in enumerate(direction):
            d = d * sign
            if d < ZERO:
                cand = x[j] / (-d)
                if t is None or cand < t:
                    t = cand
        if t is None:
            raise LPError("unbounded edge in bounded polytope")
        return t

    t_plus = max_step(ONE)
    t_minus = max_step(-ONE)
    x1 = [xi + t_plus * di for xi, di in zip(x, direction)]
    x2 = [xi - t_minus * di for xi, di in zip(x, direction)]
    lam = t_minus / (t_plus + t_minus)
    a1 = {k: v for k, v in zip(lp.variables, x1) if v != ZERO}
    a2 = {k: v for k, v in zip(lp.variables, x2) if v != ZERO}
    return lam, a1, a2


def _kernel_direction(eq_rows, support, ncols):
    """A nonzero direction in the kernel of the equality matrix restricted to
    the support columns (embedded with zeros elsewhere), or None if the
    support columns are linearly independent."""
    if not support:
        return None
    m = len(eq_rows)
    k = len(support)
    mat = [[eq_rows[i][j] for j in support] for i in range(m)]
    # Gauss-Jordan; track pivot column per row.
    pivots = []
    r = 0
    for col in range(k):
        sel = None
        for i in range(r, m):
            if mat[i][col] != ZERO:
                sel = i
                break
        if sel is None:
            # free column: build the kernel vector straight away
            vec = [ZERO] * k
            vec[col] = ONE
            for prow, pcol in pivots:
                vec[pcol] = -mat[prow][col]
            out = [ZERO] * ncols
            for idx, j in enumerate(support):
                out[j] = vec[idx]
            return out
        mat[r], mat[sel] = mat[sel], mat[r]
        piv = mat[r][col]
        mat[r] = [v / piv for v in mat[r]]
        for i in range(m):
            if i != r and mat[i][col] != ZERO:
                f = mat[i][col]
                mat[i] = [v - f * w for v, w in zip(mat[i], mat[r])]
        pivots.append((r, col))
        r += 1
        if r == m:
            # remaining columns are all free (if any)
            if r < k and col + 1 < k:
                colf = col + 1
                vec = [ZERO] * k
                vec[colf] = ONE
                for prow, pcol in pivots:
                    vec[pcol] = -mat[prow][colf]
                out = [ZERO] * ncols
                for idx, j in enumerate(support):
                    out[j] = vec[idx]
                return out
            break
    return None
