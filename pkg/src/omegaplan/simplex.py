"""Exact-rational primal simplex with Bland's anti-cycling rule.

Solves max c.x subject to A x = b, x >= 0 over Fractions.  Two phases:
artificial variables to find a basic feasible solution, then the real
objective.  No tolerances anywhere; comparisons are exact.
"""

from __future__ import annotations

from fractions import Fraction

ZERO = Fraction(0)
ONE = Fraction(1)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


def solve_standard_form(A, b, c):
    """Return (status, x, value) for max c.x s.t. A x = b, x >= 0.

    A: list of rows (lists of Fraction), b: list, c: list.  The returned x is
    a basic optimal solution (a vertex of the feasible region).
    """
    m = len(A)
    n = len(c)
    rows = [[Fraction(v) for v in row] for row in A]
    rhs = [Fraction(v) for v in b]
    for i in range(m):
        if rhs[i] < ZERO:
            rows[i] = [-v for v in rows[i]]
            rhs[i] = -rhs[i]

    # Phase 1: minimise the sum of artificials (as max of the negated sum).
    # Tableau columns: n structural + m artificial.
    tab = [rows[i] + [ONE if j == i else ZERO for j in range(m)] + [rhs[i]]
           for i in range(m)]
    basis = [n + i for i in range(m)]
    # negated-cost convention: minimising the artificial sum stores +1 here
    obj1 = [ZERO] * n + [ONE] * m + [ZERO]
    _reduce_objective(obj1, tab, basis)
    _iterate(tab, basis, obj1, n + m)
    if obj1[-1] != ZERO:
        return INFEASIBLE, None, None

    _drive_out_artificials(tab, basis, n, m)

    # Drop redundant rows (the ones still basic in a zero-valued artificial:
    # their structural coefficients are all zero after phase 1).
    keep = [i for i in range(len(tab)) if basis[i] < n]
    tab = [tab[i] for i in keep]
    basis = [basis[i] for i in keep]

    # Phase 2 on structural columns only.
    tab2 = [row[:n] + [row[-1]] for row in tab]
    obj2 = [Fraction(v) for v in c] + [ZERO]
    # maximise: store negated reduced costs so the pivot rule is shared.
    obj2 = [-v for v in obj2[:-1]] + [ZERO]
    _reduce_objective(obj2, tab2, basis)
    status = _iterate(tab2, basis, obj2, n)
    if status == UNBOUNDED:
        return UNBOUNDED, None, None
    x = [ZERO] * n
    for i, j in enumerate(basis):
        if j < n:
            x[j] = tab2[i][-1]
    value = sum((ci * xi for ci, xi in zip(c, x)), ZERO)
    return OPTIMAL, x, value


def _reduce_objective(obj, tab, basis):
    for i, j in enumerate(basis):
        coeff = obj[j]
        if coeff != ZERO:
            row = tab[i]
            for k in range(len(obj)):
                obj[k] -= coeff * row[k]


def _iterate(tab, basis, obj, ncols):
    """Pivot until no negative reduced cost remains (objective row stores
    negated costs, so 'negative entry' means 'improving column').  Bland:
    smallest improving column, smallest-index leaving row on ties."""
    m = len(tab)
    while True:
        enter = -1
        for j in range(ncols):
            if obj[j] < ZERO:
                enter = j
                break
        if enter < 0:
            return OPTIMAL
        leave = -1
        best = None
        for i in range(m):
            a = tab[i][enter]
            if a > ZERO:
                ratio = tab[i][-1] / a
                if best is None or ratio < best or (ratio == best and basis[i] < basis[leave]):
                    best = ratio
                    leave = i
        if leave < 0:
            return UNBOUNDED
        _pivot(tab, basis, obj, leave, enter)


def _pivot(tab, basis, obj, r, col):
    piv = tab[r][col]
    tab[r] = [v / piv for v in tab[r]]
    prow = tab[r]
    for i in range(len(tab)):
        if i == r:
            continue
        f = tab[i][col]
        if f != ZERO:
            tab[i] = [v - f * p for v, p in zip(tab[i], prow)]
    f = obj[col]
    if f != ZERO:
        for k in range(len(obj)):
            obj[k] -= f * prow[k]
    basis[r] = col


def _drive_out_artificials(tab, basis, n, m):
    """Pivot artificial variables out of the basis; rows that cannot pivot on
    any structural column are redundant and zeroed."""
    for i in range(m):
        if basis[i] >= n:
            col = -1
            for j in range(n):
                if tab[i][j] != ZERO:
                    col = j
                    break
            if col >= 0:
                _pivot(tab, basis, [ZERO] * (len(tab[i])), i, col)
            # else: redundant row; leave the zero-valued artificial basic.
