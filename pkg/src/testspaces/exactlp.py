"""Dense exact-rational simplex for small linear programs.

min c.x  subject to  A x = b, x >= 0, all entries Fractions.  Bland's rule
throughout, so the iteration cannot cycle.  Intended for desk-scale
problems (tens of variables); everything is O(m*n) per pivot.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Optional, Sequence

from .errors import ValidationError


class Infeasible(ValidationError):
    pass


class Unbounded(ValidationError):
    pass


def solve_lp(
    A: Sequence[Sequence[Fraction]],
    b: Sequence[Fraction],
    c: Sequence[Fraction],
) -> tuple[Fraction, list[Fraction]]:
    """Two-phase simplex; returns (optimal value, an optimal x)."""
    m = len(A)
    n = len(c)
    if any(len(row) != n for row in A) or len(b) != m:
        raise ValidationError("inconsistent LP dimensions")

    # phase 1: artificial identity basis on rows with b >= 0
    T = []
    for i in range(m):
        row = [Fraction(x) for x in A[i]] + [Fraction(0)] * m + [Fraction(b[i])]
        if row[-1] < 0:
            row = [-x for x in row]
        row[n + i] = Fraction(1)
        T.append(row)
    basis = [n + i for i in range(m)]
    cost1 = [Fraction(0)] * n + [Fraction(1)] * m
    _simplex(T, basis, cost1, allowed=n + m)
    if sum((cost1[basis[i]] * T[i][-1] for i in range(m)), Fraction(0)) > 0:
        raise Infeasible("LP has no feasible point")

    # drive leftover artificials out of the basis where possible
    for i in range(m):
        if basis[i] >= n:
            pivot_col = next((j for j in range(n) if T[i][j] != 0), None)
            if pivot_col is not None:
                _pivot(T, i, pivot_col)
                basis[i] = pivot_col
    # rows still basic in an artificial variable are redundant (b component 0)

    cost2 = [Fraction(x) for x in c] + [Fraction(0)] * m
    _simplex(T, basis, cost2, allowed=n)
    x = [Fraction(0)] * n
    for i in range(m):
        if basis[i] < n:
            x[basis[i]] = T[i][-1]
    value = sum((c[j] * x[j] for j in range(n)), Fraction(0))
    return value, x


def _simplex(T, basis, cost, allowed: int) -> None:
    m = len(T)
    while True:
        in_basis = set(basis)
        enter: Optional[int] = None
        for j in range(allowed):
            if j in in_basis:
                continue
            reduced = cost[j] - sum(
                (cost[basis[i]] * T[i][j] for i in range(m) if T[i][j]), Fraction(0)
            )
            if reduced < 0:
                enter = j  # Bland: smallest improving index
                break
        if enter is None:
            return
        leave = None
        best = None
        for i in range(m):
            if T[i][enter] > 0:
                ratio = T[i][-1] / T[i][enter]
                if best is None or ratio < best or (ratio == best and basis[i] < basis[leave]):
                    best = ratio
                    leave = i
        if leave is None:
            raise Unbounded("LP objective is unbounded below")
        _pivot(T, leave, enter)
        basis[leave] = enter


def _pivot(T, row: int, col: int) -> None:
    piv = T[row][col]
    T[row] = [x / piv for x in T[row]]
    for i in range(len(T)):
        if i != row and T[i][col]:
            f = T[i][col]
            T[i] = [a - f * b for a, b in zip(T[i], T[row])]
