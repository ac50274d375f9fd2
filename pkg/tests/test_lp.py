from fractions import Fraction as F

import pytest
from hypothesis import given, strategies as st

from schreierlab.lp import LPError, solve_game

matrices = st.integers(1, 6).flatmap(lambda m: st.integers(1, 6).flatmap(
    lambda n: st.lists(st.lists(st.integers(-9, 9), min_size=n, max_size=n),
                       min_size=m, max_size=m)))


def payoff_bounds(M, sol):
    cols, rows = range(len(M[0])), range(len(M))
    upper = max(sum(M[g][i] * sol.column[i] for i in cols) for g in rows)
    lower = min(sum(M[g][i] * sol.row[g] for g in rows) for i in cols)
    return lower, upper


def test_matching_pennies():
    sol = solve_game([[1, -1], [-1, 1]])
    assert sol.value == 0
    assert sol.column == [F(1, 2), F(1, 2)]


def test_dominated_column():
    # the minimiser always prefers column 1
    sol = solve_game([[1, 3], [2, 5]])
    assert sol.value == 2
    assert sol.column == [1, 0]


def test_single_entry():
    assert solve_game([[F(7, 3)]]).value == F(7, 3)


def test_empty_rejected():
    with pytest.raises(LPError):
        solve_game([])


@given(matrices)
def test_exact_solution_is_certified_by_both_strategies(M):
    sol = solve_game(M)
    assert all(c >= 0 for c in sol.column) and sum(sol.column) == 1
    assert all(y >= 0 for y in sol.row) and sum(sol.row) == 1
    assert payoff_bounds(M, sol) == (sol.value, sol.value)


@given(matrices)
def test_float_agrees_with_exact(M):
    exact = solve_game(M)
    approx = solve_game(M, exact=False)
    assert approx.value == pytest.approx(float(exact.value), abs=1e-9)
    lower, upper = payoff_bounds(M, approx)
    assert lower <= float(exact.value) + 1e-9 <= upper + 2e-9
