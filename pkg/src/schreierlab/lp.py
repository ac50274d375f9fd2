"""Zero-sum matrix games by a dense primal simplex with Bland's rule.

The same routine runs over ``Fraction`` (exact) or ``float``.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import List, Sequence

import numpy as np

FLOAT_EPS = 1e-12


class LPError(ArithmeticError):
    pass


@dataclass
class GameSolution:
    value: object
    column: List[object]   # minimiser's mixed strategy over columns
    row: List[object]      # maximiser's mixed strategy over rows
    pivots: int


def solve_game(M: Sequence[Sequence], exact: bool = True) -> GameSolution:
    """``min_a max_g (M a)_g`` over the simplex, ``M`` indexed ``[g][i]``."""
    if not M or not M[0]:
        raise LPError("empty payoff matrix")
    if exact:
        return _solve_exact([[Fraction(v) for v in row] for row in M])
    return _solve_float(np.asarray(M, dtype=float))


def _shift(lowest):
    return 1 - lowest if lowest <= 0 else 0


def _solve_exact(M: List[List[Fraction]]) -> GameSolution:
    m, n = len(M), len(M[0])
    K = _shift(min(min(r) for r in M))
    # maximise sum(u) subject to (M + K) u <= 1, u >= 0
    T = [[v + K for v in row] + [Fraction(int(i == j)) for j in range(m)] + [Fraction(1)]
         for i, row in enumerate(M)]
    obj = [Fraction(-1)] * n + [Fraction(0)] * (m + 1)
    basis = [n + i for i in range(m)]
    pivots = 0
    while True:
        enter = next((j for j in range(n + m) if obj[j] < 0), None)
        if enter is None:
            break
        leave, best = None, None
        for i in range(m):
            a = T[i][enter]
            if a > 0:
                ratio = T[i][-1] / a
                if best is None or ratio < best or (ratio == best and basis[i] < basis[leave]):
                    leave, best = i, ratio
        if leave is None:
            raise LPError("unbounded game LP")
        piv = T[leave][enter]
        row = [v / piv for v in T[leave]]
        T[leave] = row
        for i in range(m):
            if i != leave and T[i][enter] != 0:
                f = T[i][enter]
                T[i] = [a - f * b for a, b in zip(T[i], row)]
        f = obj[enter]
        obj = [a - f * b for a, b in zip(obj, row)]
        basis[leave] = enter
        pivots += 1
    u = [Fraction(0)] * n
    for i, b in enumerate(basis):
        if b < n:
            u[b] = T[i][-1]
    total = obj[-1]
    if total <= 0:
        raise LPError("degenerate game LP")
    y = obj[n:n + m]
    return GameSolution(1 / total - K, [v / total for v in u], [v / total for v in y], pivots)


def _solve_float(M: np.ndarray) -> GameSolution:
    m, n = M.shape
    K = _shift(float(M.min()))
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = M + K
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = 1.0
    T[m, :n] = -1.0
    basis = list(range(n, n + m))
    pivots = 0
    limit = 50 * (n + m) + 1000
    while True:
        neg = np.nonzero(T[m, :-1] < -FLOAT_EPS)[0]
        if neg.size == 0:
            break
        enter = int(neg[0])
        col = T[:m, enter]
        ok = col > FLOAT_EPS
        if not ok.any():
            raise LPError("unbounded game LP")
        ratios = np.full(m, np.inf)
        ratios[ok] = T[:m, -1][ok] / col[ok]
        best = ratios.min()
        tied = np.nonzero(ratios <= best + FLOAT_EPS * max(1.0, best))[0]
        leave = int(min(tied, key=lambda i: basis[i]))
        T[leave] /= T[leave, enter]
        f = T[:, enter].copy()
        f[leave] = 0.0
        T -= np.outer(f, T[leave])
        basis[leave] = enter
        pivots += 1
        if pivots > limit:
            raise LPError("simplex did not terminate")
    u = np.zeros(n)
    for i, b in enumerate(basis):
        if b < n:
            u[b] = T[i, -1]
    total = T[m, -1]
    if total <= 0:
        raise LPError("degenerate game LP")
    y = np.maximum(T[m, n:n + m], 0.0)
    col = np.maximum(u, 0.0) / total
    return GameSolution(float(1 / total - K), [float(v) for v in col / col.sum()],
                        [float(v) for v in y / y.sum()], pivots)
