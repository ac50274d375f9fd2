"""Certified spreading-model constants.

For vectors ``x_1..x_N`` and an ordinal ``xi`` the constant is

    delta = min over E in S_xi, E inside {1..N}, of  min_a || sum_{i in E} a_i (x_i - c) ||

with ``a`` on the simplex (``convex``) or on the l1 sphere (``ell1_sphere``).
Both inner problems only get smaller on larger sets, so only sets that are
maximal inside the index range are visited.

The inner minimum over a polyhedral norm is found by cutting planes: a
finite pool of witness functionals gives a linear lower model, the model is
minimised as a matrix game, and the true norm at the model's minimiser both
bounds the answer from above and contributes a new functional. In exact mode
the loop stops when both bounds coincide.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, List, Optional, Sequence, Tuple

from .families import (FamilyError, ResourceError, _contains, finset,
                        maximal_in_range, schreier_contains)
from .lp import solve_game
from .norms import evaluate, norm_from_json, norm_to_json
from .ordinal import Ordinal
from .vectors import (FLOAT, RATIONAL, Functional, Scalar, Vector, basis_vector,
                      combine, scalar_to_json, to_scalar)

CONVEX = "convex"
ELL1_SPHERE = "ell1_sphere"
SIGN_CAP = 12
DEFAULT_SET_CAP = 24
DEFAULT_RANGE_CAP = 24


class SpreadingError(Exception):
    pass


class ConstructionError(SpreadingError):
    pass


@dataclass(frozen=True)
class SpreadingQuery:
    vectors: Tuple[Vector, ...]
    norm: object
    xi: Ordinal
    mode: str = CONVEX
    center: Vector = Vector()
    tolerance: float = 1e-9
    set_size_cap: int = DEFAULT_SET_CAP
    exact: bool = True

    def __post_init__(self):
        object.__setattr__(self, "vectors", tuple(self.vectors))
        object.__setattr__(self, "xi", Ordinal.of(self.xi))
        if not self.vectors:
            raise SpreadingError("need at least one vector")
        if not self.tolerance > 0:
            raise SpreadingError("tolerance must be positive")
        if self.mode not in (CONVEX, ELL1_SPHERE):
            raise SpreadingError(f"unknown mode {self.mode!r}")
        if self.mode == ELL1_SPHERE and self.set_size_cap > SIGN_CAP:
            raise SpreadingError(f"ell1_sphere mode allows set_size_cap <= {SIGN_CAP}")

    @property
    def scalar_mode(self) -> str:
        return RATIONAL if self.exact else FLOAT

    def difference(self, i: int) -> Vector:
        """``x_i - center`` for 1-based ``i`` in the chosen scalar mode."""
        v = self.vectors[i - 1] - self.center
        return v.with_mode(self.scalar_mode)

    def to_json(self) -> dict:
        return {"vectors": [v.to_json() for v in self.vectors], "norm": norm_to_json(self.norm),
                "xi": str(self.xi), "mode": self.mode, "center": self.center.to_json(),
                "tolerance": self.tolerance, "set_size_cap": self.set_size_cap,
                "exact": self.exact}

    @classmethod
    def from_json(cls, data: dict, load_family=None) -> "SpreadingQuery":
        exact = bool(data.get("exact", True))
        mode = RATIONAL if exact else FLOAT
        return cls(tuple(Vector.from_json(v, mode) for v in data["vectors"]),
                   norm_from_json(data["norm"], load_family), Ordinal.of(str(data["xi"])),
                   data.get("mode", CONVEX), Vector.from_json(data.get("center", {}), mode),
                   float(data.get("tolerance", 1e-9)),
                   int(data.get("set_size_cap", DEFAULT_SET_CAP)), exact)


@dataclass
class InnerResult:
    value: Scalar
    coeffs: List[Scalar]
    functional: Functional
    lower: Scalar
    rounds: int
    abandoned: bool = False


@dataclass
class Certificate:
    delta: Scalar
    witness_E: Tuple[int, ...]
    witness_coeffs: List[Scalar]
    witness_functional: Functional
    gap: Scalar
    lower: Scalar
    sets_examined: int = 0
    index_range: Tuple[int, int] = (1, 1)

    def to_json(self) -> dict:
        return {"delta": scalar_to_json(self.delta), "witness_E": list(self.witness_E),
                "witness_coeffs": [scalar_to_json(c) for c in self.witness_coeffs],
                "witness_functional": self.witness_functional.to_json(),
                "gap": scalar_to_json(self.gap), "lower_bound": scalar_to_json(self.lower),
                "sets_examined": self.sets_examined,
                "index_range": list(self.index_range)}


# -- inner problem -------------------------------------------------------------

def _convex_min(q: SpreadingQuery, diffs: Sequence[Vector], seeds: Sequence[Functional] = (),
                stop_above=None, vertex=None) -> InnerResult:
    """Cutting-plane minimisation of ``||sum a_i d_i||`` over the simplex."""
    exact = q.exact
    zero = Fraction(0) if exact else 0.0
    k = len(diffs)
    pool: List[Functional] = []
    keys = set()

    def add(g: Functional):
        key = tuple(sorted(g.terms.items()))
        if key not in keys:
            keys.add(key)
            pool.append(g)
            rows.append([g(d) for d in diffs])
            return True
        return False

    rows: List[List[Scalar]] = []
    best = None
    for i, d in enumerate(diffs):
        value, g = vertex(i) if vertex is not None else evaluate(q.norm, d)
        if best is None or value < best[0]:
            coeffs = [zero] * k
            coeffs[i] = Fraction(1) if exact else 1.0
            best = (value, coeffs, g)
        add(g)
    for g in seeds:
        add(g)
    if all(not d for d in diffs):
        return InnerResult(zero, best[1], best[2], zero, 0)
    rounds = 0
    lower = zero
    while True:
        rounds += 1
        if not rows:
            # every difference vector is zero on every pooled functional
            rows.append([zero] * k)
        game = solve_game(rows, exact=exact)
        if exact:
            lower = game.value
        else:
            # dual bound recomputed from the maximiser's strategy
            y = game.row
            lower = min(sum(y[r] * rows[r][j] for r in range(len(rows))) for j in range(k))
        a = game.column
        y_vec = combine(a, diffs)
        value, g = evaluate(q.norm, y_vec)
        if value < best[0]:
            best = (value, list(a), g)
        if best[0] - lower <= (0 if exact else q.tolerance):
            break
        if stop_above is not None and lower > stop_above:
            return InnerResult(best[0], best[1], best[2], lower, rounds, abandoned=True)
        if not add(g):
            # no new cut although the bounds differ: the model is exact at a
            if exact:
                raise SpreadingError("cutting planes stalled in exact mode")
            break
    return InnerResult(best[0], best[1], best[2], lower, rounds)


def inner_min(q: SpreadingQuery, E: Sequence[int], seeds: Sequence[Functional] = (),
              stop_above=None, cache: Optional[dict] = None) -> InnerResult:
    """Minimum over coefficients supported on ``E`` (which must lie in ``S_xi``)."""
    E = finset(E)
    if not E:
        raise SpreadingError("E must be nonempty")
    if E[-1] > len(q.vectors):
        raise SpreadingError(f"E reaches index {E[-1]} beyond the {len(q.vectors)} vectors")
    if not _contains(q.xi, E):
        raise FamilyError(f"{list(E)} is not in S_{q.xi}")
    if len(E) > q.set_size_cap:
        raise ResourceError(f"|E| = {len(E)} exceeds set size cap {q.set_size_cap}")
    diffs = [q.difference(i) for i in E]
    if q.mode == CONVEX:
        vertex = None
        if cache is not None:
            def vertex(pos):
                i = E[pos]
                if i not in cache:
                    cache[i] = evaluate(q.norm, diffs[pos])
                return cache[i]
        return _convex_min(q, diffs, seeds, stop_above, vertex)
    results = []
    # the norm is even, so the first sign can stay positive
    for signs in itertools.product((1, -1), repeat=len(E) - 1):
        s = (1,) + signs
        flipped = [d if si == 1 else -d for d, si in zip(diffs, s)]
        res = _convex_min(q, flipped, seeds, stop_above)
        res.coeffs = [c * si for c, si in zip(res.coeffs, s)]
        results.append(res)
    best = min(results, key=lambda r: r.value)
    lower = min(r.lower for r in results)
    return InnerResult(best.value, best.coeffs, best.functional, lower,
                       sum(r.rounds for r in results),
                       abandoned=stop_above is not None and lower > stop_above)


# -- outer enumeration ---------------------------------------------------------

def _candidates(xi: Ordinal, lo: int, hi: int):
    return maximal_in_range(xi, lo, hi)


def spreading_constant(q: SpreadingQuery, lo: int = 1, range_cap: int = DEFAULT_RANGE_CAP,
                       progress: Optional[Callable[[int, int], None]] = None) -> Certificate:
    """Minimum of :func:`inner_min` over members of ``S_xi`` inside ``{lo..N}``.

    A set is abandoned early only when its certified lower bound already
    exceeds the incumbent, which cannot change the minimum or the
    tie-breaking (lexicographically smallest minimiser).
    """
    N = len(q.vectors)
    if not 1 <= lo <= N:
        raise SpreadingError(f"index range {lo}..{N} is empty")
    if N - lo + 1 > range_cap:
        raise ResourceError(f"index range of size {N - lo + 1} exceeds cap {range_cap}")
    cands = _candidates(q.xi, lo, N)
    too_big = [E for E in cands if len(E) > q.set_size_cap]
    if too_big:
        raise ResourceError(f"admissible set {list(too_big[0])} exceeds set size cap {q.set_size_cap}")
    slack = 0 if q.exact else q.tolerance
    best: Optional[Tuple[InnerResult, Tuple[int, ...]]] = None
    lower_all = None
    seeds: List[Functional] = []
    vertex_cache: dict = {}
    for n, E in enumerate(cands):
        cap = None if best is None else best[0].value + slack
        res = inner_min(q, E, seeds=seeds, stop_above=cap, cache=vertex_cache)
        lower_all = res.lower if lower_all is None else min(lower_all, res.lower)
        if not res.abandoned and (best is None or res.value < best[0].value - slack):
            best = (res, E)
            seeds = [res.functional]
        if progress:
            progress(n + 1, len(cands))
    res, E = best
    lower = min(lower_all, res.lower)
    return Certificate(delta=res.value, witness_E=E, witness_coeffs=res.coeffs,
                       witness_functional=res.functional, gap=res.value - lower, lower=lower,
                       sets_examined=len(cands), index_range=(lo, N))


@dataclass
class NotFound:
    index_range: Tuple[int, int]
    delta: Scalar

    def to_json(self) -> dict:
        return {"found": False, "index_range": list(self.index_range),
                "best_value": scalar_to_json(self.delta),
                "note": "statement about the searched range only"}


@dataclass
class Flattening:
    E: Tuple[int, ...]
    coeffs: List[Scalar]
    value: Scalar

    def to_json(self) -> dict:
        return {"found": True, "E": list(self.E),
                "coeffs": [scalar_to_json(c) for c in self.coeffs],
                "value": scalar_to_json(self.value)}


def flattening_search(vectors: Sequence[Vector], norm, xi, eps, index_floor: int = 0,
                      mode: str = CONVEX, exact: bool = True, tolerance: float = 1e-9,
                      range_cap: int = DEFAULT_RANGE_CAP):
    """An admissible ``E`` with ``min E > index_floor`` and normalised
    coefficients of norm below ``eps``, or :class:`NotFound` for this range."""
    eps = to_scalar(eps, RATIONAL if exact else FLOAT)
    if not eps > 0:
        raise SpreadingError("eps must be positive")
    set_cap = SIGN_CAP if mode == ELL1_SPHERE else max(DEFAULT_SET_CAP, range_cap)
    q = SpreadingQuery(tuple(vectors), norm, Ordinal.of(xi), mode, tolerance=tolerance,
                       exact=exact, set_size_cap=set_cap)
    lo = index_floor + 1
    if lo > len(vectors):
        return NotFound((lo, len(vectors)), None)
    cert = spreading_constant(q, lo=lo, range_cap=range_cap)
    if cert.delta < eps:
        return Flattening(cert.witness_E, cert.witness_coeffs, cert.delta)
    return NotFound((lo, len(vectors)), cert.delta)


def build_average(stage_witnesses: Sequence[Tuple[Sequence[int], Sequence[Scalar]]], m: int,
                  basis_map: Callable[[int], Vector] = basis_vector, k=None) -> Vector:
    """``sum_{i=m+1}^{2m} (1/m) sum_{j in E_i} a_j basis_map(j)``.

    ``stage_witnesses[i-1]`` is ``(E_i, coeffs)``. With ``k`` given, each
    ``E_i`` must lie in ``S_k`` and the union of the averaged blocks in
    ``S_{k+1}``.
    """
    if m < 1:
        raise ConstructionError("m must be positive")
    if len(stage_witnesses) < 2 * m:
        raise ConstructionError(f"need {2 * m} stage witnesses, got {len(stage_witnesses)}")
    blocks = []
    prev = 0
    for i, (E, coeffs) in enumerate(stage_witnesses[:2 * m], start=1):
        E = finset(E)
        if not E or len(coeffs) != len(E):
            raise ConstructionError(f"stage {i}: set and coefficients do not match")
        if E[0] <= prev:
            raise ConstructionError(f"stage {i}: blocks must be successive")
        prev = E[-1]
        if sum(abs(c) for c in coeffs) != 1 and abs(float(sum(abs(c) for c in coeffs)) - 1) > 1e-12:
            raise ConstructionError(f"stage {i}: coefficients are not l1-normalised")
        blocks.append((E, list(coeffs)))
    chosen = blocks[m:2 * m]
    if k is not None:
        k = Ordinal.of(k)
        for i, (E, _) in enumerate(chosen, start=m + 1):
            if not _contains(k, E):
                raise ConstructionError(f"stage {i}: {list(E)} is not in S_{k}")
        minima = [E[0] for E, _ in chosen]
        union = tuple(j for E, _ in chosen for j in E)
        if not schreier_contains(k.successor(), union):
            raise ConstructionError(f"minima {minima} do not make the union admissible in S_{k.successor()}")
    weight = Fraction(1, m)
    out = Vector()
    for E, coeffs in chosen:
        for j, a in zip(E, coeffs):
            c = a * weight if isinstance(a, (Fraction, int)) else a / m
            out = out + combine([c], [basis_map(j)])
    return out
