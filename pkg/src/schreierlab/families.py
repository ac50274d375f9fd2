"""Schreier families and finite regular families.

Membership in ``S_xi`` is decided by a left-to-right automaton. For a
successor ``S_{z+1}`` the state keeps the remaining number of ``S_z`` pieces
(``min E - pieces used``) together with the state of the current piece; a
new element goes into the current piece when possible and otherwise opens a
new one. Greedy filling is exact because the families are hereditary. For a
limit ``lam`` the state keeps every alternative ``S_{lam[n]}``, ``n <= min E``,
that is still alive.

Whether ``E + (x)`` is admissible never depends on ``x`` once ``E`` is
nonempty: ``x`` only enters the state as the minimum of newly opened pieces,
whose capacity ``x - 1`` is never exhausted by ``x`` itself. Hence a single
extension candidate ``max E + 1`` decides maximality, and the rank of ``E``
only depends on its automaton state.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Dict, FrozenSet, Iterable, Iterator, List, Sequence, Tuple

from .ordinal import SUCCESSOR, ZERO, Ordinal, _add_term, classify, fundamental_sequence

FinSet = Tuple[int, ...]

DEFAULT_UNIVERSE_CAP = 20

EMPTY = ()
_FULL0 = ("f",)


class FamilyError(Exception):
    pass


class ResourceError(FamilyError):
    pass


class PreconditionError(FamilyError):
    pass


class RankUndecided(FamilyError):
    pass


def finset(elements: Iterable[int]) -> FinSet:
    """Validate and normalise a strictly increasing tuple of positive naturals."""
    out = tuple(int(e) for e in elements)
    for a, b in zip(out, out[1:]):
        if b <= a:
            raise ValueError(f"set must be strictly increasing: {out}")
    if out and out[0] < 1:
        raise ValueError(f"elements must be positive: {out}")
    return out


# -- admissibility automaton -------------------------------------------------

@lru_cache(maxsize=1 << 20)
def step(xi: Ordinal, state, x: int):
    """Automaton transition; ``None`` means ``E + (x)`` is not in ``S_xi``."""
    kind, pred = classify(xi)
    if kind == ZERO:
        return _FULL0 if state == EMPTY else None
    if kind == SUCCESSOR:
        if state == EMPTY:
            return ("s", x - 1, step(pred, EMPTY, x))
        _, room, inner = state
        nxt = step(pred, inner, x)
        if nxt is not None:
            return ("s", room, nxt)
        if room >= 1:
            return ("s", room - 1, step(pred, EMPTY, x))
        return None
    if state == EMPTY:
        alts = frozenset(
            (o, step(o, EMPTY, x))
            for o in (fundamental_sequence(xi, n) for n in range(1, x + 1)))
        return ("l", alts)
    alive = []
    for o, sub in state[1]:
        nxt = step(o, sub, x)
        if nxt is not None:
            alive.append((o, nxt))
    if not alive:
        return None
    return ("l", frozenset(alive))


def run(xi: Ordinal, elements: Sequence[int]):
    state = EMPTY
    for x in elements:
        state = step(xi, state, x)
        if state is None:
            return None
    return state


@lru_cache(maxsize=1 << 18)
def _contains(xi: Ordinal, E: FinSet) -> bool:
    return run(xi, E) is not None


def schreier_contains(xi, E: Iterable[int]) -> bool:
    """Is ``E`` a member of the Schreier family ``S_xi``?"""
    return _contains(Ordinal.of(xi), finset(E))


def is_maximal(xi, E: Iterable[int]) -> bool:
    xi = Ordinal.of(xi)
    E = finset(E)
    state = run(xi, E)
    if state is None:
        raise PreconditionError(f"{list(E)} is not in S_{xi}")
    nxt = (E[-1] if E else 0) + 1
    return step(xi, state, nxt) is None


def clear_caches() -> None:
    step.cache_clear()
    _contains.cache_clear()
    _rank_state.cache_clear()
    _state_rank.cache_clear()


# -- materialized families ---------------------------------------------------

@dataclass(frozen=True)
class MaterializedFamily:
    universe: int
    sets: FrozenSet[FinSet]
    label: str = ""
    contains_singletons: bool = False

    def __post_init__(self):
        sets = frozenset(finset(s) for s in self.sets)
        object.__setattr__(self, "sets", sets)
        for s in sets:
            if s and s[-1] > self.universe:
                raise FamilyError(f"{list(s)} leaves the universe 1..{self.universe}")
        missing = _first_missing_subset(sets)
        if missing is not None:
            raise FamilyError(f"family is not hereditary: {list(missing[1])} "
                              f"is a subset of {list(missing[0])} but not a member")
        if self.contains_singletons:
            for n in range(1, self.universe + 1):
                if (n,) not in sets:
                    raise FamilyError(f"singleton {{{n}}} missing")
            if EMPTY not in sets:
                raise FamilyError("empty set missing")

    def __contains__(self, E) -> bool:
        return tuple(E) in self.sets

    def __iter__(self) -> Iterator[FinSet]:
        return iter(sorted(self.sets, key=lambda s: (len(s), s)))

    def __len__(self) -> int:
        return len(self.sets)

    def maximal_sets(self) -> List[FinSet]:
        out = []
        for s in self.sets:
            present = set(s)
            if not any(n not in present and tuple(sorted(s + (n,))) in self.sets
                       for n in range(1, self.universe + 1)):
                out.append(s)
        return sorted(out)

    @cached_property
    def width(self) -> int:
        """Size of the largest member."""
        return max((len(E) for E in self.sets), default=0)

    @cached_property
    def _sorted_json(self) -> tuple:
        return tuple(list(s) for s in sorted(self.sets, key=lambda s: (len(s), s)))

    def to_json(self) -> dict:
        return {"universe": self.universe, "sets": list(self._sorted_json),
                "label": self.label}


def _first_missing_subset(sets: FrozenSet[FinSet]):
    for s in sets:
        for i in range(len(s)):
            sub = s[:i] + s[i + 1:]
            if sub not in sets:
                return s, sub
    return None


def hereditary_closure(sets: Iterable[Iterable[int]]) -> set:
    out = set()
    stack = [finset(sorted(set(s))) for s in sets]
    while stack:
        s = stack.pop()
        if s in out:
            continue
        out.add(s)
        for i in range(len(s)):
            stack.append(s[:i] + s[i + 1:])
    out.add(EMPTY)
    return out


def family_from_json(data: dict) -> Tuple[MaterializedFamily, bool]:
    """Load ``{"universe": N, "sets": [...], "label": ...}``; returns (family, closure_added)."""
    universe = int(data["universe"])
    given = {finset(sorted(set(s))) for s in data.get("sets", [])}
    closed = hereditary_closure(given)
    has_singletons = all((n,) in closed for n in range(1, universe + 1))
    fam = MaterializedFamily(universe, frozenset(closed), data.get("label", ""),
                             contains_singletons=has_singletons)
    return fam, closed != given


def load_family(path) -> Tuple[MaterializedFamily, bool]:
    with open(path) as fh:
        return family_from_json(json.load(fh))


def _check_cap(N: int, cap: int) -> None:
    if N < 0:
        raise ValueError("universe bound must be non-negative")
    if N > cap:
        raise ResourceError(f"universe {N} exceeds cap {cap}")


def iter_schreier(xi: Ordinal, lo: int, hi: int) -> Iterator[FinSet]:
    """All members of ``S_xi`` contained in ``{lo..hi}``, depth first."""
    xi = Ordinal.of(xi)
    stack = [(EMPTY, EMPTY, lo)]
    while stack:
        E, state, nxt = stack.pop()
        yield E
        for x in range(hi, nxt - 1, -1):
            s = step(xi, state, x)
            if s is not None:
                stack.append((E + (x,), s, x + 1))


def materialize(xi, N: int, cap: int = DEFAULT_UNIVERSE_CAP) -> MaterializedFamily:
    xi = Ordinal.of(xi)
    _check_cap(N, cap)
    sets = frozenset(iter_schreier(xi, 1, N))
    return MaterializedFamily(N, sets, f"S_{xi} on 1..{N}", contains_singletons=True)


def maximal_in_range(xi, lo: int, hi: int) -> List[FinSet]:
    """Members of ``S_xi`` inside ``{lo..hi}`` that are maximal within that range, in lex order."""
    xi = Ordinal.of(xi)
    out = []

    def fill(state, nxt):
        for x in range(nxt, hi + 1):
            state = step(xi, state, x)
            if state is None:
                return False
        return True

    def walk(E, state, nxt):
        if nxt <= hi and fill(state, nxt):
            # every continuation of E lies inside this admissible set
            F = E + tuple(range(nxt, hi + 1))
            if not _skips_extend(xi, F, lo, hi):
                out.append(F)
            return
        extended = False
        for x in range(nxt, hi + 1):
            s = step(xi, state, x)
            if s is None:
                # admissibility of an extension does not depend on x once E is nonempty
                if E:
                    break
                continue
            extended = True
            walk(E + (x,), s, x + 1)
        if not extended and E:
            # E may still be a proper subset of a member that skips over max E
            if not _skips_extend(xi, E, lo, hi):
                out.append(E)

    walk(EMPTY, EMPTY, lo)
    return sorted(out)


def _skips_extend(xi: Ordinal, E: FinSet, lo: int, hi: int) -> bool:
    present = set(E)
    for x in range(lo, hi + 1):
        if x not in present and _contains(xi, tuple(sorted(E + (x,)))):
            return True
    return False


# -- rank --------------------------------------------------------------------

@dataclass(frozen=True)
class RankResult:
    value: Ordinal
    extrapolated: bool = False

    def __str__(self):
        return str(self.value)


def rank(xi, E: Iterable[int], budget: int = 4, method: str = "exact") -> RankResult:
    """Tree rank of ``E`` in ``S_xi``: 0 on maximal sets, otherwise the
    supremum of ``rank(E + (n)) + 1`` over ``n > max E``.

    ``method="exact"`` reads the rank off the automaton state.
    ``method="search"`` walks the extension tree, following forced chains
    exactly and extrapolating a CNF pattern over ``budget`` consecutive
    extensions where the children differ; such results carry
    ``extrapolated=True``.
    """
    xi = Ordinal.of(xi)
    E = finset(E)
    state = run(xi, E)
    if state is None:
        raise PreconditionError(f"{list(E)} is not in S_{xi}")
    if method == "exact":
        return RankResult(_state_rank(xi, state), False)
    if method != "search":
        raise ValueError(f"unknown rank method {method!r}")
    if budget < 3:
        raise ValueError("budget must be at least 3")
    start = (E[-1] if E else 0) + 1
    value, extrapolated = _rank_state(xi, state, start, budget)
    return RankResult(value, extrapolated)


def _plus(a: Ordinal, b: Ordinal) -> Ordinal:
    out = a
    for e, c in b.terms:
        out = _add_term(out.terms, e, c)
    return out


@lru_cache(maxsize=1 << 16)
def _fresh_rank(xi: Ordinal) -> Ordinal:
    """Rank of the empty set in ``S_xi``, i.e. ``w^xi`` (finite ``xi`` only)."""
    if not xi.is_finite:
        raise RankUndecided(f"rank w^{xi} of the empty set in S_{xi} is not below w^w")
    return Ordinal.omega_power(int(xi))


@lru_cache(maxsize=1 << 18)
def _state_rank(xi: Ordinal, state) -> Ordinal:
    if state == EMPTY:
        return _fresh_rank(xi)
    kind, pred = classify(xi)
    if kind == ZERO:
        return Ordinal()
    if kind == SUCCESSOR:
        _, room, inner = state
        tail = _state_rank(pred, inner)
        if room == 0:
            return tail
        # ``room`` further fresh pieces of S_pred follow the current one
        piece = _fresh_rank(pred)
        head = Ordinal(tuple((e, c * room) for e, c in piece.terms[:1]))
        return _plus(head, tail)
    return max(_state_rank(o, sub) for o, sub in state[1])


@lru_cache(maxsize=1 << 18)
def _rank_state(xi: Ordinal, state, start: int, budget: int):
    # Follow the chain of extensions that do not record x (each adds exactly 1).
    steps = 0
    while True:
        first = step(xi, state, start)
        if first is None:
            return _add_term(Ordinal().terms, 0, steps), False
        if first != step(xi, state, start + 1):
            break
        state, start, steps = first, start + 1, steps + 1
    window = []
    for x in range(start, start + budget):
        value, _ = _rank_state(xi, step(xi, state, x), x + 1, budget)
        window.append(value)
    top = _extrapolate_sup(window, xi, state)
    return _add_term(top.terms, 0, steps), True


def _extrapolate_sup(window: List[Ordinal], xi, state) -> Ordinal:
    """sup of ``r(n) + 1`` for child ranks following a CNF pattern in ``n``."""
    if all(w == window[0] for w in window):
        return window[0].successor()
    exps = sorted({e for w in window for e, _ in w.terms}, reverse=True)
    for j in exps:
        coeffs = [w.coefficient(j) for w in window]
        if len(set(coeffs)) > 1:
            break
    if any(b <= a for a, b in zip(coeffs, coeffs[1:])):
        raise RankUndecided(
            f"no CNF pattern in child ranks {[str(w) for w in window]} (state {state!r} of S_{xi})")
    head = tuple((e, c) for e, c in window[0].terms if e > j)
    return _add_term(head, j + 1, 1)


@dataclass
class PartitionReport:
    xi: Ordinal
    universe: int
    passed: bool
    family_size: int
    levels: Dict[str, int] = field(default_factory=dict)
    extrapolated: int = 0
    failures: List[dict] = field(default_factory=list)

    def to_json(self) -> dict:
        return {"xi": str(self.xi), "universe": self.universe, "passed": self.passed,
                "family_size": self.family_size, "levels": self.levels,
                "extrapolated_ranks": self.extrapolated, "failures": self.failures}


def omega_power(xi: Ordinal) -> Ordinal:
    if not xi.is_finite:
        raise ValueError(f"w^{xi} is not representable below w^w")
    return Ordinal.omega_power(int(xi))


def partition_check(xi, N: int, allow_extrapolated: bool = False, budget: int = 4,
                    cap: int = DEFAULT_UNIVERSE_CAP, method: str = "exact") -> PartitionReport:
    """Check the rank partition of ``S_xi`` restricted to ``{1..N}``.

    Checks: every member gets exactly one rank, bounded by ``w^xi`` and
    attained by the empty set; rank 0 coincides with maximality; the rank
    strictly drops along every proper end-extension inside the restriction.
    """
    xi = Ordinal.of(xi)
    fam = materialize(xi, N, cap)
    ranks: Dict[FinSet, Ordinal] = {}
    n_extra = 0
    for E in fam:
        r = rank(xi, E, budget, method)
        if r.extrapolated:
            if not allow_extrapolated:
                raise RankUndecided(f"rank of {list(E)} in S_{xi} needs extrapolation")
            n_extra += 1
        ranks[E] = r.value

    failures = []
    top = omega_power(xi) if xi.is_finite else None
    levels: Dict[Ordinal, List[FinSet]] = {}
    for E, r in ranks.items():
        levels.setdefault(r, []).append(E)
        if top is not None and r > top:
            failures.append({"check": "bounded", "set": list(E), "rank": str(r)})
    if top is not None and ranks[EMPTY] != top:
        failures.append({"check": "empty_rank", "rank": str(ranks[EMPTY]), "expected": str(top)})
    if sum(len(v) for v in levels.values()) != len(fam):
        failures.append({"check": "partition"})

    for E in fam:
        if (ranks[E] == Ordinal()) != is_maximal(xi, E):
            failures.append({"check": "H0_is_MAX", "set": list(E), "rank": str(ranks[E])})

    for F in fam:
        for i in range(len(F)):
            E = F[:i]
            if not ranks[F] < ranks[E]:
                failures.append({"check": "decreasing", "set": list(E), "extension": list(F),
                                 "rank": str(ranks[E]), "extension_rank": str(ranks[F])})
    return PartitionReport(
        xi=xi, universe=N, passed=not failures, family_size=len(fam),
        levels={str(k): len(v) for k, v in sorted(levels.items())},
        extrapolated=n_extra, failures=failures[:20])


# -- composition and sums ----------------------------------------------------

def admissible_unions(blocks: Iterable[FinSet], xi: Ordinal, universe: int) -> set:
    """All unions ``E_1 u ... u E_t`` of successive nonempty blocks with
    ``(min E_i)`` in ``S_xi``; includes the empty union."""
    xi = Ordinal.of(xi)
    by_min: Dict[int, List[FinSet]] = {}
    for b in blocks:
        if b:
            by_min.setdefault(b[0], []).append(b)
    out = {EMPTY}
    seen = set()
    stack = [(EMPTY, EMPTY)]
    while stack:
        union, state = stack.pop()
        nxt = (union[-1] if union else 0) + 1
        for lo in range(nxt, universe + 1):
            s = step(xi, state, lo)
            if s is None:
                if union:
                    break
                continue
            for b in by_min.get(lo, ()):
                u = union + b
                out.add(u)
                key = (u, s)
                if key not in seen:
                    seen.add(key)
                    stack.append(key)
    return out


def compose(m: int, n: int, N: int, cap: int = DEFAULT_UNIVERSE_CAP) -> MaterializedFamily:
    """``S_m[S_n]`` on ``{1..N}``."""
    _check_cap(N, cap)
    inner = materialize(n, N, cap)
    sets = admissible_unions(inner.sets, Ordinal.of(m), N)
    return MaterializedFamily(N, frozenset(sets), f"S_{m}[S_{n}] on 1..{N}",
                              contains_singletons=True)


def sum_family(F: MaterializedFamily, k: int) -> MaterializedFamily:
    """Unions of successive members of ``F`` whose minima form an ``S_k`` set."""
    if _first_missing_subset(F.sets) is not None:
        raise PreconditionError("family is not hereditary")
    if not all((n,) in F.sets for n in range(1, F.universe + 1)):
        raise PreconditionError("family must contain all singletons")
    sets = admissible_unions(F.sets, Ordinal.of(k), F.universe)
    label = f"({F.label})_{k}" if F.label else f"F_{k}"
    return MaterializedFamily(F.universe, frozenset(sets), label, contains_singletons=True)


def singletons_family(N: int) -> MaterializedFamily:
    sets = {EMPTY} | {(n,) for n in range(1, N + 1)}
    return MaterializedFamily(N, frozenset(sets), f"singletons on 1..{N}",
                              contains_singletons=True)


def bounded_size_family(N: int, size: int) -> MaterializedFamily:
    """All subsets of ``{1..N}`` with at most ``size`` elements."""
    sets = {c for r in range(size + 1) for c in itertools.combinations(range(1, N + 1), r)}
    return MaterializedFamily(N, frozenset(sets), f"|E|<={size} on 1..{N}",
                              contains_singletons=True)
