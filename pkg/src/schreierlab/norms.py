"""Norms on finitely supported sequences, evaluated exactly with witnesses.

Every norm here is a supremum of linear functionals built from admissible
structures. ``evaluate`` returns the value together with one functional that
attains it; the functional's ``provenance`` records the structure (a family
set, a list of intervals, or a recursion tree) so ``verify_witness`` can
rebuild the weights without trusting the evaluator.

Interval decompositions are searched by dynamic programming over support
positions and the admissibility automaton of :mod:`schreierlab.families`.
For bases that are monotone under enlarging the interval, gaps between
consecutive intervals never help, so only the first interval may start late.
The implicit norms are computed for all runs of the support in order of
increasing length; a run's own value only enters its equation through the
single whole-run block, which is scaled by ``theta < 1`` and never attains
the supremum, so one pass is exact and a second pass confirms the fixed point.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Tuple, Union

from .families import (EMPTY, MaterializedFamily, ResourceError, _contains,
                        family_from_json, omega_power, step)
from .ordinal import Ordinal, fundamental_sequence
from .vectors import (FLOAT, RATIONAL, Functional, Scalar, Vector, add_terms,
                      restrict, scalar_to_json, sign, to_scalar)

DEFAULT_SUPPORT_CAP = 64
FLOAT_RTOL = 1e-12


class NormError(Exception):
    pass


class ConfigError(NormError):
    pass


class WitnessError(NormError):
    pass


# -- parameters ----------------------------------------------------------------

@dataclass(frozen=True)
class Schreier:
    """Reference to the full Schreier family ``S_xi``."""
    xi: Ordinal

    def __post_init__(self):
        object.__setattr__(self, "xi", Ordinal.of(self.xi))

    def __contains__(self, E) -> bool:
        return _contains(self.xi, tuple(E))


@dataclass(frozen=True)
class HarmonicWeights:
    """``alpha_i = s / (i + s - 1)``; ``s = 1`` gives ``1/i``.

    For every ``s >= 1``: ``alpha_1 = 1``, strictly decreasing, tends to 0,
    and the series diverges.
    """
    shift: int = 1

    def __post_init__(self):
        if int(self.shift) != self.shift or self.shift < 1:
            raise ConfigError("harmonic shift must be a positive integer")

    def alpha(self, i: int, mode: str = RATIONAL) -> Scalar:
        value = Fraction(self.shift, i + self.shift - 1)
        return value if mode == RATIONAL else float(value)

    def to_json(self) -> dict:
        return {"rule": "harmonic", "shift": self.shift}


@dataclass(frozen=True)
class GeometricTheta:
    """``theta_n = c * r**n``, with ``c * r / (1 - r) < 1``.

    The defaults give ``theta_n = 2**-(n+1)``.
    """
    c: Fraction = Fraction(1, 2)
    r: Fraction = Fraction(1, 2)

    def __post_init__(self):
        c, r = Fraction(self.c), Fraction(self.r)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "r", r)
        if not (0 < r < 1) or c <= 0:
            raise ConfigError("need c > 0 and 0 < r < 1")
        if c * r / (1 - r) >= 1:
            raise ConfigError("theta_n must sum to less than 1")

    def theta(self, n: int) -> Fraction:
        return self.c * self.r ** n

    def tail_sq(self, m: int) -> Fraction:
        """Closed form of the sum of ``theta_n**2`` over ``n > m``."""
        return self.c ** 2 * self.r ** (2 * (m + 1)) / (1 - self.r ** 2)

    def to_json(self) -> dict:
        return {"rule": "geometric", "c": scalar_to_json(self.c), "r": scalar_to_json(self.r)}


# -- norm expressions ---------------------------------------------------------

@dataclass(frozen=True)
class SupNorm:
    pass


@dataclass(frozen=True)
class Ell1Norm:
    pass


@dataclass(frozen=True)
class FamilyNorm:
    """``sup { sum_{n in E} |x_n| : E in F }`` for arbitrary (non-interval) sets E."""
    family: Union[Schreier, MaterializedFamily]


@dataclass(frozen=True)
class SchreierLift:
    """``theta * sup sum_i ||I_i x||_base`` over intervals with ``(min I_i)`` in ``S_xi``."""
    base: "NormExpr"
    xi: Ordinal
    aggregator: str = "sum"
    theta: Fraction = Fraction(1)
    outer: str = "plain"

    def __post_init__(self):
        object.__setattr__(self, "xi", Ordinal.of(self.xi))
        object.__setattr__(self, "theta", Fraction(self.theta))
        if self.aggregator not in ("sum", "euclidean"):
            raise ConfigError(f"unknown aggregator {self.aggregator!r}")
        if self.outer not in ("plain", "max_with_c0"):
            raise ConfigError(f"unknown outer mode {self.outer!r}")
        if not (0 < self.theta <= 1):
            raise ConfigError("lift weight must lie in (0, 1]")


@dataclass(frozen=True)
class Tsirelson:
    xi: Ordinal
    theta: Fraction = Fraction(1, 2)

    def __post_init__(self):
        object.__setattr__(self, "xi", Ordinal.of(self.xi))
        object.__setattr__(self, "theta", Fraction(self.theta))
        if not (0 < self.theta < 1):
            raise ConfigError("Tsirelson theta must lie strictly between 0 and 1")


@dataclass(frozen=True)
class AzimiHagler:
    alpha: HarmonicWeights = field(default_factory=HarmonicWeights)


@dataclass(frozen=True)
class MixedZ:
    """Implicit norm mixing ``c_0`` with the square sum of the stage norms
    along ``xi_n``, the fundamental sequence of ``w^xi``."""
    xi: Ordinal
    theta_rule: GeometricTheta = field(default_factory=GeometricTheta)

    def __post_init__(self):
        xi = Ordinal.of(self.xi)
        object.__setattr__(self, "xi", xi)
        if xi.is_zero or not xi.is_finite:
            raise ConfigError("MixedZ needs a finite xi >= 1")
        if not hasattr(self.theta_rule, "tail_sq"):
            raise ConfigError("theta rule has no closed-form tail")

    def stage(self, n: int) -> Ordinal:
        return fundamental_sequence(omega_power(self.xi), n)


NormExpr = Union[SupNorm, Ell1Norm, FamilyNorm, SchreierLift, Tsirelson, AzimiHagler, MixedZ]


def is_monotone(norm) -> bool:
    """Does enlarging the support interval never decrease the value?"""
    if isinstance(norm, AzimiHagler):
        return False
    if isinstance(norm, SchreierLift):
        return is_monotone(norm.base)
    return True


# -- JSON -----------------------------------------------------------------------

def _family_to_json(F) -> dict:
    if isinstance(F, Schreier):
        return {"schreier": str(F.xi)}
    return F.to_json()


def norm_to_json(norm) -> dict:
    if isinstance(norm, SupNorm):
        return {"type": "sup"}
    if isinstance(norm, Ell1Norm):
        return {"type": "ell1"}
    if isinstance(norm, FamilyNorm):
        return {"type": "family", "family": _family_to_json(norm.family)}
    if isinstance(norm, SchreierLift):
        return {"type": "lift", "base": norm_to_json(norm.base), "xi": str(norm.xi),
                "aggregator": norm.aggregator, "theta": scalar_to_json(norm.theta),
                "outer": norm.outer}
    if isinstance(norm, Tsirelson):
        return {"type": "tsirelson", "xi": str(norm.xi), "theta": scalar_to_json(norm.theta)}
    if isinstance(norm, AzimiHagler):
        return {"type": "azimi_hagler", "alpha": norm.alpha.to_json()}
    if isinstance(norm, MixedZ):
        return {"type": "mixed_z", "xi": str(norm.xi), "theta_rule": norm.theta_rule.to_json()}
    raise ConfigError(f"not a norm expression: {norm!r}")


def norm_from_json(data: dict, load_family=None):
    """Inverse of :func:`norm_to_json`; ``load_family(path)`` resolves ``family_file``."""
    if not isinstance(data, dict) or "type" not in data:
        raise ConfigError("norm spec must be an object with a 'type'")
    kind = data["type"]
    try:
        if kind == "sup":
            return SupNorm()
        if kind == "ell1":
            return Ell1Norm()
        if kind == "family":
            if "family_file" in data:
                if load_family is None:
                    raise ConfigError("family_file given but no loader")
                return FamilyNorm(load_family(data["family_file"]))
            fam = data.get("family", {})
            if "schreier" in fam:
                return FamilyNorm(Schreier(Ordinal.of(str(fam["schreier"]))))
            return FamilyNorm(family_from_json(fam)[0])
        if kind == "lift":
            xi = data.get("xi", data.get("k"))
            return SchreierLift(norm_from_json(data["base"], load_family), Ordinal.of(str(xi)),
                                data.get("aggregator", "sum"),
                                Fraction(str(data.get("theta", "1"))),
                                data.get("outer", "plain"))
        if kind == "tsirelson":
            return Tsirelson(Ordinal.of(str(data["xi"])), Fraction(str(data.get("theta", "1/2"))))
        if kind == "azimi_hagler":
            rule = data.get("alpha", {"rule": "harmonic"})
            if rule.get("rule") != "harmonic":
                raise ConfigError(f"unknown weight rule {rule.get('rule')!r}")
            return AzimiHagler(HarmonicWeights(int(rule.get("shift", 1))))
        if kind == "mixed_z":
            rule = data.get("theta_rule", {"rule": "geometric"})
            if rule.get("rule") != "geometric":
                raise ConfigError(f"theta rule {rule.get('rule')!r} has no closed-form tail")
            return MixedZ(Ordinal.of(str(data["xi"])),
                          GeometricTheta(Fraction(str(rule.get("c", "1/2"))),
                                         Fraction(str(rule.get("r", "1/2")))))
    except (KeyError, ValueError, ZeroDivisionError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad {kind} spec: {exc}") from exc
    raise ConfigError(f"unknown norm type {kind!r}")


# -- evaluation -----------------------------------------------------------------

def _mode_of(x: Vector) -> str:
    return FLOAT if any(isinstance(v, float) for v in x.values) else RATIONAL


def evaluate(norm, x: Vector, mode: Optional[str] = None,
             support_cap: int = DEFAULT_SUPPORT_CAP) -> Tuple[Scalar, Functional]:
    """Norm value of ``x`` and a functional attaining it."""
    if mode is not None:
        x = x.with_mode(mode)
    mode = _mode_of(x)
    if isinstance(norm, (SchreierLift, Tsirelson, MixedZ, AzimiHagler)) and len(x) > support_cap:
        raise ResourceError(f"support size {len(x)} exceeds cap {support_cap}")
    value, terms, node = _Engine(mode).run(norm, x)
    prov = {"norm": norm_to_json(norm), "value": scalar_to_json(value), "node": node}
    return value, Functional({i: w for i, w in sorted(terms.items()) if w != 0}, prov)


eval = evaluate


def norm_value(norm, x: Vector, **kw) -> Scalar:
    return evaluate(norm, x, **kw)[0]


def _c0(x: Vector):
    best, at = 0, None
    for i, v in x.entries:
        if abs(v) > best:
            best, at = abs(v), i
    return best, at


def _c0_node(x: Vector, at):
    if at is None:
        return {}, {"kind": "zero"}
    s = sign(x[at])
    return {at: s}, {"kind": "c0", "index": at, "sign": s}


class _Engine:
    def __init__(self, mode: str):
        self.mode = mode

    def num(self, q) -> Scalar:
        return q if self.mode == RATIONAL else float(q)

    def run(self, norm, x: Vector):
        if not x:
            return self.num(0), {}, {"kind": "zero"}
        if isinstance(norm, SupNorm):
            value, at = _c0(x)
            terms, node = _c0_node(x, at)
            return value, terms, node
        if isinstance(norm, Ell1Norm):
            signs = [[i, sign(v)] for i, v in x.entries]
            return x.l1(), {i: s for i, s in signs}, {"kind": "ell1", "signs": signs}
        if isinstance(norm, FamilyNorm):
            return self.family(norm.family, x)
        if isinstance(norm, SchreierLift):
            return self.lift(norm, x)
        if isinstance(norm, Tsirelson):
            return _ImplicitTable(self, x, norm).top()
        if isinstance(norm, MixedZ):
            return _ImplicitTable(self.__class__(FLOAT), x.with_mode(FLOAT), norm).top()
        if isinstance(norm, AzimiHagler):
            return self.azimi(norm, x)
        raise ConfigError(f"not a norm expression: {norm!r}")

    # families

    def family(self, F, x: Vector):
        if isinstance(F, Schreier):
            E = _best_schreier_set(F.xi, x)
        else:
            E = _best_materialized_set(F, x)
        value = sum((abs(x[i]) for i in E), self.num(0))
        signs = [[i, sign(x[i])] for i in E]
        return value, {i: s for i, s in signs}, {"kind": "family", "set": list(E), "signs": signs}

    # interval decompositions over an explicit base

    def lift(self, norm: SchreierLift, x: Vector):
        idx = x.support
        L = len(idx)
        euclid = norm.aggregator == "euclidean"
        cache: Dict[Tuple[int, int], tuple] = {}
        quick = _quick_blocks(norm.base, x)

        def base(q, r):
            key = (q, r)
            if key not in cache:
                cache[key] = evaluate(norm.base, restrict(x, (idx[q], idx[r])))
            return cache[key]

        def block(q, r):
            v = quick[q][r] if quick is not None else base(q, r)[0]
            return v * v if euclid else v

        total, blocks = _best_decomposition(idx, norm.xi, block, 0, L - 1,
                                            gaps=not is_monotone(norm.base))
        if euclid:
            agg = _sqrt(total, self.mode)
        else:
            agg = total
        value = self.num(norm.theta) * agg
        terms: Dict[int, Scalar] = {}
        parts = []
        for q, r in blocks:
            b, w = base(q, r)
            coef = (b / agg if agg else self.num(0)) if euclid else self.num(1)
            add_terms(terms, w.terms, self.num(norm.theta) * coef)
            parts.append({"lo": idx[q], "hi": idx[r], "coef": scalar_to_json(coef),
                          "witness": w.to_json()})
        node = {"kind": "lift", "blocks": parts}
        if norm.outer == "max_with_c0":
            c, at = _c0(x)
            if c > value:
                terms, node = _c0_node(x, at)
                return c, terms, node
        return value, terms, node

    # weighted successive interval sums

    def azimi(self, norm: AzimiHagler, x: Vector):
        idx, vals = x.support, x.values
        L = len(idx)
        prefix = [self.num(0)]
        for v in vals:
            prefix.append(prefix[-1] + v)
        alpha = [None] + [norm.alpha.alpha(i, self.mode) for i in range(1, L + 1)]
        # H[p][c]: best from position p after c chunks; choice records (r or None)
        H = [[self.num(0)] * (L + 2) for _ in range(L + 1)]
        choice: List[List[Optional[int]]] = [[None] * (L + 2) for _ in range(L + 1)]
        for p in range(L - 1, -1, -1):
            for c in range(0, p + 1):
                best, arg = None, None
                for r in range(p, L):
                    s = prefix[r + 1] - prefix[p]
                    if s == 0:
                        continue
                    v = alpha[c + 1] * abs(s) + H[r + 1][c + 1]
                    if best is None or v > best:
                        best, arg = v, r
                skip = H[p + 1][c]
                if best is None or skip > best:
                    best, arg = skip, None
                H[p][c], choice[p][c] = best, arg
        terms: Dict[int, Scalar] = {}
        chunks = []
        p, c = 0, 0
        while p < L:
            r = choice[p][c]
            if r is None:
                p += 1
                continue
            s = sign(prefix[r + 1] - prefix[p])
            lo, hi = idx[p], idx[r]
            for j in range(lo, hi + 1):
                terms[j] = alpha[c + 1] * s
            chunks.append({"lo": lo, "hi": hi, "sign": s})
            p, c = r + 1, c + 1
        return H[0][0], terms, {"kind": "azimi", "chunks": chunks}


def _quick_blocks(base, x: Vector):
    """Block values for bases with a closed form on runs, else ``None``."""
    vals = [abs(v) for v in x.values]
    L = len(vals)
    if isinstance(base, SupNorm):
        table = []
        for q in range(L):
            row, m = [None] * L, vals[q]
            for r in range(q, L):
                m = m if m >= vals[r] else vals[r]
                row[r] = m
            table.append(row)
        return table
    if isinstance(base, Ell1Norm):
        table = []
        for q in range(L):
            row, acc = [None] * L, 0
            for r in range(q, L):
                acc = acc + vals[r]
                row[r] = acc
            table.append(row)
        return table
    if isinstance(base, FamilyNorm) and isinstance(base.family, MaterializedFamily):
        F = base.family
        width = _family_width(F)
        idx = x.support
        table = []
        for q in range(L):
            row = [None] * L
            for r in range(q, L):
                row[r] = _materialized_value(
                    F, [(idx[j], vals[j]) for j in range(q, r + 1) if idx[j] <= F.universe], width)
            table.append(row)
        return table
    return None


def _sqrt(q: Scalar, mode: str) -> Scalar:
    if mode == RATIONAL and isinstance(q, Fraction) and q >= 0:
        n, d = math.isqrt(q.numerator), math.isqrt(q.denominator)
        if n * n == q.numerator and d * d == q.denominator:
            return Fraction(n, d)
    return math.sqrt(q)


def _best_schreier_set(xi: Ordinal, x: Vector) -> Tuple[int, ...]:
    """Lexicographically smallest member of ``S_xi`` inside the support with maximal l1 mass."""
    idx = x.support
    mags = [abs(v) for v in x.values]
    L = len(idx)
    layers = [{EMPTY}]
    for p in range(L):
        nxt = set()
        for s in layers[-1]:
            nxt.add(s)
            t = step(xi, s, idx[p])
            if t is not None:
                nxt.add(t)
        layers.append(nxt)
    best: Dict[object, Tuple[Scalar, Tuple[int, ...]]] = {s: (0, ()) for s in layers[L]}
    for p in range(L - 1, -1, -1):
        cur = {}
        for s in layers[p]:
            cand = best[s]
            t = step(xi, s, idx[p])
            if t is not None:
                v, tail = best[t]
                take = (v + mags[p], (idx[p],) + tail)
                if take[0] > cand[0] or (take[0] == cand[0] and take[1] < cand[1]):
                    cand = take
            cur[s] = cand
        best = cur
    return best[EMPTY][1]


def _family_width(F: MaterializedFamily) -> int:
    return F.width


def _materialized_value(F: MaterializedFamily, mags: List[Tuple[int, Scalar]], width: int):
    """Largest mass of a member; elements are explored heaviest first."""
    order = sorted(mags, key=lambda t: (-t[1], t[0]))
    best = [0]

    def dfs(start, cur, value):
        room = width - len(cur)
        if room == 0:
            return
        for k in range(start, len(order)):
            # the heaviest ``room`` remaining elements bound any completion
            if value + sum(m for _, m in order[k:k + room]) <= best[0]:
                return
            cand = tuple(sorted(cur + (order[k][0],)))
            if cand not in F.sets:
                continue
            v = value + order[k][1]
            if v > best[0]:
                best[0] = v
            dfs(k + 1, cand, v)

    dfs(0, (), 0)
    return best[0]


def _best_materialized_set(F: MaterializedFamily, x: Vector) -> Tuple[int, ...]:
    """Branch and bound for the optimum, then the lexicographically first
    member (preorder over increasing indices) that attains it."""
    elems = [(i, abs(v)) for i, v in x.entries if i <= F.universe]
    width = _family_width(F)
    target = _materialized_value(F, elems, width)
    if target == 0:
        return ()
    tops = [sorted((m for _, m in elems[k:]), reverse=True) for k in range(len(elems) + 1)]
    found = []

    def dfs(start, cur, value):
        if value == target:
            found.append(cur)
            return True
        room = width - len(cur)
        for k in range(start, len(elems)):
            if value + sum(tops[k][:room]) < target:
                return False
            cand = cur + (elems[k][0],)
            if cand in F.sets and dfs(k + 1, cand, value + elems[k][1]):
                return True
        return False

    dfs(0, (), 0)
    return found[0]


def _best_decomposition(idx, xi: Ordinal, block: Callable[[int, int], Scalar],
                        lo: int, hi: int, gaps: bool = False):
    """Maximise ``sum block(q, r)`` over successive position intervals inside
    ``lo..hi`` whose first indices form a member of ``S_xi``.

    Without ``gaps`` the intervals tile ``first..hi``, which is optimal for
    monotone blocks. Returns ``(value, [(q, r), ...])``; ties go to the
    lexicographically smallest interval list.
    """
    memo: Dict[tuple, tuple] = {}

    def tail(q, s):
        key = (q, s)
        if key in memo:
            return memo[key]
        best = None
        for r in range(q, hi + 1):
            b = block(q, r)
            if gaps:
                opt = (b, r, None, None)
                for q2 in range(r + 1, hi + 1):
                    t = step(xi, s, idx[q2])
                    if t is None:
                        break
                    v = b + tail(q2, t)[0]
                    if v > opt[0]:
                        opt = (v, r, q2, t)
            elif r == hi:
                opt = (b, r, None, None)
            else:
                t = step(xi, s, idx[r + 1])
                if t is None:
                    continue
                opt = (b + tail(r + 1, t)[0], r, r + 1, t)
            if best is None or opt[0] > best[0]:
                best = opt
        memo[key] = best
        return best

    top = None
    for q0 in range(lo, hi + 1):
        s0 = step(xi, EMPTY, idx[q0])
        res = tail(q0, s0)
        if top is None or res[0] > top[0][0]:
            top = (res, q0, s0)
    if top is None:
        return 0, []
    blocks = []
    (v, r, q2, t), q, s = top
    blocks.append((q, r))
    while q2 is not None:
        q, s = q2, t
        _, r, q2, t = memo[(q, s)]
        blocks.append((q, r))
    return top[0][0], blocks


class _Tails:
    """Best tiling of positions ``q..hi`` whose first interval starts at ``q``."""

    def __init__(self, idx, xi, hi, block):
        self.idx, self.xi, self.hi, self.block = idx, xi, hi, block
        self.memo: Dict[tuple, tuple] = {}

    def __call__(self, q, s):
        key = (q, s)
        got = self.memo.get(key)
        if got is not None:
            return got
        best = None
        for r in range(q, self.hi + 1):
            b = self.block(q, r)
            if r == self.hi:
                opt = (b, r, None)
            else:
                t = step(self.xi, s, self.idx[r + 1])
                if t is None:
                    continue
                opt = (b + self(r + 1, t)[0], r, t)
            if best is None or opt[0] > best[0]:
                best = opt
        self.memo[key] = best
        return best

    def blocks(self, q, s):
        out = []
        while True:
            _, r, t = self(q, s)
            out.append((q, r))
            if t is None:
                return out
            q, s = r + 1, t


class _ImplicitTable:
    """Values of an implicit norm on every run ``lo..hi`` of support positions."""

    def __init__(self, engine: _Engine, x: Vector, norm):
        self.eng = engine
        self.norm = norm
        self.idx = x.support
        self.vals = x.values
        self.x = x
        L = self.L = len(self.idx)
        self.N: Dict[Tuple[int, int], Scalar] = {}
        self.how: Dict[Tuple[int, int], tuple] = {}
        self.c0: Dict[Tuple[int, int], Tuple[Scalar, int]] = {}
        for lo in range(L):
            best = (abs(self.vals[lo]), lo)
            self.c0[(lo, lo)] = best
            for hi in range(lo + 1, L):
                if abs(self.vals[hi]) > best[0]:
                    best = (abs(self.vals[hi]), hi)
                self.c0[(lo, hi)] = best
        if isinstance(norm, Tsirelson):
            self.stages = [(norm.xi, None)]
        else:
            self.stages = self._mixed_stages()
        self.build()

    def _mixed_stages(self):
        norm: MixedZ = self.norm
        rest = tuple(i for i in self.idx if i != 1)
        n = 1
        while not _contains(norm.stage(n), rest):
            n += 1
            if n > 64:
                raise ResourceError("no stage admits the support")
        self.m = n
        return [(norm.stage(k), k) for k in range(1, n + 1)]

    def _proper(self, T: _Tails, lo, hi, xi, best_from):
        """Best decomposition of ``lo..hi`` other than the single whole run."""
        s0 = step(xi, EMPTY, self.idx[lo])
        sp = None
        for r in range(lo, hi):
            t = step(xi, s0, self.idx[r + 1])
            if t is None:
                continue
            v = self.N[(lo, r)] + T(r + 1, t)[0]
            if sp is None or v > sp[0]:
                sp = (v, r, t)
        if sp is not None and (best_from is None or sp[0] >= best_from[0]):
            return sp[0], ("first", lo, sp[1], sp[2])
        if best_from is not None:
            return best_from[0], ("from", best_from[1])
        return None, None

    def build(self):
        self._tails_at = {}
        for hi in range(self.L):
            tails = [_Tails(self.idx, xi, hi, lambda q, r: self.N[(q, r)]) for xi, _ in self.stages]
            best_from: List[Optional[tuple]] = [None] * len(self.stages)
            for lo in range(hi, -1, -1):
                props = [self._proper(T, lo, hi, xi, best_from[k])
                         for k, (T, (xi, _)) in enumerate(zip(tails, self.stages))]
                self.N[(lo, hi)], self.how[(lo, hi)] = self._combine(lo, hi, props, tails)
                for k, (T, (xi, _)) in enumerate(zip(tails, self.stages)):
                    s0 = step(xi, EMPTY, self.idx[lo])
                    v = T(lo, s0)[0]
                    if best_from[k] is None or v >= best_from[k][0]:
                        best_from[k] = (v, lo, s0)
                if isinstance(self.norm, Tsirelson):
                    self._confirm(lo, hi, best_from[0][0])
            self._tails_at[hi] = tails

    def _confirm(self, lo, hi, full):
        """Re-apply the defining equation, now allowing the whole run as a block."""
        again = max(self.c0[(lo, hi)][0], self.eng.num(self.norm.theta) * full)
        if not _close(again, self.N[(lo, hi)]):
            raise NormError(f"fixed point not stationary on run {lo}..{hi}")

    def _combine(self, lo, hi, props, tails):
        c, at = self.c0[(lo, hi)]
        num = self.eng.num
        if isinstance(self.norm, Tsirelson):
            B, rec = props[0]
            if B is not None and num(self.norm.theta) * B >= c:
                return num(self.norm.theta) * B, ("lift", rec)
            return c, ("c0", at)
        rule = self.norm.theta_rule
        items = []
        for (B, rec), (_, n) in zip(props, self.stages):
            items.append((float(rule.theta(n)) ** 2, B if B is not None else 0.0, n, rec))
        Bm, recm = props[-1]
        items.append((float(rule.tail_sq(self.m)), Bm if Bm is not None else 0.0, "tail", recm))
        Nf, active, P = _solve_mixed(items)
        if Nf >= c and Nf > 0:
            return Nf, ("mixed", active, P)
        return c, ("c0", at)

    # witnesses

    def decomposition(self, rec, tails_k, xi, hi):
        if rec[0] == "first":
            _, lo, r, t = rec
            return [(lo, r)] + tails_k.blocks(r + 1, t)
        _, q0 = rec[0], rec[1]
        return tails_k.blocks(q0, step(xi, EMPTY, self.idx[q0]))

    def functional(self, lo, hi, memo):
        key = (lo, hi)
        if key in memo:
            return memo[key]
        how = self.how[key]
        num = self.eng.num
        if how[0] == "c0":
            at = how[1]
            s = sign(self.vals[at])
            out = ({self.idx[at]: num(s)}, {"kind": "c0", "index": self.idx[at], "sign": s})
        elif how[0] == "lift":
            xi = self.stages[0][0]
            blocks = self.decomposition(how[1], self._tails_at[hi][0], xi, hi)
            terms: Dict[int, Scalar] = {}
            parts = []
            for q, r in blocks:
                t, node = self.functional(q, r, memo)
                add_terms(terms, t, num(self.norm.theta))
                parts.append({"lo": self.idx[q], "hi": self.idx[r], "node": node})
            out = (terms, {"kind": "tlift", "blocks": parts})
        else:
            _, active, P = how
            N = self.N[key]
            terms = {}
            stages = []
            for w, B, n, rec in active:
                k = len(self.stages) - 1 if n == "tail" else n - 1
                xi = self.stages[k][0]
                blocks = self.decomposition(rec, self._tails_at[hi][k], xi, hi)
                coef = w * B / (N * (1 - P))
                parts = []
                for q, r in blocks:
                    t, node = self.functional(q, r, memo)
                    add_terms(terms, t, coef)
                    parts.append({"lo": self.idx[q], "hi": self.idx[r], "node": node})
                stages.append({"stage": n, "xi": str(xi), "coef": coef, "blocks": parts})
            out = (terms, {"kind": "mixed", "m": self.m, "self_weight": P, "stages": stages})
        memo[key] = out
        return out

    def top(self):
        key = (0, self.L - 1)
        terms, node = self.functional(0, self.L - 1, {})
        return self.N[key], terms, node


def _solve_mixed(items):
    """Solve ``N^2 = sum w * max(N, B)^2`` for ``N > 0``.

    Returns ``(N, active, P)`` where ``active`` are the items with ``B >= N``
    and ``P`` is the total weight of the others.
    """
    items = sorted(items, key=lambda t: t[1])
    P = 0.0
    for k, (w, B, _, _) in enumerate(items):
        rest = items[k:]
        R = sum(w2 * B2 * B2 for w2, B2, _, _ in rest)
        if R > 0:
            N = math.sqrt(R / (1 - P))
            lower = items[k - 1][1] if k else -math.inf
            if lower < N <= B:
                return N, rest, P
        P += w
    return 0.0, [], P


# -- witness verification ----------------------------------------------------------

def _close(a, b) -> bool:
    if isinstance(a, float) or isinstance(b, float):
        return abs(float(a) - float(b)) <= FLOAT_RTOL * max(1.0, abs(float(a)), abs(float(b)))
    return a == b


def _derive(norm, node: dict, x: Vector, mode: str) -> Dict[int, Scalar]:
    """Rebuild functional weights from a provenance node, checking admissibility."""
    kind = node.get("kind")
    num = (lambda q: q) if mode == RATIONAL else float
    if kind == "zero":
        if x:
            raise WitnessError("zero witness for a nonzero vector")
        return {}
    if kind == "c0":
        if not isinstance(norm, (SupNorm, Tsirelson, MixedZ)) and not (
                isinstance(norm, SchreierLift) and norm.outer == "max_with_c0"):
            raise WitnessError("c0 witness not allowed for this norm")
        s = node["sign"]
        if s not in (1, -1):
            raise WitnessError("c0 sign must be +-1")
        return {int(node["index"]): num(s)}
    if kind == "ell1":
        if not isinstance(norm, Ell1Norm):
            raise WitnessError("ell1 witness for another norm")
        out = {}
        for i, s in node["signs"]:
            if s not in (1, -1):
                raise WitnessError("signs must be +-1")
            out[int(i)] = num(s)
        return out
    if kind == "family":
        if not isinstance(norm, FamilyNorm):
            raise WitnessError("family witness for another norm")
        E = tuple(int(i) for i in node["set"])
        if list(E) != sorted(set(E)):
            raise WitnessError("family set must be strictly increasing")
        if E not in norm.family:
            raise WitnessError(f"{list(E)} is not in the family")
        signs = {int(i): s for i, s in node["signs"]}
        if set(signs) != set(E) or any(s not in (1, -1) for s in signs.values()):
            raise WitnessError("signs must cover the set with +-1")
        return {i: num(signs[i]) for i in E}
    if kind == "azimi":
        if not isinstance(norm, AzimiHagler):
            raise WitnessError("azimi witness for another norm")
        out = {}
        prev = 0
        for k, ch in enumerate(node["chunks"], start=1):
            lo, hi, s = int(ch["lo"]), int(ch["hi"]), ch["sign"]
            if not (prev < lo <= hi) or s not in (1, -1):
                raise WitnessError("chunks must be successive intervals with signs +-1")
            prev = hi
            a = norm.alpha.alpha(k, mode)
            for j in range(lo, hi + 1):
                out[j] = a * s
        return out
    if kind == "lift":
        if not isinstance(norm, SchreierLift):
            raise WitnessError("lift witness for another norm")
        blocks = node["blocks"]
        _check_intervals(blocks, norm.xi)
        out: Dict[int, Scalar] = {}
        coefs = []
        for b in blocks:
            lo, hi = int(b["lo"]), int(b["hi"])
            sub = Functional.from_json(b["witness"], mode)
            part = restrict(x, (lo, hi))
            if any(not (lo <= i <= hi) for i in sub.terms):
                raise WitnessError("block witness leaves its interval")
            check_witness(norm.base, part, sub)
            coef = to_scalar(b["coef"], mode)
            coefs.append(coef)
            add_terms(out, sub.terms, num(norm.theta) * coef)
        if norm.aggregator == "sum":
            if any(c != 1 for c in coefs):
                raise WitnessError("sum aggregator needs unit coefficients")
        elif sum(c * c for c in coefs) > 1 + 1e-12:
            raise WitnessError("euclidean coefficients exceed the unit sphere")
        return out
    if kind == "tlift":
        if not isinstance(norm, Tsirelson):
            raise WitnessError("tsirelson witness for another norm")
        blocks = node["blocks"]
        _check_intervals(blocks, norm.xi)
        out = {}
        for b in blocks:
            lo, hi = int(b["lo"]), int(b["hi"])
            sub = _derive(norm, b["node"], restrict(x, (lo, hi)), mode)
            if any(not (lo <= i <= hi) for i in sub):
                raise WitnessError("block witness leaves its interval")
            add_terms(out, sub, num(norm.theta))
        return out
    if kind == "mixed":
        if not isinstance(norm, MixedZ):
            raise WitnessError("mixed witness for another norm")
        rule = norm.theta_rule
        m = int(node["m"])
        P = float(node["self_weight"])
        budget = P
        out = {}
        for st in node["stages"]:
            n = st["stage"]
            if n == "tail":
                xi, w = norm.stage(m), float(rule.tail_sq(m))
            else:
                n = int(n)
                if n > m:
                    raise WitnessError("stage beyond the truncation point")
                xi, w = norm.stage(n), float(rule.theta(n)) ** 2
            if str(xi) != st["xi"]:
                raise WitnessError("stage ordinal mismatch")
            _check_intervals(st["blocks"], xi)
            c = float(st["coef"])
            budget += (c * (1 - P)) ** 2 / w
            for b in st["blocks"]:
                lo, hi = int(b["lo"]), int(b["hi"])
                add_terms(out, _derive(norm, b["node"], restrict(x, (lo, hi)), FLOAT), c)
        if budget > 1 + 1e-9:
            raise WitnessError("stage coefficients are not dual feasible")
        return out
    raise WitnessError(f"unknown provenance kind {kind!r}")


def _check_intervals(blocks, xi: Ordinal) -> None:
    prev = 0
    minima = []
    for b in blocks:
        lo, hi = int(b["lo"]), int(b["hi"])
        if not (prev < lo <= hi):
            raise WitnessError("intervals must be nonempty and successive")
        prev = hi
        minima.append(lo)
    if not _contains(xi, tuple(minima)):
        raise WitnessError(f"interval minima {minima} are not in S_{xi}")


def check_witness(norm, x: Vector, w: Functional) -> None:
    """Raise :class:`WitnessError` unless ``w`` is a valid witness for ``x``."""
    mode = _mode_of(x)
    if not w.terms and not x and not w.provenance:
        return
    prov = w.provenance
    if not isinstance(prov, dict) or "node" not in prov or "value" not in prov:
        raise WitnessError("missing provenance")
    if prov.get("norm") != norm_to_json(norm):
        raise WitnessError("provenance belongs to another norm")
    if isinstance(norm, MixedZ):
        mode = FLOAT
        x = x.with_mode(FLOAT)
    derived = _derive(norm, prov["node"], x, mode)
    derived = {i: v for i, v in derived.items() if v != 0}
    if set(derived) != set(w.terms) or not all(_close(derived[i], w.terms[i]) for i in derived):
        raise WitnessError("weights differ from the provenance")
    claimed = to_scalar(prov["value"], mode)
    if not _close(w(x), claimed):
        raise WitnessError(f"witness gives {w(x)}, claimed {claimed}")


def verify_witness(norm, x: Vector, w: Functional) -> bool:
    try:
        check_witness(norm, x, w)
    except (WitnessError, KeyError, TypeError, ValueError):
        return False
    return True
