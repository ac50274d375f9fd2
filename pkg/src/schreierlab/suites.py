"""Named verification suites: identities and bounds checked on explicit instances."""
from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List

import numpy as np

from . import families as fam
from .norms import (AzimiHagler, Ell1Norm, FamilyNorm, Schreier, SchreierLift, SupNorm,
                    Tsirelson, evaluate, norm_to_json)
from .ordinal import Ordinal
from .spreading import SpreadingQuery, inner_min, spreading_constant
from .vectors import Vector, basis_vector, combine, scalar_to_json


@dataclass
class SuiteReport:
    suite: str
    params: dict
    checks: List[dict] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks)

    def check(self, name: str, ok: bool, **detail) -> bool:
        entry = {"name": name, "passed": bool(ok)}
        if detail:
            entry["detail"] = detail
        self.checks.append(entry)
        return ok

    def to_json(self, max_checks: int = 50) -> dict:
        failed = [c for c in self.checks if not c["passed"]]
        return {"suite": self.suite, "params": self.params, "passed": self.passed,
                "n_checks": len(self.checks), "n_failed": len(failed),
                "failures": failed[:max_checks],
                "checks": self.checks[:max_checks] if self.passed else []}


SUITES: Dict[str, Callable[..., SuiteReport]] = {}


def suite(name):
    def deco(fn):
        SUITES[name] = fn
        return fn
    return deco


def run_suite(name: str, **params) -> SuiteReport:
    if name not in SUITES:
        raise KeyError(name)
    return SUITES[name](**{k: v for k, v in params.items() if v is not None})


def random_member(xi: Ordinal, lo: int, hi: int, rng: random.Random, max_size=None,
                  skip: float = 0.5):
    """A random nonempty member of ``S_xi`` inside ``{lo..hi}``: start at a
    random index, then walk the automaton, skipping elements with probability ``skip``."""
    while True:
        E, state = (), fam.EMPTY
        for x in range(rng.randint(lo, hi), hi + 1):
            if max_size is not None and len(E) >= max_size:
                break
            if E and rng.random() < skip:
                continue
            s = fam.step(xi, state, x)
            if s is None:
                break
            E, state = E + (x,), s
        if E:
            return E


# -- identities ----------------------------------------------------------------

@suite("azimi-identity")
def azimi_identity(max_E: int = 6) -> SuiteReport:
    rep = SuiteReport("azimi-identity", {"max_E": max_E})
    norm = AzimiHagler()
    for r in range(1, max_E + 1):
        for E in itertools.combinations(range(1, max_E + 1), r):
            x = Vector(tuple(p for i in E for p in ((2 * i, 1), (2 * i - 1, -1))))
            x = x.with_mode("rational")
            value, _ = evaluate(norm, x)
            expected = sum(norm.alpha.alpha(i) for i in range(1, 2 * len(E) + 1))
            rep.check(f"E={list(E)}", value == expected,
                      value=scalar_to_json(value), expected=scalar_to_json(expected))
    return rep


@suite("composition")
def composition(max_sum: int = 3, N: int = 12) -> SuiteReport:
    rep = SuiteReport("composition", {"max_sum": max_sum, "N": N})
    for total in range(0, max_sum + 1):
        target = fam.materialize(total, N)
        for m in range(0, total + 1):
            got = fam.compose(m, total - m, N)
            extra = sorted(got.sets - target.sets)[:3]
            missing = sorted(target.sets - got.sets)[:3]
            rep.check(f"S_{m}[S_{total - m}] = S_{total}", got.sets == target.sets,
                      size=len(got), extra=[list(s) for s in extra],
                      missing=[list(s) for s in missing])
    return rep


@suite("partition")
def partition(xi: str = "0,1,2", N: int = 8) -> SuiteReport:
    xis = [Ordinal.of(s) for s in str(xi).split(",")]
    rep = SuiteReport("partition", {"xi": [str(o) for o in xis], "N": N})
    for o in xis:
        for n in range(1, N + 1):
            r = fam.partition_check(o, n)
            rep.check(f"S_{o} on 1..{n}", r.passed, failures=r.failures[:3], levels=r.levels)
    return rep


@suite("schreier-spreading")
def schreier_spreading(k: str = "1,2", basis: int = 10) -> SuiteReport:
    ks = [int(s) for s in str(k).split(",")]
    rep = SuiteReport("schreier-spreading", {"k": ks, "basis": basis})
    for kk in ks:
        q = SpreadingQuery([basis_vector(i) for i in range(1, basis + 1)],
                           FamilyNorm(Schreier(kk)), kk)
        cert = spreading_constant(q)
        rep.check(f"k={kk}", cert.delta == 1 and cert.gap == 0,
                  delta=scalar_to_json(cert.delta), gap=scalar_to_json(cert.gap),
                  witness_E=list(cert.witness_E))
    return rep


# -- randomized bounds ----------------------------------------------------------

def _rand_fraction(rng: random.Random, lo=-6, hi=6, den=4) -> Fraction:
    while True:
        v = Fraction(rng.randint(lo, hi), rng.randint(1, den))
        if v:
            return v


def random_blocks(rng: random.Random, support: int):
    """Successive nonzero block vectors with total support ``support``."""
    blocks, pos, used = [], 1, 0
    while used < support:
        pos += rng.randint(0, 1)
        size = min(rng.randint(1, 3), support - used)
        blocks.append(Vector(tuple((pos + j, _rand_fraction(rng)) for j in range(size))))
        pos += size
        used += size
    return blocks


@suite("tsirelson-block")
def tsirelson_block(trials: int = 200, seed: int = 0, theta: str = "1/2", xi: str = "1",
                    support: int = 24) -> SuiteReport:
    th, o = Fraction(theta), Ordinal.of(str(xi))
    rep = SuiteReport("tsirelson-block", {"trials": trials, "seed": seed, "theta": str(th),
                                          "xi": str(o), "support": support})
    rng = random.Random(seed)
    norm = Tsirelson(o, th)
    for t in range(trials):
        blocks = random_blocks(rng, rng.randint(min(8, support), support))
        E = random_member(o, 1, len(blocks), rng, skip=0.2)
        coeffs = [_rand_fraction(rng) for _ in E]
        x = combine(coeffs, [blocks[i - 1] for i in E])
        a = min(evaluate(norm, blocks[i - 1])[0] for i in E)
        value = evaluate(norm, x)[0]
        bound = th * a * sum(abs(c) for c in coeffs)
        rep.check(f"trial {t}", value >= bound, E=list(E), value=scalar_to_json(value),
                  bound=scalar_to_json(bound), support=sum(len(b) for b in blocks))
    return rep


def lift_instance(n_blocks: int = 10, universe: int = 40, width: int = 3):
    """Base family ``|E| <= width`` on ``{1..universe}`` and the convex blocks
    ``y_n = (e_{4n-3} + e_{4n-1}) / 2``."""
    F = fam.bounded_size_family(universe, width)
    half = Fraction(1, 2)
    ys = [Vector(((4 * n - 3, half), (4 * n - 1, half))) for n in range(1, n_blocks + 1)]
    if ys[-1].support[-1] > universe:
        raise ValueError("blocks leave the universe")
    return F, ys


@suite("lift-spreading")
def lift_spreading(k: str = "1,2", samples: int = 500, seed: int = 0,
                   blocks: int = 10) -> SuiteReport:
    ks = [int(s) for s in str(k).split(",")]
    rep = SuiteReport("lift-spreading", {"k": ks, "samples": samples, "seed": seed,
                                         "blocks": blocks})
    F, ys = lift_instance(blocks)
    base = FamilyNorm(F)
    cert = spreading_constant(SpreadingQuery(ys, base, 1))
    eps = cert.delta
    rep.check("certified constant", cert.gap == 0 and eps > 0, epsilon=scalar_to_json(eps),
              witness_E=list(cert.witness_E))
    rng = random.Random(seed)
    for kk in ks:
        lifted = SchreierLift(base, kk)
        nxt = Ordinal.of(kk + 1)
        worst = None
        bad = 0
        for s in range(samples):
            E = random_member(nxt, 1, len(ys), rng)
            raw = [_rand_fraction(rng) for _ in E]
            total = sum(abs(c) for c in raw)
            coeffs = [c / total for c in raw]
            value = evaluate(lifted, combine(coeffs, [ys[i - 1] for i in E]))[0]
            ratio = value / sum(abs(c) for c in coeffs)
            if worst is None or ratio < worst[0]:
                worst = (ratio, E)
            if value < eps * sum(abs(c) for c in coeffs) - Fraction(1, 10 ** 12):
                bad += 1
                rep.check(f"k={kk} sample {s}", False, E=list(E), value=scalar_to_json(value))
        rep.check(f"k={kk}", bad == 0, samples=samples, worst_ratio=scalar_to_json(worst[0]),
                  worst_E=list(worst[1]), epsilon=scalar_to_json(eps))
    return rep


# -- cutting planes against a grid -----------------------------------------------

def simplex_grid(k: int, steps: int) -> np.ndarray:
    """All points of the simplex in ``R^k`` with coordinates in ``(1/steps) Z``."""
    if k == 1:
        return np.ones((1, 1))
    cuts = np.array(list(itertools.combinations(range(steps + k - 1), k - 1)))
    bars = np.concatenate([np.full((len(cuts), 1), -1), cuts,
                           np.full((len(cuts), 1), steps + k - 1)], axis=1)
    return (np.diff(bars, axis=1) - 1) / steps


def _intervals(dim: int, gaps: bool):
    """All lists of successive intervals inside ``1..dim`` (``gaps``: anywhere)."""
    out = []

    def rec(start, acc):
        if acc:
            out.append(list(acc))
        for lo in range(start, dim + 1):
            for hi in range(lo, dim + 1):
                rec(hi + 1, acc + [(lo, hi)])
            if not gaps and acc:
                break

    rec(1, [])
    return out


def brute_norms(norm, Y: np.ndarray) -> np.ndarray:
    """Norm of every row of ``Y`` (coordinate ``j`` in column ``j-1``) by direct enumeration."""
    dim = Y.shape[1]
    A = np.abs(Y)
    if isinstance(norm, SupNorm):
        return A.max(axis=1)
    if isinstance(norm, Ell1Norm):
        return A.sum(axis=1)
    if isinstance(norm, FamilyNorm):
        F = norm.family
        if isinstance(F, Schreier):
            sets = [E for r in range(dim + 1) for E in itertools.combinations(range(1, dim + 1), r)
                    if E in F]
        else:
            sets = [E for E in F.sets if all(i <= dim for i in E)]
        ind = np.zeros((dim, len(sets)))
        for c, E in enumerate(sets):
            for i in E:
                ind[i - 1, c] = 1.0
        return (A @ ind).max(axis=1)
    if isinstance(norm, SchreierLift) and isinstance(norm.base, (SupNorm, Ell1Norm)):
        best = np.zeros(len(Y))
        for dec in _intervals(dim, gaps=True):
            if not fam._contains(norm.xi, tuple(lo for lo, _ in dec)):
                continue
            part = [A[:, lo - 1:hi] for lo, hi in dec]
            red = [p.max(axis=1) if isinstance(norm.base, SupNorm) else p.sum(axis=1) for p in part]
            best = np.maximum(best, float(norm.theta) * np.sum(red, axis=0))
        if norm.outer == "max_with_c0":
            best = np.maximum(best, A.max(axis=1))
        return best
    if isinstance(norm, AzimiHagler):
        best = np.zeros(len(Y))
        for dec in _intervals(dim, gaps=True):
            total = np.zeros(len(Y))
            for i, (lo, hi) in enumerate(dec, start=1):
                total += float(norm.alpha.alpha(i)) * np.abs(Y[:, lo - 1:hi].sum(axis=1))
            best = np.maximum(best, total)
        return best
    raise ValueError(f"no brute-force oracle for {norm_to_json(norm)}")


def random_polyhedral_norm(rng: random.Random, dim: int):
    kind = rng.choice(["family", "schreier", "lift_sup", "lift_l1", "azimi", "sup"])
    if kind == "family":
        seeds = [tuple(sorted(rng.sample(range(1, dim + 1), rng.randint(1, 3))))
                 for _ in range(rng.randint(1, 4))]
        return FamilyNorm(fam.family_from_json({"universe": dim, "sets": seeds})[0])
    if kind == "schreier":
        return FamilyNorm(Schreier(rng.randint(0, 2)))
    if kind == "lift_sup":
        return SchreierLift(SupNorm(), rng.randint(0, 2))
    if kind == "lift_l1":
        return SchreierLift(Ell1Norm(), rng.randint(0, 1), theta=Fraction(1, 2),
                            outer="max_with_c0")
    if kind == "azimi":
        return AzimiHagler()
    return SupNorm()


@suite("cutting-plane-oracle")
def cutting_plane_oracle(instances: int = 100, seed: int = 0, steps: int = 64,
                         dim: int = 6) -> SuiteReport:
    rep = SuiteReport("cutting-plane-oracle", {"instances": instances, "seed": seed,
                                               "steps": steps, "dim": dim})
    rng = random.Random(seed)
    tol = 1e-9
    for t in range(instances):
        N = rng.randint(2, 8)
        xi = Ordinal.of(rng.randint(1, 2))
        norm = random_polyhedral_norm(rng, dim)
        vecs = []
        for _ in range(N):
            sup = rng.sample(range(1, dim + 1), rng.randint(1, 3))
            vecs.append(Vector(tuple((i, _rand_fraction(rng, -4, 4, 2)) for i in sup)))
        center = Vector()
        if rng.random() < 0.3:
            center = Vector(((rng.randint(1, dim), _rand_fraction(rng, -2, 2, 2)),))
        E = random_member(xi, 1, N, rng, max_size=5)
        q = SpreadingQuery(vecs, norm, xi, center=center, tolerance=tol, exact=False)
        res = inner_min(q, E)
        D = np.zeros((len(E), dim))
        for r, i in enumerate(E):
            for j, v in (vecs[i - 1] - center).entries:
                D[r, j - 1] = float(v)
        grid = simplex_grid(len(E), steps)
        values = np.concatenate([brute_norms(norm, grid[s:s + 200000] @ D)
                                 for s in range(0, len(grid), 200000)])
        grid_min = float(values.min())
        lip = float(brute_norms(norm, D).max())
        modulus = lip * len(E) / steps
        ok = (float(res.value) <= grid_min + tol) and (grid_min - float(res.value) <= tol + modulus)
        rep.check(f"instance {t}", ok, norm=norm_to_json(norm) if not isinstance(norm, FamilyNorm)
                  or isinstance(norm.family, Schreier) else {"type": "family", "size": len(norm.family)},
                  E=list(E), cutting_plane=float(res.value), grid=grid_min, modulus=modulus,
                  gap=float(res.value - res.lower))
    return rep


@suite("flattening-trend")
def flattening_trend(sizes: str = "8,12,16,20", xi: str = "2", k: str = "1",
                     threshold: str = "1/2") -> SuiteReport:
    Ns = [int(s) for s in str(sizes).split(",")]
    o, kk, th = Ordinal.of(str(xi)), Ordinal.of(str(k)), Fraction(threshold)
    rep = SuiteReport("flattening-trend", {"sizes": Ns, "xi": str(o), "k": str(kk),
                                           "threshold": str(th)})
    norm = SchreierLift(SupNorm(), kk)
    deltas = []
    for N in Ns:
        q = SpreadingQuery([basis_vector(i) for i in range(1, N + 1)], norm, o, exact=False)
        cert = spreading_constant(q)
        deltas.append(float(cert.delta))
        rep.check(f"N={N} certified", cert.gap <= q.tolerance, delta=float(cert.delta),
                  gap=float(cert.gap), witness_E=list(cert.witness_E),
                  sets=cert.sets_examined)
    for (a, da), (b, db) in zip(zip(Ns, deltas), zip(Ns[1:], deltas[1:])):
        rep.check(f"delta(N={b}) <= delta(N={a})", db <= da + 1e-9, before=da, after=db)
    rep.check(f"delta(N={Ns[-1]}) < {th}", deltas[-1] < float(th), delta=deltas[-1])
    return rep
