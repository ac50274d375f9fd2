import math
from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from schreierlab import families as fam
from schreierlab.norms import (AzimiHagler, ConfigError, Ell1Norm, FamilyNorm, GeometricTheta,
                               HarmonicWeights, MixedZ, Schreier, SchreierLift, SupNorm,
                               Tsirelson, WitnessError, check_witness, evaluate, norm_from_json,
                               norm_to_json, norm_value, verify_witness)
from schreierlab.vectors import (FLOAT, Functional, Interval, Vector, add, basis_vector, restrict,
                                 scale)


def vec(*pairs):
    return Vector(tuple((i, F(v)) for i, v in pairs))


def e(*idx):
    return Vector(tuple((i, F(1)) for i in idx))


scalars = st.fractions(min_value=-5, max_value=5, max_denominator=6)


def vectors(max_support=6, top=14):
    return st.dictionaries(st.integers(1, top), scalars, max_size=max_support).map(
        lambda d: Vector(tuple(d.items())))


SMALL_FAMILY = fam.MaterializedFamily(
    8, frozenset(fam.hereditary_closure([(1, 4, 6), (2, 3), (5, 7, 8), (2, 8)])),
    contains_singletons=True)

EXACT_NORMS = [
    SupNorm(), Ell1Norm(), FamilyNorm(Schreier(1)), FamilyNorm(Schreier(2)),
    FamilyNorm(SMALL_FAMILY),
    SchreierLift(SupNorm(), 1), SchreierLift(Ell1Norm(), 0), SchreierLift(FamilyNorm(Schreier(1)), 1),
    SchreierLift(SupNorm(), 2, theta=F(1, 2), outer="max_with_c0"),
    SchreierLift(SupNorm(), "w"),
    Tsirelson(1, F(1, 2)), Tsirelson(2, F(1, 3)), Tsirelson("w", F(1, 2)),
    AzimiHagler(), AzimiHagler(HarmonicWeights(2)),
]
ALL_NORMS = EXACT_NORMS + [MixedZ(1), MixedZ(2), SchreierLift(SupNorm(), 1, "euclidean")]
UNCONDITIONAL = [n for n in ALL_NORMS if not isinstance(n, AzimiHagler)]


def close(a, b, rel=1e-9):
    return math.isclose(float(a), float(b), rel_tol=rel, abs_tol=1e-12)


# -- brute-force oracles ----------------------------------------------------------

def interval_lists(support, xi):
    """All successive interval lists on the support with minima in ``S_xi``
    (any minima when ``xi`` is None)."""
    n = len(support)

    def rec(start, acc):
        if acc:
            yield list(acc)
        for q in range(start, n):
            for r in range(q, n):
                mins = [support[a] for a, _ in acc] + [support[q]]
                if xi is None or fam.schreier_contains(xi, mins):
                    yield from rec(r + 1, acc + [(q, r)])

    yield from rec(0, [])


def part(x, q, r):
    s = x.support
    return restrict(x, (s[q], s[r]))


def brute_family(F_, x):
    if isinstance(F_, Schreier):
        sets = fam.iter_schreier(F_.xi, 1, max(x.support, default=1))
    else:
        sets = F_.sets
    return max((sum(abs(x[i]) for i in E) for E in sets), default=0)


def brute_lift(base, xi, x):
    return max((sum(norm_value(base, part(x, q, r)) for q, r in d)
                for d in interval_lists(x.support, xi)), default=0)


def brute_azimi(x, alpha=HarmonicWeights()):
    return max((sum(alpha.alpha(k) * abs(sum(part(x, q, r).values))
                    for k, (q, r) in enumerate(d, 1))
                for d in interval_lists(x.support, None)), default=0)


def brute_tsirelson(T, x, rounds=40):
    s, n = x.support, len(x)
    runs = [(q, r) for q in range(n) for r in range(q, n)]
    dec = {}
    for q, r in runs:
        dec[q, r] = [[(q + a, q + b) for a, b in d] for d in interval_lists(s[q:r + 1], T.xi)]
    c0 = {k: max(abs(v) for v in x.values[k[0]:k[1] + 1]) for k in runs}
    val = dict(c0)
    for _ in range(rounds):
        new = {k: max(c0[k], T.theta * max(sum(val[b] for b in d) for d in dec[k])) for k in runs}
        if new == val:
            break
        val = new
    return val[0, n - 1] if n else 0


# -- examples ---------------------------------------------------------------------

def test_family_norm_example():
    v, w = evaluate(FamilyNorm(Schreier(1)), e(1, 2, 3))
    assert v == 2
    assert w.provenance["node"]["set"] == [2, 3]
    assert verify_witness(FamilyNorm(Schreier(1)), e(1, 2, 3), w)


def test_azimi_example():
    x = vec((2, 1), (1, -1), (4, 1), (3, -1))
    assert evaluate(AzimiHagler(), x)[0] == F(1) + F(1, 2) + F(1, 3) + F(1, 4)
    assert evaluate(AzimiHagler(), vec((2, 1), (1, -1)))[0] == F(3, 2)


def test_tsirelson_example():
    v, w = evaluate(Tsirelson(1, F(1, 2)), e(2, 3))
    assert v == 1
    blocks = w.provenance["node"]["blocks"]
    assert [(b["lo"], b["hi"]) for b in blocks] == [(2, 2), (3, 3)]


def test_lift_example():
    assert evaluate(SchreierLift(SupNorm(), 1), e(2, 3, 4))[0] == 2
    assert evaluate(SchreierLift(SupNorm(), 1), e(3, 4, 5))[0] == 3


def test_mixed_example():
    v, w = evaluate(MixedZ(1), e(1))
    assert v == 1.0
    assert verify_witness(MixedZ(1), e(1), w)


def test_zero_vector():
    for norm in ALL_NORMS:
        v, w = evaluate(norm, Vector())
        assert v == 0
        assert verify_witness(norm, Vector(), w)
    assert verify_witness(SupNorm(), Vector(), Functional({}))


def test_vector_ops():
    assert restrict(e(2, 5), Interval(1, 3)) == e(2)
    assert restrict(e(2, 5), (1, 3)) == e(2)
    assert restrict(e(2, 5, 7), {5, 7}) == e(5, 7)
    assert add(e(1), scale(-1, e(1))) == Vector()
    assert basis_vector(3).as_dict() == {3: 1}


def test_fake_witness_rejected():
    x = e(1, 2, 3)
    norm = FamilyNorm(Schreier(1))
    fake = Functional({1: F(1), 2: F(1)}, {
        "norm": norm_to_json(norm), "value": "2",
        "node": {"kind": "family", "set": [1, 2], "signs": [[1, 1], [2, 1]]}})
    assert not verify_witness(norm, x, fake)
    with pytest.raises(WitnessError, match="not in the family"):
        check_witness(norm, x, fake)
    # a valid structure whose value is misreported
    v, w = evaluate(norm, x)
    lie = Functional(w.terms, dict(w.provenance, value="3"))
    assert not verify_witness(norm, x, lie)
    assert not verify_witness(norm, x, Functional(w.terms, {"node": "junk"}))


def test_support_cap():
    x = e(*range(2, 30))
    with pytest.raises(fam.ResourceError):
        evaluate(Tsirelson(1), x, support_cap=20)
    assert evaluate(SupNorm(), x, support_cap=20)[0] == 1


def test_config_errors():
    with pytest.raises(ConfigError):
        norm_from_json({"type": "mixed_z", "xi": "1", "theta_rule": {"rule": "harmonic"}})
    with pytest.raises(ConfigError):
        norm_from_json({"type": "nope"})
    with pytest.raises(ConfigError):
        Tsirelson(1, F(1))
    with pytest.raises(ConfigError):
        GeometricTheta(F(1), F(1, 2))
    with pytest.raises(ConfigError):
        MixedZ("w")


@pytest.mark.parametrize("norm", ALL_NORMS, ids=repr)
def test_json_roundtrip(norm):
    assert norm_from_json(norm_to_json(norm)) == norm


def test_geometric_tail_closed_form():
    g = GeometricTheta()
    assert g.theta(1) == F(1, 4)
    assert sum(g.theta(n) ** 2 for n in range(4, 200)) == pytest.approx(float(g.tail_sq(3)))


# -- agreement with brute force ------------------------------------------------------

@settings(max_examples=60)
@given(vectors())
def test_family_norm_brute(x):
    for F_ in (Schreier(1), Schreier(2), SMALL_FAMILY):
        if isinstance(F_, fam.MaterializedFamily) and x and x.support[-1] > 8:
            x = restrict(x, (1, 8))
        assert evaluate(FamilyNorm(F_), x)[0] == brute_family(F_, x)


@settings(max_examples=40)
@given(vectors())
def test_lift_brute(x):
    for base, xi in ((SupNorm(), 1), (Ell1Norm(), 1), (FamilyNorm(Schreier(1)), 1), (SupNorm(), 2)):
        assert evaluate(SchreierLift(base, xi), x)[0] == brute_lift(base, xi, x)


@settings(max_examples=40)
@given(vectors())
def test_azimi_brute(x):
    assert evaluate(AzimiHagler(), x)[0] == brute_azimi(x)


@settings(max_examples=30)
@given(vectors(max_support=5))
def test_tsirelson_matches_fixed_point_iteration(x):
    for T in (Tsirelson(1, F(1, 2)), Tsirelson(2, F(1, 3)), Tsirelson(0, F(1, 2))):
        assert evaluate(T, x)[0] == brute_tsirelson(T, x)


# -- properties --------------------------------------------------------------------

@settings(max_examples=15)
@given(vectors(max_support=8), vectors(max_support=8), scalars)
def test_norm_axioms(x, y, c):
    for norm in EXACT_NORMS:
        nx, ny = norm_value(norm, x), norm_value(norm, y)
        assert nx >= 0
        if norm != FamilyNorm(SMALL_FAMILY):  # only a seminorm beyond its universe
            assert (nx == 0) == (not x)
        assert norm_value(norm, scale(c, x)) == abs(c) * nx
        assert norm_value(norm, add(x, y)) <= nx + ny
    for norm in ALL_NORMS[len(EXACT_NORMS):]:
        nx, ny = norm_value(norm, x), norm_value(norm, y)
        assert close(norm_value(norm, scale(c, x)), abs(c) * nx)
        assert float(norm_value(norm, add(x, y))) <= float(nx + ny) * (1 + 1e-12) + 1e-12


@settings(max_examples=25)
@given(vectors(max_support=8), st.data())
def test_sign_invariance_and_unconditionality(x, data):
    flips = {i: data.draw(st.sampled_from([-1, 1])) for i in x.support}
    shrink = {i: data.draw(st.fractions(0, 1, max_denominator=3)) for i in x.support}
    flipped = Vector(tuple((i, v * flips[i]) for i, v in x.entries))
    smaller = Vector(tuple((i, v * shrink[i]) for i, v in x.entries))
    for norm in UNCONDITIONAL:
        a = norm_value(norm, x)
        assert close(norm_value(norm, flipped), a)
        assert float(norm_value(norm, smaller)) <= float(a) * (1 + 1e-12)


@settings(max_examples=30)
@given(vectors(max_support=10, top=20))
def test_witnesses_verify(x):
    for norm in ALL_NORMS:
        v, w = evaluate(norm, x)
        check_witness(norm, x, w)
        assert close(w(x.with_mode(FLOAT) if isinstance(v, float) else x), v)


@given(st.sampled_from(["1", "2", "w"]), st.data())
def test_basis_is_isometric_l1_on_admissible_sets(xi, data):
    lo = data.draw(st.integers(2, 8))
    E, state = [], fam.EMPTY
    for x in range(lo, lo + 20):
        s = fam.step(fam.Ordinal.of(xi), state, x)
        if s is None:
            break
        if data.draw(st.booleans()):
            E.append(x)
            state = s
    coeffs = data.draw(st.lists(scalars, min_size=len(E), max_size=len(E)))
    x = Vector(tuple(zip(E, coeffs)))
    assert evaluate(FamilyNorm(Schreier(xi)), x)[0] == x.l1()


@settings(max_examples=30)
@given(vectors(max_support=8))
def test_lift_dominates_base(x):
    for base in (SupNorm(), Ell1Norm(), FamilyNorm(Schreier(1)), AzimiHagler(), Tsirelson(1)):
        for k in (0, 1, 2):
            assert norm_value(SchreierLift(base, k), x) >= norm_value(base, x)


@settings(max_examples=30)
@given(vectors(max_support=8))
def test_tsirelson_is_stationary(x):
    """One more application of the defining equation changes nothing."""
    T = Tsirelson(1, F(1, 2))
    v = norm_value(T, x)
    best = max((sum(norm_value(T, part(x, q, r)) for q, r in d)
                for d in interval_lists(x.support, T.xi)), default=0)
    assert v == max(x.sup(), T.theta * best)


@settings(max_examples=20)
@given(vectors(max_support=8))
def test_float_mode_agrees(x):
    for norm in EXACT_NORMS:
        assert close(evaluate(norm, x, mode=FLOAT)[0], evaluate(norm, x)[0])


@settings(max_examples=20)
@given(vectors(max_support=8))
def test_mixed_bounds(x):
    """c_0 part is a lower bound; sum theta_n <= 1/2 makes half the l1 norm an upper one."""
    z = norm_value(MixedZ(1), x)
    assert float(x.sup()) <= z * (1 + 1e-12)
    assert z <= max(float(x.sup()), float(x.l1()) / 2) * (1 + 1e-12) + 1e-12


def test_euclidean_aggregator_exact_when_square():
    v = norm_value(SchreierLift(SupNorm(), 1, "euclidean"), vec((3, 3), (4, 4)))
    assert v == 5
