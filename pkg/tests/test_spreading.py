from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from schreierlab import families as fam
from schreierlab.norms import (Ell1Norm, FamilyNorm, Schreier, SchreierLift, SupNorm, Tsirelson,
                               norm_value)
from schreierlab.spreading import (ELL1_SPHERE, ConstructionError, Flattening, NotFound,
                                   SpreadingError, SpreadingQuery, build_average,
                                   flattening_search, inner_min, spreading_constant)
from schreierlab.vectors import Vector, basis_vector, combine

SCHREIER1 = FamilyNorm(Schreier(1))


def basis(n):
    return [basis_vector(i) for i in range(1, n + 1)]


def uniform(k):
    return [F(1, k)] * k


def test_schreier_basis_constant_is_one():
    cert = spreading_constant(SpreadingQuery(basis(10), SCHREIER1, 1))
    assert cert.delta == 1 and cert.gap == 0


def test_sup_basis_constant():
    cert = spreading_constant(SpreadingQuery(basis(10), SupNorm(), 1))
    assert cert.delta == F(1, 5)
    assert cert.gap == 0
    # lexicographically first among the minimisers
    assert cert.witness_E == (5, 6, 7, 8, 9)
    assert cert.witness_coeffs == uniform(5)
    q = SpreadingQuery(basis(10), SupNorm(), 1)
    assert inner_min(q, (6, 7, 8, 9, 10)).value == F(1, 5)


def test_single_vector():
    x = Vector(((2, F(3)), (5, F(-4))))
    c = Vector(((2, F(1)),))
    cert = spreading_constant(SpreadingQuery([x], Ell1Norm(), "w", center=c))
    assert cert.delta == 6


def test_inner_examples():
    q = SpreadingQuery(basis(10), SCHREIER1, 1)
    assert inner_min(q, (2, 3)).value == 1
    dup = SpreadingQuery([basis_vector(2), basis_vector(2), basis_vector(2)], SupNorm(), 1)
    res = inner_min(dup, (2, 3))
    assert res.value == 1


def test_inner_rejects_inadmissible_sets():
    q = SpreadingQuery(basis(5), SupNorm(), 1)
    with pytest.raises(fam.FamilyError):
        inner_min(q, (1, 2))
    with pytest.raises(SpreadingError):
        inner_min(q, (5, 6))


def test_zero_differences():
    q = SpreadingQuery(basis(3), SupNorm(), 1, center=Vector())
    zero = SpreadingQuery([Vector()] * 3, SupNorm(), 1)
    assert inner_min(zero, (2, 3)).value == 0
    assert inner_min(q, (3,)).value == 1


def test_certificate_json():
    cert = spreading_constant(SpreadingQuery(basis(6), SupNorm(), 1))
    data = cert.to_json()
    assert data["delta"] == "1/3" and data["witness_E"] == [3, 4, 5]
    assert data["index_range"] == [1, 6]


def test_query_json_roundtrip():
    q = SpreadingQuery(basis(4), SchreierLift(SupNorm(), 1), 2, center=basis_vector(1))
    assert SpreadingQuery.from_json(q.to_json()) == q


def test_range_cap():
    with pytest.raises(fam.ResourceError):
        spreading_constant(SpreadingQuery(basis(30), SupNorm(), 1))


def test_flatten_examples():
    found = flattening_search(basis(10), SupNorm(), 1, F(3, 10))
    assert isinstance(found, Flattening)
    assert found.value == F(1, 5) and found.coeffs == uniform(5)
    for floor in (0, 3, 7):
        assert isinstance(flattening_search(basis(10), SCHREIER1, 1, F(1, 2), floor), NotFound)
    big = flattening_search(basis(4), SupNorm(), 0, 2)
    assert isinstance(big, Flattening) and len(big.E) == 1


def test_flatten_floor_respected():
    found = flattening_search(basis(12), SupNorm(), 1, F(1, 2), index_floor=6)
    assert min(found.E) > 6


# -- properties ---------------------------------------------------------------------

small_vectors = st.lists(
    st.dictionaries(st.integers(1, 8), st.fractions(-3, 3, max_denominator=3),
                    min_size=1, max_size=3).map(lambda d: Vector(tuple(d.items()))),
    min_size=1, max_size=6)
norms = st.sampled_from([SupNorm(), Ell1Norm(), SCHREIER1, SchreierLift(SupNorm(), 1),
                         Tsirelson(1)])


@settings(max_examples=30)
@given(small_vectors, norms, st.sampled_from([1, 2]))
def test_certificate_is_sound(vectors, norm, xi):
    q = SpreadingQuery(vectors, norm, xi)
    cert = spreading_constant(q)
    y = combine(cert.witness_coeffs, [q.difference(i) for i in cert.witness_E])
    assert norm_value(norm, y) == cert.delta
    assert sum(cert.witness_coeffs) == 1 and min(cert.witness_coeffs) >= 0
    assert cert.lower <= cert.delta and cert.gap == 0
    assert fam.schreier_contains(xi, cert.witness_E)


@settings(max_examples=20)
@given(small_vectors.filter(lambda v: len(v) <= 5), norms)
def test_sphere_mode_below_convex(vectors, norm):
    convex = spreading_constant(SpreadingQuery(vectors, norm, 1)).delta
    sphere = spreading_constant(SpreadingQuery(vectors, norm, 1, ELL1_SPHERE, set_size_cap=8)).delta
    assert sphere <= convex


@settings(max_examples=20)
@given(small_vectors, norms)
def test_more_admissible_sets_lower_delta(vectors, norm):
    deltas = [spreading_constant(SpreadingQuery(vectors, norm, k)).delta for k in (0, 1, 2)]
    assert deltas[0] >= deltas[1] >= deltas[2]


@settings(max_examples=20)
@given(small_vectors, norms)
def test_float_mode_agrees(vectors, norm):
    exact = spreading_constant(SpreadingQuery(vectors, norm, 1)).delta
    approx = spreading_constant(SpreadingQuery(vectors, norm, 1, exact=False)).delta
    assert approx == pytest.approx(float(exact), abs=1e-8)


# -- averaging construction --------------------------------------------------------

def test_build_average_examples():
    v = build_average([((1,), [F(1)]), ((2, 3), uniform(2))], 1)
    assert v == Vector(((2, F(1, 2)), (3, F(1, 2))))
    stages = [((1,), [F(1)]), ((2,), [F(1)]), ((3, 4), uniform(2)), ((5, 6, 7), uniform(3))]
    v = build_average(stages, 2, k=1)
    assert v.l1() == 1


def test_build_average_errors():
    with pytest.raises(ConstructionError, match="successive"):
        build_average([((2,), [F(1)]), ((2, 3), uniform(2))], 1)
    with pytest.raises(ConstructionError, match="normalised"):
        build_average([((1,), [F(1)]), ((2, 3), [F(1), F(1)])], 1)
    with pytest.raises(ConstructionError, match="witnesses"):
        build_average([((1,), [F(1)])], 1)
    with pytest.raises(ConstructionError, match="not in S_1"):
        build_average([((1,), [F(1)]), ((2, 3, 4), uniform(3))], 1, k=1)


def test_flatten_then_average_end_to_end():
    """Stage witnesses found by ``flattening_search`` in ``Y_0`` (the sup norm
    lifted to S_0) are averaged over stages m+1..2m.

    Each stage block lies in S_1, so alone it has norm 1 in ``Y_1``; the
    average over m = 2 stages has norm 1/m. Dyadic windows ``{f+1..2f+1}``
    keep each search to a single candidate set; the stage tolerances of the
    full argument would need supports far beyond the enumeration caps.
    """
    eps, m, k = F(3, 4), 2, 1
    stage_norm = SchreierLift(SupNorm(), k - 1)
    lifted = SchreierLift(SupNorm(), k)
    floor, stages = 3, []
    for _ in range(2 * m):
        found = flattening_search(basis(2 * floor + 1), stage_norm, k, F(1, 2),
                                  index_floor=floor, range_cap=32)
        assert isinstance(found, Flattening)
        block = combine(found.coeffs, [basis_vector(j) for j in found.E])
        assert norm_value(lifted, block) == 1
        stages.append((found.E, found.coeffs))
        floor = found.E[-1]
    avg = build_average(stages, m, k=k)
    assert avg.l1() == 1
    assert norm_value(lifted, avg) == F(1, m) < eps
