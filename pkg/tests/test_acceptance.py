"""Acceptance criteria, one test each, at the stated tolerances and budgets."""
import json
import time
from fractions import Fraction

from schreierlab import families as fam
from schreierlab.cli import main
from schreierlab.suites import SUITES, lift_instance, run_suite


def timed(name, **params):
    start = time.perf_counter()
    rep = run_suite(name, **params)
    return rep, time.perf_counter() - start


def failures(rep):
    return [c for c in rep.checks if not c["passed"]][:5]


def test_1_azimi_hagler_identity():
    rep, secs = timed("azimi-identity", max_E=6)
    assert rep.passed, failures(rep)
    assert len(rep.checks) == 2 ** 6 - 1  # every nonempty E in {1..6}
    assert all("/" in c["detail"]["value"] or c["detail"]["value"].isdigit() for c in rep.checks)
    assert secs < 10


def test_2_composition_identity():
    rep, secs = timed("composition", max_sum=3, N=12)
    assert rep.passed, failures(rep)
    pairs = {c["name"] for c in rep.checks}
    assert {"S_1[S_2] = S_3", "S_2[S_1] = S_3", "S_1[S_1] = S_2", "S_0[S_3] = S_3"} <= pairs
    assert len(rep.checks) == sum(t + 1 for t in range(4))
    assert secs < 60


def test_3_rank_partition():
    rep, secs = timed("partition", xi="0,1,2", N=8)
    assert rep.passed, failures(rep)
    assert len(rep.checks) == 3 * 8
    assert secs < 60


def test_4_schreier_basis_spreading_constant():
    rep, _ = timed("schreier-spreading", k="1,2", basis=10)
    assert rep.passed, failures(rep)
    for c in rep.checks:
        assert c["detail"]["delta"] == "1" and c["detail"]["gap"] == "0"


def test_5_tsirelson_block_bound():
    rep, secs = timed("tsirelson-block", trials=200, seed=0, theta="1/2", xi="1", support=24)
    assert rep.passed, failures(rep)
    assert len(rep.checks) == 200
    assert max(c["detail"]["support"] for c in rep.checks) <= 24
    assert all(Fraction(c["detail"]["value"]) >= Fraction(c["detail"]["bound"]) for c in rep.checks)
    assert secs < 120


def test_6_lifted_family_norm_spreading_model():
    F, ys = lift_instance(10)
    # heredity is enforced when the family is built
    assert isinstance(F, fam.MaterializedFamily) and F.universe == 40 and F.contains_singletons
    assert all(y.l1() == 1 and min(y.values) > 0 for y in ys)  # convex blocks
    rep, _ = timed("lift-spreading", k="1,2", samples=500, seed=0)
    assert rep.passed, failures(rep)
    cert = rep.checks[0]["detail"]
    assert Fraction(cert["epsilon"]) > 0
    for c in rep.checks[1:]:
        assert c["detail"]["samples"] >= 500
        assert Fraction(c["detail"]["worst_ratio"]) >= Fraction(cert["epsilon"]) - Fraction(1, 10 ** 12)


def test_7_cutting_planes_match_grid():
    rep, _ = timed("cutting-plane-oracle", instances=100, seed=0, steps=64)
    assert rep.passed, failures(rep)
    assert len(rep.checks) == 100
    assert all(len(c["detail"]["E"]) <= 5 for c in rep.checks)


def test_8_flattening_trend():
    rep, _ = timed("flattening-trend", sizes="8,12,16,20", xi="2", k="1", threshold="1/2")
    assert rep.passed, failures(rep)
    deltas = [c["detail"]["delta"] for c in rep.checks if c["name"].endswith("certified")]
    assert len(deltas) == 4
    assert all(b <= a + 1e-9 for a, b in zip(deltas, deltas[1:]))
    assert deltas[-1] < 0.5


SMALL = {
    "azimi-identity": ["--max-E", "4"],
    "composition": ["--max-sum", "2", "--N", "8"],
    "partition": ["--xi", "0,1", "--N", "5"],
    "schreier-spreading": ["--k", "1", "--basis", "6"],
    "tsirelson-block": ["--trials", "40", "--seed", "3"],
    "lift-spreading": ["--k", "1", "--samples", "40", "--seed", "3", "--blocks", "6"],
    "cutting-plane-oracle": ["--instances", "10", "--seed", "3", "--steps", "16"],
    "flattening-trend": ["--sizes", "6,8", "--threshold", "3/5"],
}


def test_9_determinism(capsys):
    assert set(SMALL) == set(SUITES)
    for name, argv in SMALL.items():
        outputs = []
        for _ in range(2):
            fam.clear_caches()
            code = main(["verify", name, *argv])
            out, err = capsys.readouterr()
            assert code == 0, (name, err)
            outputs.append(out.encode())
        assert outputs[0] == outputs[1], name
        rep = json.loads(outputs[0])
        assert rep["version"] and "config" in rep
