import json
from fractions import Fraction

import pytest

from ricci_mmp import toric
from ricci_mmp.toric import WeilDivisor

import oracles

P2 = toric.validate_fan(toric.P2)
F1 = toric.validate_fan(toric.F1)


def test_validate_examples():
    assert P2.rays == ((1, 0), (0, 1), (-1, -1))
    assert F1.rays == ((1, 0), (0, 1), (-1, 1), (0, -1))
    # input order does not matter
    assert toric.validate_fan([(0, -1), (-1, 1), (1, 0), (0, 1)]) == F1


@pytest.mark.parametrize("rays, err", [
    ([(2, 0), (0, 1), (-1, -1)], toric.NotPrimitive),
    ([(0, 0), (0, 1), (-1, -1)], toric.NotPrimitive),
    ([(1, 0), (1, 0), (0, 1), (-1, -1)], toric.DuplicateRay),
    ([(1, 0), (0, 1)], toric.NotComplete),
    ([(1, 0), (0, 1), (-1, 0)], toric.NotComplete),
    ([(1, 0), (-1, 2), (0, -1)], toric.NotSmooth),
])
def test_validate_errors(rays, err):
    with pytest.raises(err):
        toric.validate_fan(rays)


def test_self_intersections_examples():
    assert toric.self_intersections(P2) == (1, 1, 1)
    assert toric.self_intersections(F1) == (0, -1, 0, 1)


def test_intersection_examples():
    assert toric.intersection_number(P2, WeilDivisor.of([1, 0, 0]), 1) == 1
    assert toric.intersection_vector(F1, WeilDivisor.of([1, 0, 0, 3])) == (3, 1, 3, 4)
    assert all(x == 0 for x in toric.intersection_vector(F1, WeilDivisor.of([0] * 4)))
    with pytest.raises(toric.LengthMismatch):
        toric.intersection_vector(F1, WeilDivisor.of([1, 0, 0]))


def test_canonical_examples():
    K = toric.canonical_divisor(F1)
    assert toric.intersection_vector(P2, toric.canonical_divisor(P2)) == (-3, -3, -3)
    assert toric.intersection_vector(F1, K) == (-2, -1, -2, -3)
    assert toric.self_intersection(F1, K) == 8
    assert toric.self_intersection(P2, toric.canonical_divisor(P2)) == 9


def test_nef_examples():
    assert toric.is_nef(P2, WeilDivisor.of([1, 0, 0]))
    assert not toric.is_nef(F1, toric.canonical_divisor(F1))
    assert toric.is_nef(F1, WeilDivisor.of([0] * 4))


def test_nef_threshold_examples():
    assert toric.nef_threshold(P2, WeilDivisor.of([1, 0, 0])) == Fraction(1, 3)
    H = WeilDivisor.of([1, 0, 0, 3])
    assert toric.threshold_ratios(F1, H) == [Fraction(3, 2), 1, Fraction(3, 2), Fraction(4, 3)]
    assert toric.nef_threshold(F1, H) == 1
    assert toric.nef_threshold(F1, WeilDivisor.of([1, 0, 0, 1])) == Fraction(1, 2)
    with pytest.raises(toric.NotAmple):
        toric.nef_threshold(F1, WeilDivisor.of([1, 0, 0, 0]))


def test_blow_down_examples():
    assert toric.blow_down(F1, 1).rays == ((1, 0), (-1, 1), (0, -1))
    assert toric.isomorphic(toric.blow_down(F1, 1), P2)
    for i in range(3):
        with pytest.raises(toric.NotContractible):
            toric.blow_down(P2, i)


def test_blow_up_examples():
    X = toric.blow_up(P2, 0)
    assert (1, 1) in X.rays
    assert toric.isomorphic(X, F1)
    e = toric.blow_up_index(P2, X, 0)
    assert toric.self_intersections(X)[e] == -1
    assert toric.blow_down(X, e) == P2


def test_isomorphic_rejects():
    F2 = toric.validate_fan([(1, 0), (0, 1), (-1, 2), (0, -1)])
    assert not toric.isomorphic(F1, F2)
    assert not toric.isomorphic(P2, F1)


def test_pushforward_example():
    D = WeilDivisor.of([1, 0, 0, 3]) + toric.canonical_divisor(F1)
    assert D.coeffs == (0, -1, -1, 2)
    Y = toric.blow_down(F1, 1)
    E = toric.pushforward(F1, D, 1)
    assert E.coeffs == (0, -1, 2)
    assert toric.intersection_vector(Y, E) == (1, 1, 1)
    assert toric.pushforward(F1, WeilDivisor.of([0] * 4), 1).coeffs == (0, 0, 0)


def test_pairing_matches_linear_equivalence_oracle():
    X = toric.blow_up(toric.blow_up(F1, 2), 0)
    D = WeilDivisor.of([3, Fraction(-1, 2), 2, 0, 5, 1])
    assert list(toric.intersection_vector(X, D)) == oracles.pairing_vector(X.rays, D.coeffs)


def test_json_roundtrip():
    H = WeilDivisor.of([1, Fraction(1, 3), 0, 3])
    text = toric.fan_to_json(F1, {"H": H})
    fan, divs = toric.fan_from_json(text)
    assert fan == F1 and divs["H"] == H
    # coefficients follow rays through the re-sort
    doc = {"rays": [[0, -1], [1, 0], [0, 1], [-1, 1]], "divisors": {"H": ["3", "1", "0", "0"]}}
    fan, divs = toric.fan_from_json(json.dumps(doc))
    assert divs["H"] == WeilDivisor.of([1, 0, 0, 3])
