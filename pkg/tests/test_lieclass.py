from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest

from poincarelab.lieclass import (
    GroupDescriptor, Profile, WeightData, bs_profile, catalog, catalog_report, classify, is_nc,
    predicted_profile, rank, thin_profile, thurston_profile, weights_from_matrix,
)


def nc_oracle_2d(vecs) -> str:
    """0 outside the hull of nonzero planar vectors iff their angles leave a gap > pi."""
    nz = [v for v in vecs if v != (0, 0)]
    if not nz:
        return "NC"
    ang = sorted(math.atan2(float(y), float(x)) for x, y in nz)
    gaps = np.diff(ang + [ang[0] + 2 * math.pi])
    return "NC" if gaps.max() > math.pi + 1e-12 else "C"


def test_weights_from_matrix():
    assert dict(weights_from_matrix(np.diag([1.0, -2.0])).weights) == {(Fraction(-2),): 1, (Fraction(1),): 1}
    w = weights_from_matrix(np.diag([1.0, -1.0, 0.0]))
    assert dict(w.weights) == {(Fraction(-1),): 1, (Fraction(0),): 1, (Fraction(1),): 1}
    nil = weights_from_matrix(np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 0.0]]))
    assert dict(nil.weights) == {(Fraction(0),): 3}


def test_rotation_block_real_parts():
    w = weights_from_matrix(np.array([[1.0, -3.0], [3.0, 1.0]]))
    assert dict(w.weights) == {(Fraction(1),): 2}


def test_rank_examples():
    assert rank(WeightData.of([0, 0, 0])) == 0
    assert rank(WeightData.of([1, -2])) == 1
    assert rank(WeightData.of([(1, 0), (0, 1)])) == 2
    assert rank(WeightData.of([(1, 2), (2, 4)])) == 1


def test_nc_examples():
    assert is_nc(WeightData.of([1, -3])).property == "C"
    assert is_nc(WeightData.of([1, 2])).property == "NC"
    assert is_nc(WeightData.of([0, 0])).property == "NC"
    dec = is_nc(WeightData.of([1, -3]))
    assert dec.exact and [Fraction(x) for x in dec.certificate] == [Fraction(1, 4), Fraction(3, 4)]


def test_nc_matches_angle_oracle():
    rng = np.random.default_rng(7)
    for _ in range(200):
        k = int(rng.integers(1, 6))
        vecs = [tuple(int(x) for x in rng.integers(-3, 4, 2)) for _ in range(k)]
        assert is_nc(WeightData.of(vecs, r=2)).property == nc_oracle_2d(vecs), vecs


def test_nc_invariant_under_positive_scaling():
    rng = np.random.default_rng(3)
    for _ in range(50):
        vecs = [tuple(int(x) for x in rng.integers(-3, 4, 2)) for _ in range(4)]
        s = [Fraction(int(rng.integers(1, 5)), int(rng.integers(1, 5))) for _ in vecs]
        scaled = [tuple(si * x for x in v) for si, v in zip(s, vecs)]
        assert is_nc(WeightData.of(vecs, r=2)).property == is_nc(WeightData.of(scaled, r=2)).property


def test_classify_examples():
    sol = classify(GroupDescriptor(WeightData.of([1, -1])))
    assert sol.verdict == "thick" and sol.property == "C"
    h2r = classify(GroupDescriptor(WeightData.of([0]), levi_rank=1, levi_Q=1, poly_degree=1))
    assert h2r.verdict == "thin" and h2r.trichotomy_case == "b"
    hz = classify(GroupDescriptor(WeightData.of([1, 2]), poly_degree=0))
    assert hz.verdict == "thin" and hz.trichotomy_case == "c" and not hz.unimodular
    assert hz.Q == 3


def test_noncommuting_levi_is_thick():
    c = classify(GroupDescriptor(WeightData.of([0]), levi_rank=1, levi_commutes=False, levi_Q=1))
    assert c.verdict == "thick"


def test_thin_profiles():
    assert thin_profile(2, 1, 1.0) == Profile.power(Fraction(2, 3))
    assert thin_profile(1, 1, 1.0) == Profile.power_log(Fraction(1, 2), Fraction(1, 2))
    assert thin_profile(0, 1, 2.0) == Profile.power(Fraction(2, 3))
    assert thin_profile(None, 3, 1.0) == Profile.power(Fraction(2, 3))
    assert thin_profile(None, 0, 1.0) == Profile.power(0)


def test_thick_prediction_any_p():
    c = classify(GroupDescriptor(WeightData.of([1, -1, 0])))
    for p in (1.0, 2.0, 5.0):
        assert predicted_profile(c, p) == Profile.n_over_log()


def test_bs_profiles():
    assert bs_profile(1, 1, 3.0) == Profile.power(Fraction(1, 2))
    assert bs_profile(2, 2, 1.0) == Profile.power(Fraction(1, 2))
    assert bs_profile(2, 3, 4.0) == Profile.n_over_log()
    with pytest.raises(ValueError):
        bs_profile(0, 2, 1.0)


def test_thurston_table():
    assert thurston_profile("NIL") == Profile.power(Fraction(3, 4))
    assert thurston_profile("SOL") == Profile.n_over_log()
    assert str(thurston_profile("S²×ℝ")) == "1"
    assert thurston_profile("R3") == Profile.power(Fraction(2, 3))
    with pytest.raises(ValueError):
        thurston_profile("E8")


EXPECTED = {
    "r3": ("thin", "r^(2/3)"),
    "nil": ("thin", "r^(3/4)"),
    "sol": ("thick", "r/log r"),
    "h3": ("thin", "r^(1/2)"),
    "h2xr": ("thin", "r^(1/2) log^(1/2) r"),
    "heintze_1_2": ("thin", None),
    "osc": ("thick", "r/log r"),
    "bs_2_3": ("thick", "r/log r"),
}


def test_catalog_entries():
    cat = catalog()
    assert set(cat) == set(EXPECTED)
    for key, (verdict, text) in EXPECTED.items():
        e = cat[key]
        assert e.verdict() == verdict
        if text is not None:
            assert str(e.predicted(1.0)) == text
        if e.thurston:
            assert e.predicted(1.0) == thurston_profile(e.thurston)


def test_heintze_1_2_bounds():
    pr = catalog()["heintze_1_2"].predicted(1.0)
    assert pr.kind == "bounds"
    assert pr.upper == Profile.power(Fraction(2, 3))
    assert pr.lower == Profile.power(Fraction(1, 2))


def test_catalog_report_serializable():
    import json

    rows = catalog_report()
    assert len(rows) == 8
    json.dumps(rows)
