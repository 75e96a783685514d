from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest

from poincarelab.graphkit import FamilySpec, complete_graph, make_regular_tree
from poincarelab.lieclass import Profile
from poincarelab.profiles import (
    ProfilePoint, candidate, compare_with_prediction, fit_growth, lemma_weight_check, parse_k_rule,
    points_from_csv, points_to_csv, profile_points, xi_points,
)

N = np.round(np.geomspace(10, 10_000, 8))


def pairs(fn):
    return [(float(n), float(fn(n))) for n in N]


def test_power_fit_recovers_exponent():
    fit = fit_growth(pairs(lambda n: 3 * n ** 0.6))
    assert fit.model == "power"
    assert fit.exponent() == pytest.approx(0.6, abs=1e-9)
    assert fit.residual < 1e-9


def test_n_over_log_selected():
    fit = fit_growth(pairs(lambda n: 2 * n / math.log(n)))
    assert fit.model == "n_over_log"
    assert fit.fits["n_over_log"]["residual"] < fit.fits["power"]["residual"] - 0.02


def test_power_log_exponent_is_end_slope():
    fit = fit_growth(pairs(lambda n: n ** 0.3 * math.log(n) ** 2))
    assert fit.model == "power_log"
    assert fit.params["a"] == pytest.approx(0.3, abs=1e-6)
    assert fit.exponent() == pytest.approx(0.3 + 2 / math.log(N[-1]), abs=1e-6)
    assert fit.power_exponent() != pytest.approx(fit.exponent(), abs=1e-3)


def test_smallest_fifth_dropped():
    fit = fit_growth(pairs(lambda n: n ** 0.5))
    assert len(fit.used) == 6
    assert fit.n_range[0] == pytest.approx(N[2])
    fit5 = fit_growth(pairs(lambda n: n ** 0.5)[:5] + [(1e5, 1e5 ** 0.5)])
    assert len(fit5.used) == 4


def test_fit_input_checks():
    with pytest.raises(ValueError):
        fit_growth([(10, 1), (20, 2), (30, 3)])
    with pytest.raises(ValueError):
        fit_growth([(10, 1), (20, 2), (30, 3), (100, 4)])


def test_wide_intervals_excluded():
    pts = [ProfilePoint("x", 1.0, int(n), int(n), n ** 0.5, n ** 0.5, "balls", "") for n in N]
    pts.append(ProfilePoint("x", 1.0, 20000, 20000, 1.0, 100.0, "balls", ""))
    fit = fit_growth(pts)
    assert len(fit.excluded) == 1
    assert fit.exponent() == pytest.approx(0.5, abs=1e-9)


def test_recompute_residual_matches():
    fit = fit_growth(pairs(lambda n: n ** 0.7 * (1 + 0.1 * math.sin(n))))
    assert fit.recompute_residual() == pytest.approx(fit.residual, rel=1e-9, abs=1e-12)


def test_point_validation():
    with pytest.raises(ValueError):
        ProfilePoint("x", 1.0, 5, 6, 1.0, 1.0, "balls", "")
    with pytest.raises(ValueError):
        ProfilePoint("x", 1.0, 5, 5, 2.0, 1.0, "balls", "")


def test_csv_roundtrip():
    pts = [ProfilePoint("tree", 2.0, 10, 10, 1.25, 1.5, "balls", "abc", alpha=0.125, k_rule="const:1"),
           ProfilePoint("tree", 2.0, 22, 22, 1.0 / 3, 0.5, "balls", "def")]
    fit = fit_growth(pairs(lambda n: n ** 0.5))
    text = points_to_csv(pts, "line one\nline two", fit)
    assert text.startswith("# line one\n# line two\n")
    back = points_from_csv(text)
    assert [(b.n, b.value_lo, b.value_hi, b.alpha, b.k_rule, b.witness_digest) for b in back] == \
        [(a.n, a.value_lo, a.value_hi, a.alpha, a.k_rule, a.witness_digest) for a in pts]


def test_parse_k_rule():
    assert parse_k_rule("const:3")(100) == 3
    assert parse_k_rule("pow:0.5")(16) == pytest.approx(4)
    for bad in ("pow:1", "pow:-0.1", "lin:2"):
        with pytest.raises(ValueError):
            parse_k_rule(bad)


@pytest.mark.parametrize("k", [1, 3, 10])
def test_lemma_check_k2(k):
    rep = lemma_weight_check(complete_graph(2), 1.0, 0.125, k)
    assert rep["rhs"] == pytest.approx(2 * k)
    assert rep["C"] == pytest.approx(1.0)
    assert rep["pass"]


def test_lemma_check_tree():
    g = make_regular_tree(3, 2)
    for k in (2, 4, 8):
        assert lemma_weight_check(g, 1.0, 0.125, k)["C"] <= 4.0


def test_xi_points_const_rule_scales_size():
    spec = FamilySpec.of("tree", degree=3)
    one = xi_points(spec, 1.0, 0.125, "const:1", [2, 3])
    two = xi_points(spec, 1.0, 0.125, "const:2", [2, 3])
    for a, b in zip(one, two):
        assert b.r == 2 * a.r and b.mu_total == 2 * a.mu_total
        assert b.value_hi == pytest.approx(2 * a.value_hi)


def test_xi_rejects_bad_alpha():
    with pytest.raises(ValueError):
        xi_points(FamilySpec.of("tree", degree=3), 1.0, 0.25, "const:1", [1])


def test_tree_profile_points():
    pts = profile_points(FamilySpec.of("tree", degree=3), 1.0, [1, 2, 3], "balls")
    assert [p.n for p in pts] == [4, 10, 22]
    assert all(0 < p.value_lo <= p.value_hi * (1 + 1e-9) for p in pts)
    assert all(p.witness_digest for p in pts)


def test_candidate_strategy_checks():
    with pytest.raises(ValueError):
        candidate(FamilySpec.of("tree", degree=3), "boxes", 3)
    with pytest.raises(ValueError):
        candidate(FamilySpec.of("tree", degree=3), "gamma_k", 3)
    g, desc = candidate(FamilySpec.of("dl", q1=2, q2=2), "gamma_k", 2)
    assert g.n == 12 and desc == {"k": 2}


def test_compare_power_prediction():
    fit = fit_growth(pairs(lambda n: n ** (2 / 3)))
    assert compare_with_prediction(fit, Profile.power(Fraction(2, 3)))["pass"]
    assert not compare_with_prediction(fit, Profile.power(Fraction(1, 2)), tol=0.1)["pass"]
    assert not compare_with_prediction(fit, Profile.n_over_log())["pass"]


def test_compare_n_over_log_prediction():
    fit = fit_growth(pairs(lambda n: n / math.log(n)))
    rep = compare_with_prediction(fit, Profile.n_over_log())
    assert rep["pass"] and rep["margin"] > 0.02
    assert len(rep["curves"]["predicted"]) == len(fit.used)
    assert not compare_with_prediction(fit, Profile.power(Fraction(3, 4)))["pass"]
