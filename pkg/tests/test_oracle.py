from __future__ import annotations

import pytest

from crawler_ris.oracle import (OracleBoundaryError, continuum_homogeneous, shape_actuation,
                                strategy_friction, strategy_model, strategy_result,
                                three_point_regime, two_point_constant, two_point_model)


def test_two_point_examples():
    assert two_point_constant(1, 2, 1, 3).per_cycle_displacement == pytest.approx(1.0)
    assert two_point_constant(1, 1, 2, 3).per_cycle_displacement == pytest.approx(-1.0)
    at = two_point_constant(1, 2, 1, 2)
    assert at.per_cycle_displacement == 0.0 and at.boundary
    assert two_point_constant(1, 2, 1, 1.5).per_cycle_displacement == 0.0


def test_two_point_errors():
    with pytest.raises(OracleBoundaryError):
        two_point_constant(1, 1, 1, 3)
    with pytest.raises(ValueError):
        two_point_constant(0, 1, 2, 3)


def test_three_point_regimes():
    assert three_point_regime(3, 1) == "one-way"
    assert three_point_regime(1.3, 1) == "two-way"
    assert three_point_regime(1, 3) == "one-way"
    with pytest.raises(OracleBoundaryError):
        three_point_regime(2, 1)
    with pytest.raises(OracleBoundaryError):
        three_point_regime(1, 2)


def test_continuum_examples():
    assert continuum_homogeneous(1, 1, 2, 1, 2) == pytest.approx(1 / 3)
    assert continuum_homogeneous(1, 1, 2, 1, 1) == 0.0
    assert continuum_homogeneous(1, 1, 3, 1, 2) == pytest.approx(0.5)
    assert continuum_homogeneous(1, 1, 1, 1, 5) == 0.0
    assert continuum_homogeneous(1, 1, 1, 2, 2) == pytest.approx(-1 / 3)


def test_strategy_examples():
    a = strategy_result("A", 1, 1, 4)
    assert a.per_cycle_displacement == pytest.approx(2.0)
    assert a.switch_times["t1"] == pytest.approx(0.2)
    b = strategy_result("B", 1, 1, 2)
    assert b.per_cycle_displacement == pytest.approx(1.0)
    assert b.switch_times["t4"] == pytest.approx(1 / 3)
    c = strategy_result("C", 1, 1, 3)
    assert c.per_cycle_displacement == pytest.approx(1.0)
    assert c.switch_times["t5"] == pytest.approx(1 / 6)
    assert c.switch_times["t6"] == pytest.approx(0.5 + 1 / 3)


def test_strategy_regimes_and_boundaries():
    assert strategy_result("A", 1, 1, 0.5).transient
    assert strategy_result("A", 1, 1, 2.5).regime == "late-slip"
    assert strategy_result("A", 1, 1, 2.5).switch_times["t2"] == pytest.approx(1 / 3)
    assert strategy_result("B", 1, 1, 5).per_cycle_displacement == pytest.approx(2.0)
    assert strategy_result("B", 1, 1, 5).switch_times["t3"] == pytest.approx(1 / 8)
    assert strategy_result("C", 1, 1, 5).switch_times["t7"] == pytest.approx(0.5 + 3 / 14)
    assert strategy_result("A", 1, 1, 2).boundary
    assert strategy_result("B", 1, 1, 1).boundary
    with pytest.raises(OracleBoundaryError):
        strategy_result("A", 1, 1, 1)
    with pytest.raises(ValueError):
        strategy_result("D", 1, 1, 3)


def test_schedules():
    mu1, mu2 = strategy_friction("A", 2.0)
    assert mu1(0.25) == pytest.approx(3.0) and mu2(0.25) == pytest.approx(1.0)
    mu1, mu2 = strategy_friction("B", 1.0)
    assert (mu1(0.0), mu2(0.0), mu1(0.5), mu2(0.5)) == pytest.approx((0.5, 1.5, 1.5, 0.5))
    assert shape_actuation(3.0)(0.5) == pytest.approx(3.0)
    assert strategy_model("C", 1, 1, 3).n_points == 2
    assert two_point_model(1, 2, 1, 3).n_points == 2
    with pytest.raises(ValueError):
        strategy_friction("Q", 1.0)


@pytest.mark.parametrize("r", [2.2, 2.5, 3.7, 6.0])
def test_strategies_a_and_c_agree_above_threshold(r):
    a = strategy_result("A", 1.0, 1.0, r).per_cycle_displacement
    c = strategy_result("C", 1.0, 1.0, r).per_cycle_displacement
    assert a == pytest.approx(c) == pytest.approx(r - 2.0)


def test_strategy_b_continuous_at_three():
    below = strategy_result("B", 1.0, 1.0, 3.0 - 1e-9).per_cycle_displacement
    above = strategy_result("B", 1.0, 1.0, 3.0 + 1e-9).per_cycle_displacement
    assert below == pytest.approx(above, abs=1e-8) == pytest.approx(2.0, abs=1e-8)


@pytest.mark.parametrize("which", "ABC")
@pytest.mark.parametrize("alpha", [0.25, 3.0])
def test_strategy_scaling_invariance(which, alpha):
    for r in (0.5, 1.5, 2.5, 3.5, 5.0):
        base = strategy_result(which, 1.0, 1.0, r)
        scaled = strategy_result(which, alpha, alpha, r)
        assert scaled.per_cycle_displacement == pytest.approx(base.per_cycle_displacement)
        assert scaled.switch_times == pytest.approx(base.switch_times)
