import numpy as np
import pytest

from savcast.impacts import accumulate, emissions, operator_cost_factor, \
    rail_operator_cost, sav_operator_cost
from savcast.params import ParamSet
from savcast.stocks import HVStock, MAX_AGE, THERMAL

P = ParamSet()


# --- SAV operator cost -----------------------------------------------------

def test_sav_cost_zero():
    assert sav_operator_cost(0.0, 0.0, 1.0, P) == 0.0


def test_sav_cost_arithmetic():
    # 0.2 €/vkm * 1e6 vkm + 100 veh * 120000 €/veh = 12.2 M€
    c = sav_operator_cost(1.0e6, 100.0, 1.0, P)
    assert c == pytest.approx(12.2e6, rel=1e-12)


def test_operator_factor_unit():
    assert operator_cost_factor(1.0, P) == pytest.approx(1.0)


def test_operator_factor_higher_elasticity():
    p = ParamSet(eps_operator=0.5)
    assert operator_cost_factor(4.0, p) == pytest.approx(0.5)
    c = sav_operator_cost(1.0e6, 0.0, 4.0, p)
    assert c == pytest.approx(0.5 * 0.2e6)


def test_operator_elasticity_exceeds_customer():
    assert P.eps_operator > P.eps_customer


def test_sav_cost_nondecreasing(rng):
    for _ in range(50):
        d, u = rng.uniform(0, 1e7), rng.uniform(0, 1000)
        util = float(rng.uniform(0.2, 5))
        c = sav_operator_cost(d, u, util, P)
        assert sav_operator_cost(d * 1.1, u, util, P) >= c
        assert sav_operator_cost(d, u + 10, util, P) >= c


# --- rail operator cost ----------------------------------------------------

def test_rail_cost_zero_vkm_is_fixed_cost():
    assert rail_operator_cost(0.0, 100.0, P) == pytest.approx(5.4767e7)


def test_rail_cost_arithmetic_without_depreciation():
    c = rail_operator_cost(1.0e6, 0.0, P)   # S_R = 0 -> dep = 0
    assert c == pytest.approx(1.0e7 + 5.4767e7, rel=1e-12)


def test_rail_fixed_cost_dilution():
    c1 = rail_operator_cost(1.0e6, 50.0, P)
    c2 = rail_operator_cost(2.0e6, 50.0, P)
    assert c2 < 2 * c1


def test_rail_depreciation_floor():
    # tiny D_R must not blow up the per-vkm depreciation
    c = rail_operator_cost(1.0, 100.0, P)
    dep_per_vkm = 100.0 * P.train_purchase_cost / (P.train_life_years * P.D_R_floor)
    assert c == pytest.approx((P.C_R_op + dep_per_vkm) * 1.0 + P.C_R_fix)


# --- emissions -------------------------------------------------------------

def test_emissions_zero_thermal():
    counts = np.zeros((2, MAX_AGE + 1))
    counts[1, 5] = 1e5   # electric only
    assert emissions(HVStock(counts), P.eps_a, P.M) == 0.0


def test_emissions_single_cohort():
    counts = np.zeros((2, MAX_AGE + 1))
    counts[THERMAL, 3] = 1000.0
    eps = [0.0] * 31
    eps[3] = 120.0
    assert emissions(HVStock(counts), eps, 12000.0) == pytest.approx(1440.0)


def test_emissions_match_cohort_loop(rng):
    counts = rng.uniform(0, 2000, (2, MAX_AGE + 1))
    stock = HVStock(counts)
    want = sum(P.eps_a[a] * counts[THERMAL, a] * P.M
               for a in range(MAX_AGE + 1)) / 1e6
    assert emissions(stock, P.eps_a, P.M) == pytest.approx(want, rel=1e-12)


def test_emissions_linear_in_cohorts(rng):
    counts = rng.uniform(0, 2000, (2, MAX_AGE + 1))
    e1 = emissions(HVStock(counts), P.eps_a, P.M)
    e2 = emissions(HVStock(counts * 2), P.eps_a, P.M)
    assert e2 == pytest.approx(2 * e1, rel=1e-12)


# --- accumulation ----------------------------------------------------------

def test_accumulate_zero():
    assert accumulate(0.0, 0.0) == 0.0


def test_accumulate_step():
    assert accumulate(10.0, 5.0, 1.0) == 15.0


def test_accumulate_linear():
    xi = 0.0
    for _ in range(15):
        xi = accumulate(xi, 7.0)
    assert xi == pytest.approx(105.0)


def test_accumulate_rejects_negative_rate():
    with pytest.raises(ValueError):
        accumulate(0.0, -1.0)
