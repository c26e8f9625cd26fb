"""Vehicle stock dynamics: HV age/powertrain cohorts, SAV fleet, rail stock.

The HV stock is a (2 x 31) cohort matrix (thermal/electric, ages 0..30).
Each year cohorts age and scrap by an age-dependent survival curve, the
fleet is re-sized to serve the vkm demand at annual mileage M, and purchases
split thermal/electric through a cost logit whose electric weight follows a
Bass adoption term.  SAVs decay at a constant survival rate and grow by the
policy input u.  Rail stock follows demand through frequency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .params import ParamSet

THERMAL, ELECTRIC = 0, 1
MAX_AGE = 30


@dataclass
class HVStock:
    counts: np.ndarray   # shape (2, 31), vehicles

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=float)
        if self.counts.shape != (2, MAX_AGE + 1):
            raise ValueError(f"HV stock must be (2, {MAX_AGE + 1})")
        if np.any(self.counts < 0):
            raise ValueError("HV cohort counts must be >= 0")

    @property
    def total(self) -> float:
        return float(self.counts.sum())

    @property
    def thermal_total(self) -> float:
        return float(self.counts[THERMAL].sum())

    @property
    def electric_total(self) -> float:
        return float(self.counts[ELECTRIC].sum())

    @property
    def electric_share(self) -> float:
        tot = self.total
        return self.counts[ELECTRIC].sum() / tot if tot > 0 else 0.0

    @classmethod
    def initial(cls, hv_vkm_demand: float, params: ParamSet) -> "HVStock":
        """Fleet sized for the base-year demand with a steady-state age profile."""
        required = hv_vkm_demand / params.M
        surv = np.asarray(params.hv_survival)
        profile = np.ones(MAX_AGE + 1)
        for a in range(1, MAX_AGE + 1):
            profile[a] = profile[a - 1] * surv[a - 1]
        profile /= profile.sum()
        counts = np.zeros((2, MAX_AGE + 1))
        counts[THERMAL] = required * params.hv_init_thermal_share * profile
        counts[ELECTRIC] = required * (1.0 - params.hv_init_thermal_share) * profile
        return cls(counts)


@dataclass
class SAVFleet:
    size: float = 0.0   # veh

    def __post_init__(self):
        if self.size < 0:
            raise ValueError("SAV fleet must be >= 0")


@dataclass
class RailState:
    stock: float       # S_R, vehicles
    frequency: float   # F_R, veh/h per line
    capacity: float    # K_R, pax/h per link

    def __post_init__(self):
        if min(self.stock, self.frequency, self.capacity) < 0:
            raise ValueError("rail state entries must be >= 0")


def hv_vkm(g_h, od_distances, working_hours: float) -> float:
    """Annual HV vkm: sum over ODs of demand x distance x working hours."""
    g_h = np.asarray(g_h, dtype=float)
    od_distances = np.asarray(od_distances, dtype=float)
    return float((g_h * od_distances).sum() * working_hours)


def _electric_purchase_share(stock: HVStock, params: ParamSet) -> float:
    """Cost logit between powertrains, electric weighted by Bass adoption."""
    life = params.hv_lifetime_years
    tco_t = params.hv_price_thermal / life + params.hv_opcost_thermal * params.M
    tco_e = params.hv_price_electric / life + params.hv_opcost_electric * params.M
    scale = params.hv_choice_scale / 1000.0   # per k€ of annual TCO
    w_e = min(1.0, params.bass_p + params.bass_q * stock.electric_share)
    a_e = w_e * math.exp(-scale * tco_e)
    a_t = (1.0 - w_e) * math.exp(-scale * tco_t)
    return a_e / (a_e + a_t)


def hv_stock_step(stock: HVStock, hv_vkm_demand: float, params: ParamSet) -> HVStock:
    """Advance HV cohorts one year and buy the vehicles the demand requires."""
    if hv_vkm_demand < 0:
        raise ValueError("vkm demand must be >= 0")
    surv = np.asarray(params.hv_survival)
    aged = np.zeros_like(stock.counts)
    aged[:, 1:] = stock.counts[:, :-1] * surv[:-1]
    required = hv_vkm_demand / params.M
    surviving = aged.sum()
    purchases = max(0.0, required - surviving)
    share_e = _electric_purchase_share(stock, params)
    aged[THERMAL, 0] = purchases * (1.0 - share_e)
    aged[ELECTRIC, 0] = purchases * share_e
    return HVStock(aged)


def sav_stock_step(fleet: SAVFleet, u: float, survival_rate: float) -> SAVFleet:
    """S' = survival * S + u."""
    if u < 0:
        raise ValueError("SAV additions must be >= 0")
    if not (0.0 <= survival_rate <= 1.0):
        raise ValueError("survival rate must lie in [0, 1]")
    return SAVFleet(size=survival_rate * fleet.size + u)


def rail_round_trip_hours(params: ParamSet, mean_line_length_km: float) -> float:
    return 2.0 * mean_line_length_km / params.commercial_speed


def rail_update(g_r_total: float, params: ParamSet, line_count: int,
                mean_line_length_km: float) -> RailState:
    """Size rail service to demand: frequency, link capacity, fleet.

    F_R = demand / (train capacity x occupancy), floored at F_min;
    K_R = F_R x train capacity; the fleet covers the round trip on every line
    at that frequency plus a reserve margin.
    """
    if g_r_total < 0:
        raise ValueError("rail demand must be >= 0")
    f_r = g_r_total / (params.train_capacity * params.occupancy_rate)
    f_r = max(params.F_min, f_r)
    k_r = f_r * params.train_capacity
    rt = rail_round_trip_hours(params, mean_line_length_km)
    need = f_r * rt * line_count * (1.0 + params.reserve_fraction)
    # tolerance keeps float noise from adding a train at exact integers
    s_r = math.ceil(need - 1e-9 * max(1.0, need))
    return RailState(stock=float(s_r), frequency=f_r, capacity=k_r)
