"""Nested logit mode choice over four traveller segments.

HV and SAV form the auto nest; rail stands alone.  Segments restrict the
choice set: choice travellers see all three modes, HV travellers {HV, SAV},
rail travellers {rail, SAV}, SAV travellers {SAV}.  On OD pairs without rail
service the rail alternative is removed from every set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .kernels import mode_utilities, split_od_demand
from .params import ParamSet

HV, SAV, RAIL = "H", "S", "R"


@dataclass(frozen=True)
class UtilitySpec:
    """Utility parameters: time weight, value of time, constants, nest scale."""

    w_time: float           # utils per generalized minute
    value_of_time: float    # min/€
    lambda_A: float         # auto nest scale in (0, 1]
    asc: dict = field(default_factory=lambda: {HV: 0.0, SAV: 0.0, RAIL: 0.0})

    def __post_init__(self):
        if not (0.0 < self.lambda_A <= 1.0):
            raise ValueError(f"lambda_A must be in (0, 1], got {self.lambda_A}")
        if self.value_of_time <= 0:
            raise ValueError("value_of_time must be > 0")

    @classmethod
    def from_params(cls, params: ParamSet) -> "UtilitySpec":
        return cls(w_time=params.w_time, value_of_time=params.value_of_time,
                   lambda_A=params.lambda_A,
                   asc={HV: params.asc_H, SAV: params.asc_S, RAIL: params.asc_R})


@dataclass
class ModeSplit:
    """Per-OD demand (pax/h) allocated to HV, SAV and rail."""

    g_h: np.ndarray
    g_s: np.ndarray
    g_r: np.ndarray

    @property
    def totals(self):
        return float(self.g_h.sum()), float(self.g_s.sum()), float(self.g_r.sum())

    def check_conservation(self, g_total, rail_ok=None, tol=1e-9):
        total = self.g_h + self.g_s + self.g_r
        err = np.max(np.abs(total - g_total))
        if err > tol * max(1.0, float(np.max(g_total, initial=1.0))):
            raise AssertionError(f"demand not conserved, max error {err}")
        if np.any(self.g_h < 0) or np.any(self.g_s < 0) or np.any(self.g_r < 0):
            raise AssertionError("negative mode demand")
        if rail_ok is not None and np.any(self.g_r[~np.asarray(rail_ok, bool)] > 0):
            raise AssertionError("rail demand on OD without rail service")


def mode_utility(mode: str, dist_km: float, t_invehicle: float, t_ae: float,
                 cost_op: float, cost_ae: float, spec: UtilitySpec) -> float:
    """Utility of one mode on one OD: constant minus weighted generalized time.

    Money enters as equivalent minutes via the value of time:
    U = asc - w * (t_invehicle + t_ae + VOT * (cost_op * dist + cost_ae)).
    """
    if t_invehicle < 0 or t_ae < 0:
        raise ValueError("times must be >= 0")
    if cost_op < 0 or cost_ae < 0:
        raise ValueError("costs must be >= 0")
    gen_minutes = t_invehicle + t_ae + spec.value_of_time * (cost_op * dist_km + cost_ae)
    return spec.asc[mode] - spec.w_time * gen_minutes


def nested_logit_shares(u_h: float, u_s: float, u_r: float, lambda_a: float,
                        available_modes) -> dict:
    """Choice probabilities of {H, S, R} given utilities and an availability set.

    The auto nest aggregates available auto modes through its logsum scaled by
    ``lambda_a``; unavailable modes get probability 0.
    """
    modes = set(available_modes)
    if not modes:
        raise ValueError("available_modes must be non-empty")
    if not modes <= {HV, SAV, RAIL}:
        raise ValueError(f"unknown modes in {available_modes!r}")
    utils = {HV: u_h, SAV: u_s, RAIL: u_r}
    auto = [m for m in (HV, SAV) if m in modes]
    probs = {HV: 0.0, SAV: 0.0, RAIL: 0.0}
    if auto:
        m0 = max(utils[m] for m in auto)
        exps = {m: math.exp((utils[m] - m0) / lambda_a) for m in auto}
        z = sum(exps.values())
        v_auto = m0 + lambda_a * math.log(z)
        within = {m: e / z for m, e in exps.items()}
    else:
        v_auto = None
        within = {}
    if RAIL in modes and auto:
        mm = max(v_auto, utils[RAIL])
        ea = math.exp(v_auto - mm)
        er = math.exp(utils[RAIL] - mm)
        p_auto = ea / (ea + er)
        probs[RAIL] = er / (ea + er)
    elif RAIL in modes:
        probs[RAIL] = 1.0
        p_auto = 0.0
    else:
        p_auto = 1.0
    for m, p_in in within.items():
        probs[m] = p_auto * p_in
    return probs


def split_demand(g_total, utilities, rail_ok, params: ParamSet) -> ModeSplit:
    """Allocate OD demand across modes, mixing the four traveller segments.

    ``utilities`` is a (u_h, u_s, u_r) triple of per-OD arrays; ``rail_ok``
    marks ODs with rail service.  Demand is conserved per OD.
    """
    g_total = np.ascontiguousarray(g_total, dtype=float)
    u_h, u_s, u_r = (np.ascontiguousarray(u, dtype=float) for u in utilities)
    rail_ok = np.ascontiguousarray(np.asarray(rail_ok, dtype=np.uint8))
    seg = np.ascontiguousarray(params.x_i, dtype=float)
    g_h, g_s, g_r = split_od_demand(g_total, u_h, u_s, u_r, rail_ok,
                                    params.lambda_A, seg)
    return ModeSplit(g_h=g_h, g_s=g_s, g_r=g_r)


def od_utilities(t_car, t_rail, dist_car, dist_rail, rail_ok, params: ParamSet,
                 sav_cost_op: float, sav_cost_ae: float, sav_wait: float,
                 t_r_ae: float):
    """Per-OD utility arrays for the three modes under current service levels."""
    t_car = np.ascontiguousarray(t_car, dtype=float)
    t_rail = np.ascontiguousarray(t_rail, dtype=float)
    dist_car = np.ascontiguousarray(dist_car, dtype=float)
    dist_rail = np.ascontiguousarray(dist_rail, dtype=float)
    rail_ok = np.ascontiguousarray(np.asarray(rail_ok, dtype=np.uint8))
    return mode_utilities(
        t_car, t_rail, dist_car, dist_rail, rail_ok,
        params.w_time, params.value_of_time,
        params.asc_H, params.asc_S, params.asc_R,
        params.C_H_c_op, params.C_H_c_ae, params.t_H_ae,
        params.C_R_c_op, params.C_R_c_ae, t_r_ae,
        sav_cost_op, sav_cost_ae, sav_wait)
