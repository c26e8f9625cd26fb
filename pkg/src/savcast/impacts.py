"""Annual operator costs and tailpipe emissions.

A single operator runs both the SAV fleet and rail.  SAV cost scales its
operating part by a utilisation factor with a higher elasticity than the
customer price law.  Rail cost has a fixed part plus per-vkm operating and
fleet-depreciation parts.  Emissions come from the thermal HV stock only,
with age-dependent emission factors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import cost_scale_factor
from .params import ParamSet
from .stocks import HVStock, THERMAL


@dataclass
class ImpactRecord:
    sav_cost: float      # €/y
    rail_cost: float     # €/y
    emissions: float     # t CO2/y
    xi: float            # t CO2 cumulative
    d_s: float           # SAV vkm/y
    d_r: float           # rail vkm/y
    rail_dep: float      # €/vkm


def operator_cost_factor(u: float, params: ParamSet) -> float:
    """Utilisation scaling of SAV operating cost; f(1) = 1, elasticity eps_operator."""
    return float(cost_scale_factor(u, params.eps_operator, params.util_floor,
                                   params.cost_ceiling_factor, params.cost_min_frac))


def sav_operator_cost(d_s: float, u_added: float, utilisation: float,
                      params: ParamSet) -> float:
    """C_S = C_S_op * f(U) * D_S + u * C_S_pu (€/y)."""
    if min(d_s, u_added, utilisation) < 0:
        raise ValueError("inputs must be >= 0")
    return params.C_S_op * operator_cost_factor(utilisation, params) * d_s \
        + u_added * params.C_S_pu


def rail_depreciation(s_r: float, d_r: float, params: ParamSet) -> float:
    """Fleet depreciation in €/vkm, floored in D_R to stay finite."""
    d_eff = max(d_r, params.D_R_floor)
    return s_r * params.train_purchase_cost / (params.train_life_years * d_eff)


def rail_operator_cost(d_r: float, s_r: float, params: ParamSet) -> float:
    """C_R = (C_R_op + C_R_dep) * D_R + C_R_fix (€/y)."""
    if d_r < 0 or s_r < 0:
        raise ValueError("inputs must be >= 0")
    dep = rail_depreciation(s_r, d_r, params)
    return (params.C_R_op + dep) * d_r + params.C_R_fix


def emissions(stock: HVStock, eps_table, annual_mileage: float) -> float:
    """Tailpipe CO2 (t/y) from the thermal cohorts: sum_a eps_a * S_a * M.

    Emission factors are g/km; electric cohorts contribute nothing.
    """
    eps = np.asarray(eps_table, dtype=float)
    grams = float((eps * stock.counts[THERMAL]).sum() * annual_mileage)
    return grams / 1.0e6


def accumulate(xi: float, e: float, dt: float = 1.0) -> float:
    """Cumulative emissions update: xi' = xi + E * dt."""
    if e < 0:
        raise ValueError("emission rate must be >= 0")
    return xi + e * dt
