"""Model parameter set: defaults, file parsing, validation.

Parameters live in a flat key-value text file (``name = value``).  Values are
floats, or comma-separated float lists for the few vector-valued entries
(segment shares, emission factors, survival probabilities).  Unknown keys are
rejected so typos cannot silently fall back to defaults.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field


class ParamError(ValueError):
    """Raised for malformed or inconsistent parameter input."""


def _default_emission_factors() -> list[float]:
    # tailpipe g CO2/km by vehicle age 0..30; older vehicles emit more
    return [110.0 + 1.5 * a for a in range(31)]


def _default_hv_survival() -> list[float]:
    # per-year survival probability by age, logistic decline; mean life ~15 y
    return [1.0 / (1.0 + math.exp((a - 17.0) / 2.5)) for a in range(31)]


@dataclass
class ParamSet:
    """All scenario parameters with simulation defaults.

    Monetary values in euros, times in minutes unless noted, demand in pax/h,
    distances in km.
    """

    # traveller segment shares: [choice, HV-captive, rail-captive, SAV-captive]
    x_i: list[float] = field(default_factory=lambda: [0.66, 0.0, 0.34, 0.0])

    # customer-facing costs entering the utility function
    C_H_c_ae: float = 1.4        # € per trip, HV access/egress (parking etc.)
    C_H_c_op: float = 0.0745     # €/km, HV operating
    C_R_c_ae: float = 2.2        # € per trip, rail fare component
    C_R_c_op: float = 0.2263     # €/km, rail distance fare
    C_S_c_ae_0: float = 2.0      # € per trip, initial SAV access/egress fee
    C_S_c_op_0: float = 0.5      # €/km, initial SAV operating price

    # operator costs
    C_R_op: float = 10.0         # €/vkm, rail operating
    C_R_fix: float = 5.4767e7    # €/y, rail fixed costs
    C_S_pu: float = 120000.0     # €/veh, SAV purchase
    C_S_op: float = 0.2          # €/vkm, SAV fleet operating

    # BPR volume-delay coefficients per network
    bpr_alpha_road: float = 0.15
    bpr_beta_road: float = 4.0
    bpr_alpha_rail: float = 0.30
    bpr_beta_rail: float = 2.0

    # car-following headways (s); SAV follows tighter than a human driver
    h_HH: float = 1.8
    h_SH: float = 1.4
    h_SS: float = 0.9

    # mode-choice utility
    value_of_time: float = 5.0   # min/€, converts money to equivalent minutes
    w_time: float = 0.08         # utils per generalized minute
    asc_H: float = 0.0           # mode constants (utils)
    asc_S: float = 0.25
    asc_R: float = 0.6
    lambda_A: float = 0.5        # auto-nest scale, in (0, 1]
    t_H_ae: float = 12.0          # min, HV access/egress time (walk + parking)

    # SAV level of service
    benchmark_mileage: float = 28000.0   # km/y per vehicle at break-even utilisation
    eps_customer: float = 0.3            # customer cost elasticity w.r.t. utilisation
    eps_operator: float = 0.5            # operator cost elasticity (> customer)
    util_floor: float = 0.1              # utilisation clamp floor in the cost law
    cost_ceiling_factor: float = 2.0     # max cost multiple of base
    cost_min_frac: float = 0.2           # min cost fraction of base
    wait_cap: float = 60.0               # min, wait when fleet empty/saturated
    pickup_overhead: float = 10.0         # min, empty drive to reach a customer
    population_factor: float = 2.0       # queue population per concurrent trip
    request_cycle_h: float = 0.25     # h, per-customer think time between requests
    filter_tau: float = 3.5              # y, perception filter time constant

    # fleet dynamics
    M: float = 12000.0                   # km/y annual mileage per HV
    bass_p: float = 0.01                 # EV innovation coefficient
    bass_q: float = 0.4                  # EV imitation coefficient
    sav_survival: float = 0.93           # SAV per-year survival rate
    hv_survival: list[float] = field(default_factory=_default_hv_survival)
    hv_price_thermal: float = 25000.0    # €, purchase
    hv_price_electric: float = 35000.0
    hv_opcost_thermal: float = 0.0745    # €/km
    hv_opcost_electric: float = 0.04
    hv_choice_scale: float = 0.8         # 1/k€ of annual TCO, powertrain logit
    hv_lifetime_years: float = 15.0      # planning life for TCO annualisation
    hv_init_thermal_share: float = 0.95
    working_hours: float = 2000.0        # h/y scaling pax/h flows to annual totals

    # emissions
    eps_a: list[float] = field(default_factory=_default_emission_factors)

    # rail service and stock
    train_capacity: float = 700.0        # pax per train
    occupancy_rate: float = 0.7
    reserve_fraction: float = 0.1
    F_min: float = 4.0                   # veh/h service floor
    commercial_speed: float = 30.0       # km/h
    walk_speed: float = 4.5              # km/h
    station_spacing: float = 0.8         # km
    train_purchase_cost: float = 8.0e6   # €
    train_life_years: float = 35.0
    D_R_floor: float = 1.0e4             # vkm/y, keeps depreciation finite
    line_count: float = 0.0              # 0 = derive from rail network file
    line_length: float = 0.0             # km mean; 0 = derive from rail network file

    # within-year equilibrium solver
    damping: float = 0.5
    fp_tol: float = 1e-6
    fp_max_iter: int = 500

    def validate(self) -> None:
        if len(self.x_i) != 4:
            raise ParamError(f"x_i must have 4 entries, got {len(self.x_i)}")
        if any(x < 0 for x in self.x_i):
            raise ParamError(f"x_i entries must be >= 0, got {self.x_i}")
        if abs(sum(self.x_i) - 1.0) > 1e-9:
            raise ParamError(f"x_i must sum to 1 within 1e-9, got sum={sum(self.x_i)!r}")
        if not (0.0 < self.lambda_A <= 1.0):
            raise ParamError(f"lambda_A must be in (0, 1], got {self.lambda_A}")
        if self.value_of_time <= 0:
            raise ParamError("value_of_time must be > 0")
        if not (0.0 < self.h_SS <= self.h_SH <= self.h_HH):
            raise ParamError(
                f"headways must satisfy 0 < h_SS <= h_SH <= h_HH, "
                f"got h_SS={self.h_SS}, h_SH={self.h_SH}, h_HH={self.h_HH}"
            )
        if self.eps_customer < 0 or self.eps_operator < 0:
            raise ParamError("elasticities must be >= 0")
        if self.filter_tau <= 0:
            raise ParamError("filter_tau must be > 0")
        if len(self.eps_a) != 31:
            raise ParamError(f"eps_a needs 31 age entries, got {len(self.eps_a)}")
        if len(self.hv_survival) != 31:
            raise ParamError(f"hv_survival needs 31 age entries, got {len(self.hv_survival)}")
        if any(not (0.0 <= s <= 1.0) for s in self.hv_survival):
            raise ParamError("hv_survival probabilities must lie in [0, 1]")
        nonneg = [
            "C_H_c_ae", "C_H_c_op", "C_R_c_ae", "C_R_c_op", "C_S_c_ae_0", "C_S_c_op_0",
            "C_R_op", "C_R_fix", "C_S_pu", "C_S_op", "benchmark_mileage", "M",
            "train_capacity", "occupancy_rate", "working_hours", "wait_cap",
        ]
        for name in nonneg:
            if getattr(self, name) < 0:
                raise ParamError(f"{name} must be >= 0")
        if any(e < 0 for e in self.eps_a):
            raise ParamError("emission factors must be >= 0")
        if not (0.0 <= self.sav_survival <= 1.0):
            raise ParamError("sav_survival must lie in [0, 1]")


_LIST_KEYS = {"x_i", "eps_a", "hv_survival"}
_INT_KEYS = {"fp_max_iter"}
_KNOWN_KEYS = {f.name for f in dataclasses.fields(ParamSet)}


def parse_params_text(text: str, source: str = "<params>") -> dict:
    """Parse ``key = value`` lines into a raw mapping; rejects unknown keys."""
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParamError(f"{source}:{lineno}: expected 'name = value', got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key not in _KNOWN_KEYS:
            raise ParamError(f"{source}:{lineno}: unknown parameter {key!r}")
        if key in values:
            raise ParamError(f"{source}:{lineno}: duplicate parameter {key!r}")
        try:
            if key in _LIST_KEYS:
                values[key] = [float(tok) for tok in val.split(",") if tok.strip()]
            elif key in _INT_KEYS:
                values[key] = int(val)
            else:
                values[key] = float(val)
        except ValueError as exc:
            raise ParamError(f"{source}:{lineno}: cannot parse value for {key!r}: {val!r}") from exc
    return values


def load_params(path, defaults: ParamSet | None = None) -> ParamSet:
    """Load a parameter file on top of defaults and validate the result."""
    with open(path, "r", encoding="utf-8") as fh:
        overrides = parse_params_text(fh.read(), source=str(path))
    base = dataclasses.asdict(defaults) if defaults is not None else {}
    merged = {**base, **overrides} if base else overrides
    params = ParamSet(**merged)
    params.validate()
    return params
