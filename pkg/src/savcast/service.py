"""SAV and rail level of service.

SAV waiting time comes from a finite-population M/M/s queue (machine-repair
form): the fleet acts as s parallel servers, requests arrive from a finite
customer population at a per-customer rate, rides are exponential.  Customer
prices fall with fleet utilisation through a clamped power law.  Perceived
waiting time and prices lag the raw values through first-order filters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import cost_scale_factor, finite_population_wait_hours, sav_wait_minutes
from .params import ParamSet


@dataclass
class SAVServiceState:
    """First-order filter states: what customers currently believe."""

    wait: float          # min
    cost_op: float       # €/km
    cost_ae: float       # €

    @classmethod
    def initial(cls, params: ParamSet) -> "SAVServiceState":
        # fleet starts empty: perceived wait at the cap, prices at launch level
        return cls(wait=params.wait_cap, cost_op=params.C_S_c_op_0,
                   cost_ae=params.C_S_c_ae_0)


@dataclass(frozen=True)
class QueueModel:
    """Finite-population queue spec: s servers, N customers, rates in 1/h."""

    servers: int
    population: int
    request_rate: float
    service_rate: float

    def __post_init__(self):
        if self.servers < 0 or self.population < 0:
            raise ValueError("servers and population must be >= 0")
        if self.service_rate <= 0:
            raise ValueError("service_rate must be > 0")

    def wait_hours(self) -> float:
        return float(finite_population_wait_hours(
            self.population, float(self.servers), self.request_rate,
            self.service_rate))

    def state_probabilities(self) -> np.ndarray:
        """Birth-death state probabilities p_0..p_N (sums to 1)."""
        n, s = self.population, float(self.servers)
        logp = np.zeros(n + 1)
        for k in range(1, n + 1):
            lam = self.request_rate * (n - (k - 1))
            mu = self.service_rate * min(float(k), s) if s > 0 else np.inf
            logp[k] = logp[k - 1] + np.log(lam / mu)
        p = np.exp(logp - logp.max())
        return p / p.sum()


def sav_wait_time(g_s_total: float, s_s: float, mean_trip_time: float,
                  params: ParamSet) -> float:
    """Average SAV waiting time (min).

    The queue population scales with concurrent trips
    (demand * trip-hours * population_factor, interpolated between integer
    sizes), each customer re-requests at 1/request_cycle_h.  An empty fleet
    facing positive demand waits ``wait_cap``.
    """
    if g_s_total < 0 or s_s < 0:
        raise ValueError("demand and fleet must be >= 0")
    return float(sav_wait_minutes(
        g_s_total, s_s, mean_trip_time, params.population_factor,
        1.0 / params.request_cycle_h, params.wait_cap))


def utilisation(g_s_total: float, s_s: float, mean_trip_km: float,
                params: ParamSet) -> float:
    """Annual km demanded per SAV over the benchmark profitable mileage."""
    if s_s <= 0:
        raise ValueError("utilisation undefined for an empty fleet")
    annual_km = g_s_total * mean_trip_km * params.working_hours
    return annual_km / (s_s * params.benchmark_mileage)


def sav_customer_costs(u: float, params: ParamSet) -> tuple[float, float]:
    """(€/km, €) customer prices at utilisation ``u``.

    cost = base * max(u, floor)^(-eps), clamped to
    [cost_min_frac * base, ceiling * base]; higher utilisation means a more
    profitable fleet and lower prices.
    """
    if u < 0:
        raise ValueError("utilisation must be >= 0")
    f = float(cost_scale_factor(u, params.eps_customer, params.util_floor,
                                params.cost_ceiling_factor, params.cost_min_frac))
    return params.C_S_c_op_0 * f, params.C_S_c_ae_0 * f


def perceive(prev: float, raw: float, tau: float, dt: float) -> float:
    """One step of the first-order perception filter x' = x + (dt/tau)(raw - x)."""
    if tau <= 0:
        raise ValueError("tau must be > 0")
    return prev + (dt / tau) * (raw - prev)


def update_service_state(state: SAVServiceState, raw_wait: float,
                         raw_cost_op: float, raw_cost_ae: float,
                         params: ParamSet, dt: float = 1.0) -> SAVServiceState:
    tau = params.filter_tau
    return SAVServiceState(
        wait=perceive(state.wait, raw_wait, tau, dt),
        cost_op=perceive(state.cost_op, raw_cost_op, tau, dt),
        cost_ae=perceive(state.cost_ae, raw_cost_ae, tau, dt),
    )


def rail_access_egress(f_r: float, station_spacing_km: float,
                       walk_speed_kmh: float) -> float:
    """Rail access/egress time (min): half-headway wait plus walks at both ends.

    Wait = 60/(2 F_R); each end contributes a walk over half the station
    spacing at the mean walking speed.
    """
    if f_r <= 0:
        raise ValueError("no rail service: frequency must be > 0")
    if walk_speed_kmh <= 0:
        raise ValueError("walk speed must be > 0")
    wait = 60.0 / (2.0 * f_r)
    walk = 2.0 * (60.0 * (station_spacing_km / 2.0) / walk_speed_kmh)
    return wait + walk
