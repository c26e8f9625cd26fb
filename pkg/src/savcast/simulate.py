"""Yearly simulation: scenario preparation, within-year equilibrium, forecasting.

Preparation (once per scenario): a provisional mode split at free-flow times
fixes the car demand used for the offline user equilibrium; the UE paths give
the affine travel-time models, base distances, and initial stocks.

Each simulated year then runs, in order: SAV fleet update, within-year
quasi-static equilibrium (mode choice <-> congestion, with perceived SAV
service held at the filter states), perception-filter update from the raw
equilibrium values, rail service re-sizing, HV stock step, impacts.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import dijkstra

from . import kernels
from .choice import ModeSplit, od_utilities, split_demand
from .impacts import accumulate, emissions, rail_operator_cost, sav_operator_cost
from .io import Scenario, TrajectoryRecord
from .network import AffineTTModel, PathSet, build_affine_model, \
    rail_shortest_paths, solve_user_equilibrium
from .params import ParamSet
from .service import SAVServiceState, rail_access_egress, sav_customer_costs, \
    sav_wait_time, update_service_state, utilisation
from .stocks import HVStock, RailState, SAVFleet, hv_stock_step, hv_vkm, \
    rail_update, sav_stock_step


class SimulationError(RuntimeError):
    pass


@dataclass
class SystemState:
    """Full yearly state; ``warm_split`` carries the last equilibrium explicitly."""

    year: int
    hv: HVStock
    sav: SAVFleet
    rail: RailState
    service: SAVServiceState
    xi: float
    warm_split: np.ndarray   # (3, n_od)


@dataclass
class EquilibriumPoint:
    """Converged within-year values."""

    split: ModeSplit
    t_car: np.ndarray        # min per OD
    t_rail: np.ndarray
    k_a: np.ndarray          # veh/h per link
    wait_raw: float          # min
    t_r_ae: float            # min
    util: float              # fleet utilisation (0 when fleet empty)
    cost_op_raw: float       # €/km
    cost_ae_raw: float       # €
    mean_trip_minutes: float
    iterations: int
    residual: float


@dataclass
class Runtime:
    """Kernel-ready arrays derived from a scenario; immutable during runs."""

    scenario: Scenario
    g_total: np.ndarray
    rail_ok: np.ndarray          # uint8 per OD
    dist_car: np.ndarray         # km, share-weighted UE path length
    dist_rail: np.ndarray
    car_model: AffineTTModel
    rail_model: AffineTTModel
    car_paths: PathSet
    rail_paths: PathSet
    car_k0: np.ndarray
    seg_shares: np.ndarray
    line_count: int
    mean_line_length: float      # km one-way
    route_km: float              # km, both directions over all lines
    base_split: np.ndarray       # (3, n_od) provisional equilibrium
    base_rail_state: RailState
    base_hv_vkm: float

    @property
    def params(self) -> ParamSet:
        return self.scenario.params


def _free_flow_od(road_like, od_pairs, weights, lengths):
    """Shortest-path (time, distance) per OD on the given weights."""
    rows = np.array([road_like.node_index(u) for u in road_like.from_node])
    cols = np.array([road_like.node_index(v) for v in road_like.to_node])
    order = np.lexsort((cols, rows))
    mat = sp.csr_matrix((weights[order], (rows[order], cols[order])),
                        shape=(road_like.n_nodes, road_like.n_nodes))
    lmat = sp.csr_matrix((lengths[order], (rows[order], cols[order])),
                         shape=(road_like.n_nodes, road_like.n_nodes))
    node_set = {int(n) for n in road_like.node_ids}
    times = np.zeros(len(od_pairs))
    dists = np.zeros(len(od_pairs))
    for j, (o, d) in enumerate(od_pairs):
        if int(o) not in node_set or int(d) not in node_set:
            continue
        oi, di = road_like.node_index(o), road_like.node_index(d)
        dist, pred = dijkstra(mat, directed=True, indices=oi, return_predecessors=True)
        if not np.isfinite(dist[di]):
            continue
        times[j] = dist[di]
        length = 0.0
        k = di
        while k != oi:
            i = pred[k]
            length += lmat[i, k]
            k = i
        dists[j] = length
    return times, dists


def build_runtime(scenario: Scenario) -> Runtime:
    """Offline preparation: provisional split, UE, affine models, base stocks."""
    p = scenario.params
    od_pairs = scenario.od_pairs
    g_total = np.ascontiguousarray(scenario.od_demand, dtype=float)

    t_car0, dist_car0 = _free_flow_od(scenario.road, od_pairs,
                                      scenario.road.fftime, scenario.road.length)
    t_rail0, dist_rail0 = _free_flow_od(scenario.rail, od_pairs,
                                        scenario.rail.fftime, scenario.rail.length)
    rail_paths = rail_shortest_paths(scenario.rail, od_pairs)
    rail_ok = np.ascontiguousarray(rail_paths.served().astype(np.uint8))

    line_count = int(p.line_count) if p.line_count > 0 else len(scenario.rail.line_ids)
    lengths = scenario.rail.line_lengths()
    mean_line_length = p.line_length if p.line_length > 0 \
        else float(np.mean(list(lengths.values())))
    route_km = 2.0 * float(np.sum(list(lengths.values())))

    # provisional split at free-flow times to anchor the UE demand
    service0 = SAVServiceState.initial(p)
    f_r = max(p.F_min, 0.3 * float(g_total.sum()) / (p.train_capacity * p.occupancy_rate))
    split = None
    for _ in range(6):
        t_r_ae = rail_access_egress(f_r, p.station_spacing, p.walk_speed)
        utils = od_utilities(t_car0, t_rail0, dist_car0, dist_rail0, rail_ok, p,
                             service0.cost_op, service0.cost_ae, service0.wait, t_r_ae)
        split = split_demand(g_total, utils, rail_ok, p)
        f_r = max(p.F_min, float(split.g_r.sum()) / (p.train_capacity * p.occupancy_rate))

    car_demand = split.g_h + split.g_s
    car_paths, _ = solve_user_equilibrium(scenario.road, od_pairs, car_demand)
    car_model = build_affine_model(car_paths, car_demand, scenario.road.capacity,
                                   scenario.road.fftime, scenario.road.length,
                                   scenario.road.alpha, scenario.road.beta)

    rail_state0 = rail_update(float(split.g_r.sum()), p, line_count, mean_line_length)
    k_r0 = np.full(scenario.rail.n_links, rail_state0.capacity)
    rail_model = build_affine_model(rail_paths, split.g_r, k_r0,
                                    scenario.rail.fftime, scenario.rail.length,
                                    scenario.rail.alpha, scenario.rail.beta)

    dist_car = car_model.od_dist
    dist_rail = rail_model.od_dist
    base_split = np.ascontiguousarray(
        np.vstack([split.g_h, split.g_s, split.g_r]))
    base_vkm = hv_vkm(split.g_h, dist_car, p.working_hours)

    return Runtime(
        scenario=scenario, g_total=g_total, rail_ok=rail_ok,
        dist_car=np.ascontiguousarray(dist_car),
        dist_rail=np.ascontiguousarray(dist_rail),
        car_model=car_model, rail_model=rail_model,
        car_paths=car_paths, rail_paths=rail_paths,
        car_k0=np.ascontiguousarray(scenario.road.capacity.astype(float)),
        seg_shares=np.ascontiguousarray(p.x_i, dtype=float),
        line_count=line_count, mean_line_length=mean_line_length,
        route_km=route_km, base_split=base_split,
        base_rail_state=rail_state0, base_hv_vkm=base_vkm)


def initial_state(runtime: Runtime) -> SystemState:
    p = runtime.params
    return SystemState(
        year=runtime.scenario.base_year,
        hv=HVStock.initial(runtime.base_hv_vkm, p),
        sav=SAVFleet(0.0),
        rail=runtime.base_rail_state,
        service=SAVServiceState.initial(p),
        xi=0.0,
        warm_split=runtime.base_split.copy())


def mean_sav_trip_minutes(t_car, g_s, pickup_overhead: float) -> float:
    """Demand-weighted car time of SAV users plus the empty-pickup overhead."""
    total = float(np.sum(g_s))
    if total > 0:
        base = float(np.dot(t_car, g_s) / total)
    else:
        base = float(np.mean(t_car)) if len(t_car) else 0.0
    return base + pickup_overhead


def mean_trip_km(dist, g_s) -> float:
    total = float(np.sum(g_s))
    if total > 0:
        return float(np.dot(dist, g_s) / total)
    return float(np.mean(dist)) if len(dist) else 0.0


def solve_year_equilibrium(state: SystemState, runtime: Runtime,
                           init_split=None) -> EquilibriumPoint:
    """Damped fixed point of mode choice and congestion for one year.

    Perceived SAV service (filter states) is held fixed; raw waiting time,
    utilisation and prices are evaluated at the converged point for the
    subsequent filter update.
    """
    p = runtime.params
    cm, rm = runtime.car_model, runtime.rail_model
    t_r_ae = rail_access_egress(state.rail.frequency, p.station_spacing, p.walk_speed)
    g_init = np.ascontiguousarray(init_split if init_split is not None
                                  else state.warm_split, dtype=float)
    split_arr, k_a, t_car, t_rail, iters, residual = kernels.year_equilibrium(
        runtime.g_total, runtime.dist_car, runtime.dist_rail, runtime.rail_ok,
        cm.inc, cm.agg, cm.q_ref, cm.t0, cm.t_ref, cm.dqdt, cm.k_ref,
        runtime.car_k0, cm.beta,
        p.h_HH, p.h_SH, p.h_SS,
        rm.inc, rm.agg, rm.q_ref, rm.t0, rm.t_ref, rm.dqdt, rm.k_ref, rm.beta,
        state.rail.capacity,
        p.w_time, p.value_of_time, p.asc_H, p.asc_S, p.asc_R, p.lambda_A,
        runtime.seg_shares,
        p.C_H_c_op, p.C_H_c_ae, p.t_H_ae, p.C_R_c_op, p.C_R_c_ae, t_r_ae,
        state.service.cost_op, state.service.cost_ae, state.service.wait,
        p.damping, p.fp_tol, p.fp_max_iter, g_init)
    if residual > p.fp_tol:
        raise SimulationError(
            f"year {state.year}: equilibrium not converged after {iters} "
            f"iterations (residual {residual:.3e})")
    split = ModeSplit(g_h=split_arr[0].copy(), g_s=split_arr[1].copy(),
                      g_r=split_arr[2].copy())
    g_s_total = float(split.g_s.sum())
    trip_min = mean_sav_trip_minutes(t_car, split.g_s, p.pickup_overhead)
    wait_raw = sav_wait_time(g_s_total, state.sav.size, trip_min, p)
    if state.sav.size > 0:
        util = utilisation(g_s_total, state.sav.size,
                           mean_trip_km(runtime.dist_car, split.g_s), p)
        cost_op_raw, cost_ae_raw = sav_customer_costs(util, p)
    else:
        util = 0.0
        cost_op_raw = p.C_S_c_op_0 * p.cost_ceiling_factor
        cost_ae_raw = p.C_S_c_ae_0 * p.cost_ceiling_factor
    return EquilibriumPoint(
        split=split, t_car=t_car, t_rail=t_rail, k_a=k_a, wait_raw=wait_raw,
        t_r_ae=t_r_ae, util=util, cost_op_raw=cost_op_raw,
        cost_ae_raw=cost_ae_raw, mean_trip_minutes=trip_min,
        iterations=int(iters), residual=float(residual))


def step_year(state: SystemState, u_t: float, runtime: Runtime):
    """Advance one year under policy input u_t; returns (state', record)."""
    if u_t < 0:
        raise ValueError("SAV additions must be >= 0")
    p = runtime.params
    sav = sav_stock_step(state.sav, u_t, p.sav_survival)
    working = replace(state, sav=sav)
    eq = solve_year_equilibrium(working, runtime)
    service = update_service_state(state.service, eq.wait_raw, eq.cost_op_raw,
                                   eq.cost_ae_raw, p)
    g_r_total = float(eq.split.g_r.sum())
    rail = rail_update(g_r_total, p, runtime.line_count, runtime.mean_line_length)
    vkm = hv_vkm(eq.split.g_h, runtime.dist_car, p.working_hours)
    hv = hv_stock_step(state.hv, vkm, p)
    # an empty fleet drives nothing, whatever captive demand is queued
    d_s = 0.0 if sav.size <= 0 else \
        float(np.dot(eq.split.g_s, runtime.dist_car)) * p.working_hours
    # the frequency floor keeps planned service finite, but nothing runs
    # when there is literally no rail demand
    d_r = rail.frequency * runtime.route_km * p.working_hours \
        if g_r_total > 0 else 0.0
    c_s = sav_operator_cost(d_s, u_t, eq.util, p)
    c_r = rail_operator_cost(d_r, rail.stock, p)
    e = emissions(hv, p.eps_a, p.M)
    xi = accumulate(state.xi, e)
    g_total = runtime.g_total
    weight = g_total.sum()
    t_a_mean = float(np.dot(eq.t_car, g_total) / weight) if weight > 0 else 0.0
    rail_mask = runtime.rail_ok.astype(bool)
    g_r_sum = float(eq.split.g_r.sum())
    if g_r_sum > 0:
        t_r_mean = float(np.dot(eq.t_rail, eq.split.g_r) / g_r_sum)
    elif rail_mask.any():
        t_r_mean = float(np.mean(eq.t_rail[rail_mask]))
    else:
        t_r_mean = 0.0
    record = TrajectoryRecord(
        year=state.year, u=u_t, s_s=sav.size, s_r=rail.stock,
        s_h=hv.total, s_h_thermal=hv.thermal_total, s_h_electric=hv.electric_total,
        g_h=float(eq.split.g_h.sum()), g_s=float(eq.split.g_s.sum()), g_r=g_r_total,
        t_a_mean=t_a_mean, t_r_mean=t_r_mean, t_s_wait=eq.wait_raw,
        t_r_ae=eq.t_r_ae, f_r=rail.frequency, k_a_mean=float(np.mean(eq.k_a)),
        k_r=rail.capacity, c_s=c_s, c_r=c_r, e=e, xi=xi)
    next_state = SystemState(
        year=state.year + 1, hv=hv, sav=sav, rail=rail, service=service,
        xi=xi, warm_split=np.ascontiguousarray(
            np.vstack([eq.split.g_h, eq.split.g_s, eq.split.g_r])))
    return next_state, record


def forecast(policy, runtime: Runtime, state: SystemState | None = None):
    """Run the horizon under the given yearly policy; returns (records, summary).

    ``summary`` carries the total operator cost and terminal cumulative
    emissions used by the backcasting objective.
    """
    policy = np.asarray(policy, dtype=float)
    horizon = runtime.scenario.horizon_years
    if len(policy) != horizon:
        raise ValueError(f"policy length {len(policy)} != horizon {horizon}")
    state = initial_state(runtime) if state is None else state
    records = []
    for u_t in policy:
        state, rec = step_year(state, float(u_t), runtime)
        records.append(rec)
    total_cost = float(sum(r.c_s + r.c_r for r in records))
    summary = {"total_cost": total_cost, "xi_T": records[-1].xi}
    return records, summary
