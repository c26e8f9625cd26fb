"""Dynamic urban mobility model: HV / shared-AV / rail.

Forecasting simulations, signal-flow-graph feedback analysis, and
backcasting of the SAV introduction schedule under a CO2 cap.
"""

from .backcast import BackcastProblem, BackcastSolution, compare_to_reference, \
    evaluate_policy, solve_backcast
from .choice import ModeSplit, UtilitySpec, mode_utility, nested_logit_shares, \
    split_demand
from .flowgraph import FlowGraph, GainSet, canonical_graph, enumerate_loops, \
    enumerate_paths, linearize, mason_transfer, undesired_effect_check
from .io import Scenario, TrajectoryRecord, load_scenario, read_trajectory, \
    write_trajectory
from .network import AffineTTModel, PathSet, RailNetwork, RoadNetwork, bpr_time, \
    build_affine_model, link_mode_flows, od_travel_times, solve_user_equilibrium
from .params import ParamSet, load_params
from .capacity import HeadwaySet, mixed_capacity
from .service import QueueModel, SAVServiceState, perceive, rail_access_egress, \
    sav_customer_costs, sav_wait_time, utilisation
from .simulate import EquilibriumPoint, Runtime, SystemState, build_runtime, \
    forecast, initial_state, solve_year_equilibrium, step_year
from .stocks import HVStock, RailState, SAVFleet, hv_stock_step, hv_vkm, \
    rail_update, sav_stock_step

__version__ = "0.1.0"
