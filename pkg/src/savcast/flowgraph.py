"""Signal-flow-graph analysis of the SAV-stock-to-emissions channel.

The yearly model is reduced to seven aggregate variables (SAV stock, SAV
wait, SAV demand, HV demand, road capacity, road travel time, emissions)
with rail service, SAV prices and rail times held fixed and the perception
filters at rest.  Each arrow carries a gain measured by central finite
differences of the corresponding sub-model map at the reduced model's own
equilibrium.  Mason's gain formula then gives the net transfer from stock to
emissions, and the sign of its numerator flags the regime where adding SAVs
would raise emissions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import networkx as nx
import numpy as np

from .impacts import emissions
from .kernels import mixed_capacity_value, split_od_demand
from .network import od_travel_times
from .params import ParamSet
from .service import sav_wait_time
from .simulate import Runtime, SystemState, solve_year_equilibrium
from .stocks import hv_stock_step

NODES = ("sav_stock", "sav_wait", "sav_demand", "hv_demand",
         "road_capacity", "road_time", "emissions")

# fixed edge table: (source, target, label, sign)
CANONICAL_EDGES = (
    ("sav_stock", "sav_wait", "k1", -1),
    ("sav_wait", "sav_demand", "k2", -1),
    ("sav_demand", "sav_wait", "k3", +1),
    ("sav_demand", "road_time", "k4", +1),
    ("hv_demand", "road_time", "k4", +1),
    ("road_time", "sav_demand", "k5", -1),
    ("sav_demand", "road_capacity", "k6", +1),
    ("road_capacity", "road_time", "k7", -1),
    ("road_time", "sav_wait", "k8", +1),
    ("road_time", "hv_demand", "k9", -1),
    ("sav_wait", "hv_demand", "k11", +1),
    ("hv_demand", "emissions", "k12", +1),
)

LOOP_NAMES = {
    frozenset({"k2", "k3"}): "L1",
    frozenset({"k2", "k4", "k8"}): "L2",
    frozenset({"k2", "k6", "k7", "k8"}): "L3",
    frozenset({"k11", "k4", "k8"}): "L4",
    frozenset({"k11", "k4", "k5", "k3"}): "L5",
    frozenset({"k4", "k5"}): "L6",
    frozenset({"k6", "k7", "k5"}): "L7",
    frozenset({"k9", "k4"}): "L8",
}

PATH_NAMES = {
    frozenset({"k1", "k11", "k12"}): "P1",
    frozenset({"k1", "k2", "k4", "k9", "k12"}): "P2",
    frozenset({"k1", "k2", "k6", "k7", "k9", "k12"}): "P3",
}


class SignViolation(RuntimeError):
    """A measured gain contradicts the fixed edge-sign structure."""


@dataclass(frozen=True)
class GainSet:
    """Non-negative gain magnitudes; edge signs are fixed by the graph."""

    k1: float
    k2: float
    k3: float
    k4: float
    k5: float
    k6: float
    k7: float
    k8: float
    k9: float
    k11: float
    k12: float

    def __post_init__(self):
        for name, v in self.as_dict().items():
            if v < 0:
                raise ValueError(f"{name} must be >= 0, got {v}")

    def as_dict(self) -> dict:
        return {f"k{i}": getattr(self, f"k{i}")
                for i in (1, 2, 3, 4, 5, 6, 7, 8, 9, 11, 12)}


class FlowGraph:
    """Signed, labelled, weighted digraph for Mason analysis."""

    def __init__(self):
        self._g = nx.DiGraph()

    def add_edge(self, u: str, v: str, label: str, sign: int, magnitude: float):
        if sign not in (-1, 1):
            raise ValueError("sign must be +1 or -1")
        if magnitude < 0:
            raise ValueError("magnitude must be >= 0")
        self._g.add_edge(u, v, label=label, gain=sign * magnitude)

    @property
    def digraph(self) -> nx.DiGraph:
        return self._g

    def edge_gain(self, u, v):
        d = self._g.edges[u, v]
        return d["gain"], d["label"]


def canonical_graph(gains: GainSet) -> FlowGraph:
    """The seven-node stock-to-emissions graph with the fixed sign pattern."""
    g = FlowGraph()
    mags = gains.as_dict()
    for u, v, label, sign in CANONICAL_EDGES:
        g.add_edge(u, v, label, sign, mags[label])
    return g


@dataclass
class Cycle:
    name: str
    nodes: tuple
    labels: tuple
    gain: float


@dataclass
class ForwardPath:
    name: str
    nodes: tuple
    labels: tuple
    gain: float


def enumerate_loops(graph: FlowGraph) -> list:
    """All simple directed cycles with their gain products."""
    out = []
    for nodes in nx.simple_cycles(graph.digraph):
        gain = 1.0
        labels = []
        for i, u in enumerate(nodes):
            v = nodes[(i + 1) % len(nodes)]
            g, lab = graph.edge_gain(u, v)
            gain *= g
            labels.append(lab)
        key = frozenset(labels)
        out.append(Cycle(name=LOOP_NAMES.get(key, ""), nodes=tuple(nodes),
                         labels=tuple(sorted(labels)), gain=gain))
    out.sort(key=lambda c: (c.name or "~", c.labels))
    return out


def enumerate_paths(graph: FlowGraph, source: str, sink: str) -> list:
    """All simple forward paths from source to sink with gain products."""
    out = []
    if source not in graph.digraph or sink not in graph.digraph:
        return out
    for nodes in nx.all_simple_paths(graph.digraph, source, sink):
        gain = 1.0
        labels = []
        for u, v in zip(nodes[:-1], nodes[1:]):
            g, lab = graph.edge_gain(u, v)
            gain *= g
            labels.append(lab)
        key = frozenset(labels)
        out.append(ForwardPath(name=PATH_NAMES.get(key, ""), nodes=tuple(nodes),
                               labels=tuple(sorted(labels)), gain=gain))
    out.sort(key=lambda p: (p.name or "~", p.labels))
    return out


def _mono_sign(x: float) -> float:
    return 1.0 if x > 0 else (-1.0 if x < 0 else 0.0)


def _merge_mono(a: tuple, b: tuple) -> tuple:
    return tuple(sorted(a + b))


def _disjoint_combinations(loops: list):
    """(size, gain product, label monomial) over every non-empty set of
    pairwise node-disjoint loops."""
    loop_nodes = [frozenset(c.nodes) for c in loops]
    out = []

    def rec(start, used, gain, mono, size):
        for i in range(start, len(loops)):
            if used & loop_nodes[i]:
                continue
            g = gain * loops[i].gain
            m = _merge_mono(mono, tuple(loops[i].labels))
            out.append((size + 1, g, m))
            rec(i + 1, used | loop_nodes[i], g, m, size + 1)

    rec(0, frozenset(), 1.0, (), 0)
    return out


@dataclass
class TransferResult:
    """Mason transfer with its expansions (monomials keyed by sorted labels)."""

    transfer: float
    numerator: float
    denominator: float
    numerator_monomials: dict = field(default_factory=dict)
    denominator_monomials: dict = field(default_factory=dict)
    loops: list = field(default_factory=list)
    paths: list = field(default_factory=list)


def mason_transfer(graph: FlowGraph, source: str, sink: str) -> TransferResult:
    """T = sum_k P_k Delta_k / Delta over all forward paths and loop subsets.

    Delta = 1 - sum L_i + sum(products of non-touching pairs) - ...;
    non-touching means node-disjoint.  Delta_k keeps only loops disjoint
    from path k.  Monomial expansions record the sign pattern per label
    product (valid for positive gain magnitudes).
    """
    loops = enumerate_loops(graph)
    paths = enumerate_paths(graph, source, sink)
    den = 1.0
    den_mono = {(): 1.0}
    for size, gain, mono in _disjoint_combinations(loops):
        s = -1.0 if size % 2 == 1 else 1.0
        den += s * gain
        den_mono[mono] = den_mono.get(mono, 0.0) + s * _mono_sign(gain)
    num = 0.0
    num_mono: dict = {}
    for p in paths:
        p_nodes = frozenset(p.nodes)
        sub = [c for c in loops if not (frozenset(c.nodes) & p_nodes)]
        base_mono = tuple(sorted(p.labels))
        num_mono[base_mono] = num_mono.get(base_mono, 0.0) + _mono_sign(p.gain)
        delta_k = 1.0
        for size, gain, mono in _disjoint_combinations(sub):
            s = -1.0 if size % 2 == 1 else 1.0
            delta_k += s * gain
            m = _merge_mono(base_mono, mono)
            num_mono[m] = num_mono.get(m, 0.0) + s * _mono_sign(p.gain * gain)
        num += p.gain * delta_k
    transfer = num / den
    return TransferResult(
        transfer=transfer, numerator=num, denominator=den,
        numerator_monomials={k: v for k, v in num_mono.items() if v != 0.0},
        denominator_monomials={k: v for k, v in den_mono.items() if v != 0.0},
        loops=loops, paths=paths)


def closed_form_transfer(gains: GainSet) -> float:
    """Closed-form transfer of the canonical graph:
    (P1 - P1 L6 - P1 L7 + P2 + P3) / (1 - sum L_i + L1 L8)."""
    k = gains.as_dict()
    p1 = -k["k1"] * k["k11"] * k["k12"]
    p2 = -k["k1"] * k["k2"] * k["k4"] * k["k9"] * k["k12"]
    p3 = +k["k1"] * k["k2"] * k["k6"] * k["k7"] * k["k9"] * k["k12"]
    l1 = -k["k2"] * k["k3"]
    l2 = -k["k2"] * k["k4"] * k["k8"]
    l3 = +k["k2"] * k["k6"] * k["k7"] * k["k8"]
    l4 = +k["k11"] * k["k4"] * k["k8"]
    l5 = -k["k11"] * k["k4"] * k["k5"] * k["k3"]
    l6 = -k["k4"] * k["k5"]
    l7 = +k["k6"] * k["k7"] * k["k5"]
    l8 = -k["k9"] * k["k4"]
    num = p1 - p1 * l6 - p1 * l7 + p2 + p3
    den = 1.0 - (l1 + l2 + l3 + l4 + l5 + l6 + l7 + l8) + l1 * l8
    return num / den


@dataclass
class UndesiredEffect:
    flag: bool               # adding SAVs would raise emissions
    margin: float            # k6 k7 - k4
    necessary: bool          # k6 k7 > k4 (necessary, not sufficient)
    expression: float        # transfer-numerator sign expression


def undesired_effect_check(gains: GainSet) -> UndesiredEffect:
    """Evaluate -k1 k12 (k11 + (k4 - k6 k7)(k11 k5 + k2 k9)); positive means
    more SAV stock raises emissions."""
    k = gains.as_dict()
    expr = -k["k1"] * k["k12"] * (
        k["k11"] + (k["k4"] - k["k6"] * k["k7"])
        * (k["k11"] * k["k5"] + k["k2"] * k["k9"]))
    margin = k["k6"] * k["k7"] - k["k4"]
    return UndesiredEffect(flag=expr > 0.0, margin=margin,
                           necessary=margin > 0.0, expression=expr)


# ---------------------------------------------------------------------------
# aggregate quasi-static model for gain measurement
# ---------------------------------------------------------------------------

@dataclass
class SimplifiedModel:
    """Scalar quasi-static reduction anchored at one simulated year.

    Rail service, SAV prices and rail times are pinned at the anchor and the
    raw waiting time feeds utilities directly (filters at rest).  Each map
    takes exactly the in-edges of the canonical graph; gains are probed at
    the model's own fixed point stored in ``fp``.
    """

    params: ParamSet
    runtime: Runtime
    frozen_hv: object            # HVStock entering the year
    s_s: float
    # anchor OD patterns and aggregates (fixed once)
    g_h_base: np.ndarray
    g_s_base: np.ndarray
    t_car_base: np.ndarray
    u_r_fixed: np.ndarray
    sav_cost_op: float
    sav_cost_ae: float
    q_s0: float
    q_h0: float
    t_a0: float
    k_a0: float
    trip_base: float             # min, in-vehicle part at the anchor
    wait0: float
    fp: dict = field(default_factory=dict)

    def wait_map(self, s_s: float, q_s: float, t_a: float) -> float:
        trip = self.trip_base * (t_a / self.t_a0) + self.params.pickup_overhead
        return sav_wait_time(q_s, s_s, trip, self.params)

    def choice_map(self, wait: float, t_a: float):
        p = self.params
        t_car = self.t_car_base * (t_a / self.t_a0)
        u_h = p.asc_H - p.w_time * (
            t_car + p.t_H_ae
            + p.value_of_time * (p.C_H_c_op * self.runtime.dist_car + p.C_H_c_ae))
        u_s = p.asc_S - p.w_time * (
            t_car + wait
            + p.value_of_time * (self.sav_cost_op * self.runtime.dist_car
                                 + self.sav_cost_ae))
        g_h, g_s, _ = split_od_demand(
            self.runtime.g_total, np.ascontiguousarray(u_h),
            np.ascontiguousarray(u_s), self.u_r_fixed, self.runtime.rail_ok,
            p.lambda_A, self.runtime.seg_shares)
        return float(g_s.sum()), float(g_h.sum())

    def capacity_map(self, q_s: float) -> float:
        p = self.params
        k0 = float(np.mean(self.runtime.car_k0))
        return float(mixed_capacity_value(max(q_s, 0.0), self.q_h0, k0,
                                          p.h_HH, p.h_SH, p.h_SS))

    def time_map(self, q_car: float, k_a: float) -> float:
        base_total = self.q_s0 + self.q_h0
        g_car = (self.g_h_base + self.g_s_base) * (q_car / base_total)
        caps = self.runtime.car_model.k_ref * (k_a / self.k_a0)
        t = od_travel_times(self.runtime.car_model, g_car, caps)
        w = self.runtime.g_total
        return float(np.dot(t, w) / w.sum())

    def emission_map(self, q_h: float) -> float:
        p = self.params
        vkm = float(np.dot(self.g_h_base, self.runtime.dist_car)) \
            * p.working_hours * (q_h / self.q_h0)
        stock = hv_stock_step(self.frozen_hv, vkm, p)
        return emissions(stock, p.eps_a, p.M)

    def solve(self, s_s: float, tol: float = 1e-11, max_iter: int = 5000) -> dict:
        """Damped fixed point of the scalar system at fleet size ``s_s``."""
        wait, q_s, q_h = self.wait0, self.q_s0, self.q_h0
        k_a, t_a = self.k_a0, self.t_a0
        if self.fp:
            wait, q_s, q_h = self.fp["wait"], self.fp["q_s"], self.fp["q_h"]
            k_a, t_a = self.fp["k_a"], self.fp["t_a"]
        gamma = 0.5
        for _ in range(max_iter):
            w_new = self.wait_map(s_s, q_s, t_a)
            q_s_new, q_h_new = self.choice_map(wait, t_a)
            k_new = self.capacity_map(q_s)
            t_new = self.time_map(q_s + q_h, k_a)
            vals = np.array([wait, q_s, q_h, k_a, t_a])
            news = np.array([w_new, q_s_new, q_h_new, k_new, t_new])
            mixed = (1.0 - gamma) * vals + gamma * news
            resid = float(np.max(np.abs(mixed - vals) / (np.abs(vals) + 1e-9)))
            wait, q_s, q_h, k_a, t_a = (float(x) for x in mixed)
            if resid <= tol:
                break
        e = self.emission_map(q_h)
        return {"wait": wait, "q_s": q_s, "q_h": q_h, "k_a": k_a, "t_a": t_a,
                "e": e}


def build_simplified_model(state: SystemState, runtime: Runtime) -> SimplifiedModel:
    """Anchor the scalar model at the year's equilibrium and locate its own
    fixed point (where gains will be probed)."""
    if state.sav.size <= 0:
        raise ValueError("analysis needs a non-empty SAV fleet")
    eq = solve_year_equilibrium(state, runtime)
    p = runtime.params
    w = runtime.g_total
    t_a0 = float(np.dot(eq.t_car, w) / w.sum())
    u_r = np.where(
        runtime.rail_ok.astype(bool),
        p.asc_R - p.w_time * (eq.t_rail + eq.t_r_ae
                              + p.value_of_time * (p.C_R_c_op * runtime.dist_rail
                                                   + p.C_R_c_ae)),
        -1.0e30)
    model = SimplifiedModel(
        params=p, runtime=runtime, frozen_hv=state.hv, s_s=state.sav.size,
        g_h_base=eq.split.g_h.copy(), g_s_base=eq.split.g_s.copy(),
        t_car_base=eq.t_car.copy(), u_r_fixed=np.ascontiguousarray(u_r),
        sav_cost_op=state.service.cost_op, sav_cost_ae=state.service.cost_ae,
        q_s0=float(eq.split.g_s.sum()), q_h0=float(eq.split.g_h.sum()),
        t_a0=t_a0, k_a0=float(np.mean(eq.k_a)),
        trip_base=eq.mean_trip_minutes - p.pickup_overhead,
        wait0=eq.wait_raw)
    model.fp = model.solve(model.s_s)
    return model


_EXPECTED_SIGNS = {
    "k1": -1, "k2": -1, "k3": +1, "k4": +1, "k5": -1, "k6": +1,
    "k7": -1, "k8": +1, "k9": -1, "k11": +1, "k12": +1,
}


def _central(f, x0, step):
    return (f(x0 + step) - f(x0 - step)) / (2.0 * step)


def linearize(state: SystemState, runtime: Runtime,
              rel_step: float = 1e-3) -> GainSet:
    """Gain magnitudes by central differences of each sub-model map.

    Raises :class:`SignViolation` when a measured derivative contradicts the
    fixed sign table beyond finite-difference noise.
    """
    model = build_simplified_model(state, runtime)
    return linearize_model(model, rel_step)


def linearize_model(model: SimplifiedModel, rel_step: float = 1e-3) -> GainSet:
    fp = model.fp or model.solve(model.s_s)
    s0 = model.s_s
    w0, qs0, qh0 = fp["wait"], fp["q_s"], fp["q_h"]
    ka0, ta0 = fp["k_a"], fp["t_a"]
    qcar0 = qs0 + qh0

    def step(x):
        return rel_step * abs(x) if x != 0 else rel_step

    raw = {}
    raw["k1"] = _central(lambda s: model.wait_map(s, qs0, ta0), s0, step(s0))
    raw["k3"] = _central(lambda q: model.wait_map(s0, q, ta0), qs0, step(qs0))
    raw["k8"] = _central(lambda t: model.wait_map(s0, qs0, t), ta0, step(ta0))
    raw["k2"] = _central(lambda w: model.choice_map(w, ta0)[0], w0, step(w0))
    raw["k11"] = _central(lambda w: model.choice_map(w, ta0)[1], w0, step(w0))
    raw["k5"] = _central(lambda t: model.choice_map(w0, t)[0], ta0, step(ta0))
    raw["k9"] = _central(lambda t: model.choice_map(w0, t)[1], ta0, step(ta0))
    raw["k6"] = _central(model.capacity_map, qs0, step(qs0))
    raw["k4"] = _central(lambda q: model.time_map(q, ka0), qcar0, step(qcar0))
    raw["k7"] = _central(lambda k: model.time_map(qcar0, k), ka0, step(ka0))
    raw["k12"] = _central(model.emission_map, qh0, step(qh0))

    scales = {
        "k1": (w0 + 1.0) / (s0 + 1.0), "k2": (qs0 + 1.0) / (w0 + 1.0),
        "k3": (w0 + 1.0) / (qs0 + 1.0), "k4": (ta0 + 1.0) / (qcar0 + 1.0),
        "k5": (qs0 + 1.0) / (ta0 + 1.0), "k6": (ka0 + 1.0) / (qs0 + 1.0),
        "k7": (ta0 + 1.0) / (ka0 + 1.0), "k8": (w0 + 1.0) / (ta0 + 1.0),
        "k9": (qh0 + 1.0) / (ta0 + 1.0), "k11": (qh0 + 1.0) / (w0 + 1.0),
        "k12": 1.0,
    }
    mags = {}
    for name, value in raw.items():
        want = _EXPECTED_SIGNS[name]
        if value * want < 0 and abs(value) > 1e-6 * scales[name]:
            raise SignViolation(
                f"{name}: measured {value:.3e}, expected sign {want:+d}")
        mags[name] = abs(value) if value * want > 0 else 0.0
    return GainSet(**mags)


def simplified_response(model: SimplifiedModel, rel: float = 0.005) -> float:
    """Closed-loop dE/dS_S by re-solving the scalar fixed point at s(1 +/- rel)."""
    s0 = model.s_s
    hi = model.solve(s0 * (1.0 + rel))
    lo = model.solve(s0 * (1.0 - rel))
    return (hi["e"] - lo["e"]) / (2.0 * rel * s0)


def analyze_state(state: SystemState, runtime: Runtime,
                  rel_step: float = 1e-3):
    """Full analysis bundle for one year: gains, census, transfer, condition."""
    model = build_simplified_model(state, runtime)
    gains = linearize_model(model, rel_step)
    graph = canonical_graph(gains)
    result = mason_transfer(graph, "sav_stock", "emissions")
    condition = undesired_effect_check(gains)
    return {"gains": gains, "graph": graph, "transfer": result,
            "condition": condition, "model": model}
