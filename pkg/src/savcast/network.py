"""Road and rail networks, user-equilibrium assignment, affine travel times.

Path sets are fixed offline: road paths come from a Frank-Wolfe user
equilibrium at the reference demand, rail paths are the shortest line-bound
route.  Online, OD travel times are an affine function of OD flows built by
differentiating the BPR link costs at the reference point; capacity changes
rescale the congestion term by the exact BPR factor (K_ref/K_now)^beta, so
the fixed-path assumption survives yearly capacity drift.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components, dijkstra

from .kernels import affine_link_times


class NetworkError(ValueError):
    """Topology or assignment failure."""


def bpr_time(flow, capacity, t0, alpha, beta):
    """BPR volume-delay: t0 * (1 + alpha * (flow/capacity)^beta).

    Accepts scalars or arrays; monotone non-decreasing in flow.
    """
    flow = np.asarray(flow, dtype=float)
    capacity = np.asarray(capacity, dtype=float)
    if np.any(capacity <= 0):
        raise NetworkError("capacity must be > 0")
    if np.any(flow < 0):
        raise NetworkError("flow must be >= 0")
    out = t0 * (1.0 + alpha * (flow / capacity) ** beta)
    return float(out) if out.ndim == 0 else out


@dataclass
class RoadNetwork:
    node_ids: np.ndarray      # sorted unique ids
    from_node: np.ndarray     # per link, node ids
    to_node: np.ndarray
    capacity: np.ndarray      # veh/h
    length: np.ndarray        # km
    fftime: np.ndarray        # min
    alpha: float = 0.15
    beta: float = 4.0

    def __post_init__(self):
        if np.any(self.capacity <= 0):
            raise NetworkError("link capacities must be > 0")
        if np.any(self.fftime <= 0):
            raise NetworkError("free-flow times must be > 0")
        self._index = {int(n): i for i, n in enumerate(self.node_ids)}
        self._link_of = {}
        for li, (u, v) in enumerate(zip(self.from_node, self.to_node)):
            key = (int(u), int(v))
            if key in self._link_of:
                raise NetworkError(f"duplicate link {key}")
            self._link_of[key] = li

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    @property
    def n_links(self) -> int:
        return len(self.from_node)

    def node_index(self, node_id: int) -> int:
        try:
            return self._index[int(node_id)]
        except KeyError:
            raise NetworkError(f"unknown node {node_id}") from None

    def link_index(self, u: int, v: int) -> int:
        try:
            return self._link_of[(int(u), int(v))]
        except KeyError:
            raise NetworkError(f"no link {u}->{v}") from None

    def csr_template(self):
        """CSR adjacency with a data slot per link plus the data->link map."""
        rows = np.array([self.node_index(u) for u in self.from_node])
        cols = np.array([self.node_index(v) for v in self.to_node])
        order = np.lexsort((cols, rows))
        data = np.ones(self.n_links)
        mat = sp.csr_matrix((data, (rows[order], cols[order])),
                            shape=(self.n_nodes, self.n_nodes))
        return mat, order   # mat.data[i] belongs to link order[i]

    def check_connected(self, od_node_ids) -> None:
        mat, _ = self.csr_template()
        n_comp, labels = connected_components(mat, directed=True, connection="strong")
        wanted = {self.node_index(n) for n in od_node_ids}
        comp = {labels[i] for i in wanted}
        if len(comp) > 1:
            raise NetworkError("OD nodes span multiple strongly connected components")


@dataclass
class RailNetwork:
    node_ids: np.ndarray
    from_node: np.ndarray
    to_node: np.ndarray
    length: np.ndarray        # km
    fftime: np.ndarray        # min in-vehicle
    line: np.ndarray          # line id per link
    alpha: float = 0.30
    beta: float = 2.0

    def __post_init__(self):
        if np.any(self.fftime <= 0):
            raise NetworkError("rail free-flow times must be > 0")
        self._index = {int(n): i for i, n in enumerate(self.node_ids)}

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    @property
    def n_links(self) -> int:
        return len(self.from_node)

    @property
    def line_ids(self) -> np.ndarray:
        return np.unique(self.line)

    def line_lengths(self) -> dict:
        """One-way route length (km) per line (links exist in both directions)."""
        out = {}
        for lid in self.line_ids:
            mask = self.line == lid
            out[int(lid)] = float(self.length[mask].sum()) / 2.0
        return out

    def node_index(self, node_id: int) -> int:
        try:
            return self._index[int(node_id)]
        except KeyError:
            raise NetworkError(f"unknown rail node {node_id}") from None


@dataclass
class PathSet:
    """Fixed per-OD paths (link-index tuples) with equilibrium flow shares."""

    od_pairs: list            # (origin, destination) node ids
    paths: list               # per OD: list of (links tuple, share); may be empty
    n_links: int
    mode: str = "car"

    def incidence(self) -> np.ndarray:
        """(n_links, n_od) share-weighted link-path incidence."""
        inc = np.zeros((self.n_links, len(self.od_pairs)))
        for j, plist in enumerate(self.paths):
            for links, share in plist:
                for li in links:
                    inc[li, j] += share
        return inc

    def served(self) -> np.ndarray:
        return np.array([len(p) > 0 for p in self.paths], dtype=bool)


@dataclass
class AffineTTModel:
    """OD travel times affine in OD demand, linearized at a UE reference point."""

    od_pairs: list
    inc: np.ndarray           # (n_links, n_od) flow loading
    agg: np.ndarray           # (n_od, n_links) share-weighted time aggregation
    q_ref: np.ndarray         # link flows at linearization
    t0: np.ndarray            # free-flow link times
    t_ref: np.ndarray         # link times at linearization
    dqdt: np.ndarray          # d(link time)/d(link flow) at reference
    k_ref: np.ndarray         # link capacities at linearization
    beta: float
    od_dist: np.ndarray = field(default=None)   # share-weighted OD path length
    t_od_ref: np.ndarray = field(default=None)  # OD times at the reference point

    def __post_init__(self):
        if self.od_dist is None:
            # uses link lengths only when provided by the builder
            self.od_dist = np.zeros(len(self.od_pairs))
        if self.t_od_ref is None:
            self.t_od_ref = self.agg @ self.t_ref


def _shortest_paths(mat, order, times, origins, network):
    """Dijkstra from each origin index; returns (dist, predecessors)."""
    data = np.empty_like(times)
    data[:] = times[order]
    mat = mat.copy()
    mat.data = data
    dist, pred = dijkstra(mat, directed=True, indices=origins,
                          return_predecessors=True)
    return dist, pred


def _backtrack(pred_row, network, o_idx, d_idx):
    links = []
    j = d_idx
    guard = 0
    while j != o_idx:
        i = pred_row[j]
        if i < 0:
            return None
        links.append(network.link_index(network.node_ids[i], network.node_ids[j]))
        j = i
        guard += 1
        if guard > network.n_nodes:
            return None
    links.reverse()
    return tuple(links)


def solve_user_equilibrium(network: RoadNetwork, od_pairs, demands,
                           gap_tol: float = 1e-4, max_iter: int = 30000,
                           min_path_share: float = 0.01):
    """Frank-Wolfe user equilibrium with path-flow bookkeeping.

    Stops when the relative gap (1 - SPTT/TSTT) falls below ``gap_tol``.
    Returns (PathSet, link_flows).  Paths carrying less than
    ``min_path_share`` of their OD flow are dropped and shares renormalized.
    """
    demands = np.asarray(demands, dtype=float)
    if np.any(demands < 0):
        raise NetworkError("demand must be >= 0")
    n_od = len(od_pairs)
    o_idx = np.array([network.node_index(o) for o, _ in od_pairs])
    d_idx = np.array([network.node_index(d) for _, d in od_pairs])
    origins = np.unique(o_idx)
    origin_row = {int(o): r for r, o in enumerate(origins)}
    mat, order = network.csr_template()
    cap, t0 = network.capacity, network.fftime
    alpha, beta = network.alpha, network.beta

    def link_times(q):
        return t0 * (1.0 + alpha * (q / cap) ** beta)

    def all_or_nothing(times):
        dist, pred = _shortest_paths(mat, order, times, origins, network)
        y = np.zeros(network.n_links)
        od_paths = [None] * n_od
        sp_cost = np.zeros(n_od)
        for j in range(n_od):
            row = origin_row[int(o_idx[j])]
            path = _backtrack(pred[row], network, o_idx[j], d_idx[j])
            if path is None:
                o, d = od_pairs[j]
                raise NetworkError(f"OD pair {o}->{d} is disconnected")
            od_paths[j] = path
            sp_cost[j] = dist[row, d_idx[j]]
            for li in path:
                y[li] += demands[j]
        return y, od_paths, sp_cost

    path_flows = [dict() for _ in range(n_od)]
    times = link_times(np.zeros(network.n_links))
    q, aon_paths, _ = all_or_nothing(times)
    for j in range(n_od):
        path_flows[j][aon_paths[j]] = demands[j]

    gap = np.inf
    for _ in range(max_iter):
        times = link_times(q)
        y, aon_paths, sp_cost = all_or_nothing(times)
        tstt = float(q @ times)
        sptt = float(demands @ sp_cost)
        gap = (tstt - sptt) / tstt if tstt > 0 else 0.0
        if gap <= gap_tol:
            break
        d = y - q

        def deriv(lam):
            return float(d @ link_times(q + lam * d))

        lo, hi = 0.0, 1.0
        if deriv(1.0) <= 0.0:
            lam = 1.0
        else:
            for _ in range(48):
                mid = 0.5 * (lo + hi)
                if deriv(mid) > 0.0:
                    hi = mid
                else:
                    lo = mid
            lam = 0.5 * (lo + hi)
        q = q + lam * d
        for j in range(n_od):
            if demands[j] <= 0:
                continue
            pf = path_flows[j]
            for p in pf:
                pf[p] *= (1.0 - lam)
            pf[aon_paths[j]] = pf.get(aon_paths[j], 0.0) + lam * demands[j]
    else:
        raise NetworkError(f"UE did not reach gap {gap_tol} (gap={gap:.3e})")

    paths = []
    for j in range(n_od):
        pf = path_flows[j]
        if demands[j] <= 0:
            best = min(pf, key=lambda p: sum(times[li] for li in p))
            paths.append([(best, 1.0)])
            continue
        shares = {p: f / demands[j] for p, f in pf.items()
                  if f / demands[j] >= min_path_share}
        if not shares:
            best = max(pf, key=lambda p: (pf[p], p))
            shares = {best: 1.0}
        z = sum(shares.values())
        paths.append(sorted(((p, s / z) for p, s in shares.items()),
                            key=lambda item: (-item[1], item[0])))
    path_set = PathSet(od_pairs=list(od_pairs), paths=paths,
                       n_links=network.n_links, mode="car")
    return path_set, q


def rail_shortest_paths(rail: RailNetwork, od_pairs) -> PathSet:
    """Single line-bound shortest path per OD; empty list when rail can't serve."""
    rail_nodes = set(int(n) for n in rail.node_ids)
    rows = np.array([rail.node_index(u) for u in rail.from_node])
    cols = np.array([rail.node_index(v) for v in rail.to_node])
    order = np.lexsort((cols, rows))
    mat = sp.csr_matrix((rail.fftime[order], (rows[order], cols[order])),
                        shape=(rail.n_nodes, rail.n_nodes))
    link_of = {}
    for li, (u, v) in enumerate(zip(rail.from_node, rail.to_node)):
        link_of[(int(u), int(v))] = li
    paths = []
    for o, d in od_pairs:
        if int(o) not in rail_nodes or int(d) not in rail_nodes or o == d:
            paths.append([])
            continue
        oi, di = rail.node_index(o), rail.node_index(d)
        dist, pred = dijkstra(mat, directed=True, indices=oi,
                              return_predecessors=True)
        if not np.isfinite(dist[di]):
            paths.append([])
            continue
        links = []
        j = di
        while j != oi:
            i = pred[j]
            links.append(link_of[(int(rail.node_ids[i]), int(rail.node_ids[j]))])
            j = i
        links.reverse()
        paths.append([(tuple(links), 1.0)])
    return PathSet(od_pairs=list(od_pairs), paths=paths,
                   n_links=rail.n_links, mode="rail")


def build_affine_model(path_set: PathSet, base_demand, capacities, t0, lengths,
                       alpha: float, beta: float) -> AffineTTModel:
    """Linearize BPR OD times at the given demand and capacities.

    Sensitivities are the analytic derivatives of OD times w.r.t. OD demands
    under fixed path shares, so the model is exact at the reference point.
    """
    base_demand = np.asarray(base_demand, dtype=float)
    capacities = np.asarray(capacities, dtype=float)
    if np.any(capacities <= 0):
        raise NetworkError("capacities must be > 0")
    inc = path_set.incidence()
    q_ref = inc @ base_demand
    t_ref = bpr_time(q_ref, capacities, t0, alpha, beta)
    with np.errstate(divide="ignore"):
        dqdt = t0 * alpha * beta * np.where(q_ref > 0, q_ref, 0.0) ** (beta - 1.0) \
            / capacities ** beta
    if beta == 1.0:
        dqdt = t0 * alpha / capacities * np.ones_like(q_ref)
    agg = np.ascontiguousarray(inc.T)
    od_dist = agg @ np.asarray(lengths, dtype=float)
    return AffineTTModel(
        od_pairs=list(path_set.od_pairs),
        inc=np.ascontiguousarray(inc), agg=agg,
        q_ref=q_ref, t0=np.asarray(t0, float).copy(), t_ref=t_ref, dqdt=dqdt,
        k_ref=capacities.copy(), beta=float(beta), od_dist=od_dist)


def od_travel_times(model: AffineTTModel, od_demand, capacities) -> np.ndarray:
    """OD times (min) at the given demand vector and per-link capacities."""
    od_demand = np.asarray(od_demand, dtype=float)
    capacities = np.asarray(capacities, dtype=float)
    if capacities.ndim == 0:
        capacities = np.full(model.k_ref.shape, float(capacities))
    if np.any(capacities <= 0):
        raise NetworkError("capacities must be > 0")
    if np.any(od_demand < 0):
        raise NetworkError("demand must be >= 0")
    q = model.inc @ od_demand
    tau = affine_link_times(q, model.t0, model.t_ref, model.dqdt, model.q_ref,
                            model.k_ref, np.ascontiguousarray(capacities),
                            model.beta)
    return model.agg @ tau


def road_od_travel_times(model: AffineTTModel, demand_by_mode: dict,
                         capacities) -> np.ndarray:
    """Road OD times from combined HV+SAV vehicle flows (1 pax per vehicle)."""
    total = np.asarray(demand_by_mode["H"], float) + np.asarray(demand_by_mode["S"], float)
    return od_travel_times(model, total, capacities)


def link_mode_flows(path_set: PathSet, demand_by_mode: dict) -> dict:
    """Per-link flows (veh/h) for each mode routed over the fixed paths."""
    inc = path_set.incidence()
    out = {}
    for mode, dem in demand_by_mode.items():
        dem = np.asarray(dem, dtype=float)
        if np.any(dem < 0):
            raise NetworkError("demand must be >= 0")
        out[mode] = inc @ dem
    return out


def dump_path_set(path_set: PathSet, path) -> None:
    """Inspection dump: one row per path with its share and link indices."""
    lines = ["origin,destination,share,links"]
    for (o, d), plist in zip(path_set.od_pairs, path_set.paths):
        for links, share in plist:
            lines.append(f"{o},{d},{share:.12g},{'|'.join(str(l) for l in links)}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def od_sensitivity_matrix(model: AffineTTModel) -> np.ndarray:
    """d(OD time)/d(OD demand) at the reference point (min per pax/h)."""
    return model.agg @ (model.dqdt[:, None] * model.inc)


def dump_affine_model(model: AffineTTModel, path) -> None:
    """Inspection dump: base OD times, distances, and the sensitivity matrix."""
    sens = od_sensitivity_matrix(model)
    header = ["origin", "destination", "t_base", "dist"] \
        + [f"dt_d{o}_{d}" for o, d in model.od_pairs]
    lines = [",".join(header)]
    for j, (o, d) in enumerate(model.od_pairs):
        row = [str(o), str(d), f"{model.t_od_ref[j]:.12g}",
               f"{model.od_dist[j]:.12g}"] + [f"{x:.12g}" for x in sens[j]]
        lines.append(",".join(row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
