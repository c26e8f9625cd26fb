"""Scenario file loading, validation, and result writers.

Formats (all comma-separated, one header line, '.' decimal point):
  road.csv   from,to,capacity,length,free_flow_time
  rail.csv   from,to,capacity,length,free_flow_time,line
  od.csv     origin,destination,flow
  params     flat ``name = value`` text file (see params.py)

Outputs are byte-stable: floats are written with repr-stable %.12g and no
locale formatting.
"""

from __future__ import annotations

import csv
import dataclasses
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .network import RailNetwork, RoadNetwork
from .params import ParamSet, load_params


class ScenarioError(ValueError):
    """File-level problem; message carries file and line."""


@dataclass
class Scenario:
    road: RoadNetwork
    rail: RailNetwork
    od_pairs: list          # (origin, destination) node ids
    od_demand: np.ndarray   # pax/h
    params: ParamSet
    horizon_years: int = 15
    base_year: int = 2025

    def __post_init__(self):
        if self.horizon_years < 1:
            raise ScenarioError(f"horizon_years must be >= 1, got {self.horizon_years}")
        if np.any(self.od_demand < 0):
            raise ScenarioError("OD demand must be >= 0")
        road_nodes = {int(n) for n in self.road.node_ids}
        for (o, d) in self.od_pairs:
            if int(o) not in road_nodes or int(d) not in road_nodes:
                raise ScenarioError(f"OD pair {o}->{d} references a missing road node")


def _read_rows(path: Path, expected_header: list, caster):
    if not path.exists():
        raise ScenarioError(f"{path}: file not found")
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != expected_header:
            raise ScenarioError(f"{path}:1: expected header {','.join(expected_header)}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(expected_header):
                raise ScenarioError(f"{path}:{lineno}: expected {len(expected_header)} fields")
            try:
                rows.append(caster(row))
            except ValueError as exc:
                raise ScenarioError(f"{path}:{lineno}: {exc}") from None
    return rows


def load_road_network(path, params: ParamSet) -> RoadNetwork:
    path = Path(path)
    rows = _read_rows(path, ["from", "to", "capacity", "length", "free_flow_time"],
                      lambda r: (int(r[0]), int(r[1]), float(r[2]), float(r[3]), float(r[4])))
    for i, (u, v, cap, length, t0) in enumerate(rows, start=2):
        if cap <= 0:
            raise ScenarioError(f"{path}:{i}: capacity must be > 0, got {cap}")
        if length < 0 or t0 <= 0:
            raise ScenarioError(f"{path}:{i}: bad length/free_flow_time")
    nodes = np.unique([r[0] for r in rows] + [r[1] for r in rows])
    return RoadNetwork(
        node_ids=nodes,
        from_node=np.array([r[0] for r in rows]),
        to_node=np.array([r[1] for r in rows]),
        capacity=np.array([r[2] for r in rows]),
        length=np.array([r[3] for r in rows]),
        fftime=np.array([r[4] for r in rows]),
        alpha=params.bpr_alpha_road, beta=params.bpr_beta_road)


def load_rail_network(path, params: ParamSet) -> RailNetwork:
    path = Path(path)
    rows = _read_rows(
        path, ["from", "to", "capacity", "length", "free_flow_time", "line"],
        lambda r: (int(r[0]), int(r[1]), float(r[2]), float(r[3]), float(r[4]), int(r[5])))
    for i, row in enumerate(rows, start=2):
        if row[3] < 0 or row[4] <= 0:
            raise ScenarioError(f"{path}:{i}: bad length/free_flow_time")
    nodes = np.unique([r[0] for r in rows] + [r[1] for r in rows])
    return RailNetwork(
        node_ids=nodes,
        from_node=np.array([r[0] for r in rows]),
        to_node=np.array([r[1] for r in rows]),
        length=np.array([r[3] for r in rows]),
        fftime=np.array([r[4] for r in rows]),
        line=np.array([r[5] for r in rows]),
        alpha=params.bpr_alpha_rail, beta=params.bpr_beta_rail)


def load_od_matrix(path, road: RoadNetwork):
    path = Path(path)
    rows = _read_rows(path, ["origin", "destination", "flow"],
                      lambda r: (int(r[0]), int(r[1]), float(r[2])))
    road_nodes = {int(n) for n in road.node_ids}
    pairs, demand = [], []
    seen = set()
    for i, (o, d, flow) in enumerate(rows, start=2):
        if o not in road_nodes:
            raise ScenarioError(f"{path}:{i}: origin node {o} not in road network")
        if d not in road_nodes:
            raise ScenarioError(f"{path}:{i}: destination node {d} not in road network")
        if flow < 0:
            raise ScenarioError(f"{path}:{i}: negative demand {flow}")
        if (o, d) in seen:
            raise ScenarioError(f"{path}:{i}: duplicate OD pair {o}->{d}")
        seen.add((o, d))
        pairs.append((o, d))
        demand.append(flow)
    return pairs, np.array(demand)


def default_scenario_dir() -> Path:
    return Path(resources.files("savcast").joinpath("data"))


def load_scenario(scenario_dir=None, params_path=None, horizon_years: int = 15,
                  base_year: int = 2025) -> Scenario:
    """Load and validate a scenario bundle (road.csv, rail.csv, od.csv, params)."""
    base = Path(scenario_dir) if scenario_dir is not None else default_scenario_dir()
    params_file = Path(params_path) if params_path is not None else base / "default_params.txt"
    params = load_params(params_file, defaults=ParamSet())
    road = load_road_network(base / "road.csv", params)
    rail = load_rail_network(base / "rail.csv", params)
    od_pairs, od_demand = load_od_matrix(base / "od.csv", road)
    road.check_connected([o for o, _ in od_pairs] + [d for _, d in od_pairs])
    return Scenario(road=road, rail=rail, od_pairs=od_pairs, od_demand=od_demand,
                    params=params, horizon_years=horizon_years, base_year=base_year)


# ---------------------------------------------------------------------------
# output writers
# ---------------------------------------------------------------------------

@dataclass
class TrajectoryRecord:
    """One simulated year of aggregate results."""

    year: int
    u: float                 # veh/y applied
    s_s: float               # SAV fleet
    s_r: float               # rail fleet
    s_h: float               # HV fleet total
    s_h_thermal: float
    s_h_electric: float
    g_h: float               # pax/h totals
    g_s: float
    g_r: float
    t_a_mean: float          # min, demand-weighted car OD time
    t_r_mean: float          # min, demand-weighted rail OD time
    t_s_wait: float          # min, raw SAV wait
    t_r_ae: float            # min, rail access/egress
    f_r: float               # veh/h
    k_a_mean: float          # veh/h, mean link capacity
    k_r: float               # pax/h
    c_s: float               # €/y
    c_r: float               # €/y
    e: float                 # t/y
    xi: float                # t cumulative


TRAJECTORY_COLUMNS = [f.name for f in dataclasses.fields(TrajectoryRecord)]


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".12g")


def write_trajectory(records, path) -> None:
    """Write one row per simulated year; header + fixed column order."""
    if not records:
        raise ValueError("no trajectory records to write")
    path = Path(path)
    lines = [",".join(TRAJECTORY_COLUMNS)]
    for rec in records:
        lines.append(",".join(_fmt(getattr(rec, c)) for c in TRAJECTORY_COLUMNS))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_trajectory(path) -> list:
    """Round-trip reader for trajectory CSVs."""
    path = Path(path)
    records = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            kwargs = {c: float(row[c]) for c in TRAJECTORY_COLUMNS}
            kwargs["year"] = int(row["year"])
            records.append(TrajectoryRecord(**kwargs))
    return records


def write_plot_data(records, path) -> None:
    """Year series of the headline quantities (one column per panel)."""
    if not records:
        raise ValueError("no records to write")
    cols = ["year", "s_s", "g_h", "g_s", "g_r", "k_a_mean", "f_r", "e", "c_s", "c_r", "xi"]
    lines = [",".join(cols)]
    for rec in records:
        lines.append(",".join(_fmt(getattr(rec, c)) for c in cols))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_csv(path, header: list, rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(x) if not isinstance(x, str) else x for x in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
