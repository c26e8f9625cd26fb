"""Command-line interface: forecast, backcast, analyze, validate.

All outputs are plain CSV/text, byte-stable for identical inputs and seed.
Files are written only after the computation finishes, via temp-and-rename,
so failures leave no partial outputs.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from pathlib import Path

import numpy as np

from .backcast import BackcastProblem, compare_to_reference, evaluate_policy, \
    solve_backcast
from .flowgraph import analyze_state, simplified_response
from .io import Scenario, load_scenario, write_csv, write_plot_data, \
    write_trajectory, _fmt
from .simulate import build_runtime, forecast, initial_state, step_year


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--scenario", metavar="DIR", default=None,
                   help="scenario directory with road.csv, rail.csv, od.csv "
                        "(default: packaged Sioux Falls bundle)")
    p.add_argument("--params", metavar="FILE", default=None,
                   help="parameter file (default: scenario's default_params.txt)")
    p.add_argument("--years", type=int, default=15, metavar="N",
                   help="simulation horizon in years (default 15)")
    p.add_argument("--out", metavar="DIR", default=".",
                   help="output directory (default: current directory)")


def _add_policy(p: argparse.ArgumentParser):
    p.add_argument("--policy-const", type=float, default=700.0, metavar="N",
                   help="constant SAV additions in veh/y (default 700)")
    p.add_argument("--policy-csv", metavar="FILE", default=None,
                   help="policy CSV with header year,u (u in veh/y); "
                        "overrides --policy-const")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="savcast",
        description="Urban mobility simulator with SAV fleet policy design")
    sub = parser.add_subparsers(dest="command", required=True)

    p_fc = sub.add_parser("forecast", help="simulate a fixed yearly SAV policy")
    _add_common(p_fc)
    _add_policy(p_fc)

    p_bc = sub.add_parser("backcast",
                          help="optimise the SAV schedule under an emissions cap")
    _add_common(p_bc)
    _add_policy(p_bc)
    p_bc.add_argument("--cap", type=float, default=None, metavar="T",
                      help="cumulative CO2 cap in tonnes (default: the "
                           "reference policy's own terminal emissions)")
    p_bc.add_argument("--umax", type=float, default=2000.0, metavar="N",
                      help="upper bound on yearly SAV additions in veh/y "
                           "(default 2000)")
    p_bc.add_argument("--seed", type=int, default=0, metavar="N",
                      help="seed for the deterministic multi-starts (default 0)")
    p_bc.add_argument("--budget", type=int, default=9000, metavar="N",
                      help="max policy evaluations (default 9000)")

    p_an = sub.add_parser("analyze",
                          help="loop/path census, gains and Mason transfer per year")
    _add_common(p_an)
    _add_policy(p_an)
    p_an.add_argument("--year", type=int, default=None, metavar="N",
                      help="analyse one simulated year (1-based; default: all "
                           "years with a non-empty fleet)")

    p_va = sub.add_parser("validate", help="check scenario files and echo parameters")
    _add_common(p_va)
    return parser


def _load(args) -> Scenario:
    return load_scenario(args.scenario, args.params, horizon_years=args.years)


def _policy(args, horizon: int) -> np.ndarray:
    if getattr(args, "policy_csv", None):
        rows = Path(args.policy_csv).read_text(encoding="utf-8").strip().splitlines()
        if not rows or rows[0].strip() != "year,u":
            raise ValueError(f"{args.policy_csv}:1: expected header year,u")
        values = []
        for lineno, row in enumerate(rows[1:], start=2):
            parts = row.split(",")
            if len(parts) != 2:
                raise ValueError(f"{args.policy_csv}:{lineno}: expected 2 fields")
            values.append(float(parts[1]))
        if len(values) != horizon:
            raise ValueError(
                f"policy has {len(values)} years, horizon is {horizon}")
        return np.array(values)
    return np.full(horizon, float(args.policy_const))


def _write_atomic(path: Path, writer) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    writer(tmp)
    os.replace(tmp, path)


def cmd_forecast(args) -> int:
    scenario = _load(args)
    runtime = build_runtime(scenario)
    policy = _policy(args, scenario.horizon_years)
    records, summary = forecast(policy, runtime)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_atomic(out / "trajectory.csv", lambda p: write_trajectory(records, p))
    _write_atomic(out / "plotdata.csv", lambda p: write_plot_data(records, p))
    print(f"forecast: {len(records)} years, total operator cost "
          f"{summary['total_cost']:.4g} €, cumulative emissions "
          f"{summary['xi_T']:.4g} t")
    return 0


def cmd_backcast(args) -> int:
    scenario = _load(args)
    runtime = build_runtime(scenario)
    reference = _policy(args, scenario.horizon_years)
    if args.cap is None:
        _, cap = evaluate_policy(reference, runtime)
    else:
        cap = args.cap
    problem = BackcastProblem(runtime=runtime, cap=cap, u_max=args.umax,
                              reference_policy=reference, seed=args.seed,
                              max_evals=args.budget)
    solution = solve_backcast(problem)
    report = compare_to_reference(solution, reference, scenario.base_year)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_atomic(out / "solution.csv", lambda p: write_csv(
        p, ["year", "u"],
        [(y, u) for y, u in zip(report.years, report.u_solution)]))
    _write_atomic(out / "comparison.csv", lambda p: write_csv(
        p, ["year", "u_solution", "u_reference"],
        list(zip(report.years, report.u_solution, report.u_reference))))
    lines = [
        "backcast comparison",
        f"cap (t): {_fmt(solution.cap)}",
        f"reference cost (€): {_fmt(solution.reference_cost)}",
        f"solution cost (€): {_fmt(solution.total_cost)}",
        f"saving (€): {_fmt(report.delta_cost)}",
        f"saving (%): {_fmt(report.delta_cost_pct)}",
        f"reference xi(T) (t): {_fmt(solution.reference_xi)}",
        f"solution xi(T) (t): {_fmt(solution.xi_T)}",
        f"delta xi (t): {_fmt(report.delta_xi)}",
        f"policy evaluations: {solution.evaluations}",
    ]
    _write_atomic(out / "comparison.txt",
                  lambda p: p.write_text("\n".join(lines) + "\n", encoding="utf-8"))
    print(f"backcast: cost {solution.total_cost:.4g} € "
          f"({report.delta_cost_pct:.1f}% below reference), "
          f"xi(T) {solution.xi_T:.4g} t (cap {cap:.4g} t)")
    return 0


def cmd_analyze(args) -> int:
    scenario = _load(args)
    runtime = build_runtime(scenario)
    policy = _policy(args, scenario.horizon_years)
    state = initial_state(runtime)
    states = []
    for u_t in policy:
        state, _ = step_year(state, float(u_t), runtime)
        states.append(state)
    if args.year is not None:
        if not (1 <= args.year <= len(states)):
            raise ValueError(f"--year must be in 1..{len(states)}")
        picked = [args.year]
    else:
        picked = [y for y in range(1, len(states) + 1)
                  if states[y - 1].sav.size > 0]
    if not picked:
        raise ValueError("no year with a non-empty SAV fleet to analyse")

    gain_rows, loop_rows, path_rows, text = [], [], [], ["flow-graph analysis"]
    for y in picked:
        st = states[y - 1]
        res = analyze_state(st, runtime)
        gains, tr, cond = res["gains"], res["transfer"], res["condition"]
        response = simplified_response(res["model"])
        year_label = scenario.base_year + y - 1
        g = gains.as_dict()
        gain_rows.append([year_label] + [g[f"k{i}"] for i in
                                         (1, 2, 3, 4, 5, 6, 7, 8, 9, 11, 12)]
                         + [tr.transfer, cond.margin, int(cond.flag)])
        for c in tr.loops:
            loop_rows.append([year_label, c.name, "->".join(c.nodes),
                              "*".join(c.labels), c.gain])
        for p in tr.paths:
            path_rows.append([year_label, p.name, "->".join(p.nodes),
                              "*".join(p.labels), p.gain])
        text += [
            f"year {year_label}: fleet {st.sav.size:.0f} veh",
            f"  transfer T = {_fmt(tr.transfer)} t/y per veh "
            f"(direct solve {_fmt(response)})",
            f"  loops: {len(tr.loops)} "
            f"({sum(1 for c in tr.loops if c.gain > 0)} reinforcing, "
            f"{sum(1 for c in tr.loops if c.gain < 0)} balancing)",
            f"  paths: {len(tr.paths)}",
            f"  undesired-effect flag: {cond.flag} "
            f"(margin k6*k7 - k4 = {_fmt(cond.margin)})",
        ]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    header = ["year"] + [f"k{i}" for i in (1, 2, 3, 4, 5, 6, 7, 8, 9, 11, 12)] \
        + ["transfer", "margin", "flag"]
    _write_atomic(out / "gains.csv", lambda p: write_csv(p, header, gain_rows))
    _write_atomic(out / "loops.csv", lambda p: write_csv(
        p, ["year", "name", "nodes", "labels", "gain"], loop_rows))
    _write_atomic(out / "paths.csv", lambda p: write_csv(
        p, ["year", "name", "nodes", "labels", "gain"], path_rows))
    _write_atomic(out / "analysis.txt",
                  lambda p: p.write_text("\n".join(text) + "\n", encoding="utf-8"))
    print(f"analyze: {len(picked)} year(s) written to {out}")
    return 0


def cmd_validate(args) -> int:
    scenario = _load(args)
    road, rail = scenario.road, scenario.rail
    print(f"road network: {road.n_links} links, {road.n_nodes} nodes")
    print(f"rail network: {rail.n_links} links, {len(rail.line_ids)} lines, "
          f"{rail.n_nodes} nodes")
    print(f"OD pairs: {len(scenario.od_pairs)}, total demand "
          f"{scenario.od_demand.sum():.6g} pax/h")
    print(f"horizon: {scenario.horizon_years} years from {scenario.base_year}")
    print("parameters:")
    for f in dataclasses.fields(scenario.params):
        value = getattr(scenario.params, f.name)
        if isinstance(value, list):
            value = ",".join(_fmt(v) for v in value)
        print(f"  {f.name} = {value}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {"forecast": cmd_forecast, "backcast": cmd_backcast,
                "analyze": cmd_analyze, "validate": cmd_validate}
    try:
        return handlers[args.command](args)
    except (Exception) as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
