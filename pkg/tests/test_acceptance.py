"""Acceptance criteria. Each test prints one PASS/FAIL line with its metric."""

import time

import numpy as np
import pytest
from scipy.sparse.csgraph import dijkstra

from savcast.backcast import BackcastProblem, evaluate_policy, solve_backcast
from savcast.cli import main
from savcast.flowgraph import GainSet, build_simplified_model, canonical_graph, \
    enumerate_loops, enumerate_paths, linearize_model, mason_transfer, \
    closed_form_transfer, simplified_response, undesired_effect_check
from savcast.kernels import finite_population_wait_hours
from savcast.network import bpr_time, od_travel_times, solve_user_equilibrium
from savcast.simulate import forecast, initial_state, step_year

from test_service import ctmc_wait_hours


def _report(num, ok, detail):
    print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {num}: {detail}")
    assert ok, f"criterion {num}: {detail}"


def _random_gains(rng):
    vals = {f"k{i}": float(rng.uniform(0.05, 1.5))
            for i in (1, 2, 3, 4, 5, 6, 7, 8, 9, 11, 12)}
    return GainSet(**vals)


@pytest.fixture(scope="module")
def year8(runtime):
    st = initial_state(runtime)
    for _ in range(8):
        st, _ = step_year(st, 700.0, runtime)
    return st


def test_criterion_1_mason_identity(rng):
    rng_local = np.random.default_rng(7)
    gains_list = [_random_gains(rng_local) for _ in range(1000)]
    mason_transfer(canonical_graph(gains_list[0]), "sav_stock", "emissions")
    t0 = time.perf_counter()
    worst = 0.0
    for gains in gains_list:
        res = mason_transfer(canonical_graph(gains), "sav_stock", "emissions")
        worst = max(worst, abs(res.transfer - closed_form_transfer(gains)))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-12 and elapsed < 1.0
    _report(1, ok, f"1000 gain sets, max |generic - closed form| = {worst:.2e}, "
                   f"runtime {elapsed:.3f} s (< 1 s)")


def test_criterion_2_loop_path_census(rng):
    gains = _random_gains(np.random.default_rng(11))
    graph = canonical_graph(gains)
    loops = enumerate_loops(graph)
    paths = enumerate_paths(graph, "sav_stock", "emissions")
    mags = gains.as_dict()

    def prod(labels):
        return float(np.prod([mags[l] for l in labels]))

    expected_loops = {
        "L1": -prod(("k2", "k3")), "L2": -prod(("k2", "k4", "k8")),
        "L3": +prod(("k2", "k6", "k7", "k8")), "L4": +prod(("k11", "k4", "k8")),
        "L5": -prod(("k11", "k4", "k5", "k3")), "L6": -prod(("k4", "k5")),
        "L7": +prod(("k6", "k7", "k5")), "L8": -prod(("k9", "k4")),
    }
    expected_paths = {
        "P1": -prod(("k1", "k11", "k12")),
        "P2": -prod(("k1", "k2", "k4", "k9", "k12")),
        "P3": +prod(("k1", "k2", "k6", "k7", "k9", "k12")),
    }
    got_loops = {c.name: c.gain for c in loops}
    got_paths = {p.name: p.gain for p in paths}
    reinforcing = {c.name for c in loops if c.gain > 0}
    ok = (
        len(loops) == 8 and len(paths) == 3
        and reinforcing == {"L3", "L4", "L7"}
        and all(got_loops[n] == pytest.approx(v, rel=1e-12)
                for n, v in expected_loops.items())
        and all(got_paths[n] == pytest.approx(v, rel=1e-12)
                for n, v in expected_paths.items())
        and got_paths["P1"] < 0 and got_paths["P2"] < 0 and got_paths["P3"] > 0
    )
    _report(2, ok, f"8 loops (3 reinforcing: {sorted(reinforcing)}), 3 paths, "
                   f"gain products exact")


def test_criterion_3_linearization_consistency(runtime, year8):
    model = build_simplified_model(year8, runtime)
    gains = linearize_model(model)
    transfer = mason_transfer(canonical_graph(gains), "sav_stock",
                              "emissions").transfer
    direct = simplified_response(model, rel=0.01)
    rel_err = abs(transfer - direct) / abs(direct)
    ok = rel_err < 0.05
    _report(3, ok, f"Mason T = {transfer:.5g} vs +1% stock response "
                   f"{direct:.5g} t/y per veh, rel err {100 * rel_err:.3f}% (< 5%)")


def test_criterion_4_queueing_oracle():
    rng = np.random.default_rng(23)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(50):
        s = int(rng.integers(1, 15))
        n = int(rng.integers(s + 1, 60))
        lam = float(rng.uniform(0.05, 2.5))
        mu = float(rng.uniform(0.3, 5.0))
        got = finite_population_wait_hours(n, float(s), lam, mu)
        want = ctmc_wait_hours(s, n, lam, mu)
        worst = max(worst, abs(got - want))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-8 and elapsed < 5.0
    _report(4, ok, f"50 random (s, N, rates): max |W - CTMC| = {worst:.2e} h, "
                   f"runtime {elapsed:.2f} s (< 5 s)")


def _relative_gap(net, od_pairs, demands, flows):
    times = bpr_time(flows, net.capacity, net.fftime, net.alpha, net.beta)
    mat, order = net.csr_template()
    mat = mat.copy()
    mat.data = times[order]
    origins = np.unique([net.node_index(o) for o, _ in od_pairs])
    row_of = {int(o): r for r, o in enumerate(origins)}
    dist = dijkstra(mat, directed=True, indices=origins)
    sptt = sum(d * dist[row_of[net.node_index(o)], net.node_index(dd)]
               for (o, dd), d in zip(od_pairs, demands))
    tstt = float(flows @ times)
    return (tstt - sptt) / tstt


def test_criterion_5_wardrop_and_affine(scenario, runtime, rng):
    demand = runtime.base_split[0] + runtime.base_split[1]
    ps, flows = solve_user_equilibrium(scenario.road, scenario.od_pairs, demand,
                                       gap_tol=1e-4)
    gap = _relative_gap(scenario.road, scenario.od_pairs, demand, flows)

    model = runtime.car_model
    base_err = np.max(np.abs(
        od_travel_times(model, _base_demand(runtime), scenario.road.capacity)
        - model.t_od_ref))
    inc = model.inc
    worst = 0.0
    for _ in range(20):
        pert = _base_demand(runtime) * (1 + rng.uniform(-0.1, 0.1,
                                                        len(model.od_pairs)))
        t_aff = od_travel_times(model, pert, scenario.road.capacity)
        t_full = model.agg @ bpr_time(inc @ pert, scenario.road.capacity,
                                      scenario.road.fftime, scenario.road.alpha,
                                      scenario.road.beta)
        worst = max(worst, float(np.max(np.abs(t_aff - t_full) / t_full)))
    ok = gap <= 1e-4 and base_err <= 1e-9 and worst <= 0.01
    _report(5, ok, f"relative gap {gap:.2e} (<= 1e-4), base-point error "
                   f"{base_err:.2e} min (<= 1e-9), affine vs BPR error "
                   f"{100 * worst:.3f}% over +/-10% demand (<= 1%)")


def _base_demand(runtime):
    return runtime.base_split[0] + runtime.base_split[1]


def test_criterion_6_forecast_qualitative(runtime):
    t0 = time.perf_counter()
    policy = np.full(15, 700.0)
    recs, summary = forecast(policy, runtime)
    recs0, summary0 = forecast(np.zeros(15), runtime)
    elapsed = time.perf_counter() - t0
    g_s = np.array([r.g_s for r in recs])
    g_r = np.array([r.g_r for r in recs])
    f_r = np.array([r.f_r for r in recs])
    k_a = np.array([r.k_a_mean for r in recs])
    reduction = (summary0["xi_T"] - summary["xi_T"]) / summary0["xi_T"]
    checks = {
        "SAV demand strictly increasing": bool(np.all(np.diff(g_s) > 0)),
        "rail demand weakly decreasing": bool(np.all(np.diff(g_r) <= 1e-9)),
        "rail frequency weakly decreasing": bool(np.all(np.diff(f_r) <= 1e-9)),
        "mean road capacity weakly increasing": bool(np.all(np.diff(k_a) >= -1e-9)),
        "cumulative reduction in [4%, 12%]": bool(0.04 <= reduction <= 0.12),
        "runtime < 30 s": elapsed < 30.0,
    }
    ok = all(checks.values())
    _report(6, ok, f"reduction {100 * reduction:.2f}% vs no-SAV run, "
                   f"runtime {elapsed:.1f} s; " +
                   "; ".join(f"{k}: {'yes' if v else 'NO'}"
                             for k, v in checks.items()))


def test_criterion_7_backcast_improvement(runtime):
    t0 = time.perf_counter()
    reference = np.full(15, 700.0)
    cost_ref, xi_ref = evaluate_policy(reference, runtime)
    problem = BackcastProblem(runtime=runtime, cap=xi_ref,
                              reference_policy=reference, seed=0,
                              max_evals=6000)
    sol = solve_backcast(problem)
    elapsed = time.perf_counter() - t0
    saving = sol.improvement
    within_cap = sol.xi_T <= xi_ref * 1.005
    ok = within_cap and saving >= 0.05 and elapsed < 600.0
    _report(7, ok, f"cost {sol.total_cost / 1e9:.4f} G€ vs reference "
                   f"{cost_ref / 1e9:.4f} G€ ({100 * saving:.2f}% saving, >= 5%), "
                   f"xi(T) {sol.xi_T:.0f} t vs cap {xi_ref:.0f} t "
                   f"(violation {100 * sol.constraint_violation:.3f}% <= 0.5%), "
                   f"runtime {elapsed:.0f} s (< 600 s)")


def test_criterion_8_undesired_effect(runtime, year8):
    constructed = GainSet(k1=1.0, k2=1.0, k3=0.05, k4=0.1, k5=1.0, k6=1.0,
                          k7=1.0, k8=0.05, k9=1.0, k11=0.1, k12=1.0)
    cond = undesired_effect_check(constructed)
    transfer = mason_transfer(canonical_graph(constructed), "sav_stock",
                              "emissions").transfer
    gains = linearize_model(build_simplified_model(year8, runtime))
    cond_sf = undesired_effect_check(gains)
    ok = (cond.flag and cond.necessary and transfer > 0
          and not cond_sf.flag)
    _report(8, ok, f"constructed set: flag {cond.flag}, margin "
                   f"{cond.margin:.3f} > 0, Mason T = {transfer:.4f} > 0; "
                   f"default scenario year 8: flag {cond_sf.flag} "
                   f"(margin {cond_sf.margin:.2e})")


def test_criterion_9_determinism(tmp_path):
    outs = []
    for run in ("a", "b"):
        out = tmp_path / run
        assert main(["forecast", "--policy-const", "700", "--years", "15",
                     "--out", str(out / "fc")]) == 0
        assert main(["analyze", "--policy-const", "700", "--years", "8",
                     "--year", "8", "--out", str(out / "an")]) == 0
        assert main(["backcast", "--policy-const", "700", "--years", "5",
                     "--seed", "1", "--budget", "300",
                     "--out", str(out / "bc")]) == 0
        outs.append(out)
    files = ["fc/trajectory.csv", "fc/plotdata.csv", "an/gains.csv",
             "an/loops.csv", "an/paths.csv", "an/analysis.txt",
             "bc/solution.csv", "bc/comparison.csv", "bc/comparison.txt"]
    diffs = [f for f in files
             if (outs[0] / f).read_bytes() != (outs[1] / f).read_bytes()]
    ok = not diffs
    _report(9, ok, f"byte-identical outputs across reruns for {len(files)} "
                   f"files" + (f"; differing: {diffs}" if diffs else ""))
