"""Backcasting: optimal SAV introduction schedule under an emissions cap.

Minimise total operator cost (SAV + rail) over the horizon subject to
terminal cumulative emissions xi(T) <= cap and 0 <= u_t <= u_max.  The
solver is an augmented-Lagrangian outer loop on the scaled terminal
constraint with an inner projected gradient descent using forward finite
differences (1 vehicle step) and deterministic multi-starts.  Controls are
continuous during optimisation and rounded to integers afterwards with a
feasibility re-check.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .simulate import Runtime, forecast


class BackcastError(RuntimeError):
    pass


@dataclass
class BackcastProblem:
    runtime: Runtime
    cap: float                       # t CO2, bound on xi(T)
    u_max: float = 2000.0
    reference_policy: np.ndarray = None
    cap_tolerance: float = 5e-3      # relative slack allowed on the cap
    n_starts: int = 8
    seed: int = 0
    max_evals: int = 9000
    inner_iters: int = 30
    outer_iters: int = 6

    def __post_init__(self):
        horizon = self.runtime.scenario.horizon_years
        if self.reference_policy is None:
            self.reference_policy = np.full(horizon, 700.0)
        self.reference_policy = np.asarray(self.reference_policy, dtype=float)
        if len(self.reference_policy) != horizon:
            raise ValueError("reference policy length != horizon")
        if self.cap <= 0 or self.u_max <= 0:
            raise ValueError("cap and u_max must be > 0")


@dataclass
class BackcastSolution:
    policy: np.ndarray               # integer veh/y
    total_cost: float
    xi_T: float
    reference_cost: float
    reference_xi: float
    improvement: float               # fractional saving vs reference
    cap: float
    evaluations: int
    outer_iterations: int
    constraint_violation: float      # max(0, xi_T - cap) / cap


def evaluate_policy(policy, runtime: Runtime):
    """(total operator cost €, terminal cumulative emissions t) of a policy."""
    policy = np.asarray(policy, dtype=float)
    if np.any(policy < 0):
        raise ValueError("policy entries must be >= 0")
    _, summary = forecast(policy, runtime)
    return summary["total_cost"], summary["xi_T"]


class _Evaluator:
    """Deterministic cached policy evaluation with an eval budget."""

    def __init__(self, runtime: Runtime, max_evals: int):
        self.runtime = runtime
        self.max_evals = max_evals
        self.evals = 0
        self._cache = {}

    def __call__(self, policy: np.ndarray):
        key = np.round(policy, 6).tobytes()
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        if self.evals >= self.max_evals:
            raise _BudgetExhausted
        self.evals += 1
        out = evaluate_policy(policy, self.runtime)
        self._cache[key] = out
        return out


class _BudgetExhausted(Exception):
    pass


def _starts(problem: BackcastProblem) -> list:
    horizon = len(problem.reference_policy)
    ref = problem.reference_policy
    rng = np.random.default_rng(problem.seed)
    ramp = np.linspace(1.5, 0.3, horizon)
    starts = [
        ref.copy(),
        np.zeros(horizon),
        np.clip(ref * ramp, 0, problem.u_max),
        np.clip(ref * ramp[::-1], 0, problem.u_max),
    ]
    while len(starts) < problem.n_starts:
        starts.append(rng.uniform(0.0, 1.6, horizon) * np.maximum(ref, 100.0))
    return [np.clip(s, 0.0, problem.u_max) for s in starts[:problem.n_starts]]


def _descend(u0, phi, grad, u_max, iters, tol=1e-5):
    """Projected gradient descent with backtracking on phi."""
    u = u0.copy()
    f = phi(u)
    for _ in range(iters):
        g = grad(u)
        gnorm = float(np.max(np.abs(g)))
        if gnorm <= 0:
            break
        eta = 50.0 / gnorm
        improved = False
        cand, fc = u, f
        for _ in range(12):
            cand = np.clip(u - eta * g, 0.0, u_max)
            if np.max(np.abs(cand - u)) < 0.25:
                break
            fc = phi(cand)
            if fc < f - 1e-12:
                improved = True
                break
            eta *= 0.4
        if not improved:
            break
        gain = (f - fc) / max(abs(f), 1e-12)
        u, f = cand, fc
        if gain < tol:
            break
    return u, f


def solve_backcast(problem: BackcastProblem) -> BackcastSolution:
    """Augmented-Lagrangian search for the cheapest cap-feasible policy."""
    runtime = problem.runtime
    ev = _Evaluator(runtime, problem.max_evals)
    cost_ref, xi_ref = ev(problem.reference_policy)
    if xi_ref > problem.cap * (1.0 + problem.cap_tolerance):
        raise BackcastError(
            f"infeasible problem: reference emissions {xi_ref:.1f} t exceed "
            f"cap {problem.cap:.1f} t")

    def scaled(policy):
        cost, xi = ev(policy)
        return cost / cost_ref, (xi - problem.cap) / problem.cap

    def make_phi(lam, mu):
        def phi(u):
            j, g = scaled(u)
            return j + 0.5 * mu * max(0.0, lam / mu + g) ** 2 - lam ** 2 / (2.0 * mu)
        return phi

    def make_grad(phi):
        def grad(u):
            f0 = phi(u)
            g = np.zeros_like(u)
            h = 1.0
            for i in range(len(u)):
                up = u.copy()
                if up[i] + h <= problem.u_max:
                    up[i] += h
                    g[i] = (phi(up) - f0) / h
                else:
                    up[i] -= h
                    g[i] = (f0 - phi(up)) / h
            return g
        return grad

    best_u = problem.reference_policy.copy()
    best_cost, best_xi = cost_ref, xi_ref
    outer_done = 0
    try:
        for u_start in _starts(problem):
            u, lam, mu = u_start.copy(), 0.0, 50.0
            g_prev = np.inf
            for _ in range(problem.outer_iters):
                phi = make_phi(lam, mu)
                grad = make_grad(phi)
                u, _ = _descend(u, phi, grad, problem.u_max, problem.inner_iters)
                cost, xi = ev(u)
                g = (xi - problem.cap) / problem.cap
                # accept strictly inside the tolerance so integer rounding
                # cannot push the final policy over the cap
                if xi <= problem.cap * (1.0 + 0.6 * problem.cap_tolerance) \
                        and cost < best_cost:
                    best_u, best_cost, best_xi = u.copy(), cost, xi
                lam = max(0.0, lam + mu * g)
                if g > 0.25 * max(g_prev, problem.cap_tolerance):
                    mu = min(mu * 4.0, 1.0e6)
                g_prev = max(g, 0.0)
                outer_done += 1
    except _BudgetExhausted:
        pass

    policy = np.rint(best_u)
    cost, xi = evaluate_policy(policy, runtime)
    bumps = 0
    while xi > problem.cap * (1.0 + problem.cap_tolerance) and bumps < 200:
        room = np.where(policy < problem.u_max)[0]
        if len(room) == 0:
            break
        policy[room[0]] += 10.0
        cost, xi = evaluate_policy(policy, runtime)
        bumps += 1
    if xi > problem.cap * (1.0 + problem.cap_tolerance):
        raise BackcastError("no feasible iterate within budget")
    return BackcastSolution(
        policy=policy, total_cost=cost, xi_T=xi,
        reference_cost=cost_ref, reference_xi=xi_ref,
        improvement=(cost_ref - cost) / cost_ref, cap=problem.cap,
        evaluations=ev.evals, outer_iterations=outer_done,
        constraint_violation=max(0.0, xi - problem.cap) / problem.cap)


@dataclass
class ComparisonReport:
    delta_cost: float            # € (reference - solution)
    delta_cost_pct: float
    delta_xi: float              # t (solution - reference)
    years: list = field(default_factory=list)
    u_solution: list = field(default_factory=list)
    u_reference: list = field(default_factory=list)


def compare_to_reference(solution: BackcastSolution, reference_policy,
                         base_year: int) -> ComparisonReport:
    ref = np.asarray(reference_policy, dtype=float)
    horizon = len(ref)
    return ComparisonReport(
        delta_cost=solution.reference_cost - solution.total_cost,
        delta_cost_pct=100.0 * solution.improvement,
        delta_xi=solution.xi_T - solution.reference_xi,
        years=[base_year + t for t in range(horizon)],
        u_solution=[float(x) for x in solution.policy],
        u_reference=[float(x) for x in ref])
