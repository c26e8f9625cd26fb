"""Hot numeric kernels: within-year equilibrium loop and queueing solver.

Every function here is written in njit-compatible numpy and compiled with
numba by default.  Setting the environment variable ``SAVCAST_NO_NUMBA=1``
(before import) selects the identical pure-numpy path instead; results agree
up to floating-point rounding.  ``benchmarks/bench_kernels.py`` compares the
two backends.
"""

from __future__ import annotations

import math
import os

import numpy as np

_FLAG = os.environ.get("SAVCAST_NO_NUMBA", "").strip().lower()
NUMBA_DISABLED = _FLAG in ("1", "true", "yes", "on")

if not NUMBA_DISABLED:
    try:
        from numba import njit
        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        NUMBA_ENABLED = False
else:
    NUMBA_ENABLED = False

if not NUMBA_ENABLED:
    def njit(*args, **kwargs):  # noqa: D103 - no-op stand-in for numba.njit
        if args and callable(args[0]):
            return args[0]

        def wrap(fn):
            return fn

        return wrap


def backend_name() -> str:
    return "numba" if NUMBA_ENABLED else "numpy"


def python_impl(fn):
    """Return the uncompiled python implementation of a kernel."""
    return getattr(fn, "py_func", fn)


# ---------------------------------------------------------------------------
# finite-population M/M/s queue (machine-repair form)
# ---------------------------------------------------------------------------

@njit(cache=True)
def finite_population_wait_hours(n_pop, servers, request_rate, mu):
    """Mean queueing wait W_q (hours) of the N-customer, s-server birth-death chain.

    Arrival rate in state n is ``request_rate * (N - n)``, service rate
    ``mu * min(n, s)``.  ``servers`` may be fractional (continuous relaxation,
    coincides with the classic M/M/s finite-population model at integers).
    State probabilities are accumulated in log space for large N.
    """
    if n_pop <= 0:
        return 0.0
    if servers >= n_pop:
        return 0.0
    logp = np.empty(n_pop + 1)
    logp[0] = 0.0
    for n in range(1, n_pop + 1):
        lam_prev = request_rate * (n_pop - (n - 1))
        mu_n = mu * min(float(n), servers)
        logp[n] = logp[n - 1] + math.log(lam_prev / mu_n)
    m = logp[0]
    for n in range(1, n_pop + 1):
        if logp[n] > m:
            m = logp[n]
    z = 0.0
    for n in range(n_pop + 1):
        z += math.exp(logp[n] - m)
    l_q = 0.0
    lam_eff = 0.0
    for n in range(n_pop + 1):
        p = math.exp(logp[n] - m) / z
        if n > servers:
            l_q += (n - servers) * p
        lam_eff += request_rate * (n_pop - n) * p
    if lam_eff <= 0.0:
        return 1.0e12
    return l_q / lam_eff


@njit(cache=True)
def sav_wait_minutes(demand_pax_h, servers, trip_minutes, population_factor,
                     request_rate, wait_cap):
    """SAV waiting time (min) for a given demand level and fleet size.

    The queue population is ``demand * trip_hours * population_factor``;
    fractional populations are linearly interpolated between the two
    neighbouring integer-N solutions so the wait varies continuously with
    demand.  The wait is capped at ``wait_cap`` (empty or saturated fleet).
    """
    if demand_pax_h <= 0.0:
        return 0.0
    if servers <= 0.0:
        return wait_cap
    if trip_minutes <= 0.0:
        return 0.0
    mu = 60.0 / trip_minutes
    n_real = demand_pax_h * (trip_minutes / 60.0) * population_factor
    n_lo = int(math.floor(n_real))
    frac = n_real - n_lo
    w_lo = finite_population_wait_hours(n_lo, servers, request_rate, mu)
    w_hi = finite_population_wait_hours(n_lo + 1, servers, request_rate, mu)
    w_hours = (1.0 - frac) * w_lo + frac * w_hi
    w_min = 60.0 * w_hours
    if w_min > wait_cap:
        return wait_cap
    return w_min


# ---------------------------------------------------------------------------
# utilisation-dependent SAV cost scaling (Cobb-Douglas with clamps)
# ---------------------------------------------------------------------------

@njit(cache=True)
def cost_scale_factor(utilisation, elasticity, util_floor, ceiling_factor, min_frac):
    u = utilisation
    if u < util_floor:
        u = util_floor
    f = u ** (-elasticity)
    if f > ceiling_factor:
        f = ceiling_factor
    if f < min_frac:
        f = min_frac
    return f


# ---------------------------------------------------------------------------
# headway-based mixed road capacity
# ---------------------------------------------------------------------------

@njit(cache=True)
def mixed_capacity_value(q_s, q_h, k0, h_hh, h_sh, h_ss):
    total = q_s + q_h
    if total <= 0.0:
        x = 0.0
    else:
        x = q_s / total
    h_bar = (1.0 - x) * h_hh + x * ((1.0 - x) * h_sh + x * h_ss)
    return k0 * h_hh / h_bar


@njit(cache=True)
def mixed_capacity_links(q_s, q_h, k0, h_hh, h_sh, h_ss):
    out = np.empty_like(k0)
    for i in range(k0.shape[0]):
        out[i] = mixed_capacity_value(q_s[i], q_h[i], k0[i], h_hh, h_sh, h_ss)
    return out


# ---------------------------------------------------------------------------
# affine link travel times with capacity rescaling
# ---------------------------------------------------------------------------

@njit(cache=True)
def affine_link_times(q, t0, t_ref, dqdt, q_ref, k_ref, k_now, beta):
    """Link times linearized at (q_ref, k_ref); congestion part rescaled by
    the exact BPR capacity dependence (k_ref/k_now)^beta and floored at zero
    so times stay monotone in demand and capacity."""
    out = np.empty_like(q)
    for i in range(q.shape[0]):
        cong = t_ref[i] - t0[i] + dqdt[i] * (q[i] - q_ref[i])
        if cong < 0.0:
            cong = 0.0
        scale = (k_ref[i] / k_now[i]) ** beta
        out[i] = t0[i] + cong * scale
    return out


# ---------------------------------------------------------------------------
# nested logit demand split
# ---------------------------------------------------------------------------

@njit(cache=True)
def nested_probs(u_h, u_s, u_r, lam, has_h, has_r):
    """Mode probabilities (p_H, p_S, p_R) for one OD and one segment.

    SAV is always available; HV and rail availability vary by segment and OD.
    HV and SAV share the auto nest with scale ``lam``.
    """
    if has_h:
        m = u_h if u_h > u_s else u_s
        eh = math.exp((u_h - m) / lam)
        es = math.exp((u_s - m) / lam)
        p_h_nest = eh / (eh + es)
        v_auto = m + lam * math.log(eh + es)
    else:
        p_h_nest = 0.0
        v_auto = u_s
    if has_r:
        mm = v_auto if v_auto > u_r else u_r
        ea = math.exp(v_auto - mm)
        er = math.exp(u_r - mm)
        p_auto = ea / (ea + er)
    else:
        p_auto = 1.0
    return p_auto * p_h_nest, p_auto * (1.0 - p_h_nest), 1.0 - p_auto


@njit(cache=True)
def split_od_demand(g_total, u_h, u_s, u_r, rail_ok, lam, seg_shares):
    """Allocate per-OD demand over segments and modes.

    Segments: 0 choice {H,S,R}, 1 HV-captive {H,S}, 2 rail-captive {R,S},
    3 SAV-captive {S}.  Rail drops out of every set where ``rail_ok`` is 0.
    Returns (g_h, g_s, g_r) arrays.
    """
    n = g_total.shape[0]
    g_h = np.zeros(n)
    g_s = np.zeros(n)
    g_r = np.zeros(n)
    for i in range(n):
        ok = rail_ok[i] != 0
        for seg in range(4):
            share = seg_shares[seg]
            if share <= 0.0:
                continue
            has_h = seg == 0 or seg == 1
            has_r = ok and (seg == 0 or seg == 2)
            ph, ps, pr = nested_probs(u_h[i], u_s[i], u_r[i], lam, has_h, has_r)
            w = share * g_total[i]
            g_h[i] += w * ph
            g_s[i] += w * ps
            g_r[i] += w * pr
    return g_h, g_s, g_r


@njit(cache=True)
def mode_utilities(t_car, t_rail, dist_car, dist_rail, rail_ok,
                   w_time, vot, asc_h, asc_s, asc_r,
                   c_h_op, c_h_ae, t_h_ae,
                   c_r_op, c_r_ae, t_r_ae,
                   sav_cost_op, sav_cost_ae, sav_wait):
    """Per-OD utilities for HV, SAV, rail from times (min) and costs (€)."""
    n = t_car.shape[0]
    u_h = np.empty(n)
    u_s = np.empty(n)
    u_r = np.empty(n)
    for i in range(n):
        u_h[i] = asc_h - w_time * (t_car[i] + t_h_ae
                                   + vot * (c_h_op * dist_car[i] + c_h_ae))
        u_s[i] = asc_s - w_time * (t_car[i] + sav_wait
                                   + vot * (sav_cost_op * dist_car[i] + sav_cost_ae))
        if rail_ok[i] != 0:
            u_r[i] = asc_r - w_time * (t_rail[i] + t_r_ae
                                       + vot * (c_r_op * dist_rail[i] + c_r_ae))
        else:
            u_r[i] = -1.0e30
    return u_h, u_s, u_r


# ---------------------------------------------------------------------------
# within-year quasi-static equilibrium
# ---------------------------------------------------------------------------

@njit(cache=True)
def year_equilibrium(
    # demand and OD geometry
    g_total, dist_car, dist_rail, rail_ok,
    # road affine travel-time model
    car_inc, car_agg, car_q_ref, car_t0, car_t_ref, car_dqdt,
    car_k_ref, car_k0, car_beta,
    # headways
    h_hh, h_sh, h_ss,
    # rail affine travel-time model (uniform current capacity)
    rail_inc, rail_agg, rail_q_ref, rail_t0, rail_t_ref, rail_dqdt,
    rail_k_ref, rail_beta, rail_k_now,
    # utility parameters
    w_time, vot, asc_h, asc_s, asc_r, lam_nest, seg_shares,
    c_h_op, c_h_ae, t_h_ae, c_r_op, c_r_ae, t_r_ae,
    # perceived SAV service (fixed within the year)
    sav_cost_op, sav_cost_ae, sav_wait,
    # iteration controls
    damping, tol, max_iter,
    g_init,
):
    """Damped fixed point of [mode choice -> link flows -> capacity -> times].

    ``g_init`` is a (3, n_od) warm start (rows H, S, R).  Returns the
    converged split, per-link road capacities, car and rail OD times, the
    iteration count, and the final residual.
    """
    n_od = g_total.shape[0]
    split = g_init.copy()
    k_a = car_k0.copy()
    t_car = np.zeros(n_od)
    t_rail = np.zeros(n_od)
    k_rail = np.full(rail_k_ref.shape[0], rail_k_now)
    residual = 1.0e30
    it = 0
    while it < max_iter:
        it += 1
        q_h = car_inc @ split[0]
        q_s = car_inc @ split[1]
        k_a = mixed_capacity_links(q_s, q_h, car_k0, h_hh, h_sh, h_ss)
        q_car = q_h + q_s
        tau = affine_link_times(q_car, car_t0, car_t_ref, car_dqdt,
                                car_q_ref, car_k_ref, k_a, car_beta)
        t_car = car_agg @ tau
        q_r = rail_inc @ split[2]
        tau_r = affine_link_times(q_r, rail_t0, rail_t_ref, rail_dqdt,
                                  rail_q_ref, rail_k_ref, k_rail, rail_beta)
        t_rail = rail_agg @ tau_r
        u_h, u_s, u_r = mode_utilities(
            t_car, t_rail, dist_car, dist_rail, rail_ok,
            w_time, vot, asc_h, asc_s, asc_r,
            c_h_op, c_h_ae, t_h_ae, c_r_op, c_r_ae, t_r_ae,
            sav_cost_op, sav_cost_ae, sav_wait)
        g_h, g_s, g_r = split_od_demand(g_total, u_h, u_s, u_r,
                                        rail_ok, lam_nest, seg_shares)
        residual = 0.0
        for i in range(n_od):
            new_h = (1.0 - damping) * split[0, i] + damping * g_h[i]
            new_s = (1.0 - damping) * split[1, i] + damping * g_s[i]
            new_r = (1.0 - damping) * split[2, i] + damping * g_r[i]
            rel = abs(new_h - split[0, i]) / (abs(split[0, i]) + 1.0e-6)
            if rel > residual:
                residual = rel
            rel = abs(new_s - split[1, i]) / (abs(split[1, i]) + 1.0e-6)
            if rel > residual:
                residual = rel
            rel = abs(new_r - split[2, i]) / (abs(split[2, i]) + 1.0e-6)
            if rel > residual:
                residual = rel
            split[0, i] = new_h
            split[1, i] = new_s
            split[2, i] = new_r
        if residual <= tol:
            break
    return split, k_a, t_car, t_rail, it, residual
