"""Backend equivalence: compiled kernels vs their pure-python/numpy twins."""

import numpy as np
import pytest

from savcast import kernels


def test_backend_reported():
    assert kernels.backend_name() in ("numba", "numpy")


def test_queue_backends_agree(rng):
    py = kernels.python_impl(kernels.finite_population_wait_hours)
    for _ in range(20):
        n = int(rng.integers(1, 200))
        s = float(rng.uniform(0.5, 50))
        lam = float(rng.uniform(0.1, 3))
        mu = float(rng.uniform(0.5, 5))
        a = kernels.finite_population_wait_hours(n, s, lam, mu)
        b = py(n, s, lam, mu)
        assert a == pytest.approx(b, rel=1e-12, abs=1e-15)


def test_wait_wrapper_backends_agree(rng):
    py = kernels.python_impl(kernels.sav_wait_minutes)
    for _ in range(20):
        args = (float(rng.uniform(0, 8000)), float(rng.uniform(0, 3000)),
                float(rng.uniform(5, 40)), 2.0, 4.0, 60.0)
        assert kernels.sav_wait_minutes(*args) == pytest.approx(
            py(*args), rel=1e-12)


def test_split_backends_agree(rng):
    py = kernels.python_impl(kernels.split_od_demand)
    n = 30
    g = rng.uniform(0, 2000, n)
    uh, us, ur = (rng.normal(0, 2, n) for _ in range(3))
    ok = (rng.uniform(size=n) < 0.7).astype(np.uint8)
    seg = np.array([0.66, 0.0, 0.34, 0.0])
    a = kernels.split_od_demand(g, uh, us, ur, ok, 0.5, seg)
    b = py(g, uh, us, ur, ok, 0.5, seg)
    for x, y in zip(a, b):
        assert np.allclose(x, y, rtol=1e-12, atol=1e-12)


def test_capacity_backends_agree(rng):
    py = kernels.python_impl(kernels.mixed_capacity_links)
    qs = rng.uniform(0, 3000, 40)
    qh = rng.uniform(0, 3000, 40)
    k0 = rng.uniform(500, 20000, 40)
    a = kernels.mixed_capacity_links(qs, qh, k0, 1.8, 1.4, 0.9)
    b = py(qs, qh, k0, 1.8, 1.4, 0.9)
    assert np.allclose(a, b, rtol=1e-12)


def test_affine_times_backends_agree(rng):
    py = kernels.python_impl(kernels.affine_link_times)
    n = 25
    q = rng.uniform(0, 4000, n)
    t0 = rng.uniform(1, 10, n)
    q_ref = rng.uniform(0, 4000, n)
    k_ref = rng.uniform(1000, 20000, n)
    k_now = k_ref * rng.uniform(0.8, 1.3, n)
    t_ref = t0 * (1 + 0.15 * (q_ref / k_ref) ** 4)
    dqdt = t0 * 0.15 * 4 * q_ref ** 3 / k_ref ** 4
    a = kernels.affine_link_times(q, t0, t_ref, dqdt, q_ref, k_ref, k_now, 4.0)
    b = py(q, t0, t_ref, dqdt, q_ref, k_ref, k_now, 4.0)
    assert np.allclose(a, b, rtol=1e-12)


def test_cost_scale_backends_agree(rng):
    py = kernels.python_impl(kernels.cost_scale_factor)
    for u in rng.uniform(0, 10, 50):
        assert kernels.cost_scale_factor(float(u), 0.3, 0.1, 2.0, 0.2) \
            == pytest.approx(py(float(u), 0.3, 0.1, 2.0, 0.2), rel=1e-14)
