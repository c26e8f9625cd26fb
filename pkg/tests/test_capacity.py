import numpy as np
import pytest

from savcast.capacity import HeadwaySet, mixed_capacity

H = HeadwaySet(h_HH=1.8, h_SH=1.4, h_SS=0.9)


def test_all_human_baseline():
    assert mixed_capacity(0.0, 1000.0, 2000.0, H) == pytest.approx(2000.0)


def test_empty_link_uses_zero_share():
    assert mixed_capacity(0.0, 0.0, 2000.0, H) == pytest.approx(2000.0)


def test_all_sav_ratio():
    k = mixed_capacity(1000.0, 0.0, 2000.0, H)
    assert k == pytest.approx(2000.0 * 1.8 / 0.9)


def test_degenerate_headways_leave_capacity_unchanged(rng):
    hd = HeadwaySet(h_HH=1.8, h_SH=1.8, h_SS=1.8)
    for _ in range(50):
        qs, qh = rng.uniform(0, 3000, 2)
        assert mixed_capacity(qs, qh, 1500.0, hd) == pytest.approx(1500.0)


def test_capacity_never_below_base(rng):
    for _ in range(200):
        qs, qh = rng.uniform(0, 5000, 2)
        k0 = rng.uniform(500, 20000)
        assert mixed_capacity(qs, qh, k0, H) >= k0 - 1e-9


def test_monotone_in_sav_share():
    total = 2000.0
    ks = [mixed_capacity(x * total, (1 - x) * total, 1800.0, H)
          for x in np.linspace(0, 1, 50)]
    assert all(b >= a - 1e-9 for a, b in zip(ks, ks[1:]))


def test_array_form_matches_scalar(rng):
    qs = rng.uniform(0, 3000, 20)
    qh = rng.uniform(0, 3000, 20)
    k0 = rng.uniform(500, 20000, 20)
    arr = mixed_capacity(qs, qh, k0, H)
    for i in range(20):
        assert arr[i] == pytest.approx(
            mixed_capacity(float(qs[i]), float(qh[i]), float(k0[i]), H))


def test_headway_ordering_enforced():
    with pytest.raises(ValueError):
        HeadwaySet(h_HH=1.0, h_SH=1.4, h_SS=0.9)


def test_negative_flow_rejected():
    with pytest.raises(ValueError):
        mixed_capacity(-1.0, 100.0, 1000.0, H)
