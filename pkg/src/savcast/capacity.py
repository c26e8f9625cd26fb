"""Road link capacity under mixed human-driven / automated flow.

Automated vehicles hold shorter following headways, so a link's capacity
grows with the share of automated flow.  Four leader-follower combinations
exist; a human driver behaves the same behind either vehicle type, so
h_HH = h_HS and only three headways are needed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import mixed_capacity_links, mixed_capacity_value


@dataclass(frozen=True)
class HeadwaySet:
    """Average following headways in seconds."""

    h_HH: float = 1.8   # human behind anything
    h_SH: float = 1.4   # automated behind human
    h_SS: float = 0.9   # automated behind automated

    def __post_init__(self):
        if not (0.0 < self.h_SS <= self.h_SH <= self.h_HH):
            raise ValueError(
                f"require 0 < h_SS <= h_SH <= h_HH, got "
                f"({self.h_SS}, {self.h_SH}, {self.h_HH})"
            )


def mixed_capacity(q_S, q_H, K0, headways: HeadwaySet):
    """Capacity (veh/h) of a link carrying SAV flow q_S and HV flow q_H.

    With automated share x = q_S/(q_S+q_H) (0 when the link is empty), the
    mean headway under random mixing is
    ``(1-x)*h_HH + x*((1-x)*h_SH + x*h_SS)`` and capacity scales as
    K0 * h_HH / h_mean, so K >= K0 whenever h_SS <= h_SH <= h_HH.

    Accepts scalars or equal-length arrays.
    """
    q_S = np.asarray(q_S, dtype=float)
    q_H = np.asarray(q_H, dtype=float)
    K0 = np.asarray(K0, dtype=float)
    if np.any(q_S < 0) or np.any(q_H < 0):
        raise ValueError("flows must be >= 0")
    if np.any(K0 <= 0):
        raise ValueError("base capacity must be > 0")
    if q_S.ndim == 0:
        return float(mixed_capacity_value(float(q_S), float(q_H), float(K0),
                                          headways.h_HH, headways.h_SH, headways.h_SS))
    return mixed_capacity_links(np.ascontiguousarray(q_S), np.ascontiguousarray(q_H),
                                np.ascontiguousarray(K0),
                                headways.h_HH, headways.h_SH, headways.h_SS)
