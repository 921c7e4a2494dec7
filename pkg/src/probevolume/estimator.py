"""Unbiased probe-volume estimator and its per-speed record-count quantities."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .footprint_data import CordonSample

# Ratios within this relative distance of an integer snap to it before
# floor/mod, so the guaranteed record count cannot flip by one ulp.
_INT_SNAP_RTOL = 1e-12


@dataclass(frozen=True)
class VolumeEstimate:
    """Estimated probe volume for one cordon sample."""

    m_hat: float
    n: int
    d: float
    t: float


def estimate_probe_volume(sample: CordonSample) -> VolumeEstimate:
    """m_hat = (t/d) * sum of in-cordon speeds.

    Uses exact compensated summation (``math.fsum``), so the result is
    bit-identical for any record ordering.
    """
    total = math.fsum(sample.speeds)
    return VolumeEstimate(
        m_hat=(sample.t / sample.d) * total,
        n=len(sample.speeds),
        d=sample.d,
        t=sample.t,
    )


def _snapped_ratio(s: float, d: float, t: float) -> float:
    if s <= 0.0 or d <= 0.0 or t <= 0.0:
        raise ValueError(f"s, d, t must all be positive, got ({s}, {d}, {t})")
    r = d / (s * t)
    nearest = round(r)
    if abs(r - nearest) <= _INT_SNAP_RTOL * max(1.0, r):
        return float(nearest)
    return r


def min_records(s: float, d: float, t: float) -> int:
    """Guaranteed record count of a probe at speed s: floor(d / (s*t))."""
    return int(math.floor(_snapped_ratio(s, d, t)))


def extra_record_prob(s: float, d: float, t: float) -> float:
    """Probability of one extra record: the fractional part of d / (s*t)."""
    r = _snapped_ratio(s, d, t)
    return r - math.floor(r)
