"""Grid search over cordon length for the precision objective (VMR or CV)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distribution_engine import vmr
from .speed_model import SpeedDistribution

OBJECTIVES = ("vmr", "cv")


@dataclass(frozen=True)
class OptimumReport:
    best_d: float
    best_objective: float
    curve: tuple[tuple[float, float], ...]
    objective_kind: str
    m: int
    t: float


def _d_grid(d_min: float, d_max: float, step: float) -> np.ndarray:
    # inclusive endpoint; build by index so accumulation error cannot drop it
    count = int(math.floor((d_max - d_min) / step + 1e-9))
    return d_min + step * np.arange(count + 1)


def objective_curve(
    d_min: float,
    d_max: float,
    step: float,
    t: float,
    dist: SpeedDistribution,
    kind: str,
    m: int = 1,
) -> list[tuple[float, float]]:
    """Evaluate the precision objective on the inclusive grid {d_min, ..., d_max}.

    The objective is continuous but non-smooth in d with dense local minima,
    so no derivative-based refinement: an exhaustive grid is deterministic
    and auditable.
    """
    if kind not in OBJECTIVES:
        raise ValueError(f"objective kind must be one of {OBJECTIVES}, got {kind!r}")
    if not (0.0 < d_min < d_max):
        raise ValueError(f"need 0 < d_min < d_max, got ({d_min}, {d_max})")
    if step <= 0.0:
        raise ValueError(f"step must be positive, got {step}")
    if kind == "cv" and m < 1:
        raise ValueError(f"cv objective requires m >= 1, got {m}")

    curve = []
    for d in _d_grid(d_min, d_max, step):
        ratio = vmr(float(d), t, dist)
        value = math.sqrt(ratio / m) if kind == "cv" else ratio
        curve.append((float(d), value))
    return curve


def optimize_cordon(
    d_max: float,
    t: float,
    dist: SpeedDistribution,
    kind: str,
    m: int = 1,
    step: float = 0.5,
) -> OptimumReport:
    """Minimize the objective over the grid {step, 2*step, ..., <= d_max}.

    Ties break toward larger d: more data points per probe at equal
    theoretical precision.
    """
    if not (d_max > step > 0.0):
        raise ValueError(f"need d_max > step > 0, got ({d_max}, {step})")
    curve = objective_curve(step, d_max, step, t, dist, kind, m)
    best_d, best_val = curve[0]
    for d, value in curve[1:]:
        if value <= best_val:
            best_d, best_val = d, value
    return OptimumReport(
        best_d=best_d,
        best_objective=best_val,
        curve=tuple(curve),
        objective_kind=kind,
        m=m,
        t=t,
    )
