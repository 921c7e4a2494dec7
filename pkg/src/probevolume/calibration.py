"""Through-origin calibration of probe volumes against known traffic volumes."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CalibrationPair:
    """One (estimated probe volume, known traffic volume) observation.

    ``weight`` defaults to 1 (ordinary least squares); inverse-VMR weights
    give the heteroscedasticity-aware fit.
    """

    m_hat: float
    known_volume: float
    weight: float = 1.0

    def __post_init__(self):
        if not (self.known_volume > 0.0):
            raise ValueError(f"known_volume must be positive, got {self.known_volume}")
        if not (self.weight > 0.0):
            raise ValueError(f"weight must be positive, got {self.weight}")


@dataclass(frozen=True)
class CalibrationModel:
    beta: float
    method: str  # "ols" | "wls"


def fit_through_origin(
    pairs: Sequence[CalibrationPair], method: str | None = None
) -> CalibrationModel:
    """beta = sum(w x y) / sum(w x^2); OLS is the all-weights-equal case.

    ``method`` only labels the model; when omitted it is inferred from
    whether the weights are uniform.
    """
    if not pairs:
        raise ValueError("need at least one calibration pair")
    zeros = sum(1 for p in pairs if p.m_hat == 0.0)
    if zeros:
        log.warning("%d calibration pairs have m_hat = 0 and do not constrain the fit", zeros)
    if zeros == len(pairs):
        raise ValueError("cannot fit: every pair has m_hat = 0")
    sxy = math.fsum(p.weight * p.m_hat * p.known_volume for p in pairs)
    sxx = math.fsum(p.weight * p.m_hat * p.m_hat for p in pairs)
    if sxx == 0.0:
        raise ValueError("cannot fit: weighted normal equation underflowed")
    if method is None:
        method = "ols" if len({p.weight for p in pairs}) == 1 else "wls"
    if method not in ("ols", "wls"):
        raise ValueError(f"method must be 'ols' or 'wls', got {method!r}")
    return CalibrationModel(beta=sxy / sxx, method=method)


def predict(model: CalibrationModel, m_hat: float) -> float:
    """Traffic volume estimate beta * m_hat."""
    return model.beta * m_hat


def mape(predicted: Sequence[float], truth: Sequence[float]) -> float:
    """Mean absolute percentage error of paired predictions."""
    if len(predicted) != len(truth) or not truth:
        raise ValueError("predicted and truth must be equal-length, non-empty")
    if any(y <= 0.0 for y in truth):
        raise ValueError("truth values must be positive")
    return math.fsum(abs(p - y) / y for p, y in zip(predicted, truth)) / len(truth)
