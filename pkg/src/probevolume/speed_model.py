"""Probe speed population: finite mixtures of truncated normal distributions."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.special import ndtr, ndtri

from . import kernels

# Printed mixture weights in the wild are rounded (a canonical preset sums to
# 0.999), so configs are accepted and renormalized within this slack.
WEIGHT_SUM_TOL = 5e-3

PRESET_NAMES = ("park-i35", "table2-60mph", "table2-30mph")

_GL32_X, _GL32_W = np.polynomial.legendre.leggauss(32)
_GL32_X.setflags(write=False)
_GL32_W.setflags(write=False)


class QuadratureError(RuntimeError):
    """A weighted integral hit a non-finite evaluation."""


@dataclass(frozen=True)
class SpeedComponent:
    """One truncated-normal mixture component (pre-truncation parameters)."""

    mean: float
    sd: float
    weight: float

    def __post_init__(self):
        if not (self.sd > 0.0):
            raise ValueError(f"component sd must be positive, got {self.sd}")
        if not (0.0 <= self.weight <= 1.0):
            raise ValueError(f"component weight must be in [0, 1], got {self.weight}")
        if not math.isfinite(self.mean):
            raise ValueError("component mean must be finite")


@dataclass
class SpeedDistribution:
    """Mixture of truncated normals on the half-open support (lower, upper].

    Weights are renormalized to an exact unit sum at construction; inputs
    whose raw sum strays from 1 by more than ``WEIGHT_SUM_TOL`` are rejected.
    """

    components: tuple[SpeedComponent, ...]
    lower: float
    upper: float

    # derived arrays shared by the kernels; filled in __post_init__
    _means: np.ndarray = field(init=False, repr=False)
    _sds: np.ndarray = field(init=False, repr=False)
    _weights: np.ndarray = field(init=False, repr=False)
    _norms: np.ndarray = field(init=False, repr=False)
    _cdf_lo: np.ndarray = field(init=False, repr=False)
    _cdf_w: np.ndarray = field(init=False, repr=False)
    _cdf_span: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.components = tuple(self.components)
        if not self.components:
            raise ValueError("mixture needs at least one component")
        if not (0.0 <= self.lower < self.upper):
            raise ValueError(
                f"support must satisfy 0 <= lower < upper, got ({self.lower}, {self.upper})"
            )
        raw = np.array([c.weight for c in self.components], dtype=np.float64)
        total = raw.sum()
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(f"component weights sum to {total}, expected 1")
        self._weights = raw / total
        self._means = np.array([c.mean for c in self.components], dtype=np.float64)
        self._sds = np.array([c.sd for c in self.components], dtype=np.float64)
        a = (self.lower - self._means) / self._sds
        b = (self.upper - self._means) / self._sds
        z = ndtr(b) - ndtr(a)
        if np.any(z <= 0.0):
            bad = int(np.argmin(z))
            raise ValueError(
                f"component {bad} has no probability mass inside the support"
            )
        self._norms = self._weights / (self._sds * z)
        self._cdf_lo = ndtr(a)
        self._cdf_w = self._weights / z
        self._cdf_span = z

    # -- evaluation ---------------------------------------------------------

    def pdf(self, s) -> np.ndarray | float:
        scalar = np.isscalar(s)
        arr = np.atleast_1d(np.asarray(s, dtype=np.float64))
        out = kernels.mixture_pdf(
            arr, self._means, self._sds, self._norms, self.lower, self.upper
        )
        return float(out[0]) if scalar else out

    def cdf(self, s) -> np.ndarray | float:
        scalar = np.isscalar(s)
        arr = np.atleast_1d(np.asarray(s, dtype=np.float64))
        out = kernels.mixture_cdf(
            arr, self._means, self._sds, self._cdf_lo, self._cdf_w, self.lower, self.upper
        )
        return float(out[0]) if scalar else out

    def mean(self) -> float:
        """Mixture mean from the closed-form truncated-normal component means."""
        a = (self.lower - self._means) / self._sds
        b = (self.upper - self._means) / self._sds
        phi = np.exp(-0.5 * np.square([a, b])) / math.sqrt(2.0 * math.pi)
        comp = self._means + self._sds * (phi[0] - phi[1]) / self._cdf_span
        return float(np.sum(self._weights * comp))


def eval_pdf(dist: SpeedDistribution, s):
    """Mixture density g(s); zero outside the support (lower, upper]."""
    return dist.pdf(s)


def sample(dist: SpeedDistribution, count: int, seed: int) -> np.ndarray:
    """Draw i.i.d. speeds, deterministic in (seed, count).

    Components are chosen by weight, then each draw maps a uniform through
    the component's truncated CDF (exact inverse transform, rejection-free).
    """
    if not isinstance(dist, SpeedDistribution):
        raise TypeError("dist must be a SpeedDistribution")
    if count < 0:
        raise ValueError(f"count must be >= 0, got {count}")
    rng = np.random.default_rng(seed)
    return sample_with_rng(dist, count, rng)


def sample_with_rng(dist: SpeedDistribution, count: int, rng: np.random.Generator) -> np.ndarray:
    if count == 0:
        return np.empty(0, dtype=np.float64)
    cum = np.cumsum(dist._weights)
    comp = np.searchsorted(cum, rng.random(count), side="right")
    comp = np.minimum(comp, len(cum) - 1)
    u = 1.0 - rng.random(count)  # in (0, 1] so draws stay inside (lower, upper]
    q = dist._cdf_lo[comp] + u * dist._cdf_span[comp]
    s = dist._means[comp] + dist._sds[comp] * ndtri(q)
    np.minimum(s, dist.upper, out=s)
    np.maximum(s, np.nextafter(dist.lower, np.inf), out=s)
    return s


# Fixed cut offsets around every component mean, in sd units: a 32-node rule
# between consecutive cuts resolves a Gaussian of any sd, so normalization
# holds even for near-degenerate mixtures. The rule is fixed, not adaptive:
# results stay bit-stable across runs.
_ANCHOR_SDS = (1.0, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 16.0, 24.0, 32.0)


def _anchor_cuts(dist: SpeedDistribution) -> np.ndarray:
    offs = np.concatenate(([0.0], _ANCHOR_SDS, [-k for k in _ANCHOR_SDS]))
    return (dist._means[:, None] + dist._sds[:, None] * offs[None, :]).ravel()


def integrate_weighted(
    dist: SpeedDistribution,
    weight: Callable[[np.ndarray], np.ndarray],
    breakpoints: Sequence[float] = (),
    nodes_per_piece: int = 32,
) -> float:
    """Integrate weight(s)*g(s) over the support with piecewise quadrature.

    The support is cut at the given breakpoints (clipped to it) plus fixed
    sd-anchored cuts around each component mean; every piece gets a
    fixed-order Gauss-Legendre rule (default 32 nodes). ``weight`` must
    accept an ndarray of speeds.
    """
    pts = np.asarray(breakpoints, dtype=np.float64)
    if pts.size and np.any(np.diff(pts) < 0):
        raise ValueError("breakpoints must be sorted ascending")
    cuts = np.concatenate((pts, _anchor_cuts(dist)))
    inner = cuts[(cuts > dist.lower) & (cuts < dist.upper)]
    edges = np.unique(np.concatenate(([dist.lower], inner, [dist.upper])))

    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])

    if nodes_per_piece == 32:
        gl_x, gl_w = _GL32_X, _GL32_W
    else:
        gl_x, gl_w = np.polynomial.legendre.leggauss(nodes_per_piece)
    nodes = (mid[:, None] + half[:, None] * gl_x).ravel()
    wts = (half[:, None] * gl_w).ravel()

    gv = kernels.mixture_pdf(
        nodes, dist._means, dist._sds, dist._norms, dist.lower, dist.upper
    )
    wv = np.asarray(weight(nodes), dtype=np.float64)
    if not np.all(np.isfinite(wv)):
        bad = nodes[~np.isfinite(np.broadcast_to(wv, nodes.shape))]
        raise QuadratureError(
            f"weight function returned non-finite values, first at s={bad.flat[0]!r}"
        )
    # np.sum (pairwise, single-threaded) rather than BLAS dot: reruns must be
    # bit-identical regardless of thread count
    return float(np.sum(wts * gv * wv))


# -- configuration ----------------------------------------------------------


def from_dict(doc: dict) -> SpeedDistribution:
    try:
        comps = tuple(
            SpeedComponent(float(c["mean"]), float(c["sd"]), float(c["weight"]))
            for c in doc["components"]
        )
        lower = float(doc["lower"])
        upper = float(doc["upper"])
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed speed distribution config: {exc}") from exc
    return SpeedDistribution(comps, lower, upper)


def to_dict(dist: SpeedDistribution) -> dict:
    return {
        "components": [
            {"mean": c.mean, "sd": c.sd, "weight": c.weight} for c in dist.components
        ],
        "lower": dist.lower,
        "upper": dist.upper,
    }


def load_preset(name: str) -> SpeedDistribution:
    fname = name.replace("-", "_") + ".json"
    ref = resources.files("probevolume.presets").joinpath(fname)
    with ref.open("r", encoding="utf-8") as fh:
        return from_dict(json.load(fh))


def load_distribution(spec: str) -> SpeedDistribution:
    """Resolve a preset name or a JSON config path to a distribution."""
    if spec in PRESET_NAMES:
        return load_preset(spec)
    path = Path(spec)
    if path.exists():
        with path.open("r", encoding="utf-8") as fh:
            return from_dict(json.load(fh))
    raise ValueError(
        f"unknown speed distribution {spec!r}: not a preset "
        f"({', '.join(PRESET_NAMES)}) and no such file"
    )
