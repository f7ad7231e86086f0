"""Projections, the half-space mass M_f(θ, t), and 1-D / k-D marginal summaries.

M_f(θ, t) is the mass of ``{x : <x, θ> <= t}``. All estimators here count
indicators, so they are unbiased and the marginal-consistency identity
(estimate before projecting == estimate after projecting, for θ inside the
subspace) holds row by row.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .model import RandomSeed, Subspace, as_direction
from .samplers import SampleBatch, sample_directions

DEFAULT_HIST_RANGE = (-6.0, 6.0)
DEFAULT_BIN_WIDTH = 0.05
KD_BIN_WIDTH = 0.2
MIN_PAIR_SEPARATION = 0.1


def _rows(batch) -> np.ndarray:
    return batch.data if isinstance(batch, SampleBatch) else np.atleast_2d(np.asarray(batch, dtype=float))


def _values(batch1d) -> np.ndarray:
    x = batch1d.data if isinstance(batch1d, SampleBatch) else np.asarray(batch1d, dtype=float)
    if x.ndim == 2:
        if x.shape[1] != 1:
            raise ValueError(f"expected a one-dimensional batch, got {x.shape[1]} columns")
        x = x[:, 0]
    return x


@dataclass(frozen=True, eq=False)
class MarginalCurve:
    direction: np.ndarray
    grid: np.ndarray
    values: np.ndarray
    sample_count: int

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "value"])
        w.writerows([repr(float(t)), repr(float(v))] for t, v in zip(self.grid, self.values))
        return buf.getvalue()


@dataclass(frozen=True, eq=False)
class Histogram1D:
    lo: float
    hi: float
    bin_width: float
    counts: np.ndarray
    total: int
    below: int = 0
    above: int = 0

    @property
    def edges(self) -> np.ndarray:
        return self.lo + self.bin_width * np.arange(self.counts.size + 1)

    @property
    def centers(self) -> np.ndarray:
        return self.lo + self.bin_width * (np.arange(self.counts.size) + 0.5)

    @property
    def out_of_range(self) -> int:
        return self.below + self.above

    def density(self) -> np.ndarray:
        return self.counts / (max(self.total, 1) * self.bin_width)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["bin_center", "count"])
        w.writerows([repr(float(c)), int(k)] for c, k in zip(self.centers, self.counts))
        return buf.getvalue()


@dataclass(frozen=True, eq=False)
class EmpiricalCDF:
    sorted_values: np.ndarray

    @property
    def m(self) -> int:
        return self.sorted_values.size

    def __call__(self, t):
        """``F̂(t) = #{values <= t} / m``."""
        return np.searchsorted(self.sorted_values, t, side="right") / self.m

    def left_limit(self, t):
        """``F̂(t⁻) = #{values < t} / m``."""
        return np.searchsorted(self.sorted_values, t, side="left") / self.m


# ---------------------------------------------------------------------------


def project_batch(batch: SampleBatch, sub: Subspace) -> SampleBatch:
    """Row-wise coordinates of ``Proj_E`` in the frame of ``sub``."""
    if batch.n != sub.ambient_dim:
        raise ValueError(f"batch dimension {batch.n} does not match subspace ambient dimension {sub.ambient_dim}")
    return batch.with_data(sub.project(batch.data), f"project:k={sub.dim}")


def empirical_Mf(batch, theta, t: float) -> float:
    x = _rows(batch)
    theta = as_direction(theta, x.shape[1])
    return float(np.count_nonzero(x @ theta <= t)) / x.shape[0]


def empirical_Mf_curve(batch, theta, grid) -> MarginalCurve:
    """``M̂(θ, t)`` on a sorted grid from one projection and one sort."""
    x = _rows(batch)
    theta = as_direction(theta, x.shape[1])
    grid = np.asarray(grid, dtype=float)
    if np.any(np.diff(grid) < 0):
        raise ValueError("grid must be sorted ascending")
    proj = np.sort(x @ theta)
    values = np.searchsorted(proj, grid, side="right") / proj.size
    return MarginalCurve(theta, grid, values, proj.size)


def mf_direction_lipschitz(batch, t: float, pair_count: int, seed) -> float:
    """Largest ``|M̂(θ₁,t) - M̂(θ₂,t)| / |θ₁ - θ₂|`` over random pairs at least 0.1 apart.

    An empirical lower bound on the Lipschitz constant of θ ↦ M_f(θ, t);
    close pairs are dropped because estimator noise swamps their quotient.
    Returns 0 when no pair survives the filter.
    """
    x = _rows(batch)
    seed = RandomSeed.coerce(seed)
    n = x.shape[1]
    dirs = sample_directions(n, 2 * pair_count, seed)
    a, b = dirs[:pair_count], dirs[pair_count:]
    return lipschitz_from_pairs(x, t, a, b)


def lipschitz_from_pairs(x, t, a, b) -> float:
    sep = np.linalg.norm(a - b, axis=1)
    keep = sep >= MIN_PAIR_SEPARATION
    if not np.any(keep):
        return 0.0
    a, b, sep = a[keep], b[keep], sep[keep]
    ma = mf_many(x, a, t)
    mb = mf_many(x, b, t)
    return float(np.max(np.abs(ma - mb) / sep))


def mf_many(x, directions, t, block: int = 256) -> np.ndarray:
    """``M̂(θ, t)`` for each row θ of ``directions`` (blocked over directions)."""
    x = _rows(x)
    directions = np.atleast_2d(directions)
    out = np.empty(directions.shape[0])
    for lo in range(0, directions.shape[0], block):
        proj = x @ directions[lo:lo + block].T
        out[lo:lo + block] = np.count_nonzero(proj <= t, axis=0) / x.shape[0]
    return out


def histogram_1d(batch1d, lo: float, hi: float, bin_width: float) -> Histogram1D:
    if not bin_width > 0 or not lo < hi:
        raise ValueError("need bin_width > 0 and lo < hi")
    x = _values(batch1d)
    nbins = int(round((hi - lo) / bin_width))
    hi = lo + nbins * bin_width
    below = int(np.count_nonzero(x < lo))
    above = int(np.count_nonzero(x >= hi))
    idx = np.floor((x - lo) / bin_width).astype(np.int64)
    idx = idx[(idx >= 0) & (idx < nbins)]
    counts = np.bincount(idx, minlength=nbins)
    return Histogram1D(lo, hi, bin_width, counts, int(x.size), below, above)


@dataclass(frozen=True, eq=False)
class HistogramKD:
    """Product-binned histogram on ``[lo, hi)^k``; coarse by design (k <= 3)."""

    lo: float
    hi: float
    bin_width: float
    counts: np.ndarray
    total: int
    out_of_range: int

    @property
    def k(self) -> int:
        return self.counts.ndim

    @property
    def edges(self) -> np.ndarray:
        return self.lo + self.bin_width * np.arange(self.counts.shape[0] + 1)


def histogram_kd(values, lo: float = -6.0, hi: float = 6.0, bin_width: float = KD_BIN_WIDTH) -> HistogramKD:
    x = _rows(values)
    k = x.shape[1]
    if k > 3:
        raise ValueError("product binning is only supported for k <= 3")
    nbins = int(round((hi - lo) / bin_width))
    hi = lo + nbins * bin_width
    idx = np.floor((x - lo) / bin_width).astype(np.int64)
    inside = np.all((idx >= 0) & (idx < nbins), axis=1)
    flat = np.ravel_multi_index(tuple(idx[inside].T), (nbins,) * k)
    counts = np.bincount(flat, minlength=nbins**k).reshape((nbins,) * k)
    return HistogramKD(lo, hi, bin_width, counts, int(x.shape[0]), int(np.count_nonzero(~inside)))


def ecdf(batch1d) -> EmpiricalCDF:
    x = _values(batch1d)
    if x.size == 0:
        raise ValueError("empirical CDF of an empty sample")
    return EmpiricalCDF(np.sort(x))


def oscillation(values: np.ndarray) -> float:
    return float(np.max(values) - np.min(values))


def borell_envelope(t) -> np.ndarray:
    return 2.0 * np.exp(-np.abs(np.asarray(t, dtype=float)) / 10.0)


def curve_properties(curve: MarginalCurve) -> dict:
    """Slack-adjusted checks of monotonicity, the 1-Lipschitz bound in t and the two-sided tail bound.

    Noise allowances: ``2/√m`` for increments, ``3/(2√m)`` for tails.
    """
    m = curve.sample_count
    v, g = curve.values, curve.grid
    inc = np.diff(v)
    noise = 2.0 / math.sqrt(m)
    tail_slack = 1.5 / math.sqrt(m)
    env = borell_envelope(g)
    left = g <= 0
    right = g >= 0
    return {
        "monotone": bool(np.all(inc >= 0)),
        "lipschitz": bool(np.all(np.abs(inc) <= np.diff(g) + noise)),
        "left_tail": bool(np.all(v[left] <= env[left] + tail_slack)),
        "right_tail": bool(np.all(1.0 - v[right] <= env[right] + tail_slack)),
        "in_unit_interval": bool(np.all((v >= 0) & (v <= 1))),
    }
