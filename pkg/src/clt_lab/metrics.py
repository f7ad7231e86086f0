"""Distances between distributions.

Total variation follows the convention ``d_TV(X, Y) = 2 sup_A |P(X∈A) - P(Y∈A)|``,
i.e. the L¹ distance between densities. Every TV-type quantity here lies in
[0, 2] and equals 2 for disjoint supports. Binned estimators see only bin
masses, so they underestimate the continuous distance (plus Monte Carlo noise).
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, optimize, special, stats

from .marginals import EmpiricalCDF, Histogram1D, HistogramKD, ecdf, histogram_1d
from .model import RandomSeed
from .samplers import SampleBatch, sample_directions

T_GRID = np.round(np.arange(-600, 601) * 0.01, 10)


class NormalizationError(ValueError):
    pass


class StdNormal:
    """The standard normal law; only what the metrics need."""

    @staticmethod
    def cdf(t):
        return special.ndtr(t)

    @staticmethod
    def pdf(t):
        t = np.asarray(t, dtype=float)
        return np.exp(-0.5 * t * t) / math.sqrt(2 * math.pi)


def std_normal_cdf(t):
    """Φ(t), accurate to ~1e-16 absolute."""
    return special.ndtr(t)


def gaussian_density(n: int, v: float):
    """γ_{n,v}(x) = (2πv)^{-n/2} exp(-|x|²/(2v)) as a callable on row vectors (or scalars when n == 1)."""
    def f(x):
        x = np.asarray(x, dtype=float)
        r2 = x * x if n == 1 else np.sum(x * x, axis=-1)
        return np.exp(-r2 / (2 * v)) / (2 * math.pi * v) ** (n / 2)

    return f


# ---------------------------------------------------------------------------
# Kolmogorov


def kolmogorov_distance(cdf_hat: EmpiricalCDF, reference_cdf: Callable = std_normal_cdf) -> float:
    """``sup_t |F̂(t) - F(t)|``.

    The supremum is attained at a sample point, from the left or the right.
    A reference with a ``left_limit`` method (another :class:`EmpiricalCDF`)
    is compared on both sides; any other reference is taken to be continuous.
    """
    if not isinstance(cdf_hat, EmpiricalCDF):
        cdf_hat = ecdf(cdf_hat)
    xs = cdf_hat.sorted_values
    m = xs.size
    u, first, counts = np.unique(xs, return_index=True, return_counts=True)
    left = first / m
    right = (first + counts) / m
    ref = np.asarray(reference_cdf(u), dtype=float)
    ref_left = np.asarray(reference_cdf.left_limit(u), dtype=float) if hasattr(reference_cdf, "left_limit") else ref
    return float(max(np.max(np.abs(right - ref)), np.max(np.abs(left - ref_left))))


def kolmogorov_sorted(xs: np.ndarray, reference_cdf: Callable = std_normal_cdf) -> float:
    """Fast path for an already sorted sample of a continuous law (ties are ignored)."""
    m = xs.size
    ref = reference_cdf(xs)
    i = np.arange(1, m + 1)
    return float(max(np.max(i / m - ref), np.max(ref - (i - 1) / m)))


# ---------------------------------------------------------------------------
# binned TV


def _bin_masses(reference, edges: np.ndarray) -> np.ndarray:
    if hasattr(reference, "cdf"):
        return np.diff(np.asarray(reference.cdf(edges), dtype=float))
    return np.array([integrate.quad(reference, a, b, limit=100)[0] for a, b in zip(edges[:-1], edges[1:])])


def _outside_mass(reference, lo: float, hi: float) -> float:
    if hasattr(reference, "cdf"):
        return float(reference.cdf(lo) + 1.0 - reference.cdf(hi))
    left = integrate.quad(reference, -np.inf, lo)[0]
    right = integrate.quad(reference, hi, np.inf)[0]
    return left + right


def binned_tv(hist: Histogram1D, reference=StdNormal) -> float:
    """``Σ_bins |p̂ - p| + out-of-range sample mass + reference mass outside [lo, hi]``.

    ``reference`` is anything with a ``cdf`` method (e.g. a frozen
    ``scipy.stats`` law) or a plain density callable.
    """
    m = max(hist.total, 1)
    ref = _bin_masses(reference, hist.edges)
    inside = float(np.sum(np.abs(hist.counts / m - ref)))
    return inside + hist.out_of_range / m + _outside_mass(reference, hist.lo, hist.hi)


def binned_tv_noise(hist: Histogram1D) -> float:
    """Expected contribution of pure sampling noise to ``binned_tv`` (≈ Σ sqrt(2 p / (π m)))."""
    m = max(hist.total, 1)
    p = hist.counts / m
    return float(np.sum(np.sqrt(2 * p * (1 - p) / (math.pi * m))))


def binned_tv_kd(hist: HistogramKD) -> float:
    """Product-binned TV against the standard gaussian in k dimensions (a lower bound plus noise)."""
    m = max(hist.total, 1)
    edges = hist.edges
    p1 = np.diff(special.ndtr(edges))
    ref = p1
    for _ in range(hist.k - 1):
        ref = np.multiply.outer(ref, p1)
    inside_ref = float(np.sum(p1)) ** hist.k
    return float(np.sum(np.abs(hist.counts / m - ref))) + hist.out_of_range / m + (1.0 - inside_ref)


def radial_binned_tv(values: np.ndarray, bin_width: float = 0.05, span: float = 12.0) -> float:
    """TV against the standard gaussian in ℝᵏ for a rotation-invariant sample, via radii.

    For two rotation-invariant laws the total variation equals that of their
    radial parts, so this compares the histogram of ``|y|`` with the χ_k law.
    Only valid when the sample's law is known to be rotation-invariant.
    """
    y = np.atleast_2d(values)
    k = y.shape[1]
    radii = np.linalg.norm(y, axis=1)
    hist = histogram_1d(radii, 0.0, span, bin_width)
    return binned_tv(hist, stats.chi(k))


# ---------------------------------------------------------------------------
# exact 1-D TV


def _crossings(h: Callable, a: float, b: float, probes: int = 4001) -> list[float]:
    xs = np.linspace(a, b, probes)
    vals = np.array([h(x) for x in xs])
    roots = []
    for i in np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]:
        roots.append(optimize.brentq(h, xs[i], xs[i + 1], xtol=1e-14))
    return roots


def tv_1d_quadrature(f: Callable, g: Callable, domain=(-math.inf, math.inf), tol: float = 1e-8,
                     points=(), window: float = 50.0) -> float:
    """``∫ |f - g|`` over ``domain`` by adaptive quadrature split at the crossings of f and g.

    Both densities must integrate to 1 within ``100 · tol`` over ``domain``.
    ``points`` are extra cuts such as the ends of a compact support; crossings
    are searched on ``domain ∩ [-window, window]``.
    """
    lo, hi = map(float, domain)
    fixed = sorted(float(p) for p in points if lo < p < hi)
    for name, dens in (("f", f), ("g", g)):
        mass = _piecewise_quad(dens, [lo, *fixed, hi], tol)
        if abs(mass - 1.0) > 100 * tol:
            raise NormalizationError(f"density {name} integrates to {mass!r}, not 1")
    a = lo if math.isfinite(lo) else -window
    b = hi if math.isfinite(hi) else window

    def diff(x):
        return float(f(x)) - float(g(x))

    inner = sorted(set(fixed) | {c for c in _crossings(diff, a, b) if lo < c < hi})
    cuts = [lo, *inner, hi]
    return _piecewise_quad(lambda x: abs(diff(x)), cuts, tol)


def _piecewise_quad(func: Callable, cuts, tol: float) -> float:
    total = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b <= a:
            continue
        val, _ = integrate.quad(lambda x: float(func(x)), a, b, epsabs=tol / 10, epsrel=1e-12, limit=500)
        total += val
    return total


def ball_marginal_density(n: int):
    """Density of one coordinate of the uniform law on the ball of radius √(n+2)."""
    r = math.sqrt(n + 2.0)
    log_norm = special.gammaln(n / 2 + 1) - special.gammaln((n - 1) / 2 + 1) - 0.5 * math.log(math.pi) - math.log(r)

    def f(t):
        t = np.asarray(t, dtype=float)
        u = 1.0 - (t / r) ** 2
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(u > 0, np.exp(log_norm + 0.5 * (n - 1) * np.log(np.maximum(u, 1e-300))), 0.0)
        return out

    return f, (-r, r)


# ---------------------------------------------------------------------------
# gaussian vs gaussian


def gaussian_tv(n: int, alpha: float, beta: float) -> float:
    """Exact ``∫ |γ_{n,α} - γ_{n,β}|``.

    The densities cross on the sphere ``r*² = n ln(β/α) αβ/(β-α)``; inside it
    the narrower law dominates, so the distance is twice the difference of
    the two χ²_n probabilities of that ball, written with regularized lower
    incomplete gamma functions.
    """
    if alpha <= 0 or beta <= 0:
        raise ValueError("variances must be positive")
    if alpha == beta:
        return 0.0
    a, b = sorted((float(alpha), float(beta)))
    r2 = n * math.log(b / a) * a * b / (b - a)
    return float(2.0 * (special.gammainc(n / 2, r2 / (2 * a)) - special.gammainc(n / 2, r2 / (2 * b))))


# ---------------------------------------------------------------------------
# T-distance


def _rows(batch) -> np.ndarray:
    return batch.data if isinstance(batch, SampleBatch) else np.atleast_2d(np.asarray(batch, dtype=float))


def t_distance_profile(batch, direction_count: int, grid=T_GRID, seed=0, directions=None) -> np.ndarray:
    """Per-direction ``sup_t |M̂(θ, t) - Φ(t)|``.

    In one dimension the sphere is ``{+1, -1}`` and those two are used
    regardless of ``direction_count``. With ``grid=None`` each supremum is
    exact (the Kolmogorov distance of the projection), otherwise it is taken
    over ``grid``.
    """
    x = _rows(batch)
    k = x.shape[1]
    if directions is None:
        if k == 1:
            directions = np.array([[1.0], [-1.0]])
        else:
            directions = sample_directions(k, direction_count, RandomSeed.coerce(seed))
    if grid is None:
        return np.array([kolmogorov_sorted(np.sort(x @ theta)) for theta in directions])
    grid = np.asarray(grid, dtype=float)
    out = np.empty(directions.shape[0])
    for lo in range(0, directions.shape[0], 64):
        out[lo:lo + 64] = grid_cdf_deviation(x @ directions[lo:lo + 64].T, grid)
    return out


def grid_cdf_deviation(proj: np.ndarray, grid: np.ndarray, reference_cdf: Callable = std_normal_cdf) -> np.ndarray:
    """``max_j |F̂(t_j) - F(t_j)|`` for each column of ``proj`` without sorting.

    A value v satisfies ``v <= t_j`` exactly when fewer than ``j+1`` grid
    points lie strictly below it, so bin counts by ``searchsorted`` and a
    cumulative sum give ``F̂`` on the whole grid.
    """
    proj = np.asarray(proj, dtype=float)
    if proj.ndim == 1:
        proj = proj[:, None]
    m, d = proj.shape
    g = grid.size
    step = np.diff(grid)
    if g > 1 and np.allclose(step, step[0], rtol=0, atol=1e-12 * max(1.0, abs(step[0]))):
        # uniform grid: the count is a ceiling, no search needed
        idx = np.clip(np.ceil((proj - grid[0]) / step[0]), 0, g).astype(np.int64)
    else:
        idx = np.searchsorted(grid, proj, side="left")
    idx += (g + 1) * np.arange(d)
    counts = np.bincount(idx.ravel(), minlength=(g + 1) * d).reshape(d, g + 1)
    cdf_hat = np.cumsum(counts[:, :g], axis=1) / m
    return np.max(np.abs(cdf_hat - reference_cdf(grid)), axis=1)


def t_distance(batch, direction_count: int = 200, grid=T_GRID, seed=0) -> float:
    """Sampled lower bound on ``sup_{θ,t} |P(<X,θ> <= t) - Φ(t)|`` for a k-dim batch vs N(0, Id_k)."""
    return float(np.max(t_distance_profile(batch, direction_count, grid, seed)))


# ---------------------------------------------------------------------------
# reports


@dataclass
class DistanceReport:
    kolmogorov: float
    binned_tv: float
    t_distance: float | None = None
    estimator_meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    CSV_FIELDS = ("kolmogorov", "binned_tv", "t_distance", "m", "bin_width", "direction_count", "grid")

    def to_csv_row(self, header: bool = True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if header:
            w.writerow(self.CSV_FIELDS)
        meta = self.estimator_meta
        w.writerow([
            repr(self.kolmogorov), repr(self.binned_tv), "" if self.t_distance is None else repr(self.t_distance),
            meta.get("m", ""), meta.get("bin_width", ""), meta.get("direction_count", ""), meta.get("grid", ""),
        ])
        return buf.getvalue()


def distance_report(values1d, bin_width: float = 0.05, span: float = 6.0) -> DistanceReport:
    """Kolmogorov and binned TV of a 1-D sample against N(0, 1)."""
    x = np.asarray(values1d, dtype=float).ravel()
    hist = histogram_1d(x, -span, span, bin_width)
    return DistanceReport(
        kolmogorov_distance(ecdf(x)),
        binned_tv(hist),
        None,
        {"m": int(x.size), "bin_width": bin_width, "range": [-span, span]},
    )
