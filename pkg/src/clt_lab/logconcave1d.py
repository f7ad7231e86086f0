"""One-dimensional log-concave analytics.

Everything here works with a :class:`LogConcave1D`, a log-density with an
optional derivative. Integrals of ``t^{n-1} f(t)`` are taken in the log
domain, shifted by the value at the peak ``t_n(f)``, since the raw integrand
leaves double range once ``n`` reaches a few hundred.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, optimize
from scipy.interpolate import PchipInterpolator

GRUNBAUM_CONSTANT = 1.0 - math.exp(-1.0)
CONCAVITY_SLACK = 1e-6
LOG_CONCAVITY_SLACK = 1e-9


class LogConcavityError(ValueError):
    pass


class RootNotFound(ValueError):
    pass


class GateError(ValueError):
    """The input fails a moment precondition (centered / isotropic)."""


@dataclass(frozen=True, eq=False)
class LogConcave1D:
    """A log-concave function on an interval, given through ``log f``.

    ``log_f`` must accept numpy arrays and return ``-inf`` off the support.
    When ``dlog_f`` is missing the derivative is a central difference with
    step ``1e-6 * max(|t|, 1)``.

    Construction spot-checks log-concavity on 1000 random triples and checks
    that ``∫ f`` is finite and positive. A spot-check is not a proof.
    """

    log_f: Callable
    dlog_f: Callable | None = None
    support: tuple = (0.0, math.inf)
    label: str = ""
    draw: Callable | None = field(default=None, repr=False)
    check: bool = True

    def __post_init__(self):
        lo, hi = map(float, self.support)
        if not lo < hi:
            raise ValueError(f"empty support {self.support}")
        object.__setattr__(self, "support", (lo, hi))
        if self.check:
            self._spot_check()

    def _window(self):
        lo, hi = self.support
        a = lo if math.isfinite(lo) else min(-30.0, hi - 30.0)
        b = hi if math.isfinite(hi) else max(30.0, lo + 30.0)
        return a, b

    def _spot_check(self, triples: int = 1000):
        rng = np.random.default_rng(0)
        a, b = self._window()
        x, y = rng.uniform(a, b, size=(2, triples))
        lam = rng.uniform(size=triples)
        with np.errstate(all="ignore"):
            lx, ly = self.log_f(x), self.log_f(y)
            lm = self.log_f(lam * x + (1 - lam) * y)
        ok = np.isfinite(lx) & np.isfinite(ly)
        bad = ok & (lm < lam * lx + (1 - lam) * ly - LOG_CONCAVITY_SLACK)
        if np.any(bad):
            i = int(np.argmax(bad))
            raise LogConcavityError(
                f"{self.label or 'function'} is not log-concave: midpoint inequality fails at "
                f"x={x[i]:.4g}, y={y[i]:.4g}, lambda={lam[i]:.3g}"
            )
        mass = self.mass()
        if not (math.isfinite(mass) and mass > 0):
            raise LogConcavityError(f"integral of {self.label or 'function'} is not finite and positive")

    def __call__(self, t):
        with np.errstate(all="ignore"):
            return np.exp(self.log_f(np.asarray(t, dtype=float)))

    def dlog(self, t):
        if self.dlog_f is not None:
            return self.dlog_f(np.asarray(t, dtype=float))
        t = np.asarray(t, dtype=float)
        h = 1e-6 * np.maximum(np.abs(t), 1.0)
        return (self.log_f(t + h) - self.log_f(t - h)) / (2 * h)

    def mass(self) -> float:
        lo, hi = self.support
        val, _ = integrate.quad(lambda t: float(self(t)), lo, hi, limit=200)
        return val

    def rescaled(self, delta: float) -> "LogConcave1D":
        """``f ∘ τ_δ`` with ``τ_δ(t) = δ t``."""
        lo, hi = self.support
        dlog = None if self.dlog_f is None else (lambda t: delta * self.dlog_f(delta * np.asarray(t)))
        return LogConcave1D(
            lambda t: self.log_f(delta * np.asarray(t)),
            dlog,
            (lo / delta, hi / delta),
            f"{self.label}∘τ_{delta:g}",
            check=False,
        )


def _on_support(lo, hi, expr):
    def log_f(t):
        t = np.asarray(t, dtype=float)
        with np.errstate(all="ignore"):
            out = np.where((t >= lo) & (t <= hi), expr(t), -np.inf)
        return out if out.ndim else float(out)

    return log_f


_SQRT3 = math.sqrt(3.0)
_SQRT2 = math.sqrt(2.0)

NAMED_DENSITIES: dict[str, Callable[[], LogConcave1D]] = {
    "exp": lambda: LogConcave1D(
        _on_support(0.0, math.inf, lambda t: -t),
        lambda t: -np.ones_like(np.asarray(t, dtype=float)),
        (0.0, math.inf),
        "exp",
        lambda rng, size: rng.exponential(size=size),
    ),
    "half_gaussian": lambda: LogConcave1D(
        _on_support(0.0, math.inf, lambda t: -0.5 * t * t + 0.5 * math.log(2 / math.pi)),
        lambda t: -np.asarray(t, dtype=float),
        (0.0, math.inf),
        "half_gaussian",
        lambda rng, size: np.abs(rng.standard_normal(size)),
    ),
    "gaussian": lambda: LogConcave1D(
        _on_support(-math.inf, math.inf, lambda t: -0.5 * t * t - 0.5 * math.log(2 * math.pi)),
        lambda t: -np.asarray(t, dtype=float),
        (-math.inf, math.inf),
        "gaussian",
        lambda rng, size: rng.standard_normal(size),
    ),
    "uniform": lambda: LogConcave1D(
        _on_support(-_SQRT3, _SQRT3, lambda t: np.full_like(t, -math.log(2 * _SQRT3))),
        lambda t: np.zeros_like(np.asarray(t, dtype=float)),
        (-_SQRT3, _SQRT3),
        "uniform",
        lambda rng, size: rng.uniform(-_SQRT3, _SQRT3, size),
    ),
    # Laplace law with unit variance
    "two_sided_exp": lambda: LogConcave1D(
        _on_support(-math.inf, math.inf, lambda t: -_SQRT2 * np.abs(t) - math.log(_SQRT2)),
        lambda t: -_SQRT2 * np.sign(t),
        (-math.inf, math.inf),
        "two_sided_exp",
        lambda rng, size: rng.laplace(scale=1 / _SQRT2, size=size),
    ),
}


def named(label: str) -> LogConcave1D:
    try:
        return NAMED_DENSITIES[label]()
    except KeyError:
        raise KeyError(f"unknown density {label!r}; available: {sorted(NAMED_DENSITIES)}") from None


# ---------------------------------------------------------------------------
# t_p(f)


def t_p_solve(f: LogConcave1D, p: float, tol: float = 1e-10) -> float:
    """The unique ``t > 0`` with ``f(t) > 0`` and ``t (log f)'(t) = -(p - 1)``.

    ``h(t) = t (log f)'(t) + (p - 1)`` is strictly decreasing where ``f > 0``;
    we bracket its sign change by doubling/halving from ``t = 1`` and hand the
    bracket to Brent's method.
    """
    if p <= 1:
        raise ValueError("p must exceed 1")
    lo, hi = f.support
    lo = max(lo, 0.0)

    def h(t):
        return float(t * f.dlog(t) + (p - 1))

    def alive(t):
        return lo < t < hi and math.isfinite(float(f.log_f(t)))

    start = 1.0
    if not alive(start):
        start = 0.5 * (lo + hi) if math.isfinite(hi) else lo + 1.0
        if not alive(start):
            raise RootNotFound(f"cannot find a point of positivity of {f.label or 'f'}")

    trail = [(start, h(start))]
    # walk right until h <= 0, never leaving the region where f > 0
    b = start
    while trail[-1][1] > 0:
        nb = 2.0 * b
        if not alive(nb):
            nb = 0.5 * (b + hi) if math.isfinite(hi) else b + 0.5 * (nb - b)
        if nb - b <= 1e-13 * max(1.0, b) or not alive(nb):
            raise RootNotFound(
                f"no sign change of t*(log f)'(t) + (p-1) inside the support of {f.label or 'f'}"
            )
        b = nb
        trail.append((b, h(b)))
    # walk left until h > 0
    a = start
    while trail[0][1] <= 0:
        a = 0.5 * a if a > lo else a
        if a <= max(lo, 1e-300) or not alive(a):
            raise RootNotFound(f"no positive root near the origin for {f.label or 'f'}")
        trail.insert(0, (a, h(a)))
    values = [v for _, v in trail]
    if any(v2 > v1 + 1e-9 * max(1.0, abs(v1)) for v1, v2 in zip(values, values[1:])):
        raise LogConcavityError("t*(log f)'(t) is not decreasing: f is not log-concave")
    a = max(t for t, v in trail if v > 0)
    b = min(t for t, v in trail if v <= 0)
    if h(b) == 0:
        return float(b)
    return float(optimize.brentq(h, a, b, xtol=1e-300, rtol=max(tol, 4 * np.finfo(float).eps), maxiter=500))


def rigidity_violations(f: LogConcave1D, n: int, alphas=(1.5, 2.0), points: int = 100) -> dict:
    """Worst violations of the two pointwise bounds tied to ``t_n(f)``.

    * ``f(t) >= e^{-(n-1)} f(0)`` on ``[0, t_n]``
    * ``f(t) <= e^{-(α-1)(n-1)} f(t_n)`` for ``t >= α t_n``

    Violations are measured on the log scale; values ``<= 0`` mean the bound holds.
    """
    tn = t_p_solve(f, n)
    lo, hi = f.support
    grid = np.linspace(max(lo, 0.0), tn, points)
    log0 = float(f.log_f(max(lo, 0.0)))
    lower = (log0 - (n - 1)) - f.log_f(grid)
    out = {"t_n": tn, "plateau": float(np.max(lower[np.isfinite(lower)], initial=-np.inf))}
    logtn = float(f.log_f(tn))
    for alpha in alphas:
        start = alpha * tn
        end = min(hi, start * 4 + 10.0)
        if start >= hi:
            out[f"decay_{alpha:g}"] = -np.inf
            continue
        tail = np.linspace(start, end, points)
        excess = f.log_f(tail) - (logtn - (alpha - 1) * (n - 1))
        out[f"decay_{alpha:g}"] = float(np.max(excess[np.isfinite(excess)], initial=-np.inf))
    return out


# ---------------------------------------------------------------------------
# shell mass


@dataclass(frozen=True)
class ShellMassResult:
    t_n: float
    ratio: float
    n: int
    epsilon: float


def _radial_log_integrand(f: LogConcave1D, n: int, tn: float):
    peak = (n - 1) * math.log(tn) + float(f.log_f(tn))

    def log_phi(t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = (n - 1) * np.log(t) + f.log_f(t) - peak
        return np.where(t > 0, out, -np.inf)

    return log_phi


def _upper_cutoff(log_phi, tn, hi, floor=-60.0):
    """A radius past which ``t^{n-1} f(t)`` is below ``e^{floor}`` times its peak."""
    alpha = 1.25
    while alpha * tn < hi:
        if log_phi(alpha * tn) < floor:
            return alpha * tn
        alpha *= 1.25
    return hi


def _integrate_peak(log_phi, a, b, tn, width, tol):
    if b <= a:
        return 0.0
    marks = tn + width * np.array([-8, -4, -2, -1, 0, 1, 2, 4, 8], dtype=float)
    marks = marks[(marks > a) & (marks < b)]
    edges = np.concatenate([[a], marks, [b]])
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, _ = integrate.quad(lambda t: math.exp(float(log_phi(t))), lo, hi, epsabs=0.0, epsrel=tol, limit=400)
        total += val
    return total


def shell_mass_ratio(f: LogConcave1D, n: int, eps: float, tol: float = 1e-10) -> ShellMassResult:
    """Fraction of ``∫_0^∞ t^{n-1} f(t) dt`` carried by ``[t_n(1-ε), t_n(1+ε)]``."""
    if n < 2:
        raise ValueError("n must be at least 2")
    if not 0.0 <= eps <= 1.0:
        raise ValueError("eps must lie in [0, 1]")
    tn = t_p_solve(f, n)
    lo, hi = f.support
    lo = max(lo, 0.0)
    log_phi = _radial_log_integrand(f, n, tn)
    top = _upper_cutoff(log_phi, tn, hi)
    width = tn / math.sqrt(n - 1)
    rtol = max(tol, 1e-13)
    total = _integrate_peak(log_phi, lo, top, tn, width, rtol)
    shell = _integrate_peak(log_phi, max(lo, tn * (1 - eps)), min(top, tn * (1 + eps)), tn, width, rtol)
    if not (math.isfinite(total) and total > 0):
        raise ArithmeticError("quadrature of t^(n-1) f(t) did not converge")
    return ShellMassResult(tn, float(min(1.0, max(0.0, shell / total))), n, eps)


# ---------------------------------------------------------------------------
# concavity of φ ∘ Φ⁻¹


@dataclass(frozen=True)
class ConcavityResult:
    passed: bool
    worst_defect: float
    grid_size: int


def bobkov_concavity_check(f: LogConcave1D, n: int, grid_size: int = 10_000) -> ConcavityResult:
    """Check numerically that ``ψ = φ ∘ Φ_φ⁻¹`` is concave on (0, 1), ``φ(t) = t^{n-1} f(t)``.

    ``φ`` is normalized to a probability density, its cumulative ``Φ_φ`` is
    tabulated on a fine grid and inverted with a monotone cubic; the defect
    ``(ψ(a) + ψ(b))/2 - ψ((a+b)/2)`` over consecutive triples must stay
    below ``CONCAVITY_SLACK``.
    """
    tn = t_p_solve(f, n)
    lo, hi = f.support
    lo = max(lo, 0.0)
    log_phi = _radial_log_integrand(f, n, tn)
    top = _upper_cutoff(log_phi, tn, hi, floor=-45.0)
    ts = np.linspace(lo, top, 40 * grid_size + 1)
    phi = np.exp(log_phi(ts))
    cum = integrate.cumulative_simpson(phi, x=ts, initial=0.0)
    cum = np.maximum.accumulate(cum)
    total = cum[-1]
    cdf = cum / total
    dens = phi / total
    # increments below rounding level would blow up the interpolant's slopes
    keep = np.concatenate([[True], np.diff(cdf) > 1e-15])
    inverse = PchipInterpolator(cdf[keep], ts[keep])
    s = np.linspace(0.0, 1.0, grid_size + 2)[1:-1]
    psi = np.interp(inverse(s), ts, dens)
    defect = 0.5 * (psi[:-2] + psi[2:]) - psi[1:-1]
    worst = float(np.max(defect))
    return ConcavityResult(worst <= CONCAVITY_SLACK, worst, grid_size)


# ---------------------------------------------------------------------------
# sample-based property checks


def _moment_gate(x: np.ndarray, isotropic: bool):
    m = x.size
    if m < 2:
        raise GateError("need at least two samples")
    mean = float(x.mean())
    sd = float(x.std())
    if abs(mean) > 5 * sd / math.sqrt(m):
        raise GateError(f"samples are not centered: mean {mean:.4g} exceeds 5 standard errors")
    if isotropic:
        var = sd * sd
        se = float(np.std((x - mean) ** 2)) / math.sqrt(m)
        if abs(var - 1.0) > 5 * se:
            raise GateError(f"samples do not have unit variance: {var:.4g}")


@dataclass(frozen=True)
class HensleyResult:
    g0: float
    sup_g: float
    slack: float
    passed: bool


def hensley_check(samples=None, density: Callable | None = None, bin_width: float = 0.05,
                  span: float = 6.0, gate: bool = True) -> HensleyResult:
    """Estimate ``g(0)`` and ``sup g`` of an isotropic 1-D law and test ``1/10 <= g(0) <= sup g <= 1``.

    With ``samples`` the estimates come from a histogram with bins centered
    on multiples of ``bin_width`` and slack ``3 sqrt(sup ĝ / (m w))``; with a
    ``density`` callable they are exact evaluations on a dense grid.
    """
    if density is not None:
        grid = np.linspace(-span, span, 240_001)
        vals = np.asarray(density(grid), dtype=float)
        g0 = float(density(np.array([0.0]))[0])
        sup = float(np.max(vals))
        slack = 0.0
    else:
        x = np.asarray(samples, dtype=float).ravel()
        if gate:
            _moment_gate(x, isotropic=True)
        half = bin_width / 2
        edges = np.arange(-span - half, span + half + bin_width / 2, bin_width)
        counts, _ = np.histogram(x, bins=edges)
        g_hat = counts / (x.size * bin_width)
        g0 = float(g_hat[np.argmin(np.abs(edges[:-1] + half))])
        sup = float(g_hat.max())
        slack = 3.0 * math.sqrt(sup / (x.size * bin_width))
    passed = (0.1 - slack <= g0) and (sup <= 1.0 + slack)
    return HensleyResult(g0, sup, slack, bool(passed))


@dataclass(frozen=True)
class BorellResult:
    t: np.ndarray
    tail: np.ndarray
    bound: np.ndarray
    slack: np.ndarray
    passed: bool

    @property
    def first_failure(self):
        bad = self.tail > self.bound + self.slack
        return float(self.t[np.argmax(bad)]) if bad.any() else None


def borell_tail_check(samples, conf: float = 0.999, grid=None) -> BorellResult:
    """Compare ``P(F >= t E)`` with ``2 e^{-t/10}``, ``E = sqrt(mean F²)``.

    ``samples`` are the nonnegative values ``F(X)`` of a seminorm. The slack at
    each ``t`` is a one-sided normal-approximation binomial bound at level
    ``conf``, floored at one sample's worth of variance.
    """
    from scipy.stats import norm

    x = np.sort(np.abs(np.asarray(samples, dtype=float).ravel()))
    m = x.size
    grid = np.arange(0.0, 40.0 + 1e-9, 0.5) if grid is None else np.asarray(grid, dtype=float)
    scale = math.sqrt(float(np.mean(x * x)))
    tail = 1.0 - np.searchsorted(x, grid * scale, side="left") / m
    bound = np.minimum(2.0 * np.exp(-grid / 10.0), 1.0)
    var = np.maximum(bound * (1 - bound), 1.0 / m)
    slack = norm.ppf(conf) * np.sqrt(var / m)
    return BorellResult(grid, tail, bound, slack, bool(np.all(tail <= bound + slack)))


def grunbaum_check(samples, gate: bool = True) -> tuple[float, bool]:
    """Empirical ``P(X < 0)`` for a centered marginal against ``1 - 1/e + 3/(2√m)``."""
    x = np.asarray(samples, dtype=float).ravel()
    if gate:
        _moment_gate(x, isotropic=False)
    value = float(np.mean(x < 0))
    return value, value <= GRUNBAUM_CONSTANT + 1.5 / math.sqrt(x.size)


# ---------------------------------------------------------------------------
# gaussian convolution


def gaussian_density(x, v: float = 1.0):
    x = np.asarray(x, dtype=float)
    return np.exp(-x * x / (2 * v)) / math.sqrt(2 * math.pi * v)


def convolve_gaussian_1d(density: Callable, v: float, grid, support=(-math.inf, math.inf),
                         tol: float = 1e-10) -> np.ndarray:
    """Tabulate ``(f * γ_{1,v})(x)`` on ``grid`` by adaptive quadrature.

    ``density`` is a normalized scalar-or-array callable supported in ``support``.
    """
    if v <= 0:
        raise ValueError("variance must be positive")
    lo, hi = map(float, support)
    reach = 40.0 * math.sqrt(v)
    out = np.empty(len(grid))
    for i, x in enumerate(np.asarray(grid, dtype=float)):
        a, b = max(lo, x - reach), min(hi, x + reach)
        if a >= b:
            out[i] = 0.0
            continue
        pts = [p for p in (x, 0.0) if a < p < b]
        val, _ = integrate.quad(
            lambda y: float(density(y)) * math.exp(-(x - y) ** 2 / (2 * v)),
            a, b, points=pts or None, epsabs=tol * 1e-2, epsrel=1e-10, limit=400,
        )
        out[i] = val / math.sqrt(2 * math.pi * v)
    return out
