"""Experiment runners: sample, standardize, project, measure, assert.

Every runner takes an :class:`ExperimentConfig` and returns an
:class:`ExperimentReport`. Random streams are carved out of the config seed
with fixed offsets, so a report depends only on the config.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .. import __version__
from ..isotropy import AffineMap, empirical_moments, isotropy_report, whitening_map
from ..logconcave1d import GateError
from ..marginals import (
    DEFAULT_BIN_WIDTH,
    KD_BIN_WIDTH,
    ecdf,
    histogram_1d,
    histogram_kd,
    mf_many,
)
from ..metrics import (
    T_GRID,
    binned_tv,
    binned_tv_kd,
    kolmogorov_distance,
    kolmogorov_sorted,
    radial_binned_tv,
    t_distance_profile,
)
from ..model import (
    Ball,
    Cube,
    Gaussian,
    Product1D,
    ProductBody,
    RandomSeed,
    Simplex,
    UniformOn,
    density_from_dict,
    is_unconditional,
)
from ..samplers import (
    HitAndRunConfig,
    iter_chunks,
    iter_draw,
    iter_frames,
    sample_directions,
    sample_frames,
    sample_hit_and_run,
    sphere_draw,
)
from .config import ExperimentConfig
from .report import ExperimentReport

# stream offsets relative to the config seed; the main sample uses offset 0
PILOT_WHITEN = 11
GATE = 12
CONTROL = 13
DIRECTIONS = 101
WITHIN = 103
GLOBAL = 104
BOOT = 105
HAR = 106
JL_FRAMES = 1000
DF_PAIRS = 2000

GATE_ROWS = 100_000
BOOTSTRAP_REPS = 1000
BERRY_ESSEEN_IID = 0.4748
Z_SEPARATION = 3.0
HIST_SPAN = 6.0

_ISOTROPIC_1D = {"gaussian", "uniform", "two_sided_exp"}


class ExperimentError(ValueError):
    """The experiment cannot run on this input (as opposed to an assertion failing)."""


# ---------------------------------------------------------------------------
# shared pieces


def known_isotropic(density) -> bool:
    """True when the density is isotropic by construction, so no whitening is needed."""
    if isinstance(density, Gaussian):
        return density.variance == 1.0
    if isinstance(density, Product1D):
        return all(lab in _ISOTROPIC_1D for lab in density.labels)

    def body_ok(b) -> bool:
        if isinstance(b, Cube):
            return math.isclose(b.half_side, math.sqrt(3.0))
        if isinstance(b, Ball):
            return math.isclose(b.radius, math.sqrt(b.dim + 2.0))
        if isinstance(b, Simplex):
            return b.standardize
        if isinstance(b, ProductBody):
            return all(body_ok(p) for p in b.parts)
        return False

    return isinstance(density, UniformOn) and body_ok(density.body)


@dataclass
class Prepared:
    """A density in a fixed dimension together with the affine map that makes it isotropic."""

    density: object
    n: int
    seed: RandomSeed
    amap: AffineMap | None
    gate: dict

    def chunks(self, m: int, workers: int | None = None):
        for chunk in iter_chunks(self.density, m, self.seed, workers):
            yield chunk if self.amap is None else self.amap(chunk)

    def sample(self, m: int, workers: int | None = None) -> np.ndarray:
        out = np.empty((m, self.n))
        lo = 0
        for chunk in self.chunks(m, workers):
            out[lo:lo + chunk.shape[0]] = chunk
            lo += chunk.shape[0]
        return out


def _pilot(density, rows, seed, workers, amap=None):
    x = np.concatenate(list(iter_chunks(density, rows, seed, workers)))
    return x if amap is None else amap(x)


def standardize(density, n: int, rows: int, seed: RandomSeed, policy: str = "auto",
                workers: int | None = None) -> Prepared:
    """Whiten ``density`` unless it is isotropic by construction, then gate it.

    The whitening map and the gate use two independent pilot samples of
    ``rows`` rows, so the main sample (stream ``seed``) stays untouched.
    ``policy`` is ``"auto"``, ``"always"`` or ``"never"``.
    """
    if policy not in ("auto", "always", "never"):
        raise ExperimentError(f"whitening policy must be auto, always or never, got {policy!r}")
    rows = max(rows, n + 1)
    amap = None
    if policy == "always" or (policy == "auto" and not known_isotropic(density)):
        amap = whitening_map(empirical_moments(_pilot(density, rows, seed.substream(PILOT_WHITEN), workers)))
    rep = isotropy_report(_pilot(density, rows, seed.substream(GATE), workers, amap))
    gate = rep.to_dict() | {"whitened": amap is not None}
    if amap is not None:
        gate["map_fingerprint"] = amap.fingerprint()
        gate["condition_number"] = amap.condition_number
    if not rep.passes():
        raise GateError(
            f"isotropy gate failed at n={n}: max |mean| {rep.max_abs_mean:.3g}, "
            f"max |cov - I| {rep.max_cov_dev:.3g}, tolerance {rep.default_tolerance:.3g}"
        )
    return Prepared(density, n, seed, amap, gate)


def prepare(cfg: ExperimentConfig, n: int, density=None) -> Prepared:
    """:func:`standardize` the configured density at dimension ``n`` (``options.whiten`` picks the policy)."""
    density = density_from_dict(cfg.density, n) if density is None else density
    rows = min(cfg.m, int(cfg.options.get("gate_rows", GATE_ROWS)))
    return standardize(density, n, rows, cfg.seed, cfg.options.get("whiten", "auto"), cfg.workers)


def bootstrap_median_se(values, seed: RandomSeed, tag: int = 0, reps: int = BOOTSTRAP_REPS) -> float:
    values = np.asarray(values, dtype=float)
    rng = seed.substream(BOOT).generator(tag)
    idx = rng.integers(0, values.size, size=(reps, values.size))
    return float(np.std(np.median(values[idx], axis=1), ddof=1))


def separation(a: float, sa: float, b: float, sb: float, z: float = Z_SEPARATION) -> dict:
    """Is ``a - b`` more than ``z`` combined standard errors?"""
    gap = a - b
    sigma = math.hypot(sa, sb)
    return {"gap": gap, "sigma": sigma, "z": gap / sigma if sigma > 0 else math.inf, "passed": gap > z * sigma}


def binomial_se(p: float, m: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / m)


def _quantiles(values) -> dict:
    v = np.asarray(values, dtype=float)
    return {
        "median": float(np.median(v)),
        "p10": float(np.quantile(v, 0.1)),
        "p90": float(np.quantile(v, 0.9)),
        "p95": float(np.quantile(v, 0.95)),
        "max": float(v.max()),
        "min": float(v.min()),
    }


def _new_report(cfg: ExperimentConfig) -> ExperimentReport:
    return ExperimentReport(cfg.experiment, cfg.to_dict(), cfg.hash(), __version__)


def _eps_key(e: float) -> str:
    return f"{e:g}"


def per_direction_distances(x: np.ndarray, directions: np.ndarray, bin_width: float = DEFAULT_BIN_WIDTH):
    """Kolmogorov distance and binned TV to N(0, 1) of ``<X, θ>`` for each row θ."""
    ks = np.empty(directions.shape[0])
    tv = np.empty(directions.shape[0])
    for lo in range(0, directions.shape[0], 64):
        proj = x @ directions[lo:lo + 64].T
        for j in range(proj.shape[1]):
            col = proj[:, j]
            ks[lo + j] = kolmogorov_sorted(np.sort(col))
            tv[lo + j] = binned_tv(histogram_1d(col, -HIST_SPAN, HIST_SPAN, bin_width))
    return ks, tv


# ---------------------------------------------------------------------------
# thin shell


def _shell_counts(chunks, n: int, eps: np.ndarray):
    counts = np.zeros(eps.size, dtype=np.int64)
    m = 0
    for chunk in chunks:
        dev = np.abs(np.linalg.norm(chunk, axis=1) / math.sqrt(n) - 1.0)
        counts += np.count_nonzero(dev[:, None] >= eps[None, :], axis=0)
        m += chunk.shape[0]
    return counts / m, m


def run_thin_shell(cfg: ExperimentConfig) -> ExperimentReport:
    """``P(| |X|/√n - 1 | >= ε)`` over an n sweep, with a decrease verdict per ε."""
    rep = _new_report(cfg)
    eps = np.array(sorted(float(e) for e in cfg.epsilon_grid))
    table = rep.table("thin_shell", ["n", "epsilon", "probability", "std_error", "m"])
    probs = {}
    gates = {}
    for n in cfg.dims:
        prep = prepare(cfg, n)
        gates[str(n)] = prep.gate
        p, m = _shell_counts(prep.chunks(cfg.m, cfg.workers), n, eps)
        probs[n] = p
        for e, pe in zip(eps, p):
            table.add(n, float(e), float(pe), binomial_se(pe, m), m)

    for j, e in enumerate(eps):
        key = _eps_key(e)
        rep.series(f"thin_shell_eps_{key}", cfg.dims, [float(probs[n][j]) for n in cfg.dims], "n", "probability")
        if e == 0.0:
            rep.check("certain_event_eps_0", all(probs[n][j] == 1.0 for n in cfg.dims))
            continue
        for a, b in zip(cfg.dims, cfg.dims[1:]):
            pa, pb = float(probs[a][j]), float(probs[b][j])
            sep = separation(pa, binomial_se(pa, cfg.m), pb, binomial_se(pb, cfg.m))
            rep.check(f"decreasing_eps_{key}_n_{a}_to_{b}", sep.pop("passed"), **sep)

    har = cfg.options.get("hit_and_run")
    if har:
        _hit_and_run_agreement(cfg, rep, eps, probs, har)
    rep.summary = {"gate": gates, "epsilon_grid": eps.tolist(), "dims": cfg.dims}
    return rep


def _hit_and_run_agreement(cfg, rep, eps, probs, har: dict):
    n = int(har.get("n", cfg.dims[0]))
    density = density_from_dict(cfg.density, n)
    if not isinstance(density, UniformOn):
        raise ExperimentError("the hit-and-run comparison needs a uniform density on a body")
    chains = int(har.get("chains", 10_000))
    hcfg = HitAndRunConfig(burn_in=har.get("burn_in"), thinning=har.get("thinning"), chains=chains)
    prep = prepare(cfg, n, density)
    batch = sample_hit_and_run(density.body, chains, cfg.seed.substream(HAR), hcfg, cfg.workers)
    x = batch.data if prep.amap is None else prep.amap(batch.data)
    p_har, _ = _shell_counts([x], n, eps)
    if n in probs:
        p_exact, m_exact = probs[n], cfg.m
    else:
        p_exact, m_exact = _shell_counts(prep.chunks(cfg.m, cfg.workers), n, eps)
    table = rep.table("hit_and_run", ["n", "epsilon", "hit_and_run", "exact", "z"])
    for e, ph, pe in zip(eps, p_har, p_exact):
        sigma = math.hypot(binomial_se(ph, chains), binomial_se(pe, m_exact))
        z = abs(ph - pe) / sigma if sigma > 0 else (0.0 if ph == pe else math.inf)
        table.add(n, float(e), float(ph), float(pe), z)
        rep.check(f"hit_and_run_agrees_eps_{_eps_key(e)}", z <= Z_SEPARATION, hit_and_run=float(ph),
                  exact=float(pe), sigma=sigma, z=z)


# ---------------------------------------------------------------------------
# one-dimensional marginals


def run_clt_marginal(cfg: ExperimentConfig) -> ExperimentReport:
    """Distances to N(0, 1) of ``<X, θ>`` over random directions, per n."""
    rep = _new_report(cfg)
    threshold = float(cfg.options.get("threshold", 0.01))
    floor = float(cfg.options.get("noise_floor", 0.005))
    control = bool(cfg.options.get("gaussian_control", True))
    per_dir = rep.table("per_direction", ["n", "direction", "kolmogorov", "binned_tv"])
    summary_t = rep.table("summary", ["n", "median_kolmogorov", "median_se", "p90_kolmogorov",
                                      "fraction_below_threshold", "median_binned_tv", "e1_kolmogorov"])
    medians = {}
    summary = {"threshold": threshold, "per_n": {}}
    for n in cfg.dims:
        prep = prepare(cfg, n)
        x = prep.sample(cfg.m, cfg.workers)
        dirs = sample_directions(n, cfg.direction_count, cfg.seed.substream(DIRECTIONS))
        ks, tv = per_direction_distances(x, dirs)
        for i, (a, b) in enumerate(zip(ks, tv)):
            per_dir.add(n, i, float(a), float(b))
        e1 = kolmogorov_sorted(np.sort(x[:, 0]))
        se = bootstrap_median_se(ks, cfg.seed, n)
        medians[n] = (float(np.median(ks)), se)
        frac = float(np.mean(ks <= threshold))
        summary_t.add(n, medians[n][0], se, float(np.quantile(ks, 0.9)), frac, float(np.median(tv)), e1)
        entry = {
            "kolmogorov": _quantiles(ks),
            "binned_tv": _quantiles(tv),
            "median_se": se,
            "fraction_below_threshold": frac,
            "e1_kolmogorov": e1,
            "gate": prep.gate,
        }
        if control:
            g = prepare(cfg, n, Gaussian(n))
            g = Prepared(g.density, n, cfg.seed.substream(CONTROL), None, g.gate)
            gks, gtv = per_direction_distances(g.sample(cfg.m, cfg.workers), dirs)
            entry["gaussian_control"] = {"kolmogorov": _quantiles(gks), "binned_tv": _quantiles(gtv)}
            rep.check(f"gaussian_control_noise_floor_n_{n}", np.median(gks) <= floor,
                      median=float(np.median(gks)), floor=floor)
        summary["per_n"][str(n)] = entry
    for a, b in zip(cfg.dims, cfg.dims[1:]):
        sep = separation(medians[a][0], medians[a][1], medians[b][0], medians[b][1])
        rep.check(f"median_kolmogorov_decreasing_n_{a}_to_{b}", sep.pop("passed"), **sep)
    rep.series("median_kolmogorov", cfg.dims, [medians[n][0] for n in cfg.dims], "n", "median_kolmogorov")
    rep.summary = summary
    return rep


def run_unconditional_diag(cfg: ExperimentConfig) -> ExperimentReport:
    """Distances to N(0, 1) of ``(X₁ + ... + Xₙ)/√n`` with a Berry–Esseen reference."""
    rep = _new_report(cfg)
    threshold = float(cfg.options.get("kolmogorov_threshold", 0.01))
    table = rep.table("diagonal", ["n", "kolmogorov", "binned_tv", "third_moment", "berry_esseen"])
    ks_by_n = []
    summary = {"threshold": threshold, "per_n": {}}
    for n in cfg.dims:
        density = density_from_dict(cfg.density, n)
        if not is_unconditional(density):
            raise ExperimentError(f"density {density.to_dict()['type']} is not unconditional")
        prep = prepare(cfg, n, density)
        sums = []
        third = 0.0
        for chunk in prep.chunks(cfg.m, cfg.workers):
            sums.append(chunk.sum(axis=1) / math.sqrt(n))
            third += float(np.sum(np.abs(chunk) ** 3))
        s = np.concatenate(sums)
        rho = third / (cfg.m * n)
        be = BERRY_ESSEEN_IID * rho / math.sqrt(n)
        ks = kolmogorov_distance(ecdf(s))
        tv = binned_tv(histogram_1d(s, -HIST_SPAN, HIST_SPAN, DEFAULT_BIN_WIDTH))
        table.add(n, ks, tv, rho, be)
        ks_by_n.append(ks)
        summary["per_n"][str(n)] = {"kolmogorov": ks, "binned_tv": tv, "third_moment": rho,
                                    "berry_esseen": be, "gate": prep.gate}
        rep.check(f"kolmogorov_below_threshold_n_{n}", ks <= threshold, kolmogorov=ks, threshold=threshold)
        rep.check(f"kolmogorov_below_berry_esseen_n_{n}", ks <= be, kolmogorov=ks, berry_esseen=be)
    summary["decreasing_in_n"] = bool(np.all(np.diff(ks_by_n) < 0))
    rep.series("kolmogorov", cfg.dims, ks_by_n, "n", "kolmogorov")
    rep.series("berry_esseen", cfg.dims, [summary["per_n"][str(n)]["berry_esseen"] for n in cfg.dims],
               "n", "berry_esseen")
    rep.summary = summary
    return rep


# ---------------------------------------------------------------------------
# k-dimensional marginals


def run_multidim_marginal(cfg: ExperimentConfig) -> ExperimentReport:
    """T-distance (and binned TV for k <= 2) of ``Proj_E X`` over random subspaces E.

    For k = 1 the subspaces are the directions of :func:`run_clt_marginal`
    and the T-distance is the exact Kolmogorov distance, so both pipelines
    report the same per-direction numbers.
    """
    rep = _new_report(cfg)
    threshold = float(cfg.options.get("t_threshold", 0.02))
    min_fraction = float(cfg.options.get("min_fraction", 0.95))
    summary = {"t_threshold": threshold, "min_fraction": min_fraction, "per_n": {}}
    for k in cfg.ks:
        if k > 3:
            rep.warnings.append(f"k={k} > 3: binned TV is unreliable, reporting T-distance only")
    for n in cfg.dims:
        prep = prepare(cfg, n)
        x = prep.sample(cfg.m, cfg.workers)
        summary["per_n"][str(n)] = {"gate": prep.gate}
        for k in cfg.ks:
            frames = sample_frames(n, k, cfg.subspace_count, cfg.seed.substream(DIRECTIONS))
            inner = None if k == 1 else sample_directions(k, cfg.direction_count, cfg.seed.substream(WITHIN))
            table = rep.table(f"subspaces_n{n}_k{k}", ["subspace", "t_distance", "binned_tv"])
            td = np.empty(cfg.subspace_count)
            tv = np.full(cfg.subspace_count, np.nan)
            for i, frame in enumerate(frames):
                y = x @ frame.T
                if k == 1:
                    td[i] = kolmogorov_sorted(np.sort(y[:, 0]))
                    tv[i] = binned_tv(histogram_1d(y, -HIST_SPAN, HIST_SPAN, DEFAULT_BIN_WIDTH))
                else:
                    td[i] = float(np.max(t_distance_profile(y, cfg.direction_count, T_GRID, directions=inner)))
                    if k == 2:
                        tv[i] = binned_tv_kd(histogram_kd(y, -HIST_SPAN, HIST_SPAN, KD_BIN_WIDTH))
                table.add(i, float(td[i]), None if np.isnan(tv[i]) else float(tv[i]))
            frac = float(np.mean(td <= threshold))
            entry = {"t_distance": _quantiles(td), "fraction_below_threshold": frac}
            if k <= 2:
                entry["binned_tv"] = _quantiles(tv)
            summary["per_n"][str(n)][f"k{k}"] = entry
            rep.check(f"t_distance_fraction_n_{n}_k_{k}", frac >= min_fraction, fraction=frac,
                      threshold=threshold, min_fraction=min_fraction)
    rep.summary = summary
    return rep


def df_bound(n: int, k: int) -> float:
    return 2.0 * (k + 3) / (n - k - 3)


def run_diaconis_freedman(cfg: ExperimentConfig) -> ExperimentReport:
    """TV between ``Proj_E X`` for X uniform on ``√n S^{n-1}`` and the standard gaussian in E.

    For k >= 2 the estimate compares radii with the χ_k law: both laws are
    rotation invariant inside E, so their total variation is that of the radii.
    """
    rep = _new_report(cfg)
    slack = float(cfg.options.get("slack", 0.02))
    pairs = cfg.options.get("pairs") or [[n, k] for n in cfg.dims for k in cfg.ks]
    table = rep.table("diaconis_freedman", ["n", "k", "tv_estimate", "bound", "vacuous", "product_binned_tv"])
    rows = []
    for i, (n, k) in enumerate(pairs):
        n, k = int(n), int(k)
        if n < k + 4:
            raise ExperimentError(f"need n >= k + 4, got n={n}, k={k}")
        frame = sample_frames(n, k, 1, cfg.seed.substream(DF_PAIRS + DIRECTIONS + i))[0]
        seed = cfg.seed.substream(DF_PAIRS + i)
        y = np.concatenate([c @ frame.T for c in iter_draw(sphere_draw(n), cfg.m, seed, cfg.workers)])
        if k == 1:
            tv = binned_tv(histogram_1d(y, -HIST_SPAN, HIST_SPAN, DEFAULT_BIN_WIDTH))
        else:
            tv = radial_binned_tv(y)
        product_tv = binned_tv_kd(histogram_kd(y, -HIST_SPAN, HIST_SPAN, KD_BIN_WIDTH)) if k <= 3 else None
        bound = df_bound(n, k)
        vacuous = bound >= 2.0
        table.add(n, k, tv, bound, vacuous, product_tv)
        rows.append({"n": n, "k": k, "tv": tv, "bound": bound, "vacuous": vacuous, "product_binned_tv": product_tv})
        rep.check(f"tv_below_bound_n_{n}_k_{k}", tv <= bound + slack, tv=tv, bound=bound, slack=slack,
                  vacuous=vacuous)
    rep.summary = {"pairs": rows, "slack": slack}
    return rep


def run_jl_check(cfg: ExperimentConfig) -> ExperimentReport:
    """Norm of a fixed vector under projection onto random k-dimensional subspaces."""
    rep = _new_report(cfg)
    n = cfg.dims[0]
    x = np.asarray(cfg.options.get("x", np.sqrt(n) * np.eye(n)[0]), dtype=float)
    if x.shape != (n,) or not np.any(x):
        raise ExperimentError(f"options.x must be a nonzero vector of length {n}")
    count = int(cfg.options.get("subspaces", 100_000))
    eps = np.array(sorted(float(e) for e in cfg.epsilon_grid))
    xx = float(x @ x)
    ratio_t = rep.table("ratio", ["k", "mean", "std_error", "expected"])
    dev_t = rep.table("deviation", ["k", "epsilon", "probability", "std_error"])
    probs = {}
    summary = {"n": n, "subspaces": count, "per_k": {}}
    for k in cfg.ks:
        r = np.concatenate([
            np.sum((f @ x) ** 2, axis=1) / xx for f in iter_frames(n, k, count, cfg.seed.substream(JL_FRAMES + k))
        ])
        mean, se = float(r.mean()), float(r.std(ddof=1) / math.sqrt(count))
        ratio_t.add(k, mean, se, k / n)
        rep.check(f"mean_ratio_k_{k}", abs(mean - k / n) <= Z_SEPARATION * se, mean=mean, expected=k / n, std_error=se)
        rel = np.abs(np.sqrt(r) - math.sqrt(k / n))
        p = np.count_nonzero(rel[:, None] >= eps[None, :] * math.sqrt(k / n), axis=0) / count
        probs[k] = p
        for e, pe in zip(eps, p):
            dev_t.add(k, float(e), float(pe), binomial_se(pe, count))
        summary["per_k"][str(k)] = {"mean": mean, "std_error": se, "deviation": dict(zip(map(_eps_key, eps), p))}
    for j, e in enumerate(eps):
        key = _eps_key(e)
        rep.series(f"deviation_eps_{key}", cfg.ks, [float(probs[k][j]) for k in cfg.ks], "k", "probability")
        if e == 0.0:
            rep.check("certain_event_eps_0", all(probs[k][j] == 1.0 for k in cfg.ks))
            continue
        for a, b in zip(cfg.ks, cfg.ks[1:]):
            pa, pb = float(probs[a][j]), float(probs[b][j])
            sep = separation(pa, binomial_se(pa, count), pb, binomial_se(pb, count))
            rep.check(f"deviation_decreasing_eps_{key}_k_{a}_to_{b}", sep.pop("passed"), **sep)
    rep.summary = summary
    return rep


# ---------------------------------------------------------------------------
# half-space mass concentration


def _within_oscillation(x, frames, inner, t_grid):
    """Range of ``M̂(θ, t)`` over the in-subspace directions, per subspace and t."""
    out = np.empty((frames.shape[0], t_grid.size))
    for i, frame in enumerate(frames):
        proj = (x @ frame.T) @ inner[i].T
        for j, t in enumerate(t_grid):
            mf = np.count_nonzero(proj <= t, axis=0) / x.shape[0]
            out[i, j] = mf.max() - mf.min()
    return out


def run_mf_concentration(cfg: ExperimentConfig) -> ExperimentReport:
    """Oscillation of ``θ ↦ M̂(θ, t)`` inside random low-dimensional subspaces, per n."""
    rep = _new_report(cfg)
    ell = cfg.ks[0]
    if ell > 3:
        raise ExperimentError(f"subspace dimension must be at most 3, got {ell}")
    t_grid = np.asarray(cfg.t_grid if cfg.t_grid is not None else [0.0], dtype=float)
    per_sub = int(cfg.options.get("within_directions", 50))
    n_global = int(cfg.options.get("global_directions", 1000))
    control = bool(cfg.options.get("gaussian_control", True))
    noise = 3.0 / math.sqrt(cfg.m)
    table = rep.table("oscillation", ["n", "t", "median_within", "median_se", "p90_within", "sphere_average",
                                      "median_global_pair", "median_global_group"])
    stats = {}
    summary = {"ell": ell, "noise_level": noise, "per_n": {}}
    inner = sample_directions(ell, cfg.subspace_count * per_sub, cfg.seed.substream(WITHIN))
    inner = inner.reshape(cfg.subspace_count, per_sub, ell)
    for n in cfg.dims:
        prep = prepare(cfg, n)
        x = prep.sample(cfg.m, cfg.workers)
        frames = sample_frames(n, ell, cfg.subspace_count, cfg.seed.substream(DIRECTIONS))
        osc = _within_oscillation(x, frames, inner, t_grid)
        glob = sample_directions(n, n_global, cfg.seed.substream(GLOBAL))
        entry = {"gate": prep.gate, "per_t": {}}
        if control:
            gx = Prepared(Gaussian(n), n, cfg.seed.substream(CONTROL), None, {}).sample(cfg.m, cfg.workers)
            gosc = _within_oscillation(gx, frames, inner, t_grid)
            del gx
        for j, t in enumerate(t_grid):
            mg = mf_many(x, glob, t)
            pair = np.abs(mg[0::2] - mg[1::2][: mg[0::2].size])
            groups = mg[: (n_global // per_sub) * per_sub].reshape(-1, per_sub)
            group_osc = groups.max(axis=1) - groups.min(axis=1) if groups.size else np.array([np.nan])
            med = float(np.median(osc[:, j]))
            se = bootstrap_median_se(osc[:, j], cfg.seed, 1000 * n + j)
            stats[(n, j)] = (med, se)
            table.add(n, float(t), med, se, float(np.quantile(osc[:, j], 0.9)), float(mg.mean()),
                      float(np.median(pair)), float(np.median(group_osc)))
            e = {
                "within": _quantiles(osc[:, j]),
                "median_se": se,
                "sphere_average": float(mg.mean()),
                "global_pair_median": float(np.median(pair)),
                "global_group_median": float(np.median(group_osc)),
                "within_below_global_pair": med < float(np.median(pair)),
                "within_below_global_group": med < float(np.median(group_osc)),
            }
            if control:
                gmed = float(np.median(gosc[:, j]))
                e["gaussian_control_median"] = gmed
                rep.check(f"gaussian_control_noise_level_n_{n}_t_{_eps_key(t)}", gmed <= noise,
                          median=gmed, noise_level=noise)
            entry["per_t"][_eps_key(t)] = e
        summary["per_n"][str(n)] = entry
        del x
    for j, t in enumerate(t_grid):
        key = _eps_key(t)
        rep.series(f"median_oscillation_t_{key}", cfg.dims, [stats[(n, j)][0] for n in cfg.dims],
                   "n", "median_oscillation")
        for a, b in zip(cfg.dims, cfg.dims[1:]):
            sep = separation(*stats[(a, j)], *stats[(b, j)])
            rep.check(f"oscillation_decreasing_t_{key}_n_{a}_to_{b}", sep.pop("passed"), **sep)
    rep.summary = summary
    return rep


RUNNERS = {
    "thin_shell": run_thin_shell,
    "clt_marginal": run_clt_marginal,
    "unconditional_diag": run_unconditional_diag,
    "multidim_marginal": run_multidim_marginal,
    "diaconis_freedman": run_diaconis_freedman,
    "jl_check": run_jl_check,
    "mf_concentration": run_mf_concentration,
}


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    start = time.perf_counter()
    report = RUNNERS[cfg.experiment](cfg)
    report.wall_clock = time.perf_counter() - start
    return report
