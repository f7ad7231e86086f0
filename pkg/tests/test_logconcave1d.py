import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import trapezoid

from clt_lab.logconcave1d import (
    GRUNBAUM_CONSTANT,
    NAMED_DENSITIES,
    GateError,
    LogConcave1D,
    LogConcavityError,
    RootNotFound,
    bobkov_concavity_check,
    borell_tail_check,
    convolve_gaussian_1d,
    gaussian_density,
    grunbaum_check,
    hensley_check,
    named,
    rigidity_violations,
    shell_mass_ratio,
    t_p_solve,
)
from clt_lab.samplers import sample_ball, sample_cube, sample_simplex

# regularized incomplete gamma values, mpmath at 30 digits
GAMMA100_SHELL = {0.1: 0.679449355760174291, 0.2: 0.951051816819997242,
                  0.5: 0.999990005414654332, 1.0: 0.999999999999994914}
CHI10_SHELL_02 = 0.609090906128415832
SIMPLEX10_VERTEX_HALF = 0.614456710570468253  # 1 - (10/11)^10

EXP = named("exp")
HALF_GAUSS = LogConcave1D(lambda t: -0.5 * np.asarray(t) ** 2, None, (0.0, math.inf), "e^{-t^2/2}")


@pytest.mark.parametrize("p", [2, 5, 10, 100])
def test_t_p_closed_forms(p):
    assert t_p_solve(EXP, p) == pytest.approx(p - 1, rel=1e-8)
    # no analytic derivative here: exercises the central difference
    assert t_p_solve(HALF_GAUSS, p) == pytest.approx(math.sqrt(p - 1), rel=1e-8)


@pytest.mark.parametrize("delta", [0.25, 3.0, 10.0])
@pytest.mark.parametrize("p", [2, 10, 100])
def test_t_p_scaling(delta, p):
    assert t_p_solve(EXP.rescaled(delta), p) == pytest.approx(t_p_solve(EXP, p) / delta, rel=1e-8)
    assert t_p_solve(EXP.rescaled(3.0), 10) == pytest.approx(3.0, rel=1e-8)


def test_t_p_errors():
    with pytest.raises(ValueError):
        t_p_solve(EXP, 1.0)
    # no positive mass on t > 0
    left = LogConcave1D(lambda t: np.where(np.asarray(t) <= 0, np.asarray(t), -np.inf),
                        None, (-math.inf, 0.0), "left")
    with pytest.raises(RootNotFound):
        t_p_solve(left, 3)
    with pytest.raises(RootNotFound):
        t_p_solve(named("uniform"), 3)


def test_constructor_rejects_convex_log():
    with pytest.raises(LogConcavityError):
        LogConcave1D(lambda t: np.asarray(t) ** 2 / 4, None, (0.0, 1.0), "bump")
    with pytest.raises(ValueError):
        LogConcave1D(lambda t: -np.asarray(t), None, (1.0, 1.0))


def test_named_densities():
    for label in NAMED_DENSITIES:
        f = named(label)
        assert f.mass() == pytest.approx(1.0, abs=1e-8)
    with pytest.raises(KeyError):
        named("cauchy")


@pytest.mark.parametrize("eps", sorted(GAMMA100_SHELL))
def test_shell_mass_matches_incomplete_gamma(eps):
    res = shell_mass_ratio(EXP, 100, eps)
    assert res.t_n == pytest.approx(99.0, rel=1e-10)
    assert res.ratio == pytest.approx(GAMMA100_SHELL[eps], abs=1e-6)


def test_shell_mass_chi():
    assert shell_mass_ratio(HALF_GAUSS, 10, 0.2).ratio == pytest.approx(CHI10_SHELL_02, abs=1e-6)


@pytest.mark.parametrize("f", [EXP, HALF_GAUSS, named("two_sided_exp")], ids=lambda f: f.label)
def test_shell_mass_monotone(f):
    n = 50
    grid = np.linspace(0.0, 1.0, 10)
    r = [shell_mass_ratio(f, n, e).ratio for e in grid]
    assert r[0] == 0.0
    assert all(b >= a - 1e-9 for a, b in zip(r, r[1:]))
    assert r[-1] >= 0.999


def test_shell_mass_large_n_does_not_overflow():
    res = shell_mass_ratio(EXP, 2000, 0.1)
    assert 0.99 < res.ratio <= 1.0


def test_shell_mass_rejects_bad_input():
    with pytest.raises(ValueError):
        shell_mass_ratio(EXP, 1, 0.1)
    with pytest.raises(ValueError):
        shell_mass_ratio(EXP, 10, 1.5)


@pytest.mark.parametrize("f,n", [(EXP, 10), (HALF_GAUSS, 3), (EXP, 100)])
def test_bobkov_concavity(f, n):
    res = bobkov_concavity_check(f, n)
    assert res.passed, res.worst_defect


@pytest.mark.parametrize("label", sorted(NAMED_DENSITIES))
@pytest.mark.parametrize("n", [2, 10, 50])
def test_pointwise_bounds_around_t_n(label, n):
    f = named(label)
    try:
        v = rigidity_violations(f, n)
    except RootNotFound:
        # the uniform law has no t_n once t_n would leave its support
        assert label == "uniform"
        return
    assert v["plateau"] <= 1e-9
    assert v["decay_1.5"] <= 1e-9
    assert v["decay_2"] <= 1e-9


def test_hensley_examples():
    rng = np.random.default_rng(0)
    m = 1_000_000
    g = hensley_check(rng.standard_normal(m))
    assert g.passed and g.g0 == pytest.approx(1 / math.sqrt(2 * math.pi), abs=0.005)
    u = hensley_check(rng.uniform(-math.sqrt(3), math.sqrt(3), m))
    assert u.passed and u.g0 == pytest.approx(1 / (2 * math.sqrt(3)), abs=0.005)
    lap = hensley_check(rng.laplace(scale=1 / math.sqrt(2), size=m))
    # the bin around 0 averages the cusp, so it sits a little below 1/√2
    assert lap.passed and lap.sup_g == pytest.approx(1 / math.sqrt(2), abs=0.02)
    exact = hensley_check(density=named("two_sided_exp"))
    assert exact.sup_g == pytest.approx(1 / math.sqrt(2), abs=1e-12)


def test_hensley_gate():
    with pytest.raises(GateError):
        hensley_check(np.random.default_rng(1).standard_normal(10_000) * 3)


def test_borell_passes_for_log_concave():
    cube = sample_cube(20, 200_000, 2).data
    assert borell_tail_check(np.abs(cube[:, 0])).passed
    ball = sample_ball(20, 200_000, 3).data
    assert borell_tail_check(np.linalg.norm(ball, axis=1)).passed


def test_borell_heavy_tail_fails():
    # a spike of 25 far-out values among 10^6: the tail stays at 2.5e-5 while
    # the envelope falls well below it before t = 400
    x = np.concatenate([np.random.default_rng(4).standard_normal(1_000_000 - 25), np.full(25, 2_000.0)])
    res = borell_tail_check(x, grid=np.arange(0.0, 400.0, 1.0))
    assert not res.passed
    assert 100 < res.first_failure < 400


def test_borell_t_distribution_is_not_caught_on_default_grid():
    # Chebyshev: P(|X| >= t E) <= 1/t² < 2 e^{-t/10} on the whole default grid
    x = np.random.default_rng(5).standard_t(3, 1_000_000)
    assert borell_tail_check(x).passed


def test_grunbaum_examples():
    assert GRUNBAUM_CONSTANT == pytest.approx(0.632120558828557678, abs=1e-10)
    v, ok = grunbaum_check(np.random.default_rng(6).standard_normal(100_000))
    assert ok and v == pytest.approx(0.5, abs=0.01)
    # halfspace through the centroid facing the vertex at the origin
    n, m = 10, 1_000_000
    x = sample_simplex(n, m, 7).data
    p = -(x - 1.0 / (n + 1)).sum(axis=1)
    v, ok = grunbaum_check(p)
    se = math.sqrt(SIMPLEX10_VERTEX_HALF * (1 - SIMPLEX10_VERTEX_HALF) / m)
    assert ok and v < GRUNBAUM_CONSTANT
    assert v == pytest.approx(SIMPLEX10_VERTEX_HALF, abs=4 * se)
    with pytest.raises(GateError):
        grunbaum_check(np.random.default_rng(8).standard_normal(10_000) + 1.0)


def test_zero_versus_sup_on_centered_marginal():
    # f(0) >= e^{-1} sup f in one dimension; the simplex vertex marginal is skewed
    n = 10
    x = sample_simplex(n, 1_000_000, 9).data
    p = (x - 1.0 / (n + 1)).sum(axis=1)
    p /= p.std()
    h = hensley_check(p)
    assert h.g0 >= math.exp(-1) * h.sup_g - h.slack


def test_convolution_examples():
    grid = np.linspace(-6, 6, 49)
    narrow = lambda y: np.where(np.abs(y) <= 1e-3, 500.0, 0.0)  # noqa: E731
    out = convolve_gaussian_1d(narrow, 1.0, grid, support=(-1e-3, 1e-3))
    assert np.max(np.abs(out - gaussian_density(grid))) <= 1e-3
    out = convolve_gaussian_1d(gaussian_density, 1.0, grid)
    assert np.max(np.abs(out - gaussian_density(grid, 2.0))) <= 1e-8
    fine = np.linspace(-20, 20, 4001)
    mass = trapezoid(convolve_gaussian_1d(named("uniform"), 1.0, fine,
                                             support=(-math.sqrt(3), math.sqrt(3))), fine)
    assert mass == pytest.approx(1.0, abs=1e-7)
    with pytest.raises(ValueError):
        convolve_gaussian_1d(gaussian_density, 0.0, grid)


def test_convolution_stays_log_concave():
    grid = np.linspace(-5, 5, 201)
    log_g = np.log(convolve_gaussian_1d(named("uniform"), 0.5, grid, support=(-math.sqrt(3), math.sqrt(3))))
    assert np.all(np.diff(log_g, 2) <= 1e-9)


@given(st.floats(0.1, 20.0), st.integers(2, 200))
def test_t_p_scaling_property(delta, p):
    assert t_p_solve(EXP.rescaled(delta), p) == pytest.approx((p - 1) / delta, rel=1e-8)
