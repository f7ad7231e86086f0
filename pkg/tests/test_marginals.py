import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from clt_lab.marginals import (
    borell_envelope,
    curve_properties,
    ecdf,
    empirical_Mf,
    empirical_Mf_curve,
    histogram_1d,
    histogram_kd,
    lipschitz_from_pairs,
    mf_direction_lipschitz,
    mf_many,
    oscillation,
    project_batch,
)
from clt_lab.model import Subspace
from clt_lab.samplers import sample_cube, sample_directions, sample_gaussian, sample_subspace

SQ3 = math.sqrt(3.0)


@pytest.fixture(scope="module")
def cube10():
    return sample_cube(10, 200_000, 1)


@pytest.fixture(scope="module")
def gauss5():
    return sample_gaussian(5, 200_000, 2)


def test_coordinate_projection_is_uniform(cube10):
    e1 = Subspace(np.eye(10)[:1])
    line = project_batch(cube10, e1)
    assert line.n == 1
    assert np.array_equal(line.data[:, 0], cube10.data[:, 0])
    ident = project_batch(cube10, Subspace(np.eye(10)))
    assert np.array_equal(ident.data, cube10.data)


def test_projection_consistency(cube10):
    sub = sample_subspace(10, 3, 3)
    low = project_batch(cube10, sub)
    inner = sample_directions(3, 5, 4)
    grid = np.linspace(-2, 2, 10)
    for u in inner:
        theta = sub.embed(u)
        theta /= np.linalg.norm(theta)
        before = empirical_Mf_curve(cube10, theta, grid).values
        after = empirical_Mf_curve(low, u, grid).values
        assert np.max(np.abs(before - after)) <= 2 / math.sqrt(cube10.m)


def test_consistency_identity_row_by_row(cube10):
    sub = sample_subspace(10, 2, 5)
    low = project_batch(cube10, sub)
    u = np.array([0.6, 0.8])
    theta = sub.embed(u)
    for t in (-1.0, 0.0, 0.37):
        a = np.count_nonzero(cube10.data @ theta <= t)
        b = np.count_nonzero(low.data @ u <= t)
        # identical indicators up to floating-point ties at the threshold
        assert abs(a - b) <= 2


def test_mf_examples(cube10, gauss5):
    g = empirical_Mf(gauss5, np.eye(5)[2], 0.0)
    assert abs(g - 0.5) <= 1.5 / math.sqrt(gauss5.m)
    c = empirical_Mf(cube10, np.eye(10)[0], 1.0)
    assert abs(c - (1 + SQ3) / (2 * SQ3)) <= 3 * 0.5 / math.sqrt(cube10.m)
    assert empirical_Mf(cube10, np.eye(10)[0], SQ3 * math.sqrt(10)) == 1.0


def test_curve_properties(cube10):
    theta = sample_directions(10, 1, 6)[0]
    grid = np.arange(-30, 30.01, 0.25)
    curve = empirical_Mf_curve(cube10, theta, grid)
    props = curve_properties(curve)
    assert all(props.values()), props
    assert curve.values[grid == -20][0] <= 2 * math.exp(-2) + 1.5 / math.sqrt(cube10.m)
    mid = empirical_Mf_curve(cube10, theta, [-1, 0, 1]).values
    assert 0.1 < mid[0] < 0.5 < mid[2] < 0.9
    with pytest.raises(ValueError):
        empirical_Mf_curve(cube10, theta, [1, 0])
    assert curve.to_csv().splitlines()[0] == "t,value"


def test_direction_lipschitz(cube10, gauss5):
    g = mf_direction_lipschitz(gauss5, 0.0, 300, 7)
    assert 0 <= g <= 0.5
    c = mf_direction_lipschitz(cube10, 0.0, 1000, 8)
    assert np.isfinite(c) and c <= 1.0
    theta = np.eye(5)[:1]
    assert lipschitz_from_pairs(gauss5.data, 0.0, theta, theta) == 0.0


def test_mf_many_matches_single(gauss5):
    dirs = sample_directions(5, 300, 9)
    many = mf_many(gauss5, dirs, 0.3, block=64)
    single = [empirical_Mf(gauss5, d, 0.3) for d in dirs[:5]]
    assert np.allclose(many[:5], single)
    assert oscillation(many) == many.max() - many.min()


def test_histogram_examples():
    x = sample_cube(1, 400_000, 10).data[:, 0]
    h = histogram_1d(x, -2, 2, 0.1)
    inner = h.counts[(h.centers > -1.6) & (h.centers < 1.6)]
    expected = x.size * 0.1 / (2 * SQ3)
    assert np.max(np.abs(inner - expected)) <= 5 * math.sqrt(expected)
    empty = histogram_1d(np.array([]), -1, 1, 0.5)
    assert empty.counts.sum() == 0 and empty.out_of_range == 0
    far = histogram_1d(np.full(20, 9.0), -1, 1, 0.5)
    assert far.counts.sum() == 0 and far.out_of_range == 20
    assert far.to_csv().splitlines()[0] == "bin_center,count"


@given(arrays(np.float64, st.integers(1, 200), elements=st.floats(-10, 10)),
       st.floats(0.05, 2.0))
def test_histogram_conserves_counts(x, width):
    h = histogram_1d(x, -6, 6, width)
    assert h.counts.sum() + h.out_of_range == x.size


def test_histogram_kd():
    y = sample_gaussian(2, 10_000, 11).data
    h = histogram_kd(y)
    assert h.k == 2 and h.counts.sum() + h.out_of_range == 10_000
    with pytest.raises(ValueError):
        histogram_kd(np.zeros((5, 4)))


def test_ecdf_examples():
    f = ecdf(np.array([1.0, 2.0, 3.0]))
    assert f(2.0) == pytest.approx(2 / 3)
    assert f(-np.inf) == 0 and f(np.inf) == 1
    assert ecdf(np.array([0.0, 0.0]))(0.0) == 1
    assert ecdf(np.array([0.0, 0.0])).left_limit(0.0) == 0
    with pytest.raises(ValueError):
        ecdf(np.array([]))


@given(arrays(np.float64, st.integers(1, 100), elements=st.floats(-5, 5)))
def test_ecdf_is_monotone_step(x):
    f = ecdf(x)
    grid = np.linspace(-6, 6, 50)
    v = f(grid)
    assert np.all(np.diff(v) >= 0) and v[0] == 0 and v[-1] == 1


def test_borell_envelope():
    assert borell_envelope(0) == 2
    assert borell_envelope(-10) == pytest.approx(2 * math.exp(-1))
