import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cylstereo import simulation
from cylstereo.geometry import ObservationSet, QuantityKind
from cylstereo.plugin import (
    Moment,
    PoleError,
    avoid_poles,
    covariance_hat,
    height_cdf_unweighted,
    height_cdf_weighted,
    moments,
    n_tilde,
    observable_means,
    plugin_cdf,
    pole_midpoints,
)

KINDS = list(QuantityKind)
SQR = QuantityKind.SQUARED_RADIUS


def obs_strategy(min_size=1, max_size=30):
    pair = st.tuples(st.floats(1e-2, 1e2), st.floats(1e-2, 1e2))
    return st.lists(pair, min_size=min_size, max_size=max_size).map(
        lambda rows: ObservationSet([r[0] for r in rows], [r[1] for r in rows])
    )


def test_single_term_values():
    obs = ObservationSet([4.0], [1.0])
    assert n_tilde(obs, SQR, 0.0) == 0.5
    assert n_tilde(obs, SQR, 5.0) == 0.0


def test_pole_raises():
    obs = ObservationSet([4.0], [1.0])
    with pytest.raises(PoleError) as exc:
        n_tilde(obs, SQR, 4.0)
    assert exc.value.t.tolist() == [4.0]


@given(obs_strategy(), st.sampled_from(KINDS))
def test_n_tilde_at_zero_is_mean_weight(obs, kind):
    assert n_tilde(obs, kind, 0.0) == pytest.approx(np.mean(obs.z**-0.5), rel=1e-12)


@given(obs_strategy(), st.sampled_from(KINDS))
def test_n_tilde_vanishes_past_last_pole(obs, kind):
    assert n_tilde(obs, kind, 1.01 * obs.poles(kind).max()) == 0.0


@given(obs_strategy(), st.sampled_from(KINDS), st.floats(0, 1e3))
def test_n_tilde_nonnegative(obs, kind, t):
    try:
        assert n_tilde(obs, kind, t) >= 0
    except PoleError:
        pass


def test_plugin_cdf_endpoints():
    obs = ObservationSet([1.0, 2.0, 3.0], [1.0, 0.5, 2.0])
    for kind in KINDS:
        grid, _ = avoid_poles(obs, kind, [0.0, 2.0 * obs.poles(kind).max()])
        cdf = plugin_cdf(obs, kind, grid)
        assert cdf.f[0] == 0.0 and cdf.f[-1] == 1.0
        assert cdf.points[0].n_tilde == pytest.approx(cdf.n_tilde_zero)


def test_plugin_cdf_rejects_unsorted_grid():
    with pytest.raises(ValueError):
        plugin_cdf(ObservationSet([1.0], [1.0]), SQR, [2.0, 1.0])


def test_avoid_poles_moves_and_keeps_order():
    obs = ObservationSet([1.0, 2.0, 3.0], [1.0, 1.0, 1.0])
    grid, moved = avoid_poles(obs, SQR, [0.5, 1.0, 1.5, 3.0])
    assert moved.tolist() == [1, 3]
    assert np.all(np.diff(grid) > 0)
    n_tilde(obs, SQR, grid)  # no pole left


def test_n_tilde_mean_matches_marginal(sim5000):
    truth = 8 * math.sqrt(math.pi) / 15
    assert simulation.g_moment(-0.5, 0.0) == pytest.approx(truth, rel=1e-10)
    # heavy tail: a crude SE bound from a large reference sample
    ref = simulation.sample_2d_direct(simulation.SimulationSpec(200000, seed=5))
    se = np.std(ref.z**-0.5) / math.sqrt(5000)
    assert abs(n_tilde(sim5000, SQR, 0.0) - truth) < 3 * se


@pytest.mark.slow
def test_plugin_volume_cdf_close_to_truth():
    # the sup over a grid is a noisy statistic at this n, so take the typical
    # (median) run over 20 datasets; grid at true quantiles 2%..98%
    from scipy import optimize

    probs = np.linspace(0.02, 0.98, 49)
    grid0 = [optimize.brentq(lambda v: simulation.analytic_F_V(v) - p, 1e-9, 1e4) for p in probs]
    sups = []
    for seed in range(20):
        obs = simulation.sample_2d_direct(simulation.SimulationSpec(5000, seed=100 + seed))
        grid = pole_midpoints(obs, QuantityKind.VOLUME, grid0)
        f = plugin_cdf(obs, QuantityKind.VOLUME, grid).f
        sups.append(np.max(np.abs(f - simulation.analytic_F_V(grid))))
    assert np.median(sups) < 0.05


def test_height_cdf_examples():
    obs = ObservationSet([1.0, 4.0, 9.0], [1.0, 2.0, 3.0])
    assert height_cdf_weighted(obs, 0.0) == 0.0
    assert height_cdf_weighted(obs, 10.0) == 1.0
    assert height_cdf_unweighted(obs, 2.5) == pytest.approx(2 / 3)
    assert height_cdf_unweighted(obs, 0.0) == 0.0


@given(st.lists(st.floats(1e-2, 1e2), min_size=1, max_size=30), st.floats(0, 200))
def test_equal_z_weighted_is_unweighted(hs, h):
    obs = ObservationSet(np.full(len(hs), 2.0), hs)
    # weighted uses H < h, unweighted H <= h; compare off the atoms
    if h not in hs:
        assert height_cdf_weighted(obs, h) == pytest.approx(height_cdf_unweighted(obs, h), abs=1e-15)


@given(obs_strategy())
def test_weighted_height_cdf_is_cdf(obs):
    grid = np.concatenate([[0.0], np.sort(obs.h), [obs.h.max() * 2]])
    f = height_cdf_weighted(obs, grid)
    assert f[0] == 0.0 and f[-1] == pytest.approx(1.0) and np.all(np.diff(f) >= 0)


def test_weighted_differs_from_unweighted_under_dependence():
    obs = simulation.sample_2d_direct(simulation.SimulationSpec(5000, seed=8))
    grid = np.quantile(obs.h, np.linspace(0.05, 0.95, 19))
    diff = np.abs(height_cdf_weighted(obs, grid) - height_cdf_unweighted(obs, grid))
    se = math.sqrt(0.25 / 5000)
    assert diff.max() > 3 * se


def test_moments_single_observation():
    m = moments(ObservationSet([1.0], [1.0]))
    assert m.radius == pytest.approx(math.pi / 2)
    assert m.height == pytest.approx(1.0)
    assert m.squared_radius == pytest.approx(2.0)
    assert m.volume == pytest.approx(2 * math.pi)
    assert m.get(Moment.RADIUS) == m.radius


@given(obs_strategy(), st.floats(0.1, 10))
def test_moment_homogeneity(obs, c):
    m, ms = moments(obs), moments(obs.scaled(c))
    assert ms.radius == pytest.approx(c * m.radius, rel=1e-12)
    assert ms.height == pytest.approx(c * m.height, rel=1e-12)
    assert ms.squared_radius == pytest.approx(c * c * m.squared_radius, rel=1e-12)
    assert ms.volume == pytest.approx(c**3 * m.volume, rel=1e-12)
    assert ms.surface_area == pytest.approx(c * c * m.surface_area, rel=1e-12)


def test_moments_match_3d_truth():
    obs = simulation.sample_2d_direct(simulation.SimulationSpec(50000, seed=31))
    m = moments(obs)
    truth = {
        "radius": math.gamma(3.5) / 2,
        "squared_radius": 3.0,
        "height": 1.0,
        "volume": math.pi * math.gamma(5) / 2 / 3,  # pi E[X^2] E[H/X]
        "surface_area": 2 * math.pi * (3.0 + math.gamma(4.5) / 2 / 3),  # 2pi(E[X] + E[sqrt(X) H])
    }
    # loose 10% check at the slow sqrt(log n / n) rate
    for name, val in truth.items():
        assert getattr(m, name) == pytest.approx(val, rel=0.1), name


def test_moment_truths_by_quadrature():
    # same truths through observable-side integrals
    u = simulation.g_moment(-0.5, 0.0)
    assert 0.5 * math.pi / u == pytest.approx(math.gamma(3.5) / 2, rel=1e-9)
    assert 2 * simulation.g_moment(0.5, 0.0) / u == pytest.approx(3.0, rel=1e-9)
    assert simulation.g_moment(-0.5, 1.0) / u == pytest.approx(1.0, rel=1e-9)
    assert 2 * math.pi * simulation.g_moment(0.5, 1.0) / u == pytest.approx(4 * math.pi, rel=1e-9)


def test_covariance_constant_height_is_zero():
    obs = ObservationSet([1.0, 2.0, 5.0], [3.0, 3.0, 3.0])
    assert covariance_hat(obs) == pytest.approx(0.0, abs=1e-15)


@given(obs_strategy(min_size=2), st.randoms())
def test_covariance_permutation_invariant(obs, rnd):
    idx = list(range(obs.n))
    rnd.shuffle(idx)
    perm = ObservationSet(obs.z[idx], obs.h[idx])
    assert covariance_hat(perm) == pytest.approx(covariance_hat(obs), rel=1e-12, abs=1e-12)


def test_covariance_needs_two():
    with pytest.raises(ValueError):
        covariance_hat(ObservationSet([1.0], [1.0]))


def test_observable_means_fields():
    m = observable_means(ObservationSet([4.0], [3.0]))
    assert (m.z_m, m.z_p, m.hz_m, m.hz_p, m.h) == (0.5, 2.0, 1.5, 6.0, 3.0)


def test_pole_midpoints():
    obs = ObservationSet([1.0, 2.0, 4.0], [1.0, 1.0, 1.0])
    out = pole_midpoints(obs, SQR, [0.1, 0.9, 1.5, 3.9, 4.0, 7.0])
    np.testing.assert_array_equal(out, [0.5, 1.5, 3.0, 4.0, 7.0])
