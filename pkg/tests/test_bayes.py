import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from magnetometry import persistence
from magnetometry.bayes import (
    EPSILON,
    GridBayesEstimator,
    PosteriorError,
    log_likelihood,
    marginal,
    marginal_estimate,
    normalize_log_weights,
    posterior,
    repeated_estimation,
)
from magnetometry.grid import ParameterGrid
from magnetometry.sampling import ObservationSet, simulate_observations
from magnetometry.spin_chain import ExactForward


def obs_from(successes, n_p):
    successes = np.atleast_1d(successes)
    return ObservationSet(times=np.arange(successes.size, dtype=float), successes=successes, n_p=n_p)


# -- likelihood ------------------------------------------------------------------


def test_single_fair_coin():
    assert log_likelihood(obs_from(1, 1), [0.5]) == pytest.approx(np.log(0.5))


def test_all_successes_at_the_clamp():
    n_t, n_p = 101, 100
    obs = obs_from(np.full(n_t, n_p), n_p)
    ll = log_likelihood(obs, np.ones(n_t))
    assert ll == pytest.approx(n_t * n_p * np.log1p(-EPSILON), rel=1e-12)
    assert ll == pytest.approx(-n_t * n_p * EPSILON, rel=1e-5)


@pytest.mark.parametrize("x,n", [(3, 10), (0, 7), (50, 100), (9, 9)])
def test_maximum_at_empirical_frequency(x, n):
    ps = np.linspace(0, 1, 10_001)
    lls = [log_likelihood(obs_from(x, n), [p]) for p in ps]
    assert ps[int(np.argmax(lls))] == pytest.approx(x / n, abs=1e-4 + EPSILON)


def test_length_mismatch():
    with pytest.raises(ValueError):
        log_likelihood(obs_from([1, 2], 5), [0.5, 0.5, 0.5])


def test_batched_likelihood_matches_loop():
    rng = np.random.default_rng(0)
    curves = rng.uniform(0, 1, (5, 8))
    obs = obs_from(rng.integers(0, 21, 8), 20)
    np.testing.assert_allclose(log_likelihood(obs, curves), [log_likelihood(obs, c) for c in curves])


# -- posterior -------------------------------------------------------------------------


@pytest.fixture(scope="module")
def fwd4():
    return ExactForward(4)


def test_no_data_returns_prior(fwd4):
    obs = obs_from(np.zeros(101, dtype=int), 0)
    post = posterior(obs, fwd4, ParameterGrid.uniform(1, 0, 0.5, 21))
    np.testing.assert_allclose(post.probabilities, 2.0, atol=1e-12)  # flat density on [0, 0.5]


def test_normalisation(fwd4):
    obs = simulate_observations(fwd4, 0.2, seed=1)
    post = posterior(obs, fwd4, ParameterGrid.uniform(1, 0, 0.5, 41))
    assert post.total_mass() == pytest.approx(1.0, abs=1e-10)
    assert np.all(post.probabilities >= 0)


def test_consistency_at_high_shot_count():
    fwd = ExactForward(6)
    grid = ParameterGrid.uniform(1, 0, 0.5, 501)
    truth = grid.axes[0].points[160]  # 0.16
    obs = simulate_observations(fwd, truth, n_p=10_000, seed=3)
    post = posterior(obs, fwd, grid)
    assert post.argmax()[0] == pytest.approx(truth, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(shift=st.floats(-1e6, 1e6), seed=st.integers(0, 2**16))
def test_constant_shift_invariance(shift, seed):
    grid = ParameterGrid.uniform(1, 0, 0.5, 51)
    log_w = np.random.default_rng(seed).normal(scale=20, size=51)
    a = normalize_log_weights(grid, log_w)
    b = normalize_log_weights(grid, log_w + shift)
    np.testing.assert_allclose(a.probabilities, b.probabilities, rtol=1e-9, atol=1e-12)
    ea, eb = marginal_estimate(a), marginal_estimate(b)
    assert ea.mean == pytest.approx(eb.mean, rel=1e-9)
    assert ea.std == pytest.approx(eb.std, rel=1e-7)
    assert np.argmax(a.probabilities) == np.argmax(b.probabilities)


def test_all_vanishing_weights_rejected():
    grid = ParameterGrid.uniform(1, 0, 0.5, 5)
    with pytest.raises(PosteriorError):
        normalize_log_weights(grid, np.full(5, -np.inf))
    with pytest.raises(PosteriorError):
        normalize_log_weights(grid, np.array([0, np.nan, 0, 0, 0.0]))


# -- marginals ---------------------------------------------------------------------------


def test_uniform_posterior_moments():
    grid = ParameterGrid.uniform(1, 0, 0.5, 501)
    est = marginal_estimate(normalize_log_weights(grid, np.zeros(501)))
    assert est.mean == pytest.approx(0.25, abs=1e-12)
    assert est.std == pytest.approx(0.5 / np.sqrt(12), rel=1e-5)


def test_symmetric_two_peaks():
    grid = ParameterGrid.uniform(1, 0, 0.5, 101)
    log_w = np.full(101, -np.inf)
    log_w[[20, 70]] = 0.0
    est = marginal_estimate(normalize_log_weights(grid, log_w))
    assert est.mean == pytest.approx((0.1 + 0.35) / 2, abs=1e-12)


def test_product_posterior_marginals():
    grid = ParameterGrid.uniform(2, 0, 0.5, 41)
    x = grid.axes[0].points
    fx = np.exp(-((x - 0.1) ** 2) / 0.002)
    fy = np.exp(-((x - 0.3) ** 2) / 0.01)
    post = normalize_log_weights(grid, np.log(np.outer(fx, fy)))
    for dim, f in ((0, fx), (1, fy)):
        ref = f / np.trapezoid(f, x)
        np.testing.assert_allclose(marginal(post, dim), ref, atol=1e-10)
    with pytest.raises(IndexError):
        marginal(post, 2)


def test_marginal_integrates_to_one():
    grid = ParameterGrid.uniform(2, 0, 0.5, 21)
    post = normalize_log_weights(grid, np.random.default_rng(0).normal(size=grid.shape))
    for d in (0, 1):
        assert np.trapezoid(marginal(post, d), grid.axes[d].points) == pytest.approx(1.0, abs=1e-12)


# -- estimator and repetitions ----------------------------------------------------------------


def test_estimator_protocol(fwd4):
    est = GridBayesEstimator(fwd4, ParameterGrid.uniform(1, 0, 0.5, 51))
    assert est.get_params()["forward"] is fwd4
    obs = simulate_observations(fwd4, 0.3, seed=2)
    mean = est.predict(obs)
    assert 0 <= mean[0] <= 0.5
    assert est.std_[0] > 0
    assert est.posterior_.total_mass() == pytest.approx(1.0, abs=1e-10)


def test_single_run_matches_direct_estimate(fwd4):
    grid = ParameterGrid.uniform(1, 0, 0.5, 51)
    rep = repeated_estimation(fwd4, 0.2, n_runs=1, seeds=[9], grid=grid)
    obs = simulate_observations(fwd4, 0.2, seed=9)
    direct = GridBayesEstimator(fwd4, grid).fit(obs)
    assert rep.mean_estimate[0] == direct.mean_[0]
    assert rep.mean_std[0] == direct.std_[0]


def test_repeated_estimation_validation(fwd4):
    with pytest.raises(ValueError):
        repeated_estimation(fwd4, 0.1, n_runs=0)
    with pytest.raises(ValueError):
        repeated_estimation(fwd4, 0.1, n_runs=2, seeds=[1])


def test_precision_shrinks_with_shots():
    fwd = ExactForward(4)
    grid = ParameterGrid.uniform(1, 0, 0.5, 501)
    stds = [repeated_estimation(fwd, 0.1, n_runs=10, n_p=n_p, grid=grid).mean_std[0] for n_p in (25, 100, 400)]
    assert stds[0] > stds[1] > stds[2]
    # roughly 1/sqrt(N_p): each 4x in shots halves the width
    assert stds[0] / stds[1] == pytest.approx(2, rel=0.3)


def test_posterior_export(fwd4, tmp_path):
    grid = ParameterGrid.uniform(2, 0, 0.5, 5)
    fwd = ExactForward(2, observable_axis="y", params=("g_x", "g_y"))
    est = GridBayesEstimator(fwd, grid).fit(simulate_observations(fwd, (0.1, 0.2), seed=1))
    persistence.write_posterior(tmp_path / "p.csv", est.posterior_, {"means": est.mean_})
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert lines[0] == "theta_1,theta_2,probability"
    assert len(lines) == 26


def test_surrogate_and_exact_posteriors_agree():
    from magnetometry.sampling import build_calibration_dataset
    from magnetometry.surrogate import MLPSurrogate

    fwd = ExactForward(4)
    ds = build_calibration_dataset(fwd, n_m=None)
    net = MLPSurrogate(target_cost=1e-6, input_bounds=[[0, 0.5]], random_state=0).fit(ds.thetas, ds.targets)
    grid = ParameterGrid.uniform(1, 0, 0.5, 21)
    # fidelity bound 3 * sqrt(0.25 / 100) = 0.15; agreement is required within twice that
    bound = 2 * 3 * np.sqrt(0.25 / 100)
    for seed, truth in ((1, 0.1), (2, 0.3)):
        obs = simulate_observations(fwd, truth, seed=seed)
        a = GridBayesEstimator(fwd, grid).fit(obs).mean_[0]
        b = GridBayesEstimator(net, grid).fit(obs).mean_[0]
        assert abs(a - b) < bound
        assert abs(a - b) < 0.01  # in practice the two agree far more closely
