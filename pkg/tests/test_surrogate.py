import numpy as np
import pytest
from sklearn.base import clone

from magnetometry import persistence
from magnetometry.surrogate import (
    MLPSurrogate,
    TrainingError,
    evaluate_regression,
    initialized_surrogate,
    split_indices,
    split_sizes,
)


def central_diff(f, x, h=1e-5):
    g = np.zeros_like(x)
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h
        g[k] = (f(x + e) - f(x - e)) / (2 * h)
    return g


@pytest.fixture
def small_net():
    return initialized_surrogate([2, 4, 5, 3], random_state=3, input_bounds=[[0, 0.5], [0, 0.5]])


def test_zero_weights_give_bias(small_net):
    net = initialized_surrogate([1, 6, 12, 25, 50, 101], random_state=0)
    bias = np.linspace(0, 1, 101)
    net.coefs_ = [np.zeros_like(w) for w in net.coefs_]
    net.intercepts_[-1] = bias
    for theta in (-0.3, 0.0, 0.25, 0.5):
        np.testing.assert_array_equal(net(theta), bias)


def test_parameter_gradient_matches_finite_differences(small_net):
    rng = np.random.default_rng(0)
    X = rng.uniform(0, 0.5, (7, 2))
    Y = rng.uniform(0, 1, (7, 3))
    p0 = small_net.params_
    _, grad = small_net.cost_and_gradient(X, Y)
    fd = central_diff(lambda p: small_net.cost_and_gradient(X, Y, p)[0], p0)
    assert np.linalg.norm(grad - fd) / np.linalg.norm(fd) < 1e-6


@pytest.mark.parametrize("sizes", [[1, 6, 12, 25, 50, 101], [2, 6, 12, 25, 50, 101], [1, 3, 2]])
def test_input_jacobian_matches_finite_differences(sizes):
    net = initialized_surrogate(sizes, random_state=5, input_bounds=[[0, 0.5]] * sizes[0])
    theta = np.full(sizes[0], 0.25)
    jac = net.jacobian(theta)
    assert jac.shape == (sizes[-1], sizes[0])
    for k in range(sizes[0]):
        e = np.zeros(sizes[0])
        e[k] = 1e-5
        fd = (net(theta + e) - net(theta - e)) / 2e-5
        assert np.linalg.norm(jac[:, k] - fd) / np.linalg.norm(fd) < 1e-6


def test_split_arithmetic():
    assert split_sizes(510) == (357, 76, 77)
    assert split_sizes(51) == (35, 7, 9)
    train, val, test = split_indices(510, seed=4)
    assert sorted(np.concatenate([train, val, test]).tolist()) == list(range(510))
    with pytest.raises(ValueError):
        split_sizes(10, (0.5, 0.5, 0.5))


def test_constant_targets_reach_tiny_cost():
    X = np.linspace(0, 0.5, 20)[:, None]
    Y = np.full((20, 101), 0.5)
    net = MLPSurrogate(max_epochs=5000, target_cost=1e-10, random_state=1).fit(X, Y)
    assert net.metrics_.train_cost[net.metrics_.returned_epoch] < 1e-8
    assert net.cost(X, Y) < 1e-8


def test_fit_is_deterministic():
    rng = np.random.default_rng(0)
    X = rng.uniform(0, 0.5, (30, 1))
    Y = np.sin(np.outer(X[:, 0], np.arange(1, 11)))
    a = MLPSurrogate(max_epochs=300, random_state=2).fit(X, Y)
    b = MLPSurrogate(max_epochs=300, random_state=2).fit(X, Y)
    np.testing.assert_array_equal(a.params_, b.params_)


def test_best_validation_checkpoint_is_returned():
    rng = np.random.default_rng(0)
    X = rng.uniform(0, 0.5, (40, 1))
    Y = np.cos(np.outer(X[:, 0], np.arange(1, 6))) + 0.05 * rng.normal(size=(40, 5))
    net = MLPSurrogate(max_epochs=1500, patience=200, random_state=0).fit(X, Y)
    m = net.metrics_
    assert m.best_val_cost == pytest.approx(min(m.val_cost))
    best_so_far = np.minimum.accumulate(m.val_cost)
    assert np.all(np.diff(best_so_far) <= 0)
    assert m.stop_reason == "patience" and m.returned_epoch == m.best_epoch
    Zv = X[net.val_indices_]
    assert net.cost(Zv, Y[net.val_indices_]) == pytest.approx(m.best_val_cost, rel=1e-12)


def test_target_stop_returns_the_weights_that_met_it():
    X = np.linspace(0, 0.5, 30)[:, None]
    Y = np.column_stack([np.cos(3 * X[:, 0]), X[:, 0] ** 2])
    net = MLPSurrogate(max_epochs=20000, target_cost=1e-5, random_state=0).fit(X, Y)
    m = net.metrics_
    assert m.stop_reason == "target_cost" and m.returned_epoch == m.epochs - 1
    assert net.cost(X[net.train_indices_], Y[net.train_indices_]) < 1e-5


def test_lbfgs_solver_trains():
    X = np.linspace(0, 0.5, 25)[:, None]
    Y = np.column_stack([X[:, 0] ** 2, np.sin(4 * X[:, 0])])
    net = MLPSurrogate(hidden_layer_sizes=(8,), solver="lbfgs", max_epochs=500, target_cost=1e-7, random_state=0).fit(X, Y)
    assert net.metrics_.final_train_cost < 1e-5


def test_divergence_aborts():
    X = np.linspace(0, 0.5, 20)[:, None]
    Y = np.full((20, 3), 1e200)
    with pytest.raises(TrainingError, match="non-finite"):
        MLPSurrogate(max_epochs=50).fit(X, Y)


def test_too_few_examples():
    with pytest.raises(TrainingError):
        MLPSurrogate().fit([[0.1], [0.2]], [[0.5], [0.5]])


def test_unknown_solver():
    with pytest.raises(ValueError, match="solver"):
        MLPSurrogate(solver="sgd", max_epochs=1).fit(np.zeros((10, 1)) + np.arange(10)[:, None], np.ones((10, 2)))


def test_dimension_mismatch(small_net):
    with pytest.raises(ValueError):
        small_net.predict([[0.1]])


def test_sklearn_protocol():
    net = MLPSurrogate(max_epochs=10, learning_rate=0.05)
    params = net.get_params()
    assert params["max_epochs"] == 10 and params["hidden_layer_sizes"] == (6, 12, 25, 50)
    twin = clone(net)
    assert twin.get_params() == params
    net.set_params(max_epochs=20)
    assert net.max_epochs == 20


def test_normalisation_maps_box_to_unit_interval():
    X = np.linspace(0, 0.5, 10)[:, None]
    net = MLPSurrogate(max_epochs=1, input_bounds=[[0, 0.5]]).fit(X, np.ones((10, 2)))
    np.testing.assert_allclose(net._scale(np.array([[0.0], [0.5]])).ravel(), [-1, 1])


def test_model_file_round_trip(small_net, tmp_path):
    persistence.write_model(tmp_path / "m.json", small_net, "abc")
    back = persistence.read_model(tmp_path / "m.json")
    thetas = np.array([[0.1, 0.2], [0.4, 0.0]])
    np.testing.assert_array_equal(back.predict(thetas), small_net.predict(thetas))
    assert back.layer_sizes_ == [2, 4, 5, 3]


# -- regression diagnostics ------------------------------------------------------


def test_regression_exact_outputs():
    t = np.linspace(0, 1, 50)
    r = evaluate_regression(t, t)
    assert r["slope"] == pytest.approx(1) and r["intercept"] == pytest.approx(0, abs=1e-12)
    assert r["r"] == pytest.approx(1)


def test_regression_noisy_outputs():
    rng = np.random.default_rng(0)
    t = rng.uniform(0, 1, 5000)
    y = t + rng.uniform(-0.05, 0.05, t.size)
    # analytic R = sqrt(var_t / (var_t + var_noise)) = sqrt((1/12) / (1/12 + 0.1**2/12)) ~ 0.995
    assert evaluate_regression(y, t)["r"] >= 0.99


def test_regression_constant_targets_flagged():
    r = evaluate_regression(np.ones(10), np.ones(10))
    assert r["r_defined"] is False and r["r"] is None
