"""Neural-network surrogate of the field -> observable-curve map.

:class:`MLPSurrogate` is a small fully connected tanh network with an affine
output layer, trained full-batch on the mean squared error.  It follows the
scikit-learn estimator protocol (``fit``/``predict``/``get_params``) so it
can be cloned, grid-searched or dropped into a pipeline.
"""

from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

logger = logging.getLogger(__name__)

DEFAULT_HIDDEN = (6, 12, 25, 50)


class TrainingError(RuntimeError):
    """Training diverged or could not start."""


def split_sizes(n: int, fractions=(0.70, 0.15, 0.15)) -> tuple[int, int, int]:
    """Train/validation/test sizes: floor the first two, remainder to test."""
    if len(fractions) != 3 or abs(sum(fractions) - 1.0) > 1e-9 or min(fractions) < 0:
        raise ValueError("split fractions must be three non-negative numbers summing to 1")
    n_train = math.floor(n * fractions[0] + 1e-9)
    n_val = math.floor(n * fractions[1] + 1e-9)
    return n_train, n_val, n - n_train - n_val


def split_indices(n: int, fractions=(0.70, 0.15, 0.15), seed: int = 0):
    n_train, n_val, _ = split_sizes(n, fractions)
    perm = np.random.default_rng(seed).permutation(n)
    return perm[:n_train], perm[n_train : n_train + n_val], perm[n_train + n_val :]


@dataclass
class TrainingMetrics:
    train_cost: list = field(default_factory=list)
    val_cost: list = field(default_factory=list)
    grad_norm: list = field(default_factory=list)
    best_epoch: int = -1
    best_val_cost: float = math.inf
    returned_epoch: int = -1
    test_cost: float = math.nan
    stop_reason: str = ""
    regression: dict | None = None

    @property
    def epochs(self) -> int:
        return len(self.train_cost)

    @property
    def final_train_cost(self) -> float:
        return self.train_cost[-1] if self.train_cost else math.nan

    def rows(self):
        for k, (tc, vc, gn) in enumerate(zip(self.train_cost, self.val_cost, self.grad_norm)):
            yield k, tc, vc, gn


class MLPSurrogate(RegressorMixin, BaseEstimator):
    """Tanh MLP mapping field parameters to a curve of ``N_T`` values.

    Parameters
    ----------
    hidden_layer_sizes : tuple of int
        Hidden widths; the default reproduces the 6-12-25-50 architecture.
    solver : {"adam", "lbfgs"}
        Full-batch Adam, or scipy's L-BFGS-B on the same cost and gradient.
    max_epochs : int
        Iteration cap (Adam steps or L-BFGS iterations).
    target_cost : float
        Stop as soon as the training cost drops below this value.
    learning_rate, lr_decay, beta1, beta2, epsilon : float
        Adam step size ``learning_rate / (1 + lr_decay * epoch)`` and moments.
    split : tuple of float
        Train/validation/test fractions; sizes use floor-then-remainder.
    patience : int or None
        Stop after this many epochs without a validation improvement.
    input_bounds : array-like of shape (M, 2), optional
        Box mapped onto [-1, 1]; defaults to the range of the training inputs.
    random_state : int
        Seeds both weight initialisation and the data split.
    """

    def __init__(
        self,
        hidden_layer_sizes=DEFAULT_HIDDEN,
        solver="adam",
        max_epochs=20000,
        target_cost=1e-5,
        learning_rate=1e-2,
        lr_decay=1e-3,
        beta1=0.9,
        beta2=0.999,
        epsilon=1e-8,
        split=(0.70, 0.15, 0.15),
        patience=None,
        input_bounds=None,
        random_state=0,
    ):
        self.hidden_layer_sizes = hidden_layer_sizes
        self.solver = solver
        self.max_epochs = max_epochs
        self.target_cost = target_cost
        self.learning_rate = learning_rate
        self.lr_decay = lr_decay
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.split = split
        self.patience = patience
        self.input_bounds = input_bounds
        self.random_state = random_state

    # -- parameter plumbing -------------------------------------------------

    @property
    def layer_sizes_(self):
        return [self.n_features_in_, *self.hidden_layer_sizes, self.n_outputs_]

    def _shapes(self):
        sizes = self.layer_sizes_
        return [((a, b), (b,)) for a, b in zip(sizes[:-1], sizes[1:])]

    def _pack(self, weights, biases) -> np.ndarray:
        return np.concatenate([np.concatenate([w.ravel(), b]) for w, b in zip(weights, biases)])

    def _unpack(self, flat):
        weights, biases, k = [], [], 0
        for (ws, bs) in self._shapes():
            nw = ws[0] * ws[1]
            weights.append(flat[k : k + nw].reshape(ws))
            k += nw
            biases.append(flat[k : k + bs[0]])
            k += bs[0]
        return weights, biases

    def _init_params(self, rng, y_mean):
        weights, biases = [], []
        for (fan_in, fan_out), _ in self._shapes():
            limit = math.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        biases[-1] = np.array(y_mean, dtype=float)
        return self._pack(weights, biases)

    # -- normalisation ------------------------------------------------------

    def _fit_scaling(self, X):
        if self.input_bounds is not None:
            bounds = np.asarray(self.input_bounds, dtype=float).reshape(X.shape[1], 2)
        else:
            bounds = np.stack([X.min(axis=0), X.max(axis=0)], axis=1)
        lo, hi = bounds[:, 0], bounds[:, 1]
        span = np.where(hi > lo, hi - lo, 1.0)
        self.input_shift_ = (hi + lo) / 2.0
        self.input_scale_ = span / 2.0

    def _scale(self, X):
        return (X - self.input_shift_) / self.input_scale_

    # -- forward / backward ------------------------------------------------------

    def _forward(self, flat, Z):
        weights, biases = self._unpack(flat)
        acts = [Z]
        a = Z
        for w, b in zip(weights[:-1], biases[:-1]):
            a = np.tanh(a @ w + b)
            acts.append(a)
        return a @ weights[-1] + biases[-1], acts

    def _cost_grad(self, flat, Z, Y):
        """Mean squared error over all entries and its gradient w.r.t. ``flat``."""
        weights, _ = self._unpack(flat)
        out, acts = self._forward(flat, Z)
        resid = out - Y
        with np.errstate(over="ignore", invalid="ignore"):
            cost = float(np.mean(resid**2))
        delta = 2.0 * resid / resid.size
        gw, gb = [None] * len(weights), [None] * len(weights)
        for layer in range(len(weights) - 1, -1, -1):
            gw[layer] = acts[layer].T @ delta
            gb[layer] = delta.sum(axis=0)
            if layer:
                delta = (delta @ weights[layer].T) * (1.0 - acts[layer] ** 2)
        return cost, self._pack(gw, gb)

    def _cost(self, flat, Z, Y):
        out, _ = self._forward(flat, Z)
        return float(np.mean((out - Y) ** 2))

    # -- estimator API ------------------------------------------------------------

    def fit(self, X, y):
        """Train on (theta, curve) pairs, holding out validation and test splits.

        If the training cost drops below ``target_cost`` the weights of that
        epoch are returned; otherwise (patience or epoch cap) the weights with
        the lowest validation cost seen are restored.
        """
        X, y = check_X_y(X, y, multi_output=True, y_numeric=True)
        y = y.reshape(len(y), -1)
        if len(X) < 3:
            raise TrainingError("need at least 3 examples to form the three splits")
        self.n_features_in_ = X.shape[1]
        self.n_outputs_ = y.shape[1]
        self._fit_scaling(X)

        train, val, test = split_indices(len(X), self.split, self.random_state)
        if len(train) == 0 or len(val) == 0:
            raise TrainingError("empty train or validation partition")
        Z = self._scale(X)
        Zt, Yt, Zv, Yv = Z[train], y[train], Z[val], y[val]
        rng = np.random.default_rng(self.random_state)
        flat = self._init_params(rng, Yt.mean(axis=0))

        metrics = TrainingMetrics()
        if self.solver == "adam":
            best = self._run_adam(flat, Zt, Yt, Zv, Yv, metrics)
        elif self.solver == "lbfgs":
            best = self._run_lbfgs(flat, Zt, Yt, Zv, Yv, metrics)
        else:
            raise ValueError(f"unknown solver {self.solver!r}")

        self.coefs_, self.intercepts_ = (list(p) for p in self._unpack(best))
        if len(test):
            metrics.test_cost = self._cost(best, Z[test], y[test])
        self.train_indices_, self.val_indices_, self.test_indices_ = train, val, test
        self.metrics_ = metrics
        logger.info(
            "trained %s in %d epochs: train C=%.3e val C=%.3e test C=%.3e (%s)",
            self.layer_sizes_, metrics.epochs, metrics.final_train_cost,
            metrics.best_val_cost, metrics.test_cost, metrics.stop_reason,
        )
        return self

    def _record(self, metrics, epoch, cost, grad, flat, Zv, Yv, best):
        if not np.isfinite(cost):
            raise TrainingError(f"training cost became non-finite at epoch {epoch}")
        val = self._cost(flat, Zv, Yv)
        metrics.train_cost.append(cost)
        metrics.val_cost.append(val)
        metrics.grad_norm.append(float(np.linalg.norm(grad)))
        if val < metrics.best_val_cost:
            metrics.best_val_cost = val
            metrics.best_epoch = epoch
            return flat.copy()
        return best

    def _should_stop(self, metrics, epoch, cost):
        if cost < self.target_cost:
            metrics.stop_reason = "target_cost"
            return True
        if self.patience is not None and epoch - metrics.best_epoch >= self.patience:
            metrics.stop_reason = "patience"
            return True
        return False

    def _run_adam(self, flat, Zt, Yt, Zv, Yv, metrics):
        m = np.zeros_like(flat)
        v = np.zeros_like(flat)
        best = flat.copy()
        for epoch in range(self.max_epochs):
            cost, grad = self._cost_grad(flat, Zt, Yt)
            best = self._record(metrics, epoch, cost, grad, flat, Zv, Yv, best)
            if self._should_stop(metrics, epoch, cost):
                best = self._checkpoint(metrics, epoch, flat, best)
                break
            m = self.beta1 * m + (1 - self.beta1) * grad
            v = self.beta2 * v + (1 - self.beta2) * grad**2
            m_hat = m / (1 - self.beta1 ** (epoch + 1))
            v_hat = v / (1 - self.beta2 ** (epoch + 1))
            lr = self.learning_rate / (1.0 + self.lr_decay * epoch)
            flat = flat - lr * m_hat / (np.sqrt(v_hat) + self.epsilon)
        else:
            metrics.stop_reason = "max_epochs"
            metrics.returned_epoch = metrics.best_epoch
        return best

    @staticmethod
    def _checkpoint(metrics, epoch, flat, best):
        """Weights to return: the ones that met the cost target, else the best-validation ones."""
        if metrics.stop_reason == "target_cost":
            metrics.returned_epoch = epoch
            return flat.copy()
        metrics.returned_epoch = metrics.best_epoch
        return best

    def _run_lbfgs(self, flat, Zt, Yt, Zv, Yv, metrics):
        state = {"best": flat.copy(), "epoch": 0}

        def fun(p):
            return self._cost_grad(p, Zt, Yt)

        def callback(intermediate_result):
            p = intermediate_result.x
            cost, grad = fun(p)
            epoch = state["epoch"]
            state["best"] = self._record(metrics, epoch, cost, grad, p, Zv, Yv, state["best"])
            state["epoch"] += 1
            if self._should_stop(metrics, epoch, cost):
                state["best"] = self._checkpoint(metrics, epoch, p, state["best"])
                raise StopIteration

        res = minimize(
            fun, flat, jac=True, method="L-BFGS-B", callback=callback,
            options={"maxiter": self.max_epochs, "maxcor": 30, "ftol": 0.0, "gtol": 1e-12},
        )
        if not metrics.stop_reason:
            metrics.stop_reason = "max_epochs" if res.nit >= self.max_epochs else "converged"
            metrics.returned_epoch = metrics.best_epoch
        return state["best"]

    @property
    def params_(self) -> np.ndarray:
        check_is_fitted(self, "coefs_")
        return self._pack(self.coefs_, self.intercepts_)

    def predict(self, X) -> np.ndarray:
        """Raw (unclamped) network outputs, shape (n_samples, N_T)."""
        check_is_fitted(self, "coefs_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} input features, got {X.shape[1]}")
        out, _ = self._forward(self.params_, self._scale(X))
        return out

    def __call__(self, theta) -> np.ndarray:
        """Curve at a single theta; lets the fitted model act as a forward map."""
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        return self.predict(theta.reshape(1, -1))[0]

    @property
    def n_params(self) -> int:
        return self.n_features_in_

    def jacobian(self, theta) -> np.ndarray:
        """d output / d theta at one point, by backpropagation; shape (N_T, M)."""
        check_is_fitted(self, "coefs_")
        theta = np.atleast_1d(np.asarray(theta, dtype=float)).reshape(1, -1)
        _, acts = self._forward(self.params_, self._scale(theta))
        # rows of ``jac``: outputs; propagate backwards through each layer
        jac = self.coefs_[-1].T
        for layer in range(len(self.coefs_) - 1, 0, -1):
            jac = (jac * (1.0 - acts[layer][0] ** 2)) @ self.coefs_[layer - 1].T
        return jac / self.input_scale_

    def cost(self, X, y) -> float:
        """Mean squared error of the fitted model on (X, y)."""
        y = np.asarray(y, dtype=float).reshape(len(y), -1)
        return float(np.mean((self.predict(X) - y) ** 2))

    def cost_and_gradient(self, X, y, params=None):
        """Cost and its gradient w.r.t. the flattened parameters (for checks)."""
        check_is_fitted(self, "coefs_")
        X = check_array(X)
        y = np.asarray(y, dtype=float).reshape(len(X), -1)
        p = self.params_ if params is None else np.asarray(params, dtype=float)
        return self._cost_grad(p, self._scale(X), y)

    def set_flat_params(self, flat):
        self.coefs_, self.intercepts_ = (list(p) for p in self._unpack(np.asarray(flat, dtype=float)))
        return self

    def describe(self) -> dict:
        return {"kind": "surrogate", "layer_sizes": self.layer_sizes_, "hash": self.weights_hash()}

    def weights_hash(self) -> str:
        return hashlib.sha256(np.ascontiguousarray(self.params_).tobytes()).hexdigest()[:16]


def initialized_surrogate(layer_sizes, random_state=0, input_bounds=None) -> MLPSurrogate:
    """A freshly initialised, untrained network with the given layer sizes."""
    sizes = list(layer_sizes)
    est = MLPSurrogate(hidden_layer_sizes=tuple(sizes[1:-1]), random_state=random_state, input_bounds=input_bounds)
    est.n_features_in_, est.n_outputs_ = sizes[0], sizes[-1]
    bounds = input_bounds if input_bounds is not None else [[-1.0, 1.0]] * sizes[0]
    est.input_bounds = bounds
    est._fit_scaling(np.zeros((1, sizes[0])))
    flat = est._init_params(np.random.default_rng(random_state), np.zeros(sizes[-1]))
    # non-zero biases so gradient checks see every term
    flat += 0.1 * np.random.default_rng(random_state + 1).standard_normal(flat.size)
    return est.set_flat_params(flat)


def evaluate_regression(outputs, targets) -> dict:
    """Pooled least-squares fit of outputs on targets plus Pearson R.

    Constant targets leave R undefined; that is reported via
    ``r_defined=False`` with ``r=None`` rather than a NaN.
    """
    y = np.asarray(outputs, dtype=float).ravel()
    t = np.asarray(targets, dtype=float).ravel()
    if y.shape != t.shape:
        raise ValueError("outputs and targets must have the same size")
    t_c, y_c = t - t.mean(), y - y.mean()
    stt, syy = float(t_c @ t_c), float(y_c @ y_c)
    if stt <= 1e-300:
        return {"slope": None, "intercept": None, "r": None, "r_defined": False, "n": int(t.size)}
    slope = float(t_c @ y_c) / stt
    intercept = float(y.mean() - slope * t.mean())
    if syy <= 1e-300:
        return {"slope": slope, "intercept": intercept, "r": None, "r_defined": False, "n": int(t.size)}
    r = float(np.clip((t_c @ y_c) / math.sqrt(stt * syy), -1.0, 1.0))
    return {"slope": slope, "intercept": intercept, "r": r, "r_defined": True, "n": int(t.size)}
