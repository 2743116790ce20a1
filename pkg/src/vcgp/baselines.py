"""Comparison methods: simple regressors, point-imputation, and standard
sparse-GP forecasting with and without moment-matched uncertainty propagation.

The sparse GP here is written independently of the main model (explicit
solves, numerically differentiated objective) so the two codepaths can check
each other in the tests.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize

from .data import MaskedDataset
from .kernel import GaussianInputDistribution
from .model import FitConfig, PredictiveGaussian
from .pipelines import ForecastConfig, _semi_described_stages, iterative_forecast

__all__ = [
    "BaselineResult",
    "mean_predictor",
    "mlr_fit_predict",
    "nn_predict",
    "gplvm_impute",
    "naive_ar_forecast",
    "moment_matched_forecast",
    "pca_features",
    "SparseGPRegressor",
]


@dataclass
class BaselineResult:
    """Named predictions with per-point and summary errors."""

    name: str
    predictions: np.ndarray
    per_point_error: np.ndarray
    mae: float
    mse: float

    @classmethod
    def from_predictions(cls, name: str, predictions: np.ndarray, truth: np.ndarray):
        predictions = np.atleast_2d(np.asarray(predictions, dtype=float))
        truth = np.atleast_2d(np.asarray(truth, dtype=float))
        if predictions.shape != truth.shape:
            raise ValueError("predictions and truth shapes differ")
        err = predictions - truth
        return cls(
            name,
            predictions,
            np.mean(np.abs(err), axis=1),
            float(np.mean(np.abs(err))),
            float(np.mean(err**2)),
        )


def mean_predictor(train_Y: np.ndarray, test_count: int) -> np.ndarray:
    """Predict the column means of the training outputs for every test point."""
    train_Y = np.atleast_2d(np.asarray(train_Y, dtype=float))
    if train_Y.shape[0] == 0:
        raise ValueError("empty training outputs")
    return np.tile(train_Y.mean(axis=0), (test_count, 1))


def mlr_fit_predict(
    train_X: np.ndarray, train_Y: np.ndarray, test_X: np.ndarray
) -> np.ndarray:
    """Least-squares linear regression with a bias term.

    Falls back to a tiny ridge penalty when the augmented design matrix is
    rank deficient.
    """
    train_X = np.atleast_2d(np.asarray(train_X, dtype=float))
    train_Y = np.atleast_2d(np.asarray(train_Y, dtype=float))
    test_X = np.atleast_2d(np.asarray(test_X, dtype=float))
    A = np.hstack([train_X, np.ones((train_X.shape[0], 1))])
    W, _, rank, _ = np.linalg.lstsq(A, train_Y, rcond=None)
    if rank < A.shape[1]:
        W = np.linalg.solve(A.T @ A + 1e-6 * np.eye(A.shape[1]), A.T @ train_Y)
    return np.hstack([test_X, np.ones((test_X.shape[0], 1))]) @ W


def nn_predict(
    train_X: np.ndarray,
    train_mask: np.ndarray | None,
    train_Y: np.ndarray,
    test_X: np.ndarray,
    test_mask: np.ndarray | None = None,
) -> np.ndarray:
    """Nearest-neighbour regression over the jointly observed input dimensions.

    Distances are mean squared differences over the dimensions observed in
    both rows, so rows with fewer comparable dimensions are not favoured.
    Ties go to the lowest training row index; a query with no comparable
    training row falls back to the mean predictor.
    """
    train_X = np.atleast_2d(np.asarray(train_X, dtype=float))
    train_Y = np.atleast_2d(np.asarray(train_Y, dtype=float))
    test_X = np.atleast_2d(np.asarray(test_X, dtype=float))
    if train_mask is None:
        train_mask = np.ones(train_X.shape, dtype=bool)
    train_mask = np.asarray(train_mask, dtype=bool)
    if test_mask is None:
        test_mask = np.ones(test_X.shape, dtype=bool)
    test_mask = np.asarray(test_mask, dtype=bool)

    fallback = train_Y.mean(axis=0)
    out = np.empty((test_X.shape[0], train_Y.shape[1]))
    for i in range(test_X.shape[0]):
        shared = train_mask & test_mask[i]  # (N, Q)
        counts = shared.sum(axis=1)
        diff = np.where(shared, train_X - test_X[i], 0.0)
        with np.errstate(invalid="ignore"):
            d = np.sum(diff**2, axis=1) / counts
        d[counts == 0] = np.inf
        if np.all(np.isinf(d)):
            out[i] = fallback
        else:
            out[i] = train_Y[int(np.argmin(d))]
    return out


def gplvm_impute(dataset: MaskedDataset, config: FitConfig) -> np.ndarray:
    """Complete missing input entries with point estimates.

    Same staged flow as the semi-described fit, but imputations are single
    points (posterior means, variances pinned) rather than distributions.
    Returns the completed (N, Q) input matrix.
    """
    state = _semi_described_stages(dataset, config, point_estimates=True)
    return np.where(dataset.input_mask, dataset.inputs, state.q_input.means)


def naive_ar_forecast(state, seed_window, config: ForecastConfig):
    """Iterative forecasting with input uncertainty zeroed at every step."""
    return iterative_forecast(
        state, seed_window, replace(config, propagate_uncertainty=False)
    )


def pca_features(X: np.ndarray, dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Centered principal-component projection; returns (projections, basis)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if dim > min(X.shape):
        raise ValueError(f"dim {dim} exceeds min(N, data dim) = {min(X.shape)}")
    Xc = X - X.mean(axis=0)
    _, _, vt = np.linalg.svd(Xc, full_matrices=False)
    basis = vt[:dim]
    return Xc @ basis.T, basis


# ---------------------------------------------------------------------------
# standard sparse GP (deterministic training conditionals)
# ---------------------------------------------------------------------------


class SparseGPRegressor:
    """Sparse GP regression without the variational input machinery.

    Inducing inputs are a fixed random subset of the training data; kernel
    hyperparameters are fit by maximizing the projected-process marginal
    likelihood with numerically differentiated gradients. Everything here is
    explicit-solve linear algebra, independent of the main model's codepath.
    """

    def __init__(self, num_inducing: int = 30, seed: int = 0, max_iterations: int = 200):
        self.num_inducing = num_inducing
        self.seed = seed
        self.max_iterations = max_iterations
        self.jitter = 1e-6

    def _kern(self, X, X2, log_params):
        s2 = np.exp(log_params[0])
        ell = np.exp(log_params[1:-1])
        d = (X[:, None, :] - X2[None, :, :]) / ell
        return s2 * np.exp(-0.5 * np.sum(d**2, axis=2))

    def _neg_log_marginal(self, log_params):
        X, Y, Xu = self._X, self._Y, self._Xu
        n, d = Y.shape
        m = Xu.shape[0]
        s2 = np.exp(log_params[0])
        beta = np.exp(log_params[-1])
        Kuu = self._kern(Xu, Xu, log_params) + self.jitter * s2 * np.eye(m)
        Kfu = self._kern(X, Xu, log_params)
        A = Kuu + beta * Kfu.T @ Kfu
        sign_k, logdet_k = np.linalg.slogdet(Kuu)
        sign_a, logdet_a = np.linalg.slogdet(A)
        if sign_k <= 0 or sign_a <= 0:
            return 1e10
        C = Kfu.T @ Y
        quad = 0.5 * beta**2 * float(np.sum(C * np.linalg.solve(A, C)))
        val = (
            d * (-0.5 * n * np.log(2 * np.pi) + 0.5 * n * np.log(beta))
            + d * (0.5 * logdet_k - 0.5 * logdet_a)
            - 0.5 * beta * float(np.sum(Y * Y))
            + quad
        )
        if not np.isfinite(val):
            return 1e10
        return -val

    def fit(self, X: np.ndarray, Y: np.ndarray) -> "SparseGPRegressor":
        self._X = np.atleast_2d(np.asarray(X, dtype=float))
        self._Y = np.atleast_2d(np.asarray(Y, dtype=float))
        n, q = self._X.shape
        rng = np.random.default_rng(self.seed)
        m = min(self.num_inducing, n)
        subset = rng.choice(n, size=m, replace=False)
        self._Xu = self._X[subset] + 1e-5 * rng.standard_normal((m, q))

        ell0 = np.maximum(self._X.std(axis=0), 1e-3)
        y_var = max(float(np.var(self._Y)), 1e-12)
        theta0 = np.concatenate(
            [[np.log(y_var)], np.log(ell0), [np.log(100.0 / y_var)]]
        )
        res = minimize(
            self._neg_log_marginal,
            theta0,
            method="L-BFGS-B",
            options={"maxiter": self.max_iterations},
        )
        self.log_params = res.x if res.fun <= self._neg_log_marginal(theta0) else theta0
        self._finalize()
        return self

    def _finalize(self):
        s2 = np.exp(self.log_params[0])
        beta = np.exp(self.log_params[-1])
        m = self._Xu.shape[0]
        Kuu = self._kern(self._Xu, self._Xu, self.log_params) + self.jitter * s2 * np.eye(m)
        Kfu = self._kern(self._X, self._Xu, self.log_params)
        A = Kuu + beta * Kfu.T @ Kfu
        self._Kuu_inv = np.linalg.inv(Kuu)
        self._A_inv = np.linalg.inv(A)
        self._B = beta * self._A_inv @ Kfu.T @ self._Y  # (M, D)
        self.signal_variance = float(s2)
        self.noise_precision = float(beta)
        self.lengthscales = np.exp(self.log_params[1:-1])

    def predict(self, X_star: np.ndarray, include_noise: bool = False):
        X_star = np.atleast_2d(np.asarray(X_star, dtype=float))
        Ksu = self._kern(X_star, self._Xu, self.log_params)
        mean = Ksu @ self._B
        var = (
            self.signal_variance
            - np.sum(Ksu * (Ksu @ self._Kuu_inv), axis=1)
            + np.sum(Ksu * (Ksu @ self._A_inv), axis=1)
        )
        var = np.maximum(var, 1e-12)
        if include_noise:
            var = var + 1.0 / self.noise_precision
        return mean, np.tile(var[:, None], (1, mean.shape[1]))


def _sparse_gp_uncertain_moments(
    gp: SparseGPRegressor, mu: np.ndarray, s: np.ndarray, include_noise: bool = True
) -> PredictiveGaussian:
    """Exact predictive moments of a sparse GP under a Gaussian input.

    Closed-form expectations of the kernel vector and its outer product under
    N(mu, diag s), combined with the GP's own posterior factors.
    """
    s2 = gp.signal_variance
    ell2 = gp.lengthscales**2
    Xu = gp._Xu
    # E[k(x, Xu)]
    denom1 = ell2 + s
    diff = mu[None, :] - Xu
    psi1 = s2 * np.prod(
        np.sqrt(ell2 / denom1) * np.exp(-0.5 * diff**2 / denom1), axis=1
    )  # (M,)
    # E[k(x, Xu) k(x, Xu)^T]
    denom2 = ell2 + 2.0 * s
    zbar = 0.5 * (Xu[:, None, :] + Xu[None, :, :])
    dz = Xu[:, None, :] - Xu[None, :, :]
    expo = -0.25 * dz**2 / ell2 - (mu[None, None, :] - zbar) ** 2 / denom2
    psi2 = s2**2 * np.prod(np.sqrt(ell2 / denom2) * np.exp(expo), axis=2)  # (M, M)

    mean = psi1 @ gp._B  # (D,)
    common = (
        s2
        - float(np.sum(gp._Kuu_inv * psi2))
        + float(np.sum(gp._A_inv * psi2))
    )
    quad = np.einsum("md,mk,kd->d", gp._B, psi2, gp._B)
    var = np.maximum(common + quad - mean**2, 1e-12)
    if include_noise:
        var = var + 1.0 / gp.noise_precision
    return PredictiveGaussian(mean, var)


def moment_matched_forecast(
    gp: SparseGPRegressor, seed_window: np.ndarray, config: ForecastConfig
) -> list[PredictiveGaussian]:
    """Rolling-window forecasting on a standard sparse GP with moment matching.

    Same window bookkeeping as iterative_forecast, but each step's moments
    come from the non-variational sparse GP posterior.
    """
    D = gp._Y.shape[1]
    tau = config.window
    window = np.asarray(seed_window, dtype=float).reshape(tau, D)
    if tau * D != gp._X.shape[1]:
        raise ValueError("window size does not match the model input dimension")
    means = [window[i].copy() for i in range(tau)]
    variances = [np.zeros(D) for _ in range(tau)]
    out: list[PredictiveGaussian] = []
    for _ in range(config.horizon):
        pred = _sparse_gp_uncertain_moments(
            gp, np.concatenate(means), np.concatenate(variances)
        )
        out.append(pred)
        means = means[1:] + [pred.mean.copy()]
        next_var = pred.variance.copy() if config.propagate_uncertainty else np.zeros(D)
        variances = variances[1:] + [next_var]
    return out
