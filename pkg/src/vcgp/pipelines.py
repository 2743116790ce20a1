"""Learning pipelines built on the uncertain-input GP model.

Three orchestrations:

* semi-described regression: train on inputs that are only partially
  observed, by first fitting on the fully observed rows, then inferring a
  posterior over each missing input entry, then refitting on everything.
* auto-regressive iterative forecasting: chain one-step predictions while
  feeding each step's predictive distribution back into the input window.
* semi-supervised classification: learn a latent embedding of the features
  from labelled and unlabelled rows together, then train a classifier on
  samples from the labelled rows' latent posteriors.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from sklearn.linear_model import LogisticRegression

from .data import MaskedDataset
from .kernel import EPSILON, GaussianInputDistribution
from .model import (
    FitConfig,
    ModelState,
    Packing,
    PredictiveGaussian,
    fit,
    infer_latent_posterior,
    init,
    predict_uncertain,
)

__all__ = [
    "MaskedDataset",
    "ForecastConfig",
    "ClassifierModel",
    "semi_described_fit",
    "autoregressive_reformat",
    "iterative_forecast",
    "semi_supervised_embed",
    "semi_supervised_train",
    "semi_supervised_predict",
]


@dataclass
class ForecastConfig:
    """Rolling-window forecast settings."""

    window: int
    horizon: int
    propagate_uncertainty: bool = True

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("window must be at least 1")
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")


@dataclass
class ClassifierModel:
    """Multinomial logistic regression in explicit weight form.

    weights: (K, Q+1) array, one row per class, bias in the last column.
    classes: length-K array of class labels in row order.
    """

    weights: np.ndarray
    classes: np.ndarray

    def __post_init__(self):
        self.weights = np.atleast_2d(np.asarray(self.weights, dtype=float))
        self.classes = np.asarray(self.classes)
        if self.classes.size == 0:
            raise ValueError("classes must be non-empty")
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("classifier weights must be finite")
        if self.weights.shape[0] != self.classes.size:
            raise ValueError("one weight row per class required")

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.weights.shape[1] - 1:
            raise ValueError(f"expected {self.weights.shape[1] - 1}-dimensional features")
        logits = x @ self.weights[:, :-1].T + self.weights[:, -1]
        logits -= logits.max(axis=1, keepdims=True)
        p = np.exp(logits)
        return p / p.sum(axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# semi-described regression
# ---------------------------------------------------------------------------


def _semi_described_stages(
    dataset: MaskedDataset, config: FitConfig, point_estimates: bool = False
) -> ModelState:
    """Three-stage semi-described fit, shared with the point-imputation baseline.

    Stage 1 fits on the fully observed rows; stage 2 infers the missing input
    entries of each partial row from its outputs (observed dimensions stay
    clamped); stage 3 refits on all rows with the imputations free and the
    observations fixed. With point_estimates=True the imputed variances are
    pinned at EPSILON throughout (the standard point-imputation flow).

    Stage 3 keeps the kernel hyperparameters at their stage-1 values: the
    imputed rows are self-consistent with the stage-1 model by construction,
    and letting them re-tune the noise level drives the model overconfident
    (most visibly when every partial row is fully missing, where the refit
    must leave the stage-1 predictions essentially unchanged).
    """
    if dataset.inputs is None:
        raise ValueError("semi-described learning needs (partially) observed inputs")
    if not dataset.label_mask.all():
        raise ValueError("all output rows must be observed")
    obs = dataset.fully_observed_rows()
    if not obs.any():
        raise ValueError("at least one fully observed input row is required")

    X, mask, Y = dataset.inputs, dataset.input_mask, dataset.outputs
    cfg_obs = replace(config, num_inducing=min(config.num_inducing, int(obs.sum())))
    state_obs = init(MaskedDataset(X[obs], mask[obs], Y[obs]), cfg_obs)
    state_obs, _ = fit(state_obs, cfg_obs)
    if obs.all():
        return state_obs

    means = np.where(mask, X, 0.0)
    variances = np.where(mask, EPSILON, 0.5)
    for n in np.flatnonzero(~obs):
        q_n = infer_latent_posterior(
            state_obs,
            Y[n],
            z_star=X[n],
            input_observed=mask[n],
            max_iterations=50,
            point_estimate=point_estimates,
        )
        free = ~mask[n]
        means[n, free] = q_n.means[0, free]
        variances[n, free] = EPSILON if point_estimates else q_n.variances[0, free]

    full = ModelState(
        state_obs.kernel_params.copy(),
        state_obs.inducing.copy(),
        GaussianInputDistribution(means, variances, mask.copy()),
        Y,
        Packing(include_hyper=False, freeze_variances=point_estimates),
    )
    full, _ = fit(full, config, two_phase=False)
    return full


def semi_described_fit(dataset: MaskedDataset, config: FitConfig) -> ModelState:
    """Train on a dataset whose inputs are only partially observed.

    Observed input entries stay clamped throughout; missing entries carry a
    learned Gaussian posterior initialized from the outputs of their row.
    """
    return _semi_described_stages(dataset, config, point_estimates=False)


# ---------------------------------------------------------------------------
# auto-regressive forecasting
# ---------------------------------------------------------------------------


def autoregressive_reformat(series: np.ndarray, tau: int) -> tuple[np.ndarray, np.ndarray]:
    """Turn a (T, D) series into windowed input/target pairs.

    Row i of the inputs stacks [y_i, ..., y_{i+tau-1}] time-major; the target
    is y_{i+tau}. Produces exactly T - tau rows.
    """
    series = np.atleast_2d(np.asarray(series, dtype=float))
    if series.shape[0] == 1 and series.shape[1] > 1:
        series = series.T
    T, D = series.shape
    if tau < 1:
        raise ValueError("tau must be at least 1")
    if T <= tau:
        raise ValueError(f"series length {T} must exceed the window {tau}")
    X = np.stack([series[i : i + tau].ravel() for i in range(T - tau)])
    Y = series[tau:]
    return X, Y


def iterative_forecast(
    state: ModelState,
    seed_window: np.ndarray,
    config: ForecastConfig,
    recorder=None,
) -> list[PredictiveGaussian]:
    """Chain one-step predictions, feeding each back into the input window.

    The window holds the last tau values of the series as (mean, variance)
    pairs; seed slots carry variance 0. With propagate_uncertainty the
    predictive variance of each step rides along into later input windows,
    otherwise every slot is treated as certain (the zero-input-variance mode).

    recorder, if given, is called as recorder(step, q_star) with the exact
    input distribution used at each step.
    """
    D = state.n_outputs
    tau = config.window
    window = np.asarray(seed_window, dtype=float).reshape(tau, D)
    means = [window[i].copy() for i in range(tau)]
    variances = [np.zeros(D) for _ in range(tau)]
    if tau * D != state.n_dims:
        raise ValueError(
            f"window of {tau} x {D}-dimensional values does not match "
            f"the model's {state.n_dims}-dimensional inputs"
        )

    out: list[PredictiveGaussian] = []
    for step in range(config.horizon):
        q_star = GaussianInputDistribution(
            np.concatenate(means)[None, :],
            np.concatenate(variances)[None, :],
            np.zeros((1, tau * D), dtype=bool),
        )
        if recorder is not None:
            recorder(step, q_star)
        pred = predict_uncertain(state, q_star, include_noise=True)
        out.append(pred)
        means = means[1:] + [pred.mean.copy()]
        next_var = pred.variance.copy() if config.propagate_uncertainty else np.zeros(D)
        variances = variances[1:] + [next_var]
    return out


# ---------------------------------------------------------------------------
# semi-supervised classification
# ---------------------------------------------------------------------------


def semi_supervised_embed(
    dataset: MaskedDataset, config: FitConfig, latent_dim: int = 2
) -> tuple[ModelState, GaussianInputDistribution]:
    """Learn a shared low-dimensional embedding of the feature vectors.

    The features act as the GP outputs of a fully latent model, so labelled
    and unlabelled rows alike shape the embedding. Returns the trained model
    and the per-row factorized latent posterior.
    """
    if dataset.inputs is None or not dataset.input_mask.all():
        raise ValueError("the embedding step needs fully observed feature rows")
    Z = dataset.inputs
    if latent_dim >= Z.shape[1]:
        raise ValueError("latent dimension must be below the feature dimension")
    cfg = replace(config, num_inducing=min(config.num_inducing, Z.shape[0]))
    state = init(MaskedDataset(None, None, Z), cfg, latent_dim=latent_dim)
    state, _ = fit(state, cfg)
    return state, state.q_input


def semi_supervised_train(
    q_labelled: GaussianInputDistribution,
    labels: np.ndarray,
    num_samples: int = 6,
    seed: int = 0,
) -> ClassifierModel:
    """Fit a classifier on samples drawn from the labelled latent posteriors.

    Each labelled point contributes num_samples draws from its latent
    Gaussian, all inheriting the point's label, so the classifier sees the
    embedding's uncertainty. Multinomial logistic regression with a small L2
    penalty.
    """
    if num_samples < 1:
        raise ValueError("num_samples must be at least 1")
    labels = np.asarray(labels).ravel()
    if labels.size != q_labelled.n_points:
        raise ValueError("one label per latent point required")
    if np.unique(labels).size < 2:
        raise ValueError("at least two classes required")

    rng = np.random.default_rng(seed)
    mu, s = q_labelled.means, q_labelled.variances
    draws = mu[None, :, :] + np.sqrt(s)[None, :, :] * rng.standard_normal(
        (num_samples, *mu.shape)
    )
    X = draws.reshape(num_samples * mu.shape[0], mu.shape[1])
    y = np.tile(labels, num_samples)

    clf = LogisticRegression(C=1e3, max_iter=2000)
    clf.fit(X, y)
    if clf.coef_.shape[0] == 1:  # binary: expand to the two-row softmax form
        w = np.vstack([np.zeros_like(clf.coef_[0]), clf.coef_[0]])
        b = np.array([0.0, clf.intercept_[0]])
    else:
        w, b = clf.coef_, clf.intercept_
    return ClassifierModel(np.hstack([w, b[:, None]]), clf.classes_)


def semi_supervised_predict(
    classifier: ClassifierModel, embed_model: ModelState, z_star: np.ndarray
):
    """Classify a new feature vector through the learned embedding.

    Infers the latent posterior of z_star under the embedding model (features
    are its outputs) and classifies at the posterior mean. Returns the
    predicted label and the class-probability vector.
    """
    q_star = infer_latent_posterior(embed_model, np.asarray(z_star, dtype=float))
    probs = classifier.predict_proba(q_star.means)[0]
    return classifier.classes[int(np.argmax(probs))], probs
