"""The variationally constrained GP as a trainable object.

Covers initialization from a masked dataset, gradient-based training of the
collapsed bound, prediction at certain and uncertain test inputs, inference
of the latent input posterior for a given output, and save/load.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import cho_solve
from scipy.optimize import minimize

from . import __version__
from . import kernel as kn
from .bound import bound_value_and_gradient, collapsed_bound
from .data import MaskedDataset
from .kernel import EPSILON, GaussianInputDistribution, InducingSet, KernelParams
from .state import ModelState, Packing, pack, unpack

__all__ = [
    "FitConfig",
    "PredictiveGaussian",
    "ModelState",
    "Packing",
    "pack",
    "unpack",
    "init",
    "fit",
    "predict_deterministic",
    "predict_uncertain",
    "infer_latent_posterior",
    "save_model",
    "load_model",
]


@dataclass
class FitConfig:
    """Knobs for init and the optimization loop."""

    max_iterations: int = 500
    convergence_tol: float = 1e-6
    num_inducing: int = 30
    seed: int = 0
    init_strategy: str = "pca"  # or "random-subset"
    hyper_warmup_iterations: int = 50  # phase 1: hyperparameters frozen

    def __post_init__(self):
        if self.convergence_tol <= 0:
            raise ValueError("convergence_tol must be positive")
        if self.init_strategy not in ("pca", "random-subset"):
            raise ValueError(f"unknown init_strategy {self.init_strategy!r}")


@dataclass
class PredictiveGaussian:
    """Per-output-dimension predictive mean and (diagonal) variance."""

    mean: np.ndarray  # (D,)
    variance: np.ndarray  # (D,)

    def __post_init__(self):
        self.mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        self.variance = np.atleast_1d(np.asarray(self.variance, dtype=float))
        if np.any(self.variance <= 0):
            raise ValueError("predictive variance must be positive")


def _pca_init(Y: np.ndarray, q: int) -> np.ndarray:
    """Unit-variance PCA projection of the outputs, used to seed latent means."""
    Yc = Y - Y.mean(axis=0)
    _, s, vt = np.linalg.svd(Yc, full_matrices=False)
    k = min(q, vt.shape[0])
    proj = Yc @ vt[:k].T
    std = proj.std(axis=0)
    std[std < 1e-12] = 1.0
    proj = proj / std
    if k < q:
        proj = np.hstack([proj, np.zeros((Y.shape[0], q - k))])
    return proj


def init(
    dataset: MaskedDataset, config: FitConfig, latent_dim: int | None = None
) -> ModelState:
    """Build the initial model state from a (possibly partially observed) dataset.

    Observed input entries are clamped (mean = observation, variance = EPSILON);
    missing entries start at zero mean / variance 0.5 (or PCA-of-Y means when no
    inputs exist at all, the GP-LVM mode). Inducing points are a seeded random
    subset of the initial means.
    """
    Y = dataset.outputs
    n = dataset.n_points
    if n == 0:
        raise ValueError("empty dataset")
    rng = np.random.default_rng(config.seed)

    if dataset.inputs is None:
        if latent_dim is None:
            raise ValueError("latent_dim required when the dataset has no inputs")
        q = latent_dim
        mask = np.zeros((n, q), dtype=bool)
        if config.init_strategy == "pca":
            means = _pca_init(Y, q)
        else:
            means = 0.1 * rng.standard_normal((n, q))
        variances = np.full((n, q), 0.5)
    else:
        q = dataset.inputs.shape[1]
        mask = dataset.input_mask.copy()
        means = np.where(mask, dataset.inputs, 0.0)
        if not mask.any() and config.init_strategy == "pca":
            means = _pca_init(Y, q)
        variances = np.where(mask, EPSILON, 0.5)

    m = min(config.num_inducing, n)
    if config.num_inducing > n:
        raise ValueError(f"num_inducing {config.num_inducing} exceeds data size {n}")
    subset = rng.choice(n, size=m, replace=False)
    inducing = means[subset].copy()
    # break exact duplicates so K_uu stays well conditioned
    col_scale = np.maximum(means.std(axis=0), 1e-3)
    inducing += 1e-4 * col_scale * rng.standard_normal(inducing.shape)

    lengthscales = means.std(axis=0)
    lengthscales[lengthscales < 1e-6] = 1.0
    y_var = float(np.var(Y))
    if y_var < 1e-12:
        y_var = 1.0
    params = KernelParams(
        signal_variance=y_var,
        lengthscales=lengthscales,
        noise_precision=100.0 / y_var,
    )
    qdist = GaussianInputDistribution(means, variances, mask)
    return ModelState(params, InducingSet(inducing), qdist, Y)


def _run_lbfgs(state: ModelState, max_iterations: int, tol: float):
    """One L-BFGS pass maximizing the bound; returns (state, trace of totals)."""
    theta0 = pack(state)
    trace = [collapsed_bound(state).total]
    if theta0.size == 0 or max_iterations <= 0:
        return state, trace
    last = {"f": -trace[0]}
    best = {"f": -trace[0], "theta": theta0.copy()}

    def objective(theta):
        try:
            parts, grad = bound_value_and_gradient(unpack(state, theta))
        except (FloatingPointError, np.linalg.LinAlgError):
            # off-limits region: let the line search back off, keep last good state
            return np.inf, np.zeros_like(theta)
        f = -parts.total
        last["f"] = f
        if f < best["f"]:
            best["f"] = f
            best["theta"] = theta.copy()
        return f, -grad

    def callback(theta):
        trace.append(-last["f"])

    minimize(
        objective,
        theta0,
        jac=True,
        method="L-BFGS-B",
        callback=callback,
        options={"maxiter": max_iterations, "ftol": tol, "gtol": 1e-9},
    )
    return unpack(state, best["theta"]), trace


def fit(
    state: ModelState, config: FitConfig, two_phase: bool = True
) -> tuple[ModelState, np.ndarray]:
    """Maximize the collapsed bound; returns the trained state and bound trace.

    Phase 1 freezes the kernel hyperparameters for a short warm-up (the
    variational parameters and inducing inputs settle first); phase 2
    optimizes everything jointly.
    """
    traces = []
    if two_phase and config.hyper_warmup_iterations > 0:
        warm = state.copy()
        warm.packing = replace(state.packing, include_hyper=False)
        if warm.n_free_params() > 0:
            warm, tr = _run_lbfgs(
                warm,
                min(config.hyper_warmup_iterations, config.max_iterations),
                config.convergence_tol,
            )
            traces.append(tr)
        state = warm.copy()
        state.packing = replace(warm.packing, include_hyper=True)
    state, tr = _run_lbfgs(state, config.max_iterations, config.convergence_tol)
    traces.append(tr)
    return state, np.concatenate(traces)


# ---------------------------------------------------------------------------
# prediction
# ---------------------------------------------------------------------------


@dataclass
class _Posterior:
    """Cached factorizations of the collapsed posterior over inducing outputs."""

    params: KernelParams
    inducing: InducingSet
    LK: np.ndarray  # chol(K_uu)
    LA: np.ndarray  # chol(K_uu + beta Psi2)
    B: np.ndarray  # beta A^{-1} Psi1^T Y, (M, D)


def _posterior(state: ModelState) -> _Posterior:
    p = state.kernel_params
    u = state.inducing
    beta = p.noise_precision
    M = u.n_points
    Kuu = kn.kern(u.points, u.points, p)
    Kuu[np.diag_indices(M)] += kn.JITTER * p.signal_variance
    Psi1 = kn.psi1(state.q_input, u, p)
    Psi2 = kn.psi2(state.q_input, u, p)
    LK = kn.jitchol(Kuu, scale=p.signal_variance)
    LA = kn.jitchol(Kuu + beta * Psi2, scale=p.signal_variance)
    B = beta * cho_solve((LA, True), Psi1.T @ state.train_outputs)
    return _Posterior(p, u, LK, LA, B)


def predict_deterministic(
    state: ModelState, x_star: np.ndarray, include_noise: bool = False
) -> PredictiveGaussian:
    """Posterior mean/variance of the GP at a single certain input."""
    means, variances = predict_deterministic_batch(
        state, np.atleast_2d(np.asarray(x_star, dtype=float)), include_noise
    )
    return PredictiveGaussian(means[0], variances[0])


def predict_deterministic_batch(
    state: ModelState, X_star: np.ndarray, include_noise: bool = False
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized deterministic prediction; returns (T, D) means and variances."""
    post = _posterior(state)
    p = post.params
    X_star = np.atleast_2d(np.asarray(X_star, dtype=float))
    if X_star.shape[1] != state.n_dims:
        raise ValueError(f"expected {state.n_dims}-dimensional inputs")
    Ksu = kn.kern(X_star, post.inducing.points, p)  # (T, M)
    mean = Ksu @ post.B  # (T, D)
    v1 = cho_solve((post.LK, True), Ksu.T)  # K_uu^{-1} k*
    v2 = cho_solve((post.LA, True), Ksu.T)  # A^{-1} k*
    var = p.signal_variance - np.sum(Ksu.T * v1, axis=0) + np.sum(Ksu.T * v2, axis=0)
    var = np.maximum(var, 1e-12)
    if include_noise:
        var = var + 1.0 / p.noise_precision
    return mean, np.tile(var[:, None], (1, mean.shape[1]))


def predict_uncertain(
    state: ModelState, q_star: GaussianInputDistribution, include_noise: bool = False
) -> PredictiveGaussian:
    """Exact first two moments of the prediction under a Gaussian test input.

    Uses the psi statistics of the test distribution against the collapsed
    posterior over inducing outputs; reduces to predict_deterministic when
    the input variance is zero.
    """
    if q_star.n_points != 1:
        raise ValueError("predict_uncertain takes a single-point input distribution")
    if q_star.n_dims != state.n_dims:
        raise ValueError(f"expected {state.n_dims}-dimensional inputs")
    post = _posterior(state)
    p = post.params
    psi1s = kn.psi1(q_star, post.inducing, p)  # (1, M)
    psi2s = kn.psi2(q_star, post.inducing, p)  # (M, M)
    mean = (psi1s @ post.B)[0]  # (D,)
    tr_K = float(np.trace(cho_solve((post.LK, True), psi2s)))
    tr_A = float(np.trace(cho_solve((post.LA, True), psi2s)))
    common = p.signal_variance - tr_K + tr_A
    quad = np.einsum("md,mk,kd->d", post.B, psi2s, post.B)
    var = common + quad - mean**2
    var = np.maximum(var, 1e-12)
    if include_noise:
        var = var + 1.0 / p.noise_precision
    return PredictiveGaussian(mean, var)


# ---------------------------------------------------------------------------
# latent posterior inference for outputs
# ---------------------------------------------------------------------------


def infer_latent_posterior(
    state: ModelState,
    y_star: np.ndarray,
    z_star: np.ndarray | None = None,
    input_observed: np.ndarray | None = None,
    max_iterations: int = 200,
    point_estimate: bool = False,
) -> GaussianInputDistribution:
    """Posterior over the input of a test output, with training parameters frozen.

    y_star may be partial: missing output dimensions are NaN and simply drop
    out of the objective. If parts of the test input are observed, pass them
    in z_star with input_observed marking the known dimensions; those stay
    clamped at the observation with peaked variance.

    With point_estimate=True the free variances are pinned at EPSILON and only
    the means are optimized (the point-imputation mode used by baselines).
    """
    y_star = np.asarray(y_star, dtype=float).ravel()
    if y_star.size != state.n_outputs:
        raise ValueError(f"expected {state.n_outputs} output values (NaN for missing)")
    obs_out = ~np.isnan(y_star)
    q = state.n_dims

    if input_observed is None:
        input_observed = np.zeros(q, dtype=bool)
    input_observed = np.asarray(input_observed, dtype=bool).ravel()
    if z_star is None:
        z_star = np.zeros(q)
    z_star = np.asarray(z_star, dtype=float).ravel()

    # initialize free means at the training point whose output is nearest
    mu0 = np.zeros(q)
    s0 = np.full(q, 0.5)
    if obs_out.any():
        d2 = np.sum((state.train_outputs[:, obs_out] - y_star[obs_out]) ** 2, axis=1)
        nearest = int(np.argmin(d2))
        mu0 = state.q_input.means[nearest].copy()
        s0 = np.maximum(state.q_input.variances[nearest].copy(), 0.01)
    mu0[input_observed] = z_star[input_observed]
    s0[input_observed] = EPSILON
    if point_estimate:
        s0[:] = EPSILON

    free = ~input_observed
    if not free.any():
        return GaussianInputDistribution(
            mu0[None, :].copy(), s0[None, :].copy(), input_observed[None, :].copy()
        )

    # the training rows are frozen, so their psi-statistic contributions are
    # constants of the optimization and can be assembled once up front; each
    # objective evaluation then only prices the single test row
    p = state.kernel_params
    u = state.inducing
    s2, beta = p.signal_variance, p.noise_precision
    M = u.n_points
    N = state.n_points
    Yt = state.train_outputs[:, obs_out]
    D = Yt.shape[1]
    y_obs = y_star[obs_out]

    Kuu = kn.kern(u.points, u.points, p)
    Kuu[np.diag_indices(M)] += kn.JITTER * s2
    LK = kn.jitchol(Kuu, scale=s2)
    logdet_K = 2.0 * float(np.sum(np.log(np.diag(LK))))
    Kuu_inv = cho_solve((LK, True), np.eye(M))
    Psi2_t = kn.psi2(state.q_input, u, p)
    C_t = kn.psi1(state.q_input, u, p).T @ Yt  # (M, D)
    yy = float(np.sum(Yt * Yt) + y_obs @ y_obs)
    psi0_full = (N + 1) * s2
    tr_t = float(np.sum(Kuu_inv * Psi2_t))
    log_2pi = float(np.log(2.0 * np.pi))
    nf = int(free.sum())
    zero_mask = np.zeros((1, q), dtype=bool)
    best = {"f": np.inf, "theta": None}

    def objective(theta):
        mu, s = mu0.copy(), s0.copy()
        mu[free] = theta[:nf]
        if not point_estimate:
            s[free] = np.exp(theta[nf:])
        q_row = GaussianInputDistribution(mu[None, :], s[None, :], zero_mask)
        try:
            psi1_r = kn.psi1(q_row, u, p)  # (1, M)
            psi2_r = kn.psi2(q_row, u, p)  # (M, M)
            A = Kuu + beta * (Psi2_t + psi2_r)
            LA = kn.jitchol(A, scale=s2)
        except (FloatingPointError, np.linalg.LinAlgError):
            return np.inf, np.zeros_like(theta)
        C = C_t + psi1_r.T * y_obs  # (M, D)
        E = cho_solve((LA, True), C)
        logdet_A = 2.0 * float(np.sum(np.log(np.diag(LA))))
        data_fit = (
            D * (-0.5 * (N + 1) * log_2pi + 0.5 * (N + 1) * np.log(beta)
                 + 0.5 * logdet_K - 0.5 * logdet_A)
            - 0.5 * beta * yy
            + 0.5 * beta**2 * float(np.sum(C * E))
        )
        tr_KiP2 = tr_t + float(np.sum(Kuu_inv * psi2_r))
        trace_corr = D * (-0.5 * beta * psi0_full + 0.5 * beta * tr_KiP2)
        kl = 0.5 * float(np.sum(s[free] + mu[free] ** 2 - 1.0 - np.log(s[free])))
        total = data_fit + trace_corr - kl

        Ai = cho_solve((LA, True), np.eye(M))
        dpsi1_r = beta**2 * (E @ y_obs)[None, :]
        dpsi2 = (
            -0.5 * D * beta * Ai
            - 0.5 * beta**3 * (E @ E.T)
            + 0.5 * D * beta * Kuu_inv
        )
        g1 = kn.psi1_backward(dpsi1_r, q_row, u, p)
        g2 = kn.psi2_backward(dpsi2, q_row, u, p)
        dmu = (g1["means"] + g2["means"])[0] - mu
        ds = (g1["variances"] + g2["variances"])[0] - 0.5 * (1.0 - 1.0 / s)
        grad = dmu[free]
        if not point_estimate:
            grad = np.concatenate([grad, (ds * s)[free]])
        if not (np.isfinite(total) and np.all(np.isfinite(grad))):
            return np.inf, np.zeros_like(theta)
        if total > -best["f"]:
            best["f"] = -total
            best["theta"] = theta.copy()
        return -total, -grad

    theta0 = mu0[free]
    if not point_estimate:
        theta0 = np.concatenate([theta0, np.log(s0[free])])
    objective(theta0)
    minimize(
        objective,
        theta0,
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": max_iterations, "ftol": 1e-9, "gtol": 1e-9},
    )
    if best["theta"] is None:
        warnings.warn("latent posterior inference failed; returning the initial state")
        best["theta"] = theta0
    mu, s = mu0.copy(), s0.copy()
    mu[free] = best["theta"][:nf]
    if not point_estimate:
        s[free] = np.exp(best["theta"][nf:])
    return GaussianInputDistribution(
        mu[None, :], s[None, :], input_observed[None, :].copy()
    )


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def save_model(state: ModelState, path: str, metadata: dict | None = None) -> None:
    """Write a self-describing JSON snapshot of the model state."""
    doc = {
        "format": "vcgp-model",
        "library_version": __version__,
        "shapes": {
            "n_points": state.n_points,
            "n_dims": state.n_dims,
            "n_outputs": state.n_outputs,
            "n_inducing": state.inducing.n_points,
        },
        "kernel_params": {
            "signal_variance": state.kernel_params.signal_variance,
            "lengthscales": state.kernel_params.lengthscales.tolist(),
            "noise_precision": state.kernel_params.noise_precision,
        },
        "inducing_points": state.inducing.points.tolist(),
        "q_input": {
            "means": state.q_input.means.tolist(),
            "variances": state.q_input.variances.tolist(),
            "fixed_mask": state.q_input.fixed_mask.tolist(),
        },
        "train_outputs": state.train_outputs.tolist(),
        "metadata": metadata or {},
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)


def load_model(path: str) -> ModelState:
    """Inverse of save_model."""
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != "vcgp-model":
        raise ValueError(f"{path} is not a vcgp model file")
    kp = doc["kernel_params"]
    return ModelState(
        KernelParams(kp["signal_variance"], np.array(kp["lengthscales"]), kp["noise_precision"]),
        InducingSet(np.array(doc["inducing_points"])),
        GaussianInputDistribution(
            np.array(doc["q_input"]["means"]),
            np.array(doc["q_input"]["variances"]),
            np.array(doc["q_input"]["fixed_mask"], dtype=bool),
        ),
        np.array(doc["train_outputs"]),
    )
