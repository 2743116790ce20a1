"""Data generation, metrics, CSV I/O and experiment orchestration.

Reproduces the desk-scale experiments as deterministic CSV reports: the
semi-described regression grid over missing-input fractions, Mackey-Glass
iterative forecasting, semi-supervised classification over labelled-set
sizes, and a dimensionality study.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import __version__
from .baselines import (
    SparseGPRegressor,
    gplvm_impute,
    mean_predictor,
    mlr_fit_predict,
    moment_matched_forecast,
    nn_predict,
    pca_features,
)
from .data import MaskedDataset
from .model import FitConfig, fit, init, predict_deterministic_batch
from .pipelines import (
    ForecastConfig,
    autoregressive_reformat,
    infer_latent_posterior,
    iterative_forecast,
    semi_described_fit,
    semi_supervised_embed,
    semi_supervised_train,
)

__all__ = [
    "MackeyGlassConfig",
    "mackey_glass_simulate",
    "synth_gp_dataset",
    "apply_missingness",
    "metrics",
    "ExperimentConfig",
    "MetricsReport",
    "run_experiment",
    "write_dataset_csv",
    "read_dataset_csv",
]

EXPERIMENTS = ("semi-described", "forecast", "semi-supervised", "dim-study")


# ---------------------------------------------------------------------------
# data generation
# ---------------------------------------------------------------------------


@dataclass
class MackeyGlassConfig:
    """Delay differential equation d z/dt = -b z(t) + alpha z(t-T)/(1 + z(t-T)^10)."""

    alpha: float = 0.2
    b: float = 0.1
    delay: float = 17.0
    step: float = 0.1
    length: int = 500  # samples at unit time spacing
    history_init: float = 1.2

    def __post_init__(self):
        if self.step <= 0:
            raise ValueError("step must be positive")
        if self.length < 1:
            raise ValueError("length must be at least 1")
        for name, ratio in (("delay", self.delay / self.step), ("unit", 1.0 / self.step)):
            if abs(ratio - round(ratio)) > 1e-9:
                raise ValueError(f"{name} must be an integer multiple of the step")


def mackey_glass_simulate(config: MackeyGlassConfig) -> np.ndarray:
    """Integrate the delay equation and return `length` samples at unit spacing.

    Fourth-order Runge-Kutta on the fine grid; the delayed state is read from
    the solution buffer with linear interpolation at half steps, and equals
    history_init for times at or before zero.
    """
    h = config.step
    d = int(round(config.delay / h))
    per = int(round(1.0 / h))
    n_steps = (config.length - 1) * per
    buf = np.empty(n_steps + 1)
    buf[0] = config.history_init

    def delayed(idx_float: float) -> float:
        # value of the state at fine-grid "index" idx_float (may be halfway)
        if idx_float <= 0:
            return config.history_init
        lo = int(np.floor(idx_float))
        frac = idx_float - lo
        if frac == 0.0:
            return buf[lo]
        return (1 - frac) * buf[lo] + frac * buf[min(lo + 1, n_steps)]

    def f(y: float, y_delay: float) -> float:
        return -config.b * y + config.alpha * y_delay / (1.0 + y_delay**10)

    for i in range(n_steps):
        y = buf[i]
        k1 = f(y, delayed(i - d))
        k2 = f(y + 0.5 * h * k1, delayed(i + 0.5 - d))
        k3 = f(y + 0.5 * h * k2, delayed(i + 0.5 - d))
        k4 = f(y + h * k3, delayed(i + 1 - d))
        buf[i + 1] = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.isfinite(buf[i + 1]):
            raise RuntimeError(f"integration blew up at step {i + 1}")
    return buf[:: per].copy()


def _gp_sample(rng, K: np.ndarray, count: int) -> np.ndarray:
    L = np.linalg.cholesky(K + 1e-8 * np.trace(K) / K.shape[0] * np.eye(K.shape[0]))
    return L @ rng.standard_normal((K.shape[0], count))


def synth_gp_dataset(
    seed: int,
    N: int,
    Q: int,
    D: int,
    input_lengthscale: float = 0.1,
    output_lengthscale: float | None = None,
    noise_std: float = 0.05,
) -> MaskedDataset:
    """Inputs sampled from a GP over an index grid, outputs from a GP on them.

    Each input dimension is an independent smooth GP path over [0, 1]; the
    outputs are draws from an RBF GP evaluated at those inputs, plus noise.
    """
    rng = np.random.default_rng(seed)
    t = np.linspace(0.0, 1.0, N)
    Kt = np.exp(-0.5 * (t[:, None] - t[None, :]) ** 2 / input_lengthscale**2)
    Z = _gp_sample(rng, Kt, Q)  # (N, Q)

    if output_lengthscale is None:
        output_lengthscale = float(np.sqrt(Q))
    sq = np.sum((Z[:, None, :] - Z[None, :, :]) ** 2, axis=2)
    Kz = np.exp(-0.5 * sq / output_lengthscale**2)
    Y = _gp_sample(rng, Kz, D) + noise_std * rng.standard_normal((N, D))
    return MaskedDataset(
        Z,
        None,
        Y,
        metadata={
            "generator": "synth-gp",
            "seed": seed,
            "input_lengthscale": input_lengthscale,
            "output_lengthscale": output_lengthscale,
            "noise_std": noise_std,
        },
    )


def apply_missingness(
    dataset: MaskedDataset, fraction: float, seed: int, target_rows=None
) -> MaskedDataset:
    """Mask an exact round(fraction * cells) count of entries in the target rows."""
    if not 0.0 <= fraction <= 1.0:
        raise ValueError("fraction must lie in [0, 1]")
    if dataset.inputs is None:
        raise ValueError("dataset has no inputs to mask")
    rng = np.random.default_rng(seed)
    mask = dataset.input_mask.copy()
    if target_rows is None:
        target_rows = np.arange(dataset.n_points)
    target_rows = np.asarray(target_rows, dtype=int)
    q = dataset.inputs.shape[1]
    cells = target_rows.size * q
    k = int(round(fraction * cells))
    hit = rng.choice(cells, size=k, replace=False)
    mask[target_rows[hit // q], hit % q] = False
    return MaskedDataset(
        dataset.inputs.copy(),
        mask,
        dataset.outputs.copy(),
        dataset.label_mask.copy(),
        dict(dataset.metadata, missing_fraction=fraction),
    )


# ---------------------------------------------------------------------------
# metrics and reports
# ---------------------------------------------------------------------------


def metrics(predictions, truth, classification: bool = False) -> dict:
    """MAE and MSE over all entries; misclassification count for labels."""
    predictions = np.asarray(predictions)
    truth = np.asarray(truth)
    if predictions.shape != truth.shape:
        raise ValueError(f"shape mismatch: {predictions.shape} vs {truth.shape}")
    if classification:
        return {"misclassified": int(np.sum(predictions != truth))}
    err = predictions.astype(float) - truth.astype(float)
    return {"mae": float(np.mean(np.abs(err))), "mse": float(np.mean(err**2))}


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce one experiment deterministically."""

    experiment: str
    seeds: list = field(default_factory=lambda: [0, 1, 2, 3])
    trials: int = 0
    fractions: list = field(default_factory=lambda: [0.1, 0.3, 0.5, 0.7, 0.9])
    dataset: dict = field(default_factory=dict)
    fit: FitConfig = field(default_factory=FitConfig)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if self.trials == 0:
            self.trials = len(self.seeds)
        if self.trials != len(self.seeds):
            raise ValueError("trials must equal the number of seeds")
        if any(not 0.0 <= f <= 1.0 for f in self.fractions):
            raise ValueError("fractions must lie in [0, 1]")
        if isinstance(self.fit, dict):
            self.fit = FitConfig(**self.fit)

    def to_dict(self) -> dict:
        d = asdict(self)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        return cls(**d)

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class MetricsReport:
    """Per-trial rows plus aggregates and provenance."""

    rows: list  # dicts: method, trial, seed, x, mae, mse, errors
    provenance: dict
    traces: dict = field(default_factory=dict)  # name -> list of row dicts

    def aggregates(self) -> list:
        """Mean and standard deviation per (method, x) over trials."""
        groups: dict = {}
        for r in self.rows:
            groups.setdefault((r["method"], r["x"]), []).append(r)
        out = []
        for (method, x), rs in sorted(groups.items(), key=lambda kv: (kv[0][0], str(kv[0][1]))):
            agg = {"method": method, "x": x, "n_trials": len(rs)}
            for key in ("mae", "mse", "errors"):
                vals = [r[key] for r in rs if r.get(key) is not None]
                if vals:
                    agg[f"mean_{key}"] = float(np.mean(vals))
                    agg[f"std_{key}"] = float(np.std(vals))
            out.append(agg)
        return out

    def write(self, out_dir: str) -> None:
        os.makedirs(out_dir, exist_ok=True)
        cols = ["method", "trial", "seed", "x", "mae", "mse", "errors"]
        with open(os.path.join(out_dir, "report.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for r in self.rows:
                w.writerow([_csv_cell(r.get(c)) for c in cols])
        with open(os.path.join(out_dir, "summary.txt"), "w") as fh:
            fh.write(f"experiment: {self.provenance['experiment']}\n")
            fh.write(f"config_hash: {self.provenance['config_hash']}\n")
            fh.write(f"seeds: {self.provenance['seeds']}\n")
            fh.write(f"library_version: {self.provenance['library_version']}\n\n")
            for agg in self.aggregates():
                fh.write(
                    " ".join(f"{k}={_csv_cell(v)}" for k, v in agg.items()) + "\n"
                )
        for name, rows in self.traces.items():
            if not rows:
                continue
            cols_t = list(rows[0].keys())
            with open(os.path.join(out_dir, f"{name}.csv"), "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(cols_t)
                for r in rows:
                    w.writerow([_csv_cell(r.get(c)) for c in cols_t])


def _csv_cell(v) -> str:
    if v is None:
        return "NA"
    if isinstance(v, float):
        return repr(float(v))
    return str(v)


# ---------------------------------------------------------------------------
# experiment drivers
# ---------------------------------------------------------------------------


def run_experiment(config: ExperimentConfig, out_dir: str | None = None) -> MetricsReport:
    """Execute the named experiment across its trials; optionally write CSVs.

    Failures inside one trial are recorded as rows with NA metrics and do not
    abort the other trials; aggregates cover the successes only.
    """
    driver = {
        "semi-described": _run_semi_described,
        "forecast": _run_forecast,
        "semi-supervised": _run_semi_supervised,
        "dim-study": _run_dim_study,
    }[config.experiment]
    rows, traces = driver(config)
    report = MetricsReport(
        rows=rows,
        provenance={
            "experiment": config.experiment,
            "config_hash": config.hash(),
            "seeds": list(config.seeds),
            "library_version": __version__,
        },
        traces=traces,
    )
    if out_dir is not None:
        report.write(out_dir)
    return report


def _row(method, trial, seed, x, m=None, error=None):
    r = {"method": method, "trial": trial, "seed": seed, "x": x,
         "mae": None, "mse": None, "errors": None}
    if m:
        r.update({k: m[k] for k in ("mae", "mse") if k in m})
        if "misclassified" in m:
            r["errors"] = m["misclassified"]
    if error is not None:
        r["note"] = error
    return r


def _mean_impute(X, mask):
    """Column-mean imputation over the observed entries."""
    X = X.copy()
    for j in range(X.shape[1]):
        col_obs = mask[:, j]
        fill = X[col_obs, j].mean() if col_obs.any() else 0.0
        X[~col_obs, j] = fill
    return X


def _run_semi_described(config: ExperimentConfig):
    p = {
        "n_observed": 40, "n_partial": 60, "n_test": 100, "q": 15, "d": 5,
        "include_gplvm_baseline": False,
    }
    p.update(config.dataset)
    n_total = p["n_observed"] + p["n_partial"] + p["n_test"]
    rows = []
    for trial, seed in enumerate(config.seeds):
        ds = synth_gp_dataset(seed, n_total, p["q"], p["d"])
        order = np.random.default_rng(seed + 10_000).permutation(n_total)
        i_obs = order[: p["n_observed"]]
        i_part = order[p["n_observed"] : p["n_observed"] + p["n_partial"]]
        i_test = order[p["n_observed"] + p["n_partial"] :]
        assert not (set(i_test) & (set(i_obs) | set(i_part)))
        X, Y = ds.inputs, ds.outputs
        Xt, Yt = X[i_test], Y[i_test]
        cfg = replace(config.fit, seed=seed)

        # fraction-independent references, fit once per seed
        cfg_obs = replace(cfg, num_inducing=min(cfg.num_inducing, i_obs.size))
        gp_obs, _ = fit(init(MaskedDataset(X[i_obs], None, Y[i_obs]), cfg_obs), cfg_obs)
        pred_obs, _ = predict_deterministic_batch(gp_obs, Xt)
        rows.extend(
            _row("gp-observed", trial, seed, f, metrics(pred_obs, Yt))
            for f in config.fractions
        )
        rows.extend(
            _row("mean", trial, seed, f, metrics(mean_predictor(Y[i_obs], Yt.shape[0]), Yt))
            for f in config.fractions
        )

        for frac in config.fractions:
            train_idx = np.concatenate([i_obs, i_part])
            masked = apply_missingness(
                MaskedDataset(X[train_idx], None, Y[train_idx]),
                frac,
                seed + 20_000,
                target_rows=np.arange(i_obs.size, train_idx.size),
            )
            try:
                model = semi_described_fit(masked, cfg)
                pred, _ = predict_deterministic_batch(model, Xt)
                rows.append(_row("sd-gp", trial, seed, frac, metrics(pred, Yt)))
            except Exception as exc:  # keep other trials alive
                rows.append(_row("sd-gp", trial, seed, frac, error=str(exc)))

            Ximp = _mean_impute(masked.inputs, masked.input_mask)
            rows.append(
                _row("mlr", trial, seed, frac,
                     metrics(mlr_fit_predict(Ximp, masked.outputs, Xt), Yt))
            )
            rows.append(
                _row("nn", trial, seed, frac,
                     metrics(nn_predict(masked.inputs, masked.input_mask,
                                        masked.outputs, Xt), Yt))
            )
            if p["include_gplvm_baseline"]:
                try:
                    done = gplvm_impute(masked, cfg)
                    gp_imp, _ = fit(init(MaskedDataset(done, None, masked.outputs), cfg), cfg)
                    pred_imp, _ = predict_deterministic_batch(gp_imp, Xt)
                    rows.append(_row("gplvm-impute", trial, seed, frac, metrics(pred_imp, Yt)))
                except Exception as exc:
                    rows.append(_row("gplvm-impute", trial, seed, frac, error=str(exc)))
    return rows, {}


def _run_forecast(config: ExperimentConfig):
    p = {
        "tau": 18, "train_points": 72, "horizon": 1110,
        "washout": 100, "mg": {},
    }
    p.update(config.dataset)
    tau, horizon = p["tau"], p["horizon"]
    mg = MackeyGlassConfig(
        length=p["washout"] + p["train_points"] + horizon + 1, **p["mg"]
    )
    raw = mackey_glass_simulate(mg)[p["washout"] :]
    train = raw[: p["train_points"]]
    mu, sd = float(train.mean()), float(train.std())
    series = (raw - mu) / sd
    X, Y = autoregressive_reformat(series[: p["train_points"]], tau)
    seed_window = series[p["train_points"] - tau : p["train_points"]]
    truth = series[p["train_points"] : p["train_points"] + horizon]

    rows, traces = [], {}
    for trial, seed in enumerate(config.seeds):
        cfg = replace(config.fit, seed=seed, num_inducing=min(config.fit.num_inducing, X.shape[0]))
        fc = ForecastConfig(tau, horizon, True)
        results = {}
        state, _ = fit(init(MaskedDataset(X, None, Y), cfg), cfg)
        results["ours"] = iterative_forecast(state, seed_window, fc)
        gp = SparseGPRegressor(cfg.num_inducing, seed, cfg.max_iterations).fit(X, Y)
        results["gp-uncert"] = moment_matched_forecast(gp, seed_window, fc)
        results["naive"] = moment_matched_forecast(
            gp, seed_window, replace(fc, propagate_uncertainty=False)
        )
        trace_rows = []
        for step in range(horizon):
            tr = {"step": step, "truth": float(truth[step])}
            for name, preds in results.items():
                tr[f"{name}_mean"] = float(preds[step].mean[0])
                tr[f"{name}_variance"] = float(preds[step].variance[0])
            trace_rows.append(tr)
        traces[f"forecast_trace_seed{seed}"] = trace_rows
        for name, preds in results.items():
            means = np.array([q.mean[0] for q in preds])
            rows.append(_row(name, trial, seed, horizon, metrics(means, truth)))
    return rows, traces


def _manifold_classes(rng, n_per_class: int, n_classes: int, feature_dim: int):
    """Class-clustered 2-D latents lifted through a random smooth nonlinear map.

    The features mix class-informative latent coordinates, class-independent
    nuisance directions, and strong isotropic noise in a high-dimensional
    space. A linear projection estimated from a handful of points is then
    dominated by noise directions, while the manifold itself stays
    low-dimensional and recoverable from the full point pool.
    """
    angles = 2 * np.pi * np.arange(n_classes) / n_classes
    centers = 2.0 * np.column_stack([np.cos(angles), np.sin(angles)])
    lat = np.vstack(
        [c + 0.3 * rng.standard_normal((n_per_class, 2)) for c in centers]
    )
    labels = np.repeat(np.arange(n_classes), n_per_class)
    nuisance = 1.2 * rng.standard_normal((lat.shape[0], 2))
    feats = np.column_stack(
        [
            1.6 * lat,
            np.sin(lat),
            lat[:, :1] * lat[:, 1:],
            np.cos(lat @ np.array([0.7, -0.4]))[:, None],
            nuisance,
        ]
    )
    basis = rng.standard_normal((8, feature_dim)) / np.sqrt(8)
    Z = feats @ basis + 2.2 * rng.standard_normal((lat.shape[0], feature_dim))
    perm = rng.permutation(lat.shape[0])
    return Z[perm], labels[perm]


def _run_semi_supervised(config: ExperimentConfig):
    p = {
        "n_classes": 3, "feature_dim": 25, "latent_dim": 2,
        "labelled_sizes": [10, 20, 40, 80], "n_unlabelled": 60, "n_test": 60,
        "num_samples": 6,
    }
    p.update(config.dataset)
    sizes = p["labelled_sizes"]
    rows = []
    for trial, seed in enumerate(config.seeds):
        rng = np.random.default_rng(seed)
        per_class = (max(sizes) + p["n_unlabelled"] + p["n_test"]) // p["n_classes"] + 1
        Z, labels = _manifold_classes(rng, per_class, p["n_classes"], p["feature_dim"])
        n_lab, n_unl, n_tst = max(sizes), p["n_unlabelled"], p["n_test"]
        Zl, yl = Z[:n_lab], labels[:n_lab]
        Zu = Z[n_lab : n_lab + n_unl]
        Zt, yt = Z[n_lab + n_unl : n_lab + n_unl + n_tst], labels[n_lab + n_unl : n_lab + n_unl + n_tst]

        cfg = replace(config.fit, seed=seed)
        pool = np.vstack([Zl, Zu])
        embed_model, q_pool = semi_supervised_embed(
            MaskedDataset(pool, None, pool), cfg, latent_dim=p["latent_dim"]
        )
        # embed the test points once per trial; classifiers reuse the means
        test_means = np.vstack(
            [infer_latent_posterior(embed_model, z).means[0] for z in Zt]
        )
        from .kernel import GaussianInputDistribution

        for size in sizes:
            ql = GaussianInputDistribution(
                q_pool.means[:size], q_pool.variances[:size], q_pool.fixed_mask[:size]
            )
            try:
                clf = semi_supervised_train(ql, yl[:size], p["num_samples"], seed)
                pred = clf.classes[np.argmax(clf.predict_proba(test_means), axis=1)]
                rows.append(_row("ours", trial, seed, size, metrics(pred, yt, True)))

                q0 = GaussianInputDistribution(
                    ql.means, np.zeros_like(ql.variances), ql.fixed_mask
                )
                clf_m = semi_supervised_train(q0, yl[:size], 1, seed)
                pred_m = clf_m.classes[np.argmax(clf_m.predict_proba(test_means), axis=1)]
                rows.append(_row("ours-mean-only", trial, seed, size, metrics(pred_m, yt, True)))

                proj, basis = pca_features(Zl[:size], p["latent_dim"])
                clf_p = semi_supervised_train(
                    GaussianInputDistribution(
                        proj, np.zeros_like(proj), np.zeros(proj.shape, bool)
                    ),
                    yl[:size], 1, seed,
                )
                proj_t = (Zt - Zl[:size].mean(axis=0)) @ basis.T
                pred_p = clf_p.classes[np.argmax(clf_p.predict_proba(proj_t), axis=1)]
                rows.append(_row("pca", trial, seed, size, metrics(pred_p, yt, True)))
            except Exception as exc:
                rows.append(_row("ours", trial, seed, size, error=str(exc)))
    return rows, {}


def _run_dim_study(config: ExperimentConfig):
    p = {"qs": [5, 10], "ds": [2, 5], "n_observed": 25, "n_partial": 25, "n_test": 40}
    p.update(config.dataset)
    rows = []
    for trial, seed in enumerate(config.seeds):
        for q in p["qs"]:
            for d in p["ds"]:
                sub = replace(
                    config,
                    experiment="semi-described",
                    seeds=[seed],
                    trials=1,
                    dataset={
                        "n_observed": p["n_observed"], "n_partial": p["n_partial"],
                        "n_test": p["n_test"], "q": q, "d": d,
                    },
                )
                for r in _run_semi_described(sub)[0]:
                    if r["method"] == "sd-gp":
                        r.update(trial=trial, method=f"sd-gp_q{q}_d{d}")
                        rows.append(r)
    return rows, {}


# ---------------------------------------------------------------------------
# dataset CSV I/O
# ---------------------------------------------------------------------------


def write_dataset_csv(dataset: MaskedDataset, path: str) -> None:
    """Header row, NA for missing entries, `label` column for labelled data."""
    q = 0 if dataset.inputs is None else dataset.inputs.shape[1]
    classification = bool(dataset.metadata.get("classification", False))
    header = [f"x{j}" for j in range(q)]
    if classification:
        header.append("label")
    else:
        header += [f"y{j}" for j in range(dataset.outputs.shape[1])]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i in range(dataset.n_points):
            row = []
            for j in range(q):
                row.append(
                    repr(float(dataset.inputs[i, j])) if dataset.input_mask[i, j] else "NA"
                )
            if classification:
                row.append(
                    str(int(dataset.outputs[i, 0])) if dataset.label_mask[i] else "NA"
                )
            else:
                row += [repr(float(v)) for v in dataset.outputs[i]]
            w.writerow(row)


def read_dataset_csv(path: str) -> MaskedDataset:
    """Inverse of write_dataset_csv."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        body = list(reader)
    x_cols = [i for i, h in enumerate(header) if h.startswith("x")]
    y_cols = [i for i, h in enumerate(header) if h.startswith("y")]
    label_col = header.index("label") if "label" in header else None
    n = len(body)

    def cell(r, c):
        return None if body[r][c] == "NA" else float(body[r][c])

    inputs = mask = None
    if x_cols:
        inputs = np.zeros((n, len(x_cols)))
        mask = np.ones((n, len(x_cols)), dtype=bool)
        for r in range(n):
            for jj, c in enumerate(x_cols):
                v = cell(r, c)
                if v is None:
                    mask[r, jj] = False
                else:
                    inputs[r, jj] = v
    if label_col is not None:
        outputs = np.zeros((n, 1))
        label_mask = np.ones(n, dtype=bool)
        for r in range(n):
            v = cell(r, label_col)
            if v is None:
                label_mask[r] = False
            else:
                outputs[r, 0] = v
        return MaskedDataset(inputs, mask, outputs, label_mask,
                             metadata={"classification": True})
    outputs = np.array([[float(body[r][c]) for c in y_cols] for r in range(n)])
    return MaskedDataset(inputs, mask, outputs)
