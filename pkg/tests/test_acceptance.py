"""End-to-end acceptance suite.

Each test covers one numbered acceptance criterion and prints a single
PASS/FAIL line; the conftest terminal-summary hook replays all verdict lines
at the end of the run, so they are visible without -s. The heavy
experiment-level criteria (5, 6, 7) run the real experiment drivers at
full scale, so this module takes several minutes.
"""

import os
import time

import numpy as np
import pytest
from scipy.special import logsumexp

from vcgp.bound import collapsed_bound, likelihood_terms
from vcgp.data import MaskedDataset
from vcgp.harness import ExperimentConfig, run_experiment
from vcgp.kernel import (
    EPSILON,
    GaussianInputDistribution,
    InducingSet,
    KernelParams,
    kern,
    psi0,
    psi1,
    psi2,
)
from vcgp.model import FitConfig, fit, init, predict_deterministic_batch
from vcgp.pipelines import (
    ForecastConfig,
    iterative_forecast,
    semi_described_fit,
)
from vcgp.state import ModelState, Packing, pack, unpack


def _verdict(number: int, name: str, ok: bool, detail: str = "") -> bool:
    status = "PASS" if ok else "FAIL"
    suffix = f" ({detail})" if detail else ""
    line = f"[criterion {number}] {name}: {status}{suffix}"
    print(line)
    # the conftest terminal-summary hook replays these lines after the run,
    # where pytest's output capture no longer applies
    pytest.acceptance_verdicts = getattr(pytest, "acceptance_verdicts", [])
    pytest.acceptance_verdicts.append(line)
    return ok


def random_state(rng, n=6, q=2, d=2, m=3, clamp_fraction=0.0):
    params = KernelParams(
        signal_variance=float(rng.uniform(0.5, 1.5)),
        lengthscales=rng.uniform(0.6, 1.8, size=q),
        noise_precision=float(rng.uniform(1.0, 4.0)),
    )
    means = rng.normal(size=(n, q))
    variances = rng.uniform(0.05, 0.8, size=(n, q))
    mask = rng.random((n, q)) < clamp_fraction
    variances[mask] = EPSILON
    qdist = GaussianInputDistribution(means, variances, mask)
    u = InducingSet(rng.normal(size=(m, q)))
    Y = rng.normal(size=(n, d))
    return ModelState(params, u, qdist, Y)


class TestCriterion1PsiMonteCarlo:
    def test_psi_statistics_match_monte_carlo(self):
        start = time.time()
        rng = np.random.default_rng(99)
        n_samples, chunk = 1_000_000, 100_000
        worst = 0.0
        for _ in range(20):
            Q = int(rng.integers(1, 5))
            N = int(rng.integers(2, 11))
            M = int(rng.integers(1, 6))
            params = KernelParams(
                float(rng.uniform(0.5, 2.0)),
                rng.uniform(0.5, 2.0, size=Q),
                float(rng.uniform(0.5, 4.0)),
            )
            mu = rng.normal(size=(N, Q))
            S = rng.uniform(0.05, 1.0, size=(N, Q))
            qdist = GaussianInputDistribution(mu, S, np.zeros((N, Q), bool))
            Z = 1.2 * rng.normal(size=(M, Q))
            u = InducingSet(Z)

            p0 = psi0(qdist, params)
            P1 = psi1(qdist, u, params)
            P2 = psi2(qdist, u, params)

            # psi0 integrand k(x, x) = sigma_f^2 is constant under the RBF
            # kernel, so the Monte-Carlo estimate is exact
            assert abs(p0 - N * params.signal_variance) < 1e-12

            sum1 = np.zeros((N, M))
            sumsq1 = np.zeros((N, M))
            sum2 = np.zeros((M, M))
            sumsq2 = np.zeros((M, M))
            inv_ell2 = 1.0 / params.lengthscales**2
            for _c in range(n_samples // chunk):
                eps = rng.standard_normal((chunk, N, Q))
                x = mu[None] + np.sqrt(S)[None] * eps  # (chunk, N, Q)
                diff2 = (x[:, :, None, :] - Z[None, None, :, :]) ** 2
                k = params.signal_variance * np.exp(
                    -0.5 * np.einsum("cnmq,q->cnm", diff2, inv_ell2)
                )  # (chunk, N, M)
                sum1 += k.sum(axis=0)
                sumsq1 += (k**2).sum(axis=0)
                # per-sample Psi2 estimator already sums over the N data points
                t = np.einsum("cni,cnj->cij", k, k)
                sum2 += t.sum(axis=0)
                sumsq2 += (t**2).sum(axis=0)

            mc1 = sum1 / n_samples
            se1 = np.sqrt(
                np.maximum(sumsq1 / n_samples - mc1**2, 0.0) / n_samples
            )
            mc2 = sum2 / n_samples
            se2 = np.sqrt(
                np.maximum(sumsq2 / n_samples - mc2**2, 0.0) / n_samples
            )

            dev1 = np.abs(P1 - mc1) / (3.0 * se1 + 1e-12)
            dev2 = np.abs(P2 - mc2) / (3.0 * se2 + 1e-12)
            worst = max(worst, float(dev1.max()), float(dev2.max()))
            assert np.all(dev1 <= 1.0), f"Psi1 off by {dev1.max():.2f}x the 3-SE band"
            assert np.all(dev2 <= 1.0), f"Psi2 off by {dev2.max():.2f}x the 3-SE band"

            # S = 0 reduction: the statistics collapse onto plain kernel matrices
            q0 = GaussianInputDistribution(mu, np.zeros_like(S), np.zeros((N, Q), bool))
            K = kern(mu, Z, params)
            assert np.max(np.abs(psi1(q0, u, params) - K)) < 1e-12
            assert np.max(np.abs(psi2(q0, u, params) - K.T @ K)) < 1e-12
            assert abs(psi0(q0, params) - N * params.signal_variance) < 1e-12

        elapsed = time.time() - start
        ok = elapsed < 120.0
        assert _verdict(
            1,
            "psi statistics vs 10^6-sample Monte Carlo (3 SE) and S=0 kernel reduction",
            ok,
            f"worst deviation {worst:.3f}x band, {elapsed:.1f}s",
        )


class TestCriterion2GradientSuite:
    @staticmethod
    def _fd(state, step=1e-5):
        theta0 = pack(state)
        g = np.zeros_like(theta0)
        for i in range(theta0.size):
            tp, tm = theta0.copy(), theta0.copy()
            tp[i] += step
            tm[i] -= step
            g[i] = (
                collapsed_bound(unpack(state, tp)).total
                - collapsed_bound(unpack(state, tm)).total
            ) / (2 * step)
        return g

    def test_analytic_gradient_matches_finite_differences(self):
        from vcgp.bound import bound_value_and_gradient

        start = time.time()
        rng = np.random.default_rng(22)
        worst = {}
        for trial in range(10):
            n = int(rng.integers(4, 9))
            q = int(rng.integers(1, 4))
            d = int(rng.integers(1, 4))
            m = int(rng.integers(2, min(n, 5) + 1))
            s = random_state(rng, n=n, q=q, d=d, m=m,
                             clamp_fraction=0.3 if trial % 2 else 0.0)
            _, g = bound_value_and_gradient(s)
            g_fd = self._fd(s)

            # packed layout: [log s2 | log ell (q) | log beta | Z (m*q) | mu | log S]
            nf = int(np.sum(~s.q_input.fixed_mask))
            bounds = {
                "signal_variance": (0, 1),
                "lengthscales": (1, 1 + q),
                "noise_precision": (1 + q, 2 + q),
                "inducing": (2 + q, 2 + q + m * q),
                "means": (2 + q + m * q, 2 + q + m * q + nf),
                "variances": (2 + q + m * q + nf, 2 + q + m * q + 2 * nf),
            }
            for name, (lo, hi) in bounds.items():
                ga, gf = g[lo:hi], g_fd[lo:hi]
                denom = np.maximum(np.maximum(np.abs(ga), np.abs(gf)), 1e-3)
                rel = float(np.max(np.abs(ga - gf) / denom)) if ga.size else 0.0
                worst[name] = max(worst.get(name, 0.0), rel)
                assert rel < 1e-4, f"{name} gradient relative error {rel:.2e}"
        elapsed = time.time() - start
        ok = elapsed < 120.0
        assert _verdict(
            2,
            "analytic bound gradient vs central finite differences (<1e-4 per class)",
            ok,
            "worst " + max(worst, key=worst.get) + f" {max(worst.values()):.1e}, {elapsed:.1f}s",
        )


class TestCriterion3BoundCollapse:
    @staticmethod
    def _gp_log_marginal(X, Y, params):
        n, d = Y.shape
        K = kern(X, X, params) + np.eye(n) / params.noise_precision
        _, logdet = np.linalg.slogdet(K)
        Ki = np.linalg.inv(K)
        return float(
            sum(
                -0.5 * n * np.log(2 * np.pi) - 0.5 * logdet - 0.5 * Y[:, j] @ Ki @ Y[:, j]
                for j in range(d)
            )
        )

    def test_zero_variance_full_inducing_equals_dense_gp(self):
        rng = np.random.default_rng(33)
        worst = 0.0
        for _ in range(5):
            n, q, d = int(rng.integers(4, 9)), int(rng.integers(1, 4)), int(rng.integers(1, 3))
            s = random_state(rng, n=n, q=q, d=d, m=n)
            # moderate noise precision: the mandated K_uu jitter otherwise
            # dominates the 1e-6 relative budget
            s.kernel_params.noise_precision = float(rng.uniform(0.5, 1.5))
            s.q_input.variances[:] = 0.0
            s.inducing.points[:] = s.q_input.means
            data_fit, trace = likelihood_terms(s)
            exact = self._gp_log_marginal(s.q_input.means, s.train_outputs, s.kernel_params)
            rel = abs((data_fit + trace - exact) / exact)
            worst = max(worst, rel)
            assert rel < 1e-6
        assert _verdict(
            3,
            "S=0, M=N, X_u=X likelihood terms equal dense GP log marginal (1e-6 rel)",
            True,
            f"worst relative error {worst:.1e}",
        )


class TestCriterion4QuadratureBound:
    @staticmethod
    def _log_marginal_quadrature(Y, params, n_points, n_nodes=40):
        """log p(Y) = log E_{X~N(0,I)}[ N(Y | 0, K_ff(X) + beta^{-1} I) ].

        Tensor-product Gauss-Hermite over the n_points scalar inputs (Q=1),
        evaluated with batched dense linear algebra.
        """
        t, w = np.polynomial.hermite.hermgauss(n_nodes)
        grids = np.meshgrid(*([np.sqrt(2.0) * t] * n_points), indexing="ij")
        X = np.stack([g.ravel() for g in grids], axis=1)  # (B, N)
        logw = np.log(w) - 0.5 * np.log(np.pi)
        wgrids = np.meshgrid(*([logw] * n_points), indexing="ij")
        log_weights = sum(g.ravel() for g in wgrids)  # (B,)

        diff2 = (X[:, :, None] - X[:, None, :]) ** 2
        K = params.signal_variance * np.exp(-0.5 * diff2 / params.lengthscales[0] ** 2)
        K += np.eye(n_points)[None] / params.noise_precision
        _, logdet = np.linalg.slogdet(K)
        y = Y[:, 0]
        rhs = np.broadcast_to(y, (K.shape[0], n_points))[..., None]
        sol = np.linalg.solve(K, rhs)[..., 0]
        quad = sol @ y
        loglik = -0.5 * n_points * np.log(2 * np.pi) - 0.5 * logdet - 0.5 * quad
        return float(logsumexp(log_weights + loglik))

    def test_bound_below_quadrature_marginal(self):
        rng = np.random.default_rng(44)
        margins = []
        for n, m in [(2, 2), (3, 2), (3, 3)]:
            params = KernelParams(
                float(rng.uniform(0.6, 1.4)),
                rng.uniform(0.7, 1.5, size=1),
                float(rng.uniform(0.8, 2.0)),
            )
            Y = rng.normal(size=(n, 1))
            qdist = GaussianInputDistribution(
                rng.normal(size=(n, 1)),
                rng.uniform(0.2, 0.9, size=(n, 1)),
                np.zeros((n, 1), bool),
            )
            u = InducingSet(rng.normal(size=(m, 1)))
            state = ModelState(params, u, qdist, Y)
            log_py = self._log_marginal_quadrature(Y, params, n)
            assert collapsed_bound(state).total <= log_py + 1e-4

            # tighten q with hyperparameters and inducing points frozen so the
            # quadrature oracle keeps referring to the same model, then recheck
            tight = ModelState(
                params.copy(), u.copy(), qdist.copy(), Y,
                Packing(include_hyper=False, include_inducing=False),
            )
            tight, _ = fit(tight, FitConfig(max_iterations=100, num_inducing=m),
                           two_phase=False)
            total = collapsed_bound(tight).total
            margins.append(log_py - total)
            assert total <= log_py + 1e-4
        assert _verdict(
            4,
            "collapsed bound stays below quadrature log marginal (Q=1, D=1)",
            True,
            f"smallest margin {min(margins):.2e}",
        )


class TestCriterion5MackeyGlassForecast:
    def test_forecast_ordering_and_magnitude(self):
        start = time.time()
        config = ExperimentConfig(
            experiment="forecast",
            seeds=[0],
            fit=FitConfig(num_inducing=54),
        )
        report = run_experiment(config)
        by = {r["method"]: r for r in report.rows}
        mae = {m: by[m]["mae"] for m in ("ours", "gp-uncert", "naive")}
        mse = {m: by[m]["mse"] for m in ("ours", "gp-uncert", "naive")}
        elapsed = time.time() - start
        ok = (
            mae["ours"] < mae["gp-uncert"] < mae["naive"]
            and mse["ours"] < mse["gp-uncert"]
            and mse["ours"] < mse["naive"]
            and 0.3 <= mae["ours"] <= 0.8
            and elapsed < 600.0
        )
        assert _verdict(
            5,
            "1110-step Mackey-Glass: propagated < moment-matched < naive",
            ok,
            f"MAE {mae['ours']:.3f}/{mae['gp-uncert']:.3f}/{mae['naive']:.3f}, "
            f"MSE {mse['ours']:.3f}/{mse['gp-uncert']:.3f}/{mse['naive']:.3f}, "
            f"{elapsed:.0f}s",
        )


class TestCriterion6SemiDescribedCurve:
    def test_sd_gp_tracks_observed_only_gp(self):
        start = time.time()
        fractions = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 1.0]
        config = ExperimentConfig(
            experiment="semi-described",
            seeds=[0, 1, 2, 3],
            fractions=fractions,
            dataset={"n_observed": 40, "n_partial": 60, "n_test": 100, "q": 15, "d": 5},
            fit=FitConfig(max_iterations=300, num_inducing=30),
        )
        report = run_experiment(config)
        mean_mse = {}
        for r in report.rows:
            assert r["mse"] is not None, f"failed trial: {r}"
            mean_mse.setdefault((r["method"], r["x"]), []).append(r["mse"])
        sd = {f: float(np.mean(mean_mse[("sd-gp", f)])) for f in fractions}
        gp = {f: float(np.mean(mean_mse[("gp-observed", f)])) for f in fractions}
        elapsed = time.time() - start
        ok = (
            all(sd[f] <= gp[f] for f in fractions if f <= 0.8)
            and abs(sd[1.0] - gp[1.0]) <= 0.1 * gp[1.0]
            and elapsed < 1800.0
        )
        detail = ", ".join(f"{f:.1f}:{sd[f] / gp[f]:.2f}" for f in fractions)
        assert _verdict(
            6,
            "semi-described MSE <= observed-only GP per fraction, matches at 1.0",
            ok,
            f"SD/GP ratio by fraction {detail}, {elapsed:.0f}s",
        )


class TestCriterion7SemiSupervisedGain:
    def test_embedding_pipeline_beats_pca_most_at_small_sizes(self):
        start = time.time()
        sizes = [10, 20, 40, 80]
        config = ExperimentConfig(
            experiment="semi-supervised",
            seeds=list(range(8)),
            fit=FitConfig(max_iterations=200, num_inducing=30),
        )
        report = run_experiment(config)
        agg = {}
        for r in report.rows:
            assert r["errors"] is not None, f"failed trial: {r}"
            agg.setdefault((r["method"], r["x"]), []).append(r["errors"])
        ours = {s: float(np.mean(agg[("ours", s)])) for s in sizes}
        mean_only = {s: float(np.mean(agg[("ours-mean-only", s)])) for s in sizes}
        pca = {s: float(np.mean(agg[("pca", s)])) for s in sizes}
        gains = {s: (pca[s] - ours[s]) / pca[s] for s in sizes}
        elapsed = time.time() - start
        ok = (
            all(ours[s] <= pca[s] for s in sizes)
            and max(gains, key=gains.get) == min(sizes)
            and all(ours[s] <= mean_only[s] <= pca[s] for s in sizes)
        )
        detail = ", ".join(
            f"{s}: ours {ours[s]:.2f} mean-only {mean_only[s]:.2f} pca {pca[s]:.2f}"
            for s in sizes
        )
        assert _verdict(
            7,
            "semi-supervised error <= PCA everywhere, largest gain at 10 labels",
            ok,
            detail + f", {elapsed:.0f}s",
        )


class TestCriterion8SpecialCases:
    def test_special_case_recovery(self):
        rng = np.random.default_rng(88)

        # (a) no partially observed rows: the staged pipeline is the plain fit
        X = rng.normal(size=(14, 2))
        Y = np.sin(X) @ np.array([[1.0], [0.5]]) + 0.05 * rng.normal(size=(14, 1))
        data = MaskedDataset(X, None, Y)
        cfg = FitConfig(max_iterations=60, num_inducing=8)
        staged = semi_described_fit(data, cfg)
        direct, _ = fit(init(data, cfg), cfg)
        bound_gap = abs(collapsed_bound(staged).total - collapsed_bound(direct).total)
        Xq = rng.normal(size=(6, 2))
        pred_gap = float(
            np.max(
                np.abs(
                    predict_deterministic_batch(staged, Xq)[0]
                    - predict_deterministic_batch(direct, Xq)[0]
                )
            )
        )
        assert bound_gap <= 1e-8 and pred_gap <= 1e-6

        # (b) no observed inputs at all: identical state to the fully latent path
        Yl = rng.normal(size=(10, 4))
        latent = init(MaskedDataset(None, None, Yl), cfg, latent_dim=2)
        all_missing = init(
            MaskedDataset(np.zeros((10, 2)), np.zeros((10, 2), bool), Yl), cfg
        )
        assert np.array_equal(latent.q_input.means, all_missing.q_input.means)
        assert np.array_equal(latent.inducing.points, all_missing.inducing.points)
        lvm_gap = abs(
            collapsed_bound(latent).total - collapsed_bound(all_missing).total
        )
        assert lvm_gap == 0.0

        # (c) propagate_uncertainty=False reproduces the hand-rolled plug-in loop
        tau = 3
        series = np.sin(0.4 * np.arange(24))[:, None]
        Xa = np.stack([series[i : i + tau].ravel() for i in range(len(series) - tau)])
        Ya = series[tau:]
        state, _ = fit(init(MaskedDataset(Xa, None, Ya), cfg), cfg)
        horizon = 12
        preds = iterative_forecast(
            state,
            series[-tau:],
            ForecastConfig(tau, horizon, propagate_uncertainty=False),
        )
        from vcgp.model import predict_uncertain

        window = [series[-tau + i].copy() for i in range(tau)]
        naive_gap = 0.0
        for step in range(horizon):
            q = GaussianInputDistribution(
                np.concatenate(window)[None, :],
                np.zeros((1, tau)),
                np.zeros((1, tau), bool),
            )
            p = predict_uncertain(state, q, include_noise=True)
            naive_gap = max(
                naive_gap,
                float(np.max(np.abs(p.mean - preds[step].mean))),
                float(np.max(np.abs(p.variance - preds[step].variance))),
            )
            window = window[1:] + [p.mean.copy()]
        assert naive_gap == 0.0

        assert _verdict(
            8,
            "special cases: staged==direct fit, latent path identity, naive loop",
            True,
            f"bound gap {bound_gap:.1e}, latent gap {lvm_gap:.1e}, "
            f"forecast gap {naive_gap:.1e}",
        )


class TestCriterion9Determinism:
    def test_repeated_runs_byte_identical(self, tmp_path):
        config = ExperimentConfig(
            experiment="semi-described",
            seeds=[0, 1],
            fractions=[0.3, 0.7],
            dataset={"n_observed": 10, "n_partial": 6, "n_test": 10, "q": 3, "d": 2},
            fit=FitConfig(max_iterations=25, num_inducing=8, hyper_warmup_iterations=5),
        )
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        run_experiment(config).write(str(out_a))
        run_experiment(config).write(str(out_b))
        same = {}
        for name in sorted(os.listdir(out_a)):
            with open(out_a / name, "rb") as fa, open(out_b / name, "rb") as fb:
                same[name] = fa.read() == fb.read()
        ok = len(same) >= 2 and all(same.values())
        assert _verdict(
            9,
            "repeated run_experiment produces byte-identical reports",
            ok,
            ", ".join(f"{k}: {'same' if v else 'DIFFERENT'}" for k, v in same.items()),
        )
