"""RBF-ARD covariance and its expectations under diagonal-Gaussian inputs.

All operations are pure functions of their arguments. The psi statistics
are the closed-form Gaussian integrals of the RBF-ARD kernel needed when
the inputs themselves carry (diagonal Gaussian) uncertainty:

    psi0        = sum_n E[k(x_n, x_n)]
    psi1[n, m]  = E[k(x_n, z_m)]
    psi2[m, m'] = sum_n E[k(x_n, z_m) k(x_n, z_m')]

with the expectation taken over q(x_n) = N(mu_n, diag(S_n)) and z_m the
inducing inputs. Every statistic comes with an analytic reverse-mode
gradient (a vector-Jacobian product against a cotangent array).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cholesky

# Variance of the sharply peaked Gaussian standing in for a Dirac delta on
# clamped (observed) input entries.
EPSILON = 1e-6

# Relative jitter added to the diagonal of inducing covariance matrices
# before factorization; escalated x10 on failure up to JITTER_MAX.
JITTER = 1e-6
JITTER_MAX = 1e-2


@dataclass
class KernelParams:
    """RBF-ARD hyperparameters plus the Gaussian noise precision.

    signal_variance: kernel amplitude sigma_f^2 (output units squared).
    lengthscales: per-input-dimension lengthscales, shape (Q,).
    noise_precision: observation noise precision beta (1 / noise variance).
    """

    signal_variance: float
    lengthscales: np.ndarray
    noise_precision: float

    def __post_init__(self):
        self.lengthscales = np.atleast_1d(np.asarray(self.lengthscales, dtype=float))
        if self.signal_variance <= 0:
            raise ValueError(f"signal_variance must be positive, got {self.signal_variance}")
        if self.noise_precision <= 0:
            raise ValueError(f"noise_precision must be positive, got {self.noise_precision}")
        if np.any(self.lengthscales <= 0):
            raise ValueError("all lengthscales must be positive")

    @property
    def n_dims(self) -> int:
        return self.lengthscales.shape[0]

    def copy(self) -> "KernelParams":
        return KernelParams(self.signal_variance, self.lengthscales.copy(), self.noise_precision)


@dataclass
class GaussianInputDistribution:
    """Factorized Gaussian over inputs: per-point, per-dimension means and variances.

    Entries with fixed_mask True are clamped to an observed value (mean equals
    the observation, variance equals the peaked constant EPSILON) and are not
    treated as free parameters.
    """

    means: np.ndarray  # (N, Q)
    variances: np.ndarray  # (N, Q), nonnegative
    fixed_mask: np.ndarray  # (N, Q) bool, True => clamped

    def __post_init__(self):
        self.means = np.atleast_2d(np.asarray(self.means, dtype=float))
        self.variances = np.atleast_2d(np.asarray(self.variances, dtype=float))
        self.fixed_mask = np.atleast_2d(np.asarray(self.fixed_mask, dtype=bool))
        if not (self.means.shape == self.variances.shape == self.fixed_mask.shape):
            raise ValueError(
                f"shape mismatch: means {self.means.shape}, variances "
                f"{self.variances.shape}, fixed_mask {self.fixed_mask.shape}"
            )
        if np.any(self.variances < 0):
            raise ValueError("variances must be nonnegative")

    @property
    def n_points(self) -> int:
        return self.means.shape[0]

    @property
    def n_dims(self) -> int:
        return self.means.shape[1]

    def copy(self) -> "GaussianInputDistribution":
        return GaussianInputDistribution(
            self.means.copy(), self.variances.copy(), self.fixed_mask.copy()
        )

    @classmethod
    def peaked(cls, observed: np.ndarray) -> "GaussianInputDistribution":
        """Fully clamped distribution around observed inputs (GP-regression mode)."""
        observed = np.atleast_2d(np.asarray(observed, dtype=float))
        return cls(
            means=observed.copy(),
            variances=np.full_like(observed, EPSILON),
            fixed_mask=np.ones(observed.shape, dtype=bool),
        )


@dataclass
class InducingSet:
    """Pseudo-input locations, shape (M, Q)."""

    points: np.ndarray

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        if self.points.shape[0] < 1:
            raise ValueError("need at least one inducing point")

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    @property
    def n_dims(self) -> int:
        return self.points.shape[1]

    def copy(self) -> "InducingSet":
        return InducingSet(self.points.copy())


def jitchol(A: np.ndarray, scale: float | None = None) -> np.ndarray:
    """Lower Cholesky factor of A with escalating diagonal jitter.

    Jitter starts at JITTER * scale (scale defaults to the mean diagonal)
    and is escalated x10 up to JITTER_MAX * scale before giving up.
    """
    A = np.asarray(A, dtype=float)
    if scale is None:
        scale = float(np.mean(np.diag(A)))
    if not np.isfinite(scale) or scale <= 0:
        scale = 1.0
    try:
        return cholesky(A, lower=True)
    except LinAlgError:
        pass
    jitter = JITTER * scale
    while jitter <= JITTER_MAX * scale:
        try:
            return cholesky(A + jitter * np.eye(A.shape[0]), lower=True)
        except LinAlgError:
            jitter *= 10.0
    raise LinAlgError(
        f"matrix not positive definite even with jitter {jitter:.3e} "
        f"(diag range [{np.min(np.diag(A)):.3e}, {np.max(np.diag(A)):.3e}])"
    )


def _check_dims(Q: int, *arrays) -> None:
    for arr in arrays:
        if arr.shape[-1] != Q:
            raise ValueError(f"input dimensionality mismatch: expected {Q}, got {arr.shape[-1]}")


# ---------------------------------------------------------------------------
# forward evaluations
# ---------------------------------------------------------------------------


def kern(X: np.ndarray, X2: np.ndarray, params: KernelParams) -> np.ndarray:
    """RBF-ARD covariance k(x, x') = sigma_f^2 exp(-1/2 sum_q (x_q - x'_q)^2 / l_q^2)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    X2 = np.atleast_2d(np.asarray(X2, dtype=float))
    _check_dims(params.n_dims, X, X2)
    Xs = X / params.lengthscales
    X2s = X2 / params.lengthscales
    sq = (
        np.sum(Xs**2, axis=1)[:, None]
        - 2.0 * Xs @ X2s.T
        + np.sum(X2s**2, axis=1)[None, :]
    )
    return params.signal_variance * np.exp(-0.5 * np.maximum(sq, 0.0))


def psi0(q: GaussianInputDistribution, params: KernelParams) -> float:
    """E[sum_n k(x_n, x_n)] = N sigma_f^2 (RBF diagonal is constant)."""
    _check_dims(params.n_dims, q.means)
    return q.n_points * params.signal_variance


def psi1(q: GaussianInputDistribution, u: InducingSet, params: KernelParams) -> np.ndarray:
    """E[k(x_n, z_m)] under q(x_n), shape (N, M).

    psi1[n,m] = sigma_f^2 prod_q (l_q^2/(l_q^2+S_nq))^{1/2}
                exp(-(mu_nq - z_mq)^2 / (2 (l_q^2 + S_nq))).
    """
    _check_dims(params.n_dims, q.means, u.points)
    ell2 = params.lengthscales**2  # (Q,)
    denom = ell2[None, :] + q.variances  # (N, Q)
    log_det = 0.5 * np.sum(np.log(ell2[None, :] / denom), axis=1)  # (N,)
    diff = q.means[:, None, :] - u.points[None, :, :]  # (N, M, Q)
    expo = 0.5 * np.sum(diff**2 / denom[:, None, :], axis=2)  # (N, M)
    return params.signal_variance * np.exp(log_det[:, None] - expo)


def psi2_per_point(
    q: GaussianInputDistribution, u: InducingSet, params: KernelParams
) -> np.ndarray:
    """Per-point second-order statistic E[k(x_n, z_m) k(x_n, z_m')], shape (N, M, M).

    psi2_n[m,m'] = sigma_f^4 prod_q (l_q^2/(l_q^2+2 S_nq))^{1/2}
                   exp(-(z_mq - z_m'q)^2 / (4 l_q^2)
                       - (mu_nq - zbar_q)^2 / (l_q^2 + 2 S_nq)),
    with zbar = (z_m + z_m') / 2.
    """
    _check_dims(params.n_dims, q.means, u.points)
    N, Q = q.means.shape
    M = u.n_points
    ell2 = params.lengthscales**2
    denom = ell2[None, :] + 2.0 * q.variances  # (N, Q)
    log_det = 0.5 * np.sum(np.log(ell2[None, :] / denom), axis=1)  # (N,)
    expo = np.zeros((N, M, M))
    for j in range(Q):
        z = u.points[:, j]
        zbar = 0.5 * (z[:, None] + z[None, :])  # (M, M)
        dz2 = (z[:, None] - z[None, :]) ** 2  # (M, M)
        dmu2 = (q.means[:, j][:, None, None] - zbar[None, :, :]) ** 2  # (N, M, M)
        expo += dz2[None, :, :] / (4.0 * ell2[j]) + dmu2 / denom[:, j][:, None, None]
    return params.signal_variance**2 * np.exp(log_det[:, None, None] - expo)


def psi2(q: GaussianInputDistribution, u: InducingSet, params: KernelParams) -> np.ndarray:
    """Sum over data points of the second-order psi statistic, shape (M, M)."""
    return np.sum(psi2_per_point(q, u, params), axis=0)


# ---------------------------------------------------------------------------
# reverse-mode gradients (vector-Jacobian products)
# ---------------------------------------------------------------------------


def kern_backward(
    dK: np.ndarray, X: np.ndarray, X2: np.ndarray, params: KernelParams
) -> tuple[float, np.ndarray, np.ndarray, np.ndarray]:
    """Backpropagate a cotangent dK (N x M) through kern(X, X2, params).

    Returns (d_signal_variance, d_lengthscales, dX, dX2). For a symmetric
    argument (X2 is X) add dX and dX2 to get the total gradient.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    X2 = np.atleast_2d(np.asarray(X2, dtype=float))
    K = kern(X, X2, params)
    W = np.asarray(dK) * K  # (N, M)
    ds2 = float(np.sum(W) / params.signal_variance)
    diff = X[:, None, :] - X2[None, :, :]  # (N, M, Q)
    ell = params.lengthscales
    dell = np.einsum("nm,nmq->q", W, diff**2) / ell**3
    dX = -np.einsum("nm,nmq->nq", W, diff) / ell**2
    dX2 = np.einsum("nm,nmq->mq", W, diff) / ell**2
    return ds2, dell, dX, dX2


def psi0_backward(
    d: float, q: GaussianInputDistribution, params: KernelParams
) -> dict[str, np.ndarray | float]:
    """Gradient of d * psi0 with respect to everything psi0 depends on."""
    return {
        "signal_variance": float(d) * q.n_points,
        "lengthscales": np.zeros(params.n_dims),
        "inducing": None,
        "means": np.zeros_like(q.means),
        "variances": np.zeros_like(q.variances),
    }


def psi1_backward(
    dPsi1: np.ndarray,
    q: GaussianInputDistribution,
    u: InducingSet,
    params: KernelParams,
) -> dict[str, np.ndarray | float]:
    """Backpropagate a cotangent (N x M) through psi1."""
    P = psi1(q, u, params)
    W = np.asarray(dPsi1) * P  # (N, M)
    ell = params.lengthscales
    ell2 = ell**2
    denom = ell2[None, :] + q.variances  # (N, Q)
    diff = q.means[:, None, :] - u.points[None, :, :]  # (N, M, Q)
    r = diff / denom[:, None, :]  # (N, M, Q)

    ds2 = float(np.sum(W) / params.signal_variance)
    dmu = -np.einsum("nm,nmq->nq", W, r)
    dZ = np.einsum("nm,nmq->mq", W, r)
    # d/dS of [-1/2 log(denom) - diff^2/(2 denom)]
    dS = np.einsum("nm,nmq->nq", W, -0.5 / denom[:, None, :] + 0.5 * r**2)
    # d/dl of [1/2 log(l^2/denom) - diff^2/(2 denom)]
    dell = np.einsum(
        "nm,nmq->q",
        W,
        q.variances[:, None, :] / (ell[None, None, :] * denom[:, None, :])
        + ell[None, None, :] * r**2,
    )
    return {
        "signal_variance": ds2,
        "lengthscales": dell,
        "inducing": dZ,
        "means": dmu,
        "variances": dS,
    }


def psi2_backward(
    dPsi2: np.ndarray,
    q: GaussianInputDistribution,
    u: InducingSet,
    params: KernelParams,
) -> dict[str, np.ndarray | float]:
    """Backpropagate a cotangent (M x M) through psi2 (the sum over points)."""
    P = psi2_per_point(q, u, params)  # (N, M, M)
    W = P * np.asarray(dPsi2)[None, :, :]  # (N, M, M)
    ell = params.lengthscales
    ell2 = ell**2
    Q = params.n_dims
    denom = ell2[None, :] + 2.0 * q.variances  # (N, Q)

    ds2 = float(2.0 * np.sum(W) / params.signal_variance)
    dmu = np.empty_like(q.means)
    dS = np.empty_like(q.variances)
    dell = np.zeros(Q)
    dZ = np.zeros_like(u.points)
    Wsym = W + np.transpose(W, (0, 2, 1))
    for j in range(Q):
        z = u.points[:, j]
        zbar = 0.5 * (z[:, None] + z[None, :])  # (M, M)
        dz = z[:, None] - z[None, :]  # (M, M)
        dmu_bar = q.means[:, j][:, None, None] - zbar[None, :, :]  # (N, M, M)
        dn = denom[:, j][:, None, None]  # (N, 1, 1)
        dmu[:, j] = np.sum(W * (-2.0 * dmu_bar / dn), axis=(1, 2))
        dS[:, j] = np.sum(W * (-1.0 / dn + 2.0 * dmu_bar**2 / dn**2), axis=(1, 2))
        dell[j] = np.sum(
            W
            * (
                2.0 * q.variances[:, j][:, None, None] / (ell[j] * dn)
                + dz[None, :, :] ** 2 / (2.0 * ell[j] ** 3)
                + 2.0 * ell[j] * dmu_bar**2 / dn**2
            )
        )
        # z_m enters both slots; Wsym folds the (m, m') and (m', m) terms together
        dZ[:, j] = np.sum(
            Wsym * (-dz[None, :, :] / (2.0 * ell2[j]) + dmu_bar / dn),
            axis=(0, 2),
        )
    return {
        "signal_variance": ds2,
        "lengthscales": dell,
        "inducing": dZ,
        "means": dmu,
        "variances": dS,
    }


_BACKWARDS = {
    "psi0": psi0_backward,
    "psi1": psi1_backward,
    "psi2": psi2_backward,
}


def kernel_grads(
    stat: str,
    cotangent,
    q: GaussianInputDistribution,
    u: InducingSet | None,
    params: KernelParams,
) -> dict[str, np.ndarray | float]:
    """Partials of a psi statistic contracted with a cotangent array.

    stat selects 'psi0', 'psi1' or 'psi2'; cotangent has the statistic's
    shape (a scalar for psi0). Returns a dict with keys 'signal_variance',
    'lengthscales', 'inducing', 'means' and 'variances'.
    """
    if stat not in _BACKWARDS:
        raise ValueError(f"unknown statistic {stat!r}; expected one of {sorted(_BACKWARDS)}")
    if stat == "psi0":
        return psi0_backward(cotangent, q, params)
    return _BACKWARDS[stat](cotangent, q, u, params)
