"""Collapsed variational lower bound and its analytic gradient.

The objective factorizes additively over output dimensions. Per dimension d
(with A = K_uu + beta * Psi2 and C_d = Psi1^T y_d):

    data_fit_d = -N/2 log(2 pi) + N/2 log(beta)
                 + 1/2 log|K_uu| - 1/2 log|A|
                 - beta/2 y_d^T y_d + beta^2/2 C_d^T A^{-1} C_d

which is the bound after eliminating the inducing-output distribution at
its stationary point. The remaining pieces are the trace correction
-beta/2 psi0 + beta/2 tr(K_uu^{-1} Psi2) per dimension and the KL between
the input distribution and the standard normal prior.

All solves go through Cholesky factors with the shared jitter policy; no
explicit matrix inverses appear on the O(N M^2) path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve

from . import kernel as kn
from .state import ModelState, pack_gradient

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass
class BoundParts:
    """Additive decomposition of the collapsed bound."""

    data_fit: float
    trace_correction: float
    kl_term: float

    @property
    def total(self) -> float:
        return self.data_fit + self.trace_correction - self.kl_term


def kl_gaussian_diag(q: kn.GaussianInputDistribution) -> float:
    """KL between the factorized input distribution and a standard normal prior.

    Sum over every entry of 1/2 (S + mu^2 - 1 - ln S); nonnegative, zero iff
    q is the standard normal everywhere.
    """
    if np.any(q.variances <= 0):
        raise ValueError("KL undefined for zero variance entries (clamp to EPSILON instead)")
    return float(
        0.5 * np.sum(q.variances + q.means**2 - 1.0 - np.log(q.variances))
    )


def _factorized_terms(state: ModelState):
    """Shared forward quantities for the bound and its gradient."""
    p = state.kernel_params
    q = state.q_input
    u = state.inducing
    Y = state.train_outputs
    N, D = Y.shape
    M = u.n_points
    s2, beta = p.signal_variance, p.noise_precision

    Kuu = kn.kern(u.points, u.points, p)
    Kuu[np.diag_indices(M)] += kn.JITTER * s2
    Psi1 = kn.psi1(q, u, p)
    Psi2 = kn.psi2(q, u, p)
    psi0v = kn.psi0(q, p)

    LK = kn.jitchol(Kuu, scale=s2)
    A = Kuu + beta * Psi2
    LA = kn.jitchol(A, scale=s2)

    C = Psi1.T @ Y  # (M, D)
    E = cho_solve((LA, True), C)  # A^{-1} C
    logdet_K = 2.0 * float(np.sum(np.log(np.diag(LK))))
    logdet_A = 2.0 * float(np.sum(np.log(np.diag(LA))))
    quad = 0.5 * beta**2 * float(np.sum(C * E))
    yy = float(np.sum(Y * Y))
    tr_KiP2 = float(np.trace(cho_solve((LK, True), Psi2)))

    data_fit = (
        D * (-0.5 * N * LOG_2PI + 0.5 * N * np.log(beta) + 0.5 * logdet_K - 0.5 * logdet_A)
        - 0.5 * beta * yy
        + quad
    )
    trace_correction = D * (-0.5 * beta * psi0v + 0.5 * beta * tr_KiP2)
    return {
        "Kuu": Kuu, "Psi1": Psi1, "Psi2": Psi2, "psi0": psi0v,
        "LK": LK, "LA": LA, "C": C, "E": E, "quad": quad, "yy": yy,
        "tr_KiP2": tr_KiP2,
        "data_fit": float(data_fit), "trace_correction": float(trace_correction),
    }


def likelihood_terms(state: ModelState) -> tuple[float, float]:
    """(data_fit, trace_correction) without the KL; valid even at zero variances."""
    t = _factorized_terms(state)
    return t["data_fit"], t["trace_correction"]


def collapsed_bound(state: ModelState) -> BoundParts:
    """Evaluate the collapsed lower bound on log p(Y | Z)."""
    t = _factorized_terms(state)
    parts = BoundParts(t["data_fit"], t["trace_correction"], kl_gaussian_diag(state.q_input))
    if not np.isfinite(parts.total):
        raise FloatingPointError(
            f"non-finite bound: data_fit={parts.data_fit}, "
            f"trace={parts.trace_correction}, kl={parts.kl_term}"
        )
    return parts


def bound_value_and_gradient(state: ModelState) -> tuple[BoundParts, np.ndarray]:
    """Bound plus its gradient with respect to the packed free parameters."""
    t = _factorized_terms(state)
    p = state.kernel_params
    q = state.q_input
    u = state.inducing
    Y = state.train_outputs
    N, D = Y.shape
    M = u.n_points
    s2, beta = p.signal_variance, p.noise_precision

    eye = np.eye(M)
    Ai = cho_solve((t["LA"], True), eye)
    Kuui = cho_solve((t["LK"], True), eye)
    E = t["E"]
    Psi2 = t["Psi2"]
    EEt = E @ E.T

    dPsi1 = beta**2 * (Y @ E.T)  # (N, M)
    dPsi2 = -0.5 * D * beta * Ai - 0.5 * beta**3 * EEt + 0.5 * D * beta * Kuui
    dpsi0 = -0.5 * D * beta
    dKuu = (
        0.5 * D * Kuui
        - 0.5 * D * Ai
        - 0.5 * beta**2 * EEt
        - 0.5 * D * beta * (Kuui @ Psi2 @ Kuui)
    )
    dbeta = (
        0.5 * N * D / beta
        - 0.5 * D * float(np.sum(Ai * Psi2))
        - 0.5 * t["yy"]
        + 2.0 * t["quad"] / beta
        - 0.5 * beta**2 * float(np.sum(E * (Psi2 @ E)))
        - 0.5 * D * t["psi0"]
        + 0.5 * D * t["tr_KiP2"]
    )

    g1 = kn.psi1_backward(dPsi1, q, u, p)
    g2 = kn.psi2_backward(dPsi2, q, u, p)
    k_s2, k_ell, kX, kX2 = kn.kern_backward(dKuu, u.points, u.points, p)

    ds2 = (
        g1["signal_variance"]
        + g2["signal_variance"]
        + dpsi0 * N
        + k_s2
        + kn.JITTER * float(np.trace(dKuu))  # explicit jitter scales with s2
    )
    dell = g1["lengthscales"] + g2["lengthscales"] + k_ell
    dZ = g1["inducing"] + g2["inducing"] + kX + kX2
    dmu = g1["means"] + g2["means"] - q.means  # last term: -dKL/dmu
    dS = g1["variances"] + g2["variances"] - 0.5 * (1.0 - 1.0 / q.variances)

    grad = pack_gradient(state, ds2, dell, dbeta, dZ, dmu, dS)
    parts = BoundParts(t["data_fit"], t["trace_correction"], kl_gaussian_diag(q))
    if not (np.isfinite(parts.total) and np.all(np.isfinite(grad))):
        raise FloatingPointError("non-finite bound or gradient")
    return parts, grad


def bound_gradient(state: ModelState) -> np.ndarray:
    """Gradient of the collapsed bound in packed coordinates."""
    return bound_value_and_gradient(state)[1]
