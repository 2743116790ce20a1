"""Model state and flat-vector parameter packing for the optimizer.

Positive quantities (signal variance, lengthscales, noise precision, input
variances) are packed through a log transform so the optimizer works in
unconstrained coordinates. Clamped variational entries (fixed_mask True)
never enter the flat vector.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .kernel import GaussianInputDistribution, InducingSet, KernelParams


@dataclass
class Packing:
    """Which parameter groups the flat vector covers.

    freeze_variances additionally excludes the free input variances (used by
    point-estimate imputation, which optimizes means only).
    """

    include_hyper: bool = True
    include_inducing: bool = True
    include_variational: bool = True
    freeze_variances: bool = False


@dataclass
class ModelState:
    """Complete parameter set of a variationally constrained GP.

    The optimizer's subject: kernel hyperparameters, inducing inputs, the
    variational input distribution and (a reference to) the training outputs.
    """

    kernel_params: KernelParams
    inducing: InducingSet
    q_input: GaussianInputDistribution
    train_outputs: np.ndarray  # (N, D)
    packing: Packing = field(default_factory=Packing)

    def __post_init__(self):
        self.train_outputs = np.atleast_2d(np.asarray(self.train_outputs, dtype=float))
        if self.train_outputs.shape[0] != self.q_input.n_points:
            raise ValueError(
                f"row count mismatch: {self.train_outputs.shape[0]} outputs vs "
                f"{self.q_input.n_points} input distributions"
            )
        if self.inducing.n_dims != self.q_input.n_dims:
            raise ValueError("inducing points and input distribution disagree on Q")

    @property
    def n_points(self) -> int:
        return self.q_input.n_points

    @property
    def n_dims(self) -> int:
        return self.q_input.n_dims

    @property
    def n_outputs(self) -> int:
        return self.train_outputs.shape[1]

    def free_mask(self) -> np.ndarray:
        return ~self.q_input.fixed_mask

    def n_free_params(self) -> int:
        n = 0
        pk = self.packing
        if pk.include_hyper:
            n += 2 + self.n_dims
        if pk.include_inducing:
            n += self.inducing.points.size
        if pk.include_variational:
            nf = int(np.sum(self.free_mask()))
            n += nf if pk.freeze_variances else 2 * nf
        return n

    def copy(self) -> "ModelState":
        return ModelState(
            self.kernel_params.copy(),
            self.inducing.copy(),
            self.q_input.copy(),
            self.train_outputs,
            replace(self.packing),
        )


def pack(state: ModelState) -> np.ndarray:
    """Flatten the free parameters into a vector (log transform for positives)."""
    parts = []
    pk = state.packing
    p = state.kernel_params
    if pk.include_hyper:
        parts.append([np.log(p.signal_variance)])
        parts.append(np.log(p.lengthscales))
        parts.append([np.log(p.noise_precision)])
    if pk.include_inducing:
        parts.append(state.inducing.points.ravel())
    if pk.include_variational:
        free = state.free_mask()
        parts.append(state.q_input.means[free])
        if not pk.freeze_variances:
            parts.append(np.log(state.q_input.variances[free]))
    if not parts:
        return np.zeros(0)
    return np.concatenate([np.asarray(a, dtype=float) for a in parts])


def unpack(state: ModelState, theta: np.ndarray) -> ModelState:
    """Inverse of pack: a new state with free parameters taken from theta."""
    theta = np.asarray(theta, dtype=float)
    if theta.size != state.n_free_params():
        raise ValueError(f"expected {state.n_free_params()} parameters, got {theta.size}")
    new = state.copy()
    pk = state.packing
    off = 0
    if pk.include_hyper:
        q = state.n_dims
        new.kernel_params = KernelParams(
            signal_variance=float(np.exp(theta[off])),
            lengthscales=np.exp(theta[off + 1 : off + 1 + q]),
            noise_precision=float(np.exp(theta[off + 1 + q])),
        )
        off += 2 + q
    if pk.include_inducing:
        size = state.inducing.points.size
        new.inducing = InducingSet(theta[off : off + size].reshape(state.inducing.points.shape))
        off += size
    if pk.include_variational:
        free = state.free_mask()
        nf = int(np.sum(free))
        new.q_input.means[free] = theta[off : off + nf]
        off += nf
        if not pk.freeze_variances:
            new.q_input.variances[free] = np.exp(theta[off : off + nf])
            off += nf
    return new


def pack_gradient(
    state: ModelState,
    d_signal_variance: float,
    d_lengthscales: np.ndarray,
    d_noise_precision: float,
    d_inducing: np.ndarray,
    d_means: np.ndarray,
    d_variances: np.ndarray,
) -> np.ndarray:
    """Assemble raw-coordinate partials into the packed (transformed) layout."""
    parts = []
    pk = state.packing
    p = state.kernel_params
    if pk.include_hyper:
        parts.append([d_signal_variance * p.signal_variance])
        parts.append(d_lengthscales * p.lengthscales)
        parts.append([d_noise_precision * p.noise_precision])
    if pk.include_inducing:
        parts.append(d_inducing.ravel())
    if pk.include_variational:
        free = state.free_mask()
        parts.append(d_means[free])
        if not pk.freeze_variances:
            parts.append((d_variances * state.q_input.variances)[free])
    if not parts:
        return np.zeros(0)
    return np.concatenate([np.asarray(a, dtype=float) for a in parts])
