"""Dataset container shared by the learning pipelines and the harness."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class MaskedDataset:
    """Inputs with a per-element observation mask, outputs with a per-row label mask.

    inputs: (N, Q) array; entries where input_mask is False are missing (their
        stored values are ignored). inputs may be None for a fully latent model.
    outputs: (N, D) array, always fully observed per element.
    label_mask: (N,) bool; False marks rows whose outputs/labels are unknown
        (the semi-supervised unlabelled set).
    """

    inputs: np.ndarray | None
    input_mask: np.ndarray | None
    outputs: np.ndarray
    label_mask: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.outputs = np.atleast_2d(np.asarray(self.outputs, dtype=float))
        n = self.outputs.shape[0]
        if self.inputs is not None:
            self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
            if self.input_mask is None:
                self.input_mask = np.ones(self.inputs.shape, dtype=bool)
            self.input_mask = np.atleast_2d(np.asarray(self.input_mask, dtype=bool))
            if self.inputs.shape != self.input_mask.shape:
                raise ValueError("inputs and input_mask shapes differ")
            if self.inputs.shape[0] != n:
                raise ValueError("inputs and outputs row counts differ")
        if self.label_mask is None:
            self.label_mask = np.ones(n, dtype=bool)
        self.label_mask = np.asarray(self.label_mask, dtype=bool)
        if self.label_mask.shape != (n,):
            raise ValueError("label_mask must have one entry per row")

    @property
    def n_points(self) -> int:
        return self.outputs.shape[0]

    def fully_observed_rows(self) -> np.ndarray:
        """Boolean row selector for the fully observed input set."""
        if self.inputs is None:
            return np.zeros(self.n_points, dtype=bool)
        return np.all(self.input_mask, axis=1)
