"""Transfer operators over a trained source model.

Three ways to adapt a frozen source kernel machine to a target dataset:

* projected  -- train a head on the source model's outputs at target points
  and predict head(source(x)).
* translated -- train an additive correction on the residuals
  y_t - source(X_t) and predict source(x) + correction(x); requires equal
  source/target label dimensions.
* combined   -- train a head on the concatenation [source(x) ; x].

The source model is never refit. Heads and corrections are ordinary kernel
models from the regression module, so the ridge = 0 minimum-norm conventions
carry over unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import InputError
from .kernels import KernelSpec
from .regression import KernelModel, LabeledDataset, fit_exact, predict


@dataclass
class ProjectedModel:
    source: KernelModel
    head: KernelModel

    def predict(self, X) -> np.ndarray:
        return predict(self.head, predict(self.source, X))


@dataclass
class TranslatedModel:
    source: KernelModel
    correction: KernelModel

    def predict(self, X) -> np.ndarray:
        return predict(self.source, X) + predict(self.correction, X)


@dataclass
class CombinedModel:
    source: KernelModel
    head: KernelModel
    # Relative weights of the two concatenated blocks; 1.0 keeps the plain
    # concatenation. Kernel values depend on the block order, which is fixed
    # as [source-output block ; raw-feature block].
    source_scale: float = 1.0
    input_scale: float = 1.0

    def features(self, X) -> np.ndarray:
        Xq = np.asarray(X, dtype=float)
        return np.vstack([self.source_scale * predict(self.source, Xq),
                          self.input_scale * Xq])

    def predict(self, X) -> np.ndarray:
        return predict(self.head, self.features(X))


TransferModel = Union[ProjectedModel, TranslatedModel, CombinedModel]


def _check_target(source: KernelModel, target: LabeledDataset, what: str):
    if source.n_outputs < 1:
        raise InputError("source model has no output rows")
    if target.n == 0:
        raise InputError(f"cannot fit {what} on an empty target set")
    if target.d != source.support.shape[0]:
        raise InputError(
            f"target feature dimension {target.d} does not match source "
            f"input dimension {source.support.shape[0]}")


def fit_projected(source: KernelModel, target: LabeledDataset,
                  head_spec: KernelSpec, ridge: float = 0.0) -> ProjectedModel:
    """Train a head on source outputs at the target points."""
    _check_target(source, target, "a projected head")
    Z = predict(source, target.X)
    head = fit_exact(head_spec, LabeledDataset(Z, target.Y), ridge)
    return ProjectedModel(source, head)


def fit_translated(source: KernelModel, target: LabeledDataset,
                   corr_spec: KernelSpec, ridge: float = 0.0) -> TranslatedModel:
    """Train an additive correction on the target residuals."""
    _check_target(source, target, "a translated correction")
    if source.n_outputs != target.c:
        raise InputError(
            f"translation requires equal label dimensions: source has "
            f"{source.n_outputs}, target has {target.c}")
    residual = target.Y - predict(source, target.X)
    correction = fit_exact(corr_spec, LabeledDataset(target.X, residual), ridge)
    return TranslatedModel(source, correction)


def fit_combined(source: KernelModel, target: LabeledDataset,
                 head_spec: KernelSpec, ridge: float = 0.0,
                 source_scale: float = 1.0,
                 input_scale: float = 1.0) -> CombinedModel:
    """Train a head on [source outputs ; raw features] at the target points."""
    _check_target(source, target, "a combined head")
    model = CombinedModel(source, fit_exact(head_spec, LabeledDataset(
        np.vstack([source_scale * predict(source, target.X),
                   input_scale * target.X]), target.Y), ridge),
        source_scale, input_scale)
    return model


def predict_transfer(model: TransferModel, X) -> np.ndarray:
    """Evaluate any transfer variant on query columns."""
    if not isinstance(model, (ProjectedModel, TranslatedModel, CombinedModel)):
        raise InputError(f"not a transfer model: {model!r}")
    return model.predict(X)
