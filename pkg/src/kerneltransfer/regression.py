"""Kernel (ridge) regression solvers and minimum-norm linear least squares.

The exact solver factorizes K + ridge*I once and reuses it across all output
rows; the iterative solver runs conjugate gradients per output row. At
ridge = 0 with a singular Gram matrix the exact solver returns the
minimum-Frobenius-norm coefficients via the pseudo-inverse.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.sparse.linalg import LinearOperator, cg

from .errors import InputError, NumericError
from .kernels import KernelSpec, gram

logger = logging.getLogger(__name__)

# Default ridge used by the experiment harness for numerical stability.
DEFAULT_RIDGE = 1e-4


@dataclass
class LabeledDataset:
    """Paired features X (d, n) and targets Y (c, n) with equal sample count."""

    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.Y = np.asarray(self.Y, dtype=float)
        if self.X.ndim != 2 or self.Y.ndim != 2:
            raise InputError(f"X and Y must be 2-D, got {self.X.shape} and {self.Y.shape}")
        if self.X.shape[1] != self.Y.shape[1]:
            raise InputError(
                f"sample count mismatch: X has {self.X.shape[1]}, Y has {self.Y.shape[1]}")
        if self.Y.shape[0] < 1:
            raise InputError("Y must have at least one output row")
        if self.X.shape[0] < 1:
            raise InputError("X must have feature dimension >= 1")

    @property
    def d(self) -> int:
        return self.X.shape[0]

    @property
    def n(self) -> int:
        return self.X.shape[1]

    @property
    def c(self) -> int:
        return self.Y.shape[0]


@dataclass(frozen=True)
class TrainingReport:
    method: str
    converged: bool
    iterations: int
    relative_residual: float


@dataclass
class KernelModel:
    """A trained kernel machine: f(x) = alpha @ K(support, x)."""

    spec: KernelSpec
    support: np.ndarray          # (d, n)
    alpha: np.ndarray            # (c, n)
    ridge: float = 0.0
    report: TrainingReport = field(
        default_factory=lambda: TrainingReport("direct", True, 0, 0.0))

    def __post_init__(self):
        self.support = np.asarray(self.support, dtype=float)
        self.alpha = np.asarray(self.alpha, dtype=float)
        if self.alpha.ndim != 2 or self.support.ndim != 2:
            raise InputError("support and alpha must be 2-D")
        if self.alpha.shape[1] != self.support.shape[1]:
            raise InputError(
                f"alpha has {self.alpha.shape[1]} columns but support has "
                f"{self.support.shape[1]}")
        if self.ridge < 0:
            raise InputError(f"ridge must be >= 0, got {self.ridge}")

    @property
    def n_outputs(self) -> int:
        return self.alpha.shape[0]

    def predict(self, X) -> np.ndarray:
        return predict(self, X)


def _relative_residual(Y: np.ndarray, fitted: np.ndarray) -> float:
    denom = np.linalg.norm(Y)
    if denom == 0:
        return 0.0
    return float(np.linalg.norm(Y - fitted) / denom)


def _system_matrix(spec: KernelSpec, data: LabeledDataset, ridge: float) -> np.ndarray:
    K = gram(spec, data.X)
    if not np.isfinite(K).all():
        raise NumericError("Gram matrix has non-finite entries")
    if ridge > 0:
        K = K + ridge * np.eye(data.n)
    return K


def fit_exact(spec: KernelSpec, data: LabeledDataset, ridge: float = 0.0) -> KernelModel:
    """Solve min_w ||Y - w (K_n + ridge I)||_F^2 by direct factorization.

    ridge > 0 uses a Cholesky factorization shared across output rows and
    falls back to the pseudo-inverse (with a warning) if it fails; ridge = 0
    with a singular K_n returns the minimum-Frobenius-norm solution.
    """
    if ridge < 0:
        raise InputError(f"ridge must be >= 0, got {ridge}")
    if data.n < 1:
        raise InputError("fit_exact needs at least one training sample")
    M = _system_matrix(spec, data, ridge)
    try:
        factor = scipy.linalg.cho_factor(M, lower=True, check_finite=False)
        alpha = scipy.linalg.cho_solve(factor, data.Y.T, check_finite=False).T
        method = "cholesky"
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
        if ridge > 0:
            logger.warning(
                "Cholesky factorization failed at ridge=%g; falling back to pseudo-inverse",
                ridge)
            method = "pinv-fallback"
        else:
            method = "pinv"
        alpha = data.Y @ scipy.linalg.pinvh(M, check_finite=False)
    residual = _relative_residual(data.Y, alpha @ M)
    return KernelModel(spec, data.X, alpha, ridge,
                       TrainingReport(method, True, 0, residual))


def fit_iterative(spec: KernelSpec, data: LabeledDataset, ridge: float = 0.0,
                  tol: float = 1e-8, max_iter: int = 1000) -> KernelModel:
    """Solve (K_n + ridge I) alpha^T = Y^T by conjugate gradients per row.

    At ridge = 0 the Gram matrix must be numerically nonsingular (condition
    estimate below 1/sqrt(machine epsilon)). Non-convergence within max_iter
    is reported through the model's training report, not raised.
    """
    if ridge < 0:
        raise InputError(f"ridge must be >= 0, got {ridge}")
    if data.n < 1:
        raise InputError("fit_iterative needs at least one training sample")
    M = _system_matrix(spec, data, ridge)
    if ridge == 0:
        w = np.linalg.eigvalsh(M)
        cond = np.inf if w[0] <= 0 else float(w[-1] / w[0])
        if not cond < 1.0 / np.sqrt(np.finfo(float).eps):
            raise NumericError(
                f"ridge=0 requires a numerically nonsingular Gram matrix "
                f"(condition estimate {cond:.3e})")
    if max_iter <= 0:
        alpha = np.zeros_like(data.Y)
        return KernelModel(spec, data.X, alpha, ridge,
                           TrainingReport("cg", False, 0,
                                          _relative_residual(data.Y, alpha @ M)))
    op = LinearOperator(M.shape, matvec=lambda v: M @ v, dtype=float)
    alpha = np.empty_like(data.Y)
    converged = True
    iterations = 0
    for r in range(data.c):
        count = [0]

        def _tick(_xk, count=count):
            count[0] += 1

        x, info = cg(op, data.Y[r], rtol=tol, atol=0.0, maxiter=max_iter,
                     callback=_tick)
        alpha[r] = x
        converged &= info == 0
        iterations = max(iterations, count[0])
    residual = _relative_residual(data.Y, alpha @ M)
    return KernelModel(spec, data.X, alpha, ridge,
                       TrainingReport("cg", converged, iterations, residual))


def predict(model: KernelModel, X) -> np.ndarray:
    """Predictions on query columns: alpha @ K(support, X), shape (c, m)."""
    Xq = np.asarray(X, dtype=float)
    if Xq.ndim != 2:
        raise InputError(f"query matrix must be 2-D, got shape {Xq.shape}")
    if Xq.shape[0] != model.support.shape[0]:
        raise InputError(
            f"query dimension {Xq.shape[0]} does not match support "
            f"dimension {model.support.shape[0]}")
    if Xq.shape[1] == 0:
        return np.zeros((model.n_outputs, 0))
    return model.alpha @ gram(model.spec, model.support, Xq)


def min_norm_linear(X, Y) -> np.ndarray:
    """Minimum-Frobenius-norm W solving min ||Y - W X||_F^2, i.e. W = Y X^+.

    Singular values below eps * max(d, n) * sigma_max are truncated.
    """
    Xm = np.asarray(X, dtype=float)
    Ym = np.asarray(Y, dtype=float)
    if Xm.ndim != 2 or Ym.ndim != 2:
        raise InputError("X and Y must be 2-D")
    if Xm.shape[1] != Ym.shape[1]:
        raise InputError(
            f"sample count mismatch: X has {Xm.shape[1]}, Y has {Ym.shape[1]}")
    if Xm.shape[1] == 0:
        return np.zeros((Ym.shape[0], Xm.shape[0]))
    rcond = np.finfo(float).eps * max(Xm.shape)
    return Ym @ np.linalg.pinv(Xm, rcond=rcond)
