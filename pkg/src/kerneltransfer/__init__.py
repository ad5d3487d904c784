"""Transfer learning for kernel methods.

Train kernel ridge regression models, adapt them to new tasks by projection,
translation, or their combination, evaluate the closed-form transfer risks
of the linear setting against seeded Monte Carlo, and fit logarithmic
scaling laws to performance curves. The ``ktx`` CLI drives end-to-end
experiments and the theory-validation grid.
"""

from .errors import (ConfigError, DegenerateFitError, DegenerateInputError,
                     InputError, KernelTransferError, NumericError, ParseError)
from .kernels import (KernelSpec, Laplace, Linear, NtkFc, format_kernel, gram,
                      kappa0, kappa1, kernel_eval, parse_kernel)
from .linear_theory import (AsymptoticParams, Lemma1Params, LinearTaskParams,
                            RegimeReport, RiskDecomposition, RiskReport,
                            asymptotic_projected_risk, baseline_risk,
                            corollary_regime_check, epsilon_mismatch,
                            haar_orthogonal, lemma1_closed_form,
                            lemma1_monte_carlo, monte_carlo_projection_trace,
                            monte_carlo_risk, projected_risk_closed_form,
                            theorem_coefficients, translated_risk_closed_form,
                            within_band)
from .regression import (KernelModel, LabeledDataset, TrainingReport,
                         fit_exact, fit_iterative, min_norm_linear, predict)
from .scaling_metrics import (CurvePoint, MetricResult, ScalingFit, accuracy,
                              extrapolate, fit_log_law, mean_cosine, mean_r2,
                              pearson_r)
from .transfer import (CombinedModel, ProjectedModel, TransferModel,
                       TranslatedModel, fit_combined, fit_projected,
                       fit_translated, predict_transfer)

__version__ = "0.1.0"

__all__ = [
    "AsymptoticParams", "CombinedModel", "ConfigError", "CurvePoint",
    "DegenerateFitError", "DegenerateInputError", "InputError",
    "KernelModel", "KernelSpec", "KernelTransferError", "LabeledDataset",
    "Laplace", "Lemma1Params", "Linear", "LinearTaskParams", "MetricResult",
    "NtkFc", "NumericError", "ParseError", "ProjectedModel", "RegimeReport",
    "RiskDecomposition", "RiskReport", "ScalingFit", "TrainingReport",
    "TransferModel", "TranslatedModel", "accuracy",
    "asymptotic_projected_risk", "baseline_risk", "corollary_regime_check",
    "epsilon_mismatch", "extrapolate", "fit_combined", "fit_exact",
    "fit_iterative", "fit_log_law", "fit_projected", "fit_translated",
    "format_kernel", "gram", "haar_orthogonal", "kappa0", "kappa1",
    "kernel_eval", "lemma1_closed_form", "lemma1_monte_carlo",
    "mean_cosine", "mean_r2", "min_norm_linear",
    "monte_carlo_projection_trace", "monte_carlo_risk", "parse_kernel",
    "pearson_r", "predict", "predict_transfer",
    "projected_risk_closed_form", "theorem_coefficients",
    "translated_risk_closed_form", "within_band",
]
