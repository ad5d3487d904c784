"""Closed-form transfer risks for linear tasks and their Monte Carlo checks.

The setting: an oracle source map omega_s (c_s x d) and target map omega_t
(c_t x d); training inputs are n_s (source) and n_t (target) isotropic
columns in R^d, instantiated as standard Gaussians so that E[x x^T] = I and
the risk of a linear predictor W equals ||W - omega_t||_F^2 exactly.

Closed forms implemented here:

* ``baseline_risk``               -- (1 - n_t/d) ||omega_t||_F^2.
* ``projected_risk_closed_form``  -- the C1/C2/K1/K2 decomposition of the
  projected predictor's risk.
* ``translated_risk_closed_form`` -- the mixture form driven by
  delta = ||omega_s - omega_t||_F^2 / ||omega_t||_F^2.
* ``asymptotic_projected_risk``   -- the d -> infinity polynomial in
  S = n_s/d, T = n_t/d, C = c_s/d.
* ``lemma1_closed_form``          -- E_W[P Q P] for a Haar-conjugated rank-p
  projection P and a fixed rank-q projection Q.

``monte_carlo_risk`` estimates the risk of the actual minimum-norm
estimators. Note one documented divergence: the projected closed form equals
the expectation of the sequential projection trace functional (see
``monte_carlo_projection_trace``), which is NOT the risk of the composed
least-squares estimator; ``monte_carlo_risk(..., "projected")`` reports the
estimator's true risk and therefore deviates from the closed form away from
degenerate corners. Both quantities are exposed so reports can show the
discrepancy explicitly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InputError
from .regression import min_norm_linear

PREDICTORS = ("projected", "translated", "baseline")


@dataclass(frozen=True)
class LinearTaskParams:
    """Oracle linear task: dimensions, sample counts, and the two maps."""

    d: int
    n_s: int
    n_t: int
    c_s: int
    c_t: int
    omega_s: np.ndarray
    omega_t: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "omega_s", np.asarray(self.omega_s, dtype=float))
        object.__setattr__(self, "omega_t", np.asarray(self.omega_t, dtype=float))
        if self.d < 2:
            raise InputError(f"d must be >= 2, got {self.d}")
        for name, val in (("n_s", self.n_s), ("n_t", self.n_t)):
            if not 0 <= val <= self.d:
                raise InputError(f"{name} must lie in [0, d], got {val}")
        if self.c_s < 1 or self.c_t < 1:
            raise InputError("c_s and c_t must be >= 1")
        if self.omega_s.shape != (self.c_s, self.d):
            raise InputError(
                f"omega_s must have shape ({self.c_s}, {self.d}), got {self.omega_s.shape}")
        if self.omega_t.shape != (self.c_t, self.d):
            raise InputError(
                f"omega_t must have shape ({self.c_t}, {self.d}), got {self.omega_t.shape}")
        if not (np.isfinite(self.omega_s).all() and np.isfinite(self.omega_t).all()):
            raise InputError("omega matrices must be finite")
        if np.linalg.norm(self.omega_t) == 0:
            raise InputError("omega_t must be nonzero")

    @property
    def omega_t_norm_sq(self) -> float:
        return float(np.linalg.norm(self.omega_t) ** 2)

    @classmethod
    def random(cls, d: int, n_s: int, n_t: int, c_s: int, c_t: int,
               rng: np.random.Generator) -> "LinearTaskParams":
        """Gaussian maps with omega_t scaled to unit Frobenius norm."""
        omega_s = rng.standard_normal((c_s, d))
        omega_t = rng.standard_normal((c_t, d))
        omega_t /= np.linalg.norm(omega_t)
        return cls(d, n_s, n_t, c_s, c_t, omega_s, omega_t)

    @classmethod
    def with_mismatch(cls, d: int, n_s: int, n_t: int, c_s: int, c_t: int,
                      epsilon: float, rng: np.random.Generator,
                      norm_sq: float = 1.0) -> "LinearTaskParams":
        """Construct omega_t with an exact mismatch epsilon against omega_s.

        Each omega_t row mixes a row-space direction of omega_s with an
        orthogonal one so that ||omega_t||_F^2 = norm_sq and
        epsilon_mismatch(omega_s, omega_t) = epsilon exactly.
        """
        if not 0 <= epsilon <= norm_sq:
            raise InputError(f"epsilon must lie in [0, {norm_sq}], got {epsilon}")
        omega_s = rng.standard_normal((c_s, d))
        rank = min(c_s, d)
        if c_t > rank:
            raise InputError(f"need c_t <= rank(omega_s) = {rank}")
        if epsilon > 0 and c_t > d - rank:
            raise InputError(
                f"mismatch construction needs c_t <= d - rank(omega_s) = {d - rank}")
        _, _, vt = np.linalg.svd(omega_s, full_matrices=True)
        inside = vt[:rank]
        outside = vt[rank:]
        a = math.sqrt((norm_sq - epsilon) / c_t)
        b = math.sqrt(epsilon / c_t)
        omega_t = a * inside[:c_t]
        if epsilon > 0:
            omega_t = omega_t + b * outside[:c_t]
        return cls(d, n_s, n_t, c_s, c_t, omega_s, omega_t)


@dataclass(frozen=True)
class RiskDecomposition:
    """Projected-predictor closed form and its coefficient breakdown."""

    risk: float
    C1: float
    C2: float
    K1: float
    K2: float
    epsilon: float


@dataclass(frozen=True)
class AsymptoticParams:
    """Ratios S = n_s/d, T = n_t/d, C = c_s/d plus the target norm and mismatch."""

    S: float
    T: float
    C: float
    omega_t_norm_sq: float = 1.0
    epsilon: float = 0.0

    def __post_init__(self):
        if self.S < 0 or self.C < 0:
            raise InputError("S and C must be >= 0")
        if not 0 <= self.T <= 1:
            raise InputError(f"T must lie in [0, 1], got {self.T}")
        if self.omega_t_norm_sq <= 0:
            raise InputError("omega_t_norm_sq must be positive")
        if self.epsilon < 0:
            raise InputError("epsilon must be >= 0")

    @classmethod
    def from_task(cls, params: LinearTaskParams) -> "AsymptoticParams":
        return cls(S=params.n_s / params.d, T=params.n_t / params.d,
                   C=params.c_s / params.d,
                   omega_t_norm_sq=params.omega_t_norm_sq,
                   epsilon=epsilon_mismatch(params.omega_s, params.omega_t))


@dataclass(frozen=True)
class RiskReport:
    """Closed form next to its Monte Carlo estimate."""

    closed_form: float
    mc_mean: float
    mc_stderr: float
    trials: int


@dataclass(frozen=True)
class Lemma1Params:
    d: int
    p: int
    q: int

    def __post_init__(self):
        if self.d < 2:
            raise InputError(f"d must be >= 2, got {self.d}")
        for name, val in (("p", self.p), ("q", self.q)):
            if not 0 <= val <= self.d:
                raise InputError(f"{name} must lie in [0, d], got {val}")


def epsilon_mismatch(omega_s, omega_t) -> float:
    """Task mismatch ||omega_t (I - omega_s^+ omega_s)||_F^2.

    The squared Frobenius mass of omega_t outside the row space of omega_s;
    0 when the target rows are linear images of the source rows, and at most
    ||omega_t||_F^2.
    """
    ws = np.asarray(omega_s, dtype=float)
    wt = np.asarray(omega_t, dtype=float)
    if ws.ndim != 2 or wt.ndim != 2 or ws.shape[1] != wt.shape[1]:
        raise InputError("omega_s and omega_t must be 2-D with a shared ambient dimension")
    d = ws.shape[1]
    proj = np.linalg.pinv(ws) @ ws
    return float(np.linalg.norm(wt @ (np.eye(d) - proj)) ** 2)


def baseline_risk(params: LinearTaskParams) -> float:
    """Risk of the direct target fit: (1 - n_t/d) ||omega_t||_F^2."""
    return (1.0 - params.n_t / params.d) * params.omega_t_norm_sq


def theorem_coefficients(d: int, n_s: int, n_t: int, c_s: int):
    """The (C1, C2, K1, K2) coefficients of the projected-risk closed form."""
    if d < 2:
        raise InputError(f"d must be >= 2, got {d}")
    den = d * (d - 1) * (d + 2)
    C1 = n_s * c_s * (d - n_s) / den
    C2 = n_s * (d * (n_s + 1) - 2) / den
    K1 = 1.0 - n_t * (d - c_s) / ((d - 1) * (d + 2))
    K2 = n_t / d + n_t * (d - n_t) / ((d - 1) * (d + 2))
    return C1, C2, K1, K2


def projected_risk_closed_form(params: LinearTaskParams) -> RiskDecomposition:
    """Closed-form projected-predictor risk decomposition.

    risk = [(C1 + C2 K1)(1 - n_t/d) + (1 - C1 - C2)] ||omega_t||_F^2
           + C2 K2 epsilon.
    """
    C1, C2, K1, K2 = theorem_coefficients(params.d, params.n_s, params.n_t, params.c_s)
    eps = epsilon_mismatch(params.omega_s, params.omega_t)
    wt2 = params.omega_t_norm_sq
    risk = ((C1 + C2 * K1) * (1.0 - params.n_t / params.d) + (1.0 - C1 - C2)) * wt2 \
        + C2 * K2 * eps
    return RiskDecomposition(float(risk), C1, C2, K1, K2, eps)


def translated_risk_closed_form(params: LinearTaskParams) -> float:
    """Closed-form translated-predictor risk.

    risk = [delta + (1 - n_s/d)(1 - delta)] * baseline_risk with
    delta = ||omega_s - omega_t||_F^2 / ||omega_t||_F^2; requires equal
    source/target label dimensions.
    """
    if params.c_s != params.c_t:
        raise InputError(
            f"translation requires c_s == c_t, got {params.c_s} and {params.c_t}")
    wt2 = params.omega_t_norm_sq
    delta = float(np.linalg.norm(params.omega_s - params.omega_t) ** 2) / wt2
    mix = delta + (1.0 - params.n_s / params.d) * (1.0 - delta)
    return float(mix * baseline_risk(params))


def asymptotic_projected_risk(ap: AsymptoticParams) -> float:
    """Large-d projected risk polynomial.

    R = [1 - 2 S^2 T + S^2 T^2 + (2S - 1 - ST) S T C] ||omega_t||_F^2
        + S^2 T (2 - T) epsilon.
    """
    if not 0 <= ap.S <= 1:
        raise InputError(f"S must lie in [0, 1], got {ap.S}")
    S, T, C = ap.S, ap.T, ap.C
    body = 1.0 - 2.0 * S * S * T + S * S * T * T + (2.0 * S - 1.0 - S * T) * S * T * C
    return float(body * ap.omega_t_norm_sq + S * S * T * (2.0 - T) * ap.epsilon)


@dataclass(frozen=True)
class RegimeReport:
    """Numerical regime checks of the asymptotic risk polynomial."""

    monotone_condition_sq: bool      # epsilon < (1 - C) ||omega_t||_F^2
    monotone_condition_norm: bool    # epsilon < (1 - C) ||omega_t||_F
    monotone_in_s: bool
    monotone_pass: bool              # squared condition implies monotonicity
    monotone_witness: Optional[float]
    c_slope_sign: int
    c_sign_expected: int
    c_sign_pass: bool
    delta_ratios: tuple = ()
    delta_ratio_pass: bool = True
    violations: tuple = ()

    @property
    def passed(self) -> bool:
        return self.monotone_pass and self.c_sign_pass and self.delta_ratio_pass


def _sign(x: float, tol: float) -> int:
    if abs(x) <= tol:
        return 0
    return 1 if x > 0 else -1


def corollary_regime_check(ap: AsymptoticParams, *, s_step: float = 0.01,
                           delta0: float = 0.05, halvings: int = 4,
                           ratio_tol: float = 0.5) -> RegimeReport:
    """Verify the qualitative regimes of the asymptotic risk on dense grids.

    (a) monotone nonincreasing in S on [0, 1] whenever
        epsilon < (1 - C) ||omega_t||_F^2 (the norm reading of the condition
        is reported alongside); (b) the sign of dR/dC matches the sign of
        (2S - 1 - ST); (d) at S = 1 with T, C scaled by delta, the defect
        against (1 - 2T)||omega_t||^2 + 2T epsilon shrinks quadratically,
        checked by a ratio test that halves delta.
    """
    violations = []
    wt2 = ap.omega_t_norm_sq
    cond_sq = ap.epsilon < (1.0 - ap.C) * wt2
    cond_norm = ap.epsilon < (1.0 - ap.C) * math.sqrt(wt2)

    s_grid = np.arange(0.0, 1.0 + s_step / 2, s_step)
    risks = [asymptotic_projected_risk(
        AsymptoticParams(float(s), ap.T, ap.C, wt2, ap.epsilon)) for s in s_grid]
    tol = 1e-12 * max(1.0, wt2, ap.epsilon)
    witness = None
    for s, r0, r1 in zip(s_grid[1:], risks[:-1], risks[1:]):
        if r1 > r0 + tol:
            witness = float(s)
            break
    monotone = witness is None
    monotone_pass = monotone or not cond_sq
    if not monotone_pass:
        violations.append(
            f"risk increases in S at S={witness} although epsilon < (1-C)||omega_t||^2")

    # (b) central difference in C against the analytic sign predictor
    h = max(1e-6, 1e-6 * max(1.0, ap.C))
    c_lo = max(0.0, ap.C - h)
    r_hi = asymptotic_projected_risk(
        AsymptoticParams(ap.S, ap.T, ap.C + h, wt2, ap.epsilon))
    r_lo = asymptotic_projected_risk(
        AsymptoticParams(ap.S, ap.T, c_lo, wt2, ap.epsilon))
    slope = (r_hi - r_lo) / (ap.C + h - c_lo)
    c_slope_sign = _sign(slope, 1e-9 * max(1.0, wt2))
    c_sign_expected = _sign(2.0 * ap.S - 1.0 - ap.S * ap.T, 1e-12)
    if ap.S * ap.T == 0.0:
        # dR/dC vanishes identically; nothing to compare
        c_sign_pass = c_slope_sign == 0
    else:
        c_sign_pass = c_slope_sign == c_sign_expected
    if not c_sign_pass:
        violations.append(
            f"sign(dR/dC) = {c_slope_sign} but sign(2S - 1 - ST) = {c_sign_expected}")

    # (d) quadratic-defect ratio test at S = 1
    ratios = []
    ratio_pass = True
    if ap.T > 0:
        def defect(delta: float) -> float:
            t = ap.T * delta
            c = ap.C * delta
            r = asymptotic_projected_risk(
                AsymptoticParams(1.0, t, c, wt2, ap.epsilon))
            return r - ((1.0 - 2.0 * t) * wt2 + 2.0 * t * ap.epsilon)

        errs = [defect(delta0 / 2 ** k) for k in range(halvings + 1)]
        for e0, e1 in zip(errs[:-1], errs[1:]):
            if e1 != 0:
                ratios.append(e0 / e1)
        if ratios:
            ratio_pass = abs(ratios[-1] - 4.0) <= ratio_tol
            if not ratio_pass:
                violations.append(
                    f"delta-halving ratio {ratios[-1]:.3f} not within "
                    f"{ratio_tol} of 4")

    return RegimeReport(cond_sq, cond_norm, monotone, monotone_pass, witness,
                        c_slope_sign, c_sign_expected, c_sign_pass,
                        tuple(ratios), ratio_pass, tuple(violations))


def _check_projection(Q: np.ndarray, q: int, tol: float = 1e-8):
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise InputError(f"Q must be square, got shape {Q.shape}")
    if np.abs(Q - Q.T).max() > tol:
        raise InputError("Q must be symmetric")
    if np.abs(Q @ Q - Q).max() > tol * max(1.0, float(np.abs(Q).max())):
        raise InputError("Q must be idempotent (a projection)")
    rank = int(round(float(np.trace(Q))))
    if rank != q:
        raise InputError(f"rank(Q) = {rank} does not match q = {q}")


def lemma1_closed_form(lp: Lemma1Params, Q) -> np.ndarray:
    """E_W[P Q P] with P a Haar-conjugated rank-p projection, Q rank-q.

    Equals p / (d(d-1)(d+2)) * [q (d - p) I + (d(p+1) - 2) Q].
    """
    Qm = np.asarray(Q, dtype=float)
    if Qm.shape != (lp.d, lp.d):
        raise InputError(f"Q must have shape ({lp.d}, {lp.d}), got {Qm.shape}")
    _check_projection(Qm, lp.q)
    d, p, q = lp.d, lp.p, lp.q
    coeff = p / (d * (d - 1) * (d + 2))
    return coeff * (q * (d - p) * np.eye(d) + (d * (p + 1) - 2) * Qm)


def haar_orthogonal(d: int, rng_seed) -> np.ndarray:
    """Draw a Haar-distributed orthogonal matrix.

    QR of a standard Gaussian matrix with the R-diagonal sign correction,
    which makes the factorization unique and the Q factor Haar.
    """
    if d < 1:
        raise InputError(f"d must be >= 1, got {d}")
    rng = np.random.default_rng(rng_seed)
    A = rng.standard_normal((d, d))
    Qm, R = np.linalg.qr(A)
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Qm * signs


def _substreams(rng_seed, trials: int):
    seq = rng_seed if isinstance(rng_seed, np.random.SeedSequence) \
        else np.random.SeedSequence(rng_seed)
    return seq.spawn(trials)


def lemma1_monte_carlo(lp: Lemma1Params, Q, draws: int, rng_seed):
    """Entrywise Monte Carlo mean and stderr of W D W^T Q W D W^T.

    Draws are aggregated in trial order from per-draw substreams, so a fixed
    seed reproduces the report bit for bit.
    """
    if draws < 2:
        raise InputError("draws must be >= 2")
    Qm = np.asarray(Q, dtype=float)
    _check_projection(Qm, lp.q)
    D = np.zeros(lp.d)
    D[:lp.p] = 1.0
    acc = np.zeros((lp.d, lp.d))
    acc2 = np.zeros((lp.d, lp.d))
    for child in _substreams(rng_seed, draws):
        W = haar_orthogonal(lp.d, child)
        P = (W * D) @ W.T
        M = P @ Qm @ P
        acc += M
        acc2 += M * M
    mean = acc / draws
    var = np.maximum(0.0, (acc2 / draws - mean * mean)) * draws / (draws - 1)
    stderr = np.sqrt(var / draws)
    return mean, stderr


def _mc_samples(params: LinearTaskParams, predictor: str, trials: int, rng_seed):
    if predictor not in PREDICTORS:
        raise InputError(f"predictor must be one of {PREDICTORS}, got {predictor!r}")
    if trials < 2:
        raise InputError("trials must be >= 2")
    if predictor == "translated" and params.c_s != params.c_t:
        raise InputError("translated predictor requires c_s == c_t")
    d, n_s, n_t = params.d, params.n_s, params.n_t
    ws, wt = params.omega_s, params.omega_t
    vals = np.empty(trials)
    for i, child in enumerate(_substreams(rng_seed, trials)):
        rng = np.random.default_rng(child)
        X_s = rng.standard_normal((d, n_s))
        X_t = rng.standard_normal((d, n_t))
        y_t = wt @ X_t
        if predictor == "baseline":
            w_hat = min_norm_linear(X_t, y_t)
        else:
            w_hat_s = min_norm_linear(X_s, ws @ X_s)
            if predictor == "projected":
                head = min_norm_linear(w_hat_s @ X_t, y_t)
                w_hat = head @ w_hat_s
            else:
                correction = min_norm_linear(X_t, y_t - w_hat_s @ X_t)
                w_hat = w_hat_s + correction
        vals[i] = np.linalg.norm(w_hat - wt) ** 2
    return vals


def _report(closed: float, vals: np.ndarray) -> RiskReport:
    trials = len(vals)
    stderr = float(vals.std(ddof=1) / math.sqrt(trials))
    return RiskReport(float(closed), float(vals.mean()), stderr, trials)


def monte_carlo_risk(params: LinearTaskParams, predictor: str, trials: int,
                     rng_seed) -> RiskReport:
    """Monte Carlo risk of a minimum-norm predictor against its closed form.

    Per trial: draw standard-Gaussian X_s, X_t, build the requested
    predictor with ``min_norm_linear`` exactly as defined (baseline
    y_t X_t^+; projected y_t (w_s X_t)^+ w_s; translated w_s +
    (y_t - w_s X_t) X_t^+), and record ||w_hat - omega_t||_F^2, which equals
    the expected squared prediction error under identity covariance. Trials
    use per-trial substreams of the master seed and aggregate in trial
    order, so reports are bit-reproducible.
    """
    vals = _mc_samples(params, predictor, trials, rng_seed)
    if predictor == "baseline":
        closed = baseline_risk(params)
    elif predictor == "projected":
        closed = projected_risk_closed_form(params).risk
    else:
        closed = translated_risk_closed_form(params)
    return _report(closed, vals)


def monte_carlo_projection_trace(params: LinearTaskParams, trials: int,
                                 rng_seed) -> RiskReport:
    """Monte Carlo of the projection trace functional behind the closed form.

    Per trial this averages
    Tr(omega_t ((I - P_t) M (I - P_t) + I - M) omega_t^T) with
    M = P_s Q P_s, where P_s, P_t project onto the sampled source/target
    column spans and Q = omega_s^+ omega_s. The closed-form projected risk
    equals the expectation of exactly this functional, so the two agree to
    Monte Carlo accuracy; the composed least-squares estimator measured by
    ``monte_carlo_risk(..., "projected")`` does not, and comparing the two
    reports isolates that divergence.
    """
    if trials < 2:
        raise InputError("trials must be >= 2")
    d = params.d
    wt = params.omega_t
    Q = np.linalg.pinv(params.omega_s) @ params.omega_s
    eye = np.eye(d)
    vals = np.empty(trials)
    for i, child in enumerate(_substreams(rng_seed, trials)):
        rng = np.random.default_rng(child)
        X_s = rng.standard_normal((d, params.n_s))
        X_t = rng.standard_normal((d, params.n_t))
        P_s = _span_projector(X_s)
        P_t_perp = eye - _span_projector(X_t)
        M = P_s @ Q @ P_s
        inner = P_t_perp @ M @ P_t_perp + eye - M
        vals[i] = float(np.trace(wt @ inner @ wt.T))
    return _report(projected_risk_closed_form(params).risk, vals)


def _span_projector(X: np.ndarray) -> np.ndarray:
    if X.shape[1] == 0:
        return np.zeros((X.shape[0], X.shape[0]))
    Qb, _ = np.linalg.qr(X)
    return Qb @ Qb.T


def within_band(report: RiskReport, band: float = 4.0) -> bool:
    """Is |closed_form - mc_mean| within `band` standard errors?

    Zero-stderr reports (degenerate exact cells) require agreement to
    1e-12 relative scale instead.
    """
    gap = abs(report.closed_form - report.mc_mean)
    if report.mc_stderr == 0:
        return gap <= 1e-12 * max(1.0, abs(report.closed_form))
    return gap <= band * report.mc_stderr
