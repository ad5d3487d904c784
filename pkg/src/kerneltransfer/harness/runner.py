"""End-to-end runners behind the CLI subcommands.

``run_theory_validation`` executes the Monte-Carlo-vs-closed-form grids
(projected, translated, baseline), the Haar-projection expectation cells,
and the asymptotic consistency and regime checks, emitting one record per
cell with a pass flag. ``run_experiment`` sweeps target-set sizes over
seeded prefix subsamples, fits baseline/transfer models, evaluates metrics
on a held-out split, and fits the logarithmic scaling law per curve.

Determinism contract: every random quantity derives from the master seed
through ``SeedSequence(seed, spawn_key=...)`` keys, records are appended in
a fixed order (worker pools preserve job order), and wall-time fields are
excluded from report hashes.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from itertools import product
from pathlib import Path

import numpy as np

from .. import linear_theory
from ..errors import ConfigError, InputError
from ..kernels import format_kernel
from ..linear_theory import AsymptoticParams, Lemma1Params, LinearTaskParams
from ..regression import LabeledDataset, fit_exact, predict
from ..scaling_metrics import (accuracy, extrapolate, fit_log_law,
                               mean_cosine, mean_r2, pearson_r)
from ..transfer import (fit_combined, fit_projected, fit_translated,
                        predict_transfer)
from .config import ExperimentConfig
from .matrixio import load_labels, load_matrix, one_hot
from .models import load_model, save_model
from .reports import ExperimentReport, write_plot_csv
from . import plots

logger = logging.getLogger(__name__)

# spawn-key domains, so no two random streams ever collide
_K_T1_OMEGA, _K_T1_MC, _K_T1_TRACE, _K_T1_BASE = 1, 2, 3, 4
_K_T2_OMEGA, _K_T2_MC = 5, 6
_K_LEMMA_Q, _K_LEMMA_MC = 7, 8
_K_EQ5 = 9
_K_SWEEP = 10


def substream(master: int, *key: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(master, spawn_key=tuple(key))


def _mc_with_retry(params: LinearTaskParams, predictor: str, trials: int,
                   band: float, master: int, domain: int, cell: int,
                   draw: int, retries: int):
    """One fresh-seed retry is allowed per cell on a band failure."""
    attempt = 0
    while True:
        rep = linear_theory.monte_carlo_risk(
            params, predictor, trials, substream(master, domain, cell, draw, attempt))
        ok = linear_theory.within_band(rep, band)
        if ok or attempt >= retries:
            return rep, ok, attempt
        attempt += 1


def _zscore(rep) -> float:
    if rep.mc_stderr == 0:
        return 0.0
    return (rep.closed_form - rep.mc_mean) / rep.mc_stderr


def run_theory_validation(config: ExperimentConfig) -> ExperimentReport:
    th = config.theory
    master = config.seed
    report = ExperimentReport()

    # --- projected-predictor grid, with the trace diagnostic and baselines
    for cell, (n_s, n_t, c_s) in enumerate(product(th.n_s, th.n_t, th.c_s)):
        for draw in range(th.draws):
            t0 = time.perf_counter()
            rng = np.random.default_rng(substream(master, _K_T1_OMEGA, cell, draw))
            params = LinearTaskParams.random(th.d, n_s, n_t, c_s, th.c_t, rng)
            rep, ok, attempts = _mc_with_retry(
                params, "projected", th.trials, th.band, master, _K_T1_MC,
                cell, draw, th.retries)
            trace = linear_theory.monte_carlo_projection_trace(
                params, th.trials, substream(master, _K_T1_TRACE, cell, draw))
            report.append({
                "kind": "theorem1", "d": th.d, "n_s": n_s, "n_t": n_t,
                "c_s": c_s, "c_t": th.c_t, "draw": draw, "trials": rep.trials,
                "band": th.band, "closed_form": rep.closed_form,
                "mc_mean": rep.mc_mean, "mc_stderr": rep.mc_stderr,
                "z": _zscore(rep), "retried": attempts, "pass": ok,
                "trace_mean": trace.mc_mean, "trace_stderr": trace.mc_stderr,
                "trace_z": _zscore(trace),
                "trace_pass": linear_theory.within_band(trace, th.band),
                "wall_time_s": time.perf_counter() - t0,
            })
            t0 = time.perf_counter()
            base, bok, battempts = _mc_with_retry(
                params, "baseline", th.trials, th.band, master, _K_T1_BASE,
                cell, draw, th.retries)
            report.append({
                "kind": "baseline", "d": th.d, "n_s": n_s, "n_t": n_t,
                "c_s": c_s, "c_t": th.c_t, "draw": draw, "trials": base.trials,
                "band": th.band, "closed_form": base.closed_form,
                "mc_mean": base.mc_mean, "mc_stderr": base.mc_stderr,
                "z": _zscore(base), "retried": battempts, "pass": bok,
                "wall_time_s": time.perf_counter() - t0,
            })

    # --- translated-predictor grid over constructed mismatch levels
    c = th.translated_c
    for cell, (n_s, n_t) in enumerate(product(th.n_s, th.n_t)):
        for di, delta in enumerate(th.deltas):
            t0 = time.perf_counter()
            rng = np.random.default_rng(substream(master, _K_T2_OMEGA, cell, di))
            omega_t = rng.standard_normal((c, th.d))
            omega_t /= np.linalg.norm(omega_t)
            if delta == 0:
                omega_s = omega_t.copy()
            else:
                u = rng.standard_normal((c, th.d))
                u /= np.linalg.norm(u)
                omega_s = omega_t + math.sqrt(delta) * u
            params = LinearTaskParams(th.d, n_s, n_t, c, c, omega_s, omega_t)
            rep, ok, attempts = _mc_with_retry(
                params, "translated", th.trials, th.band, master, _K_T2_MC,
                cell, di, th.retries)
            report.append({
                "kind": "theorem2", "d": th.d, "n_s": n_s, "n_t": n_t,
                "c": c, "delta": delta, "trials": rep.trials, "band": th.band,
                "closed_form": rep.closed_form, "mc_mean": rep.mc_mean,
                "mc_stderr": rep.mc_stderr, "z": _zscore(rep),
                "retried": attempts, "pass": ok,
                "wall_time_s": time.perf_counter() - t0,
            })

    # --- Haar projection expectation cells
    dl = th.lemma_d
    lemma_cells = th.lemma_cells if th.lemma_cells is not None else (
        (dl, min(3, dl)), (min(5, dl), min(3, dl)), (min(5, dl), 0), (1, dl))
    for ci, (p, q) in enumerate(lemma_cells):
        t0 = time.perf_counter()
        lp = Lemma1Params(th.lemma_d, p, q)
        V = linear_theory.haar_orthogonal(
            th.lemma_d, substream(master, _K_LEMMA_Q, ci))
        Q = V[:, :q] @ V[:, :q].T
        closed = linear_theory.lemma1_closed_form(lp, Q)
        rec = {"kind": "lemma1", "d": th.lemma_d, "p": p, "q": q,
               "band": th.lemma_band}
        if p == th.lemma_d:
            dev = float(np.abs(closed - Q).max())
            rec.update({"analytic": True, "max_abs_dev": dev,
                        "pass": dev <= 1e-10})
        else:
            mean, stderr = linear_theory.lemma1_monte_carlo(
                lp, Q, th.lemma_draws, substream(master, _K_LEMMA_MC, ci))
            dev = np.abs(mean - closed)
            with np.errstate(divide="ignore", invalid="ignore"):
                units = np.where(dev == 0, 0.0,
                                 np.where(stderr > 0, dev / np.where(stderr > 0, stderr, 1.0),
                                          np.inf))
            rec.update({"analytic": False, "draws": th.lemma_draws,
                        "max_abs_dev": float(dev.max()),
                        "max_stderr_units": float(units.max()),
                        "pass": bool(units.max() <= th.lemma_band)})
        rec["wall_time_s"] = time.perf_counter() - t0
        report.append(rec)

    # --- finite-d vs asymptotic consistency and regime checks
    d = th.asym_d
    constructions: dict = {}
    for ei, eps in enumerate(th.asym_eps):
        for si, ti, ci_ in product(range(len(th.asym_s)), range(len(th.asym_t)),
                                   range(len(th.asym_c))):
            t0 = time.perf_counter()
            S_req, T_req, C_req = th.asym_s[si], th.asym_t[ti], th.asym_c[ci_]
            n_s, n_t, c_s = round(S_req * d), round(T_req * d), round(C_req * d)
            key = (c_s, eps)
            if key not in constructions:
                rng = np.random.default_rng(substream(master, _K_EQ5, ei, ci_))
                constructions[key] = LinearTaskParams.with_mismatch(
                    d, n_s, n_t, c_s, th.asym_c_t, eps, rng)
            params = replace(constructions[key], n_s=n_s, n_t=n_t)
            decomp = linear_theory.projected_risk_closed_form(params)
            eps_ok = abs(decomp.epsilon - eps) <= 1e-8
            ap = AsymptoticParams(S=n_s / d, T=n_t / d, C=c_s / d,
                                  omega_t_norm_sq=1.0, epsilon=eps)
            eq5 = linear_theory.asymptotic_projected_risk(ap)
            rel_gap = abs(decomp.risk - eq5)
            gap_ok = rel_gap <= 5.0 / d
            # exact algebraic identity of the S = 1 specialization
            lhs = linear_theory.asymptotic_projected_risk(
                AsymptoticParams(1.0, ap.T, ap.C, 1.0, eps))
            rhs = (1.0 - ap.T + ap.T * ap.C) * (1.0 - ap.T) + eps * ap.T * (2.0 - ap.T)
            cor1c_gap = abs(lhs - rhs)
            regime = linear_theory.corollary_regime_check(ap)
            report.append({
                "kind": "eq5", "d": d, "S": ap.S, "T": ap.T, "C": ap.C,
                "epsilon": eps, "n_s": n_s, "n_t": n_t, "c_s": c_s,
                "theorem1": decomp.risk, "asymptotic": eq5,
                "rel_gap": rel_gap, "gap_tol": 5.0 / d,
                "cor1c_gap": cor1c_gap,
                "monotone_condition_sq": regime.monotone_condition_sq,
                "monotone_condition_norm": regime.monotone_condition_norm,
                "monotone_in_s": regime.monotone_in_s,
                "delta_ratio": regime.delta_ratios[-1] if regime.delta_ratios else None,
                "regime_violations": list(regime.violations),
                "pass": bool(eps_ok and gap_ok and cor1c_gap <= 1e-12
                             and regime.passed),
                "wall_time_s": time.perf_counter() - t0,
            })

    report.finalize()
    report.summary["seed"] = master
    return report


# ---------------------------------------------------------------------------
# experiment sweeps


def _require(path, what) -> Path:
    if path is None:
        raise ConfigError(f"config is missing the {what} path")
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"{what} path does not exist: {p}")
    return p


def _load_xy(x_path, y_path, labels_mode: str, what: str):
    X = load_matrix(_require(x_path, f"{what} features"))
    if labels_mode == "int":
        labels = load_labels(_require(y_path, f"{what} labels"))
        if labels.shape[0] != X.shape[1]:
            raise ConfigError(
                f"{what}: {labels.shape[0]} labels for {X.shape[1]} samples")
        return X, None, labels
    Y = load_matrix(_require(y_path, f"{what} targets"))
    if Y.shape[1] != X.shape[1]:
        raise ConfigError(f"{what}: X has {X.shape[1]} samples, Y has {Y.shape[1]}")
    return X, Y, None


def _evaluate_metric(metric: str, pred: np.ndarray, Y: np.ndarray | None,
                     labels: np.ndarray | None) -> float:
    if metric == "accuracy":
        if labels is None:
            raise InputError("accuracy needs integer labels")
        return accuracy(pred, labels)
    if Y is None:
        raise InputError(f"metric {metric!r} needs matrix targets")
    if metric == "mse":
        return float(np.mean(np.sum((pred - Y) ** 2, axis=0)))
    if metric == "pearson_r":
        return pearson_r(pred, Y)
    if metric == "mean_r2":
        return mean_r2(pred, Y).value
    if metric == "mean_cosine":
        return mean_cosine(pred, Y).value
    raise InputError(f"unknown metric {metric!r}")


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    data, models, sweep = config.data, config.models, config.sweep
    report = ExperimentReport()

    TX, TY_mat, T_labels = _load_xy(data.target_x, data.target_y, data.labels,
                                    "target")
    EX, EY_mat, E_labels = _load_xy(data.test_x, data.test_y, data.labels,
                                    "test")
    if data.labels == "int":
        n_classes = int(max(T_labels.max(), E_labels.max())) + 1
        TY = one_hot(T_labels, n_classes)
        EY = one_hot(E_labels, n_classes)
    else:
        TY, EY = TY_mat, EY_mat

    needs_source = models.variant != "baseline"
    source = None
    source_test_pred = None
    if needs_source:
        SX, SY_mat, S_labels = _load_xy(data.source_x, data.source_y,
                                        data.labels, "source")
        SY = one_hot(S_labels) if data.labels == "int" else SY_mat
        source = fit_exact(models.source_kernel, LabeledDataset(SX, SY),
                           models.source_ridge)
        source_test_pred = predict(source, EX)

    n_pool = TX.shape[1]
    model_names = []
    if sweep.include_baseline or models.variant == "baseline":
        model_names.append("baseline")
    if models.variant != "baseline":
        model_names.append(models.variant)
    if (needs_source and sweep.include_source
            and source.n_outputs == TY.shape[0]):
        model_names.append("source")

    perms = {s: np.random.default_rng(substream(config.seed, _K_SWEEP, s))
             .permutation(n_pool) for s in sweep.seeds}

    def run_cell(job):
        seed, n_t = job
        rows = []
        if n_t > n_pool:
            return [{"kind": "experiment", "model": models.variant,
                     "n_t": n_t, "seed": seed,
                     "error": f"n_t={n_t} exceeds target pool size {n_pool}",
                     "pass": False}]
        idx = perms[seed][:n_t]
        target = LabeledDataset(TX[:, idx], TY[:, idx])
        for name in model_names:
            t0 = time.perf_counter()
            try:
                if name == "baseline":
                    mdl = fit_exact(models.source_kernel, target,
                                    models.transfer_ridge)
                    pred = predict(mdl, EX)
                elif name == "projected":
                    mdl = fit_projected(source, target, models.head_kernel,
                                        models.transfer_ridge)
                    pred = predict_transfer(mdl, EX)
                elif name == "translated":
                    mdl = fit_translated(source, target,
                                         models.correction_kernel,
                                         models.transfer_ridge)
                    pred = predict_transfer(mdl, EX)
                elif name == "combined":
                    mdl = fit_combined(source, target, models.head_kernel,
                                       models.transfer_ridge,
                                       models.source_scale,
                                       models.input_scale)
                    pred = predict_transfer(mdl, EX)
                else:  # source predictor, constant over the sweep
                    pred = source_test_pred
                values = {m: _evaluate_metric(m, pred, EY, E_labels)
                          for m in sweep.metrics}
            except Exception as exc:  # record the failure, continue the sweep
                rows.append({"kind": "experiment", "model": name, "n_t": n_t,
                             "seed": seed, "error": f"{type(exc).__name__}: {exc}",
                             "pass": False,
                             "wall_time_s": time.perf_counter() - t0})
                continue
            elapsed = time.perf_counter() - t0
            for metric, value in values.items():
                rows.append({"kind": "experiment", "model": name, "n_t": n_t,
                             "seed": seed,
                             "n_s": 0 if source is None else source.support.shape[1],
                             "metric": metric, "value": value, "pass": True,
                             "wall_time_s": elapsed})
        return rows

    jobs = [(s, n_t) for s in sweep.seeds for n_t in sweep.n_t]
    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            cell_rows = list(pool.map(run_cell, jobs))
    else:
        cell_rows = [run_cell(j) for j in jobs]
    for rows in cell_rows:
        report.records.extend(rows)

    plot_rows = _fit_curves(report)
    report.finalize()
    report.summary["seed"] = config.seed
    report.summary["source_kernel"] = format_kernel(models.source_kernel)
    report.summary["variant"] = models.variant
    report.plot_rows = plot_rows  # type: ignore[attr-defined]
    return report


def _fit_curves(report: ExperimentReport) -> list[dict]:
    """Aggregate sweep records into per-curve means and log-law fits."""
    grouped: dict = {}
    for rec in report.records:
        if rec.get("kind") != "experiment" or "value" not in rec:
            continue
        grouped.setdefault((rec["model"], rec["metric"]), {}) \
            .setdefault(rec["n_t"], []).append(rec["value"])
    plot_rows = []
    for (model, metric), by_nt in sorted(grouped.items()):
        points = []
        for n_t, vals in sorted(by_nt.items()):
            arr = np.array(vals)
            stderr = float(arr.std(ddof=1) / math.sqrt(len(arr))) if len(arr) > 1 else 0.0
            points.append((n_t, float(arr.mean()), stderr))
        fit = None
        if len({p[0] for p in points}) >= 2:
            fit = fit_log_law([(x, m) for x, m, _ in points])
            report.append({"kind": "scaling_fit", "curve_id": f"{model}:{metric}",
                           "a": fit.a, "b": fit.b, "r_squared": fit.r_squared,
                           "n_points": len(points), "pass": True})
        else:
            logger.warning("curve %s:%s has a single n_t; scaling fit skipped",
                           model, metric)
        for x, m, se in points:
            plot_rows.append({"curve_id": f"{model}:{metric}", "n_t": x,
                              "mean": m, "stderr": se,
                              "fit_a": None if fit is None else fit.a,
                              "fit_b": None if fit is None else fit.b,
                              "fit_r2": None if fit is None else fit.r_squared})
    return plot_rows


# ---------------------------------------------------------------------------
# single-model paths


def run_train(config: ExperimentConfig) -> ExperimentReport:
    data, models = config.data, config.models
    SX, SY_mat, S_labels = _load_xy(data.source_x, data.source_y, data.labels,
                                    "source")
    SY = one_hot(S_labels) if data.labels == "int" else SY_mat
    t0 = time.perf_counter()
    model = fit_exact(models.source_kernel, LabeledDataset(SX, SY),
                      models.source_ridge)
    path = save_model(Path(config.out) / "model.npz", model)
    report = ExperimentReport()
    report.append({"kind": "train", "kernel": format_kernel(models.source_kernel),
                   "ridge": models.source_ridge, "n": SX.shape[1],
                   "d": SX.shape[0], "c": SY.shape[0],
                   "relative_residual": model.report.relative_residual,
                   "converged": model.report.converged, "model_path": str(path),
                   "pass": True, "wall_time_s": time.perf_counter() - t0})
    report.finalize()
    return report


def run_transfer(config: ExperimentConfig) -> ExperimentReport:
    if config.model_in is None:
        raise ConfigError("transfer needs a trained source model (--model)")
    source = load_model(_require(config.model_in, "source model"))
    data, models = config.data, config.models
    TX, TY_mat, T_labels = _load_xy(data.target_x, data.target_y, data.labels,
                                    "target")
    TY = one_hot(T_labels) if data.labels == "int" else TY_mat
    target = LabeledDataset(TX, TY)
    t0 = time.perf_counter()
    if models.variant == "projected":
        mdl = fit_projected(source, target, models.head_kernel,
                            models.transfer_ridge)
    elif models.variant == "translated":
        mdl = fit_translated(source, target, models.correction_kernel,
                             models.transfer_ridge)
    elif models.variant == "combined":
        mdl = fit_combined(source, target, models.head_kernel,
                           models.transfer_ridge, models.source_scale,
                           models.input_scale)
    else:
        raise ConfigError("transfer variant must be projected, translated, or combined")
    path = save_model(Path(config.out) / f"{models.variant}_model.npz", mdl)
    report = ExperimentReport()
    report.append({"kind": "transfer", "variant": models.variant,
                   "n_t": TX.shape[1], "model_path": str(path), "pass": True,
                   "wall_time_s": time.perf_counter() - t0})
    report.finalize()
    return report


def run_eval(config: ExperimentConfig) -> ExperimentReport:
    if config.model_in is None:
        raise ConfigError("eval needs a model (--model)")
    model = load_model(_require(config.model_in, "model"))
    data = config.data
    EX, EY_mat, E_labels = _load_xy(data.test_x, data.test_y, data.labels,
                                    "test")
    EY = one_hot(E_labels) if data.labels == "int" else EY_mat
    t0 = time.perf_counter()
    pred = model.predict(EX)
    report = ExperimentReport()
    for metric in config.sweep.metrics:
        try:
            value = _evaluate_metric(metric, pred, EY, E_labels)
            report.append({"kind": "eval", "metric": metric, "value": value,
                           "n_test": EX.shape[1], "pass": True,
                           "wall_time_s": time.perf_counter() - t0})
        except InputError as exc:
            report.append({"kind": "eval", "metric": metric,
                           "error": str(exc), "pass": False})
    report.finalize()
    return report


def run_scaling(config: ExperimentConfig, points_path,
                at_values: tuple = ()) -> ExperimentReport:
    M = load_matrix(_require(points_path, "points"))
    if M.shape[0] != 2:
        raise ConfigError(
            f"points file must have two columns (x, y), got {M.shape[0]}")
    points = list(zip(M[0].tolist(), M[1].tolist()))
    fit = fit_log_law(points)
    report = ExperimentReport()
    r2 = fit.r_squared if math.isfinite(fit.r_squared) else "undefined"
    report.append({"kind": "scaling", "a": fit.a, "b": fit.b,
                   "r_squared": r2, "n_points": len(points), "pass": True})
    extra = []
    for x in at_values:
        y = extrapolate(fit, x)
        extra.append((x, y))
        report.append({"kind": "extrapolation", "x": x, "y": y, "pass": True})
    report.finalize()
    report.scaling_fit = fit            # type: ignore[attr-defined]
    report.scaling_points = points      # type: ignore[attr-defined]
    report.scaling_extra = extra        # type: ignore[attr-defined]
    report.plot_rows = [                # type: ignore[attr-defined]
        {"curve_id": "scaling", "n_t": x, "mean": y, "stderr": 0.0,
         "fit_a": fit.a, "fit_b": fit.b, "fit_r2": fit.r_squared}
        for x, y in points]
    return report


# ---------------------------------------------------------------------------
# output writing shared by the CLI


def write_outputs(report: ExperimentReport, config: ExperimentConfig,
                  name: str) -> dict:
    """Persist JSONL (+ plot CSV and figures where the path produces curves)."""
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"jsonl": str(report.write_jsonl(out / f"{name}_report.jsonl"))}
    plot_rows = getattr(report, "plot_rows", None)
    if plot_rows:
        paths["plot_csv"] = str(write_plot_csv(out / f"{name}_curves.csv",
                                               plot_rows))
    if config.figures:
        if name == "theory":
            fig = plots.render_theory(report.records, out / "theory_validation.png")
            if fig:
                paths["figure"] = str(fig)
        elif name == "experiment" and plot_rows:
            fig = plots.render_curves(plot_rows, out / "experiment_curves.png",
                                      title="transfer sweep")
            if fig:
                paths["figure"] = str(fig)
        elif name == "scaling" and hasattr(report, "scaling_fit"):
            fig = plots.render_scaling(report.scaling_points,
                                       report.scaling_fit,
                                       out / "scaling_fit.png",
                                       extra=report.scaling_extra)
            if fig:
                paths["figure"] = str(fig)
    return paths
