"""Experiment configuration: an INI file with nested sections.

Sections and keys (all optional; defaults reproduce the validation grids):

    [task]    kind, seed, out, threads, figures
    [data]    source_x, source_y, target_x, target_y, test_x, test_y, labels
    [models]  source_kernel, head_kernel, correction_kernel, variant,
              source_ridge, transfer_ridge, source_scale, input_scale
    [sweep]   n_t, seeds, metrics, include_baseline, include_source
    [theory]  d, n_s, n_t, c_s, c_t, draws, trials, band, retries,
              translated_c, deltas, lemma_d, lemma_draws, lemma_band,
              asym_d, asym_s, asym_t, asym_c, asym_eps

List values are comma- or space-separated. The environment variable KT_SEED
overrides the master seed from any other source.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

from ..errors import ConfigError, InputError
from ..kernels import KernelSpec, Laplace, parse_kernel

TASKS = ("train", "transfer", "eval", "theory", "scaling", "experiment")
VARIANTS = ("projected", "translated", "combined", "baseline")
METRICS = ("accuracy", "mse", "pearson_r", "mean_r2", "mean_cosine")


@dataclass(frozen=True)
class DataPaths:
    source_x: Optional[Path] = None
    source_y: Optional[Path] = None
    target_x: Optional[Path] = None
    target_y: Optional[Path] = None
    test_x: Optional[Path] = None
    test_y: Optional[Path] = None
    labels: str = "int"              # "int" labels are one-hot encoded


@dataclass(frozen=True)
class ModelSection:
    source_kernel: KernelSpec = Laplace()
    head_kernel: KernelSpec = Laplace()
    correction_kernel: KernelSpec = Laplace()
    variant: str = "projected"
    source_ridge: float = 1e-4
    transfer_ridge: float = 1e-4
    source_scale: float = 1.0
    input_scale: float = 1.0


@dataclass(frozen=True)
class SweepSection:
    n_t: tuple = (50, 100, 200)
    seeds: tuple = (0, 1, 2)
    metrics: tuple = ("accuracy",)
    include_baseline: bool = True
    include_source: bool = True


@dataclass(frozen=True)
class TheorySection:
    # Monte Carlo validation grids; the defaults are the acceptance grids.
    d: int = 32
    n_s: tuple = (8, 16, 32)
    n_t: tuple = (4, 16, 28)
    c_s: tuple = (2, 8)
    c_t: int = 3
    draws: int = 5
    trials: int = 2000
    band: float = 4.0
    retries: int = 1
    translated_c: int = 4
    deltas: tuple = (0.0, 0.2, 1.0)
    lemma_d: int = 16
    # (p, q) rank pairs; None derives the default pattern for lemma_d,
    # which at d = 16 is ((16, 3), (5, 3), (5, 0), (1, 16))
    lemma_cells: tuple | None = None
    lemma_draws: int = 20000
    lemma_band: float = 5.0
    asym_d: int = 1024
    asym_s: tuple = (0.1, 0.5, 0.9)
    asym_t: tuple = (0.1, 0.5, 0.9)
    asym_c: tuple = (0.1, 0.5, 0.9)
    asym_eps: tuple = (0.0, 0.3)
    asym_c_t: int = 2


@dataclass(frozen=True)
class ExperimentConfig:
    task: str = "experiment"
    seed: int = 0
    out: Path = Path("ktx-out")
    threads: int = 1
    figures: bool = True
    model_in: Optional[Path] = None
    data: DataPaths = field(default_factory=DataPaths)
    models: ModelSection = field(default_factory=ModelSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    theory: TheorySection = field(default_factory=TheorySection)

    def __post_init__(self):
        if self.task not in TASKS:
            raise ConfigError(f"task must be one of {TASKS}, got {self.task!r}")
        if self.models.variant not in VARIANTS:
            raise ConfigError(
                f"variant must be one of {VARIANTS}, got {self.models.variant!r}")
        for m in self.sweep.metrics:
            if m not in METRICS:
                raise ConfigError(f"unknown metric {m!r}; choose from {METRICS}")
        nts = self.sweep.n_t
        if any(b <= a for a, b in zip(nts, nts[1:])):
            raise ConfigError(f"sweep n_t values must be strictly increasing, got {nts}")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")


def _ints(text: str) -> tuple:
    return tuple(int(tok) for tok in text.replace(",", " ").split())


def _floats(text: str) -> tuple:
    return tuple(float(tok) for tok in text.replace(",", " ").split())


def _strs(text: str) -> tuple:
    return tuple(text.replace(",", " ").split())


def _path(text: str) -> Optional[Path]:
    text = text.strip()
    return Path(text) if text else None


def load_config(path=None, *, overrides: dict | None = None) -> ExperimentConfig:
    """Build a config from an optional INI file plus CLI overrides.

    Precedence for the master seed: file < --seed < KT_SEED.
    """
    cfg = ExperimentConfig()
    if path is not None:
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        read = parser.read(path)
        if not read:
            raise ConfigError(f"config file not found: {path}")
        try:
            cfg = _from_parser(parser)
        except (ValueError, InputError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"bad config {path}: {exc}") from exc
    for key, val in (overrides or {}).items():
        if val is not None:
            cfg = replace(cfg, **{key: val})
    env_seed = os.environ.get("KT_SEED")
    if env_seed is not None:
        try:
            cfg = replace(cfg, seed=int(env_seed))
        except ValueError:
            raise ConfigError(f"KT_SEED must be an integer, got {env_seed!r}") from None
    return cfg


def _from_parser(p: configparser.ConfigParser) -> ExperimentConfig:
    kw = {}
    if p.has_section("task"):
        s = p["task"]
        if "kind" in s:
            kw["task"] = s["kind"].strip()
        if "seed" in s:
            kw["seed"] = s.getint("seed")
        if "out" in s:
            kw["out"] = Path(s["out"].strip())
        if "threads" in s:
            kw["threads"] = s.getint("threads")
        if "figures" in s:
            kw["figures"] = s.getboolean("figures")
        if "model" in s:
            kw["model_in"] = _path(s["model"])
    if p.has_section("data"):
        s = p["data"]
        kw["data"] = DataPaths(
            source_x=_path(s.get("source_x", "")),
            source_y=_path(s.get("source_y", "")),
            target_x=_path(s.get("target_x", "")),
            target_y=_path(s.get("target_y", "")),
            test_x=_path(s.get("test_x", "")),
            test_y=_path(s.get("test_y", "")),
            labels=s.get("labels", "int").strip())
    if p.has_section("models"):
        s = p["models"]
        base = ModelSection()
        kw["models"] = ModelSection(
            source_kernel=parse_kernel(s.get("source_kernel", "laplace")),
            head_kernel=parse_kernel(s.get("head_kernel", "laplace")),
            correction_kernel=parse_kernel(s.get("correction_kernel", "laplace")),
            variant=s.get("variant", base.variant).strip(),
            source_ridge=s.getfloat("source_ridge", base.source_ridge),
            transfer_ridge=s.getfloat("transfer_ridge", base.transfer_ridge),
            source_scale=s.getfloat("source_scale", base.source_scale),
            input_scale=s.getfloat("input_scale", base.input_scale))
    if p.has_section("sweep"):
        s = p["sweep"]
        base = SweepSection()
        kw["sweep"] = SweepSection(
            n_t=_ints(s.get("n_t", "")) or base.n_t,
            seeds=_ints(s.get("seeds", "")) or base.seeds,
            metrics=_strs(s.get("metrics", "")) or base.metrics,
            include_baseline=s.getboolean("include_baseline", True),
            include_source=s.getboolean("include_source", True))
    if p.has_section("theory"):
        s = p["theory"]
        base = TheorySection()
        kw["theory"] = TheorySection(
            d=s.getint("d", base.d),
            n_s=_ints(s.get("n_s", "")) or base.n_s,
            n_t=_ints(s.get("n_t", "")) or base.n_t,
            c_s=_ints(s.get("c_s", "")) or base.c_s,
            c_t=s.getint("c_t", base.c_t),
            draws=s.getint("draws", base.draws),
            trials=s.getint("trials", base.trials),
            band=s.getfloat("band", base.band),
            retries=s.getint("retries", base.retries),
            translated_c=s.getint("translated_c", base.translated_c),
            deltas=_floats(s.get("deltas", "")) or base.deltas,
            lemma_d=s.getint("lemma_d", base.lemma_d),
            lemma_draws=s.getint("lemma_draws", base.lemma_draws),
            lemma_band=s.getfloat("lemma_band", base.lemma_band),
            asym_d=s.getint("asym_d", base.asym_d),
            asym_s=_floats(s.get("asym_s", "")) or base.asym_s,
            asym_t=_floats(s.get("asym_t", "")) or base.asym_t,
            asym_c=_floats(s.get("asym_c", "")) or base.asym_c,
            asym_eps=_floats(s.get("asym_eps", "")) or base.asym_eps,
            asym_c_t=s.getint("asym_c_t", base.asym_c_t))
    return ExperimentConfig(**kw)
