"""Experiment harness: configuration, IO, runners, reports, CLI."""

from .config import (ExperimentConfig, DataPaths, ModelSection, SweepSection,
                     TheorySection, load_config)
from .matrixio import (load_labels, load_matrix, one_hot, save_labels,
                       save_matrix)
from .models import load_model, save_model
from .reports import (ExperimentReport, determinism_hash, load_jsonl,
                      strip_timing, write_plot_csv)
from .runner import (run_eval, run_experiment, run_scaling, run_theory_validation,
                     run_train, run_transfer, substream, write_outputs)
from .synthetic import (ClusterTask, make_linear_task, make_projection_task,
                        make_translation_task)

__all__ = [
    "ClusterTask", "DataPaths", "ExperimentConfig", "ExperimentReport",
    "ModelSection", "SweepSection", "TheorySection", "determinism_hash",
    "load_config", "load_jsonl", "load_labels", "load_matrix", "load_model",
    "make_linear_task", "make_projection_task", "make_translation_task",
    "one_hot", "run_eval", "run_experiment", "run_scaling",
    "run_theory_validation", "run_train", "run_transfer", "save_labels",
    "save_matrix", "save_model", "strip_timing", "substream",
    "write_outputs", "write_plot_csv",
]
