"""Save and load trained models as .npz archives with a JSON metadata entry."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import ParseError
from ..kernels import format_kernel, parse_kernel
from ..regression import KernelModel, TrainingReport
from ..transfer import CombinedModel, ProjectedModel, TranslatedModel


def _kernel_meta(model: KernelModel) -> dict:
    rep = model.report
    return {"spec": format_kernel(model.spec), "ridge": model.ridge,
            "report": {"method": rep.method, "converged": rep.converged,
                       "iterations": rep.iterations,
                       "relative_residual": rep.relative_residual}}


def _kernel_from(meta: dict, support, alpha) -> KernelModel:
    rep = meta.get("report", {})
    return KernelModel(parse_kernel(meta["spec"]), support, alpha,
                       meta.get("ridge", 0.0),
                       TrainingReport(rep.get("method", "direct"),
                                      rep.get("converged", True),
                                      rep.get("iterations", 0),
                                      rep.get("relative_residual", 0.0)))


def save_model(path, model) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    arrays = {}
    if isinstance(model, KernelModel):
        meta = {"kind": "kernel", "model": _kernel_meta(model)}
        arrays["support"] = model.support
        arrays["alpha"] = model.alpha
    elif isinstance(model, (ProjectedModel, TranslatedModel, CombinedModel)):
        second = model.correction if isinstance(model, TranslatedModel) else model.head
        meta = {"kind": {ProjectedModel: "projected", TranslatedModel: "translated",
                         CombinedModel: "combined"}[type(model)],
                "source": _kernel_meta(model.source),
                "second": _kernel_meta(second)}
        if isinstance(model, CombinedModel):
            meta["source_scale"] = model.source_scale
            meta["input_scale"] = model.input_scale
        arrays["source_support"] = model.source.support
        arrays["source_alpha"] = model.source.alpha
        arrays["second_support"] = second.support
        arrays["second_alpha"] = second.alpha
    else:
        raise ParseError(f"cannot save object of type {type(model).__name__}")
    np.savez(p, meta=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8),
             **arrays)
    return p


def load_model(path):
    p = Path(path)
    if not p.exists():
        raise ParseError(f"{p}: file does not exist")
    with np.load(p) as npz:
        try:
            meta = json.loads(bytes(npz["meta"]).decode())
        except (KeyError, ValueError) as exc:
            raise ParseError(f"{p}: missing or corrupt model metadata: {exc}") from None
        kind = meta.get("kind")
        if kind == "kernel":
            return _kernel_from(meta["model"], npz["support"], npz["alpha"])
        if kind in ("projected", "translated", "combined"):
            source = _kernel_from(meta["source"], npz["source_support"],
                                  npz["source_alpha"])
            second = _kernel_from(meta["second"], npz["second_support"],
                                  npz["second_alpha"])
            if kind == "projected":
                return ProjectedModel(source, second)
            if kind == "translated":
                return TranslatedModel(source, second)
            return CombinedModel(source, second, meta.get("source_scale", 1.0),
                                 meta.get("input_scale", 1.0))
    raise ParseError(f"{p}: unknown model kind {meta.get('kind')!r}")
