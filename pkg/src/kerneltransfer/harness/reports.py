"""Experiment reports: JSON-lines records, plot CSV, determinism hashing.

Records are plain dicts with a ``kind`` field. Wall-time fields are the only
nondeterministic content; they are stripped before hashing and before
byte-comparison in the determinism checks.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

TIMING_KEYS = ("wall_time_s",)

PLOT_COLUMNS = ("curve_id", "n_t", "mean", "stderr", "fit_a", "fit_b", "fit_r2")


def strip_timing(record: dict) -> dict:
    return {k: v for k, v in record.items() if k not in TIMING_KEYS}


def record_line(record: dict) -> str:
    return json.dumps(record, sort_keys=True)


def determinism_hash(records: list[dict]) -> str:
    h = hashlib.sha256()
    for rec in records:
        h.update(record_line(strip_timing(rec)).encode())
        h.update(b"\n")
    return h.hexdigest()


@dataclass
class ExperimentReport:
    """Append-only run records plus a summary computed at the end."""

    records: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def append(self, record: dict) -> None:
        self.records.append(record)

    def passed(self) -> bool:
        return all(rec.get("pass", True) for rec in self.records)

    def failures(self) -> list:
        return [rec for rec in self.records if not rec.get("pass", True)]

    def finalize(self) -> None:
        kinds = {}
        for rec in self.records:
            kind = rec.get("kind", "record")
            stats = kinds.setdefault(kind, {"cells": 0, "failed": 0})
            stats["cells"] += 1
            if not rec.get("pass", True):
                stats["failed"] += 1
        self.summary = {
            "kind": "summary",
            "cells": len(self.records),
            "failed": sum(k["failed"] for k in kinds.values()),
            "by_kind": kinds,
            "determinism_hash": determinism_hash(self.records),
        }

    def write_jsonl(self, path) -> Path:
        if not self.summary:
            self.finalize()
        p = Path(path)
        p.parent.mkdir(parents=True, exist_ok=True)
        with open(p, "w") as fh:
            for rec in self.records:
                fh.write(record_line(rec) + "\n")
            fh.write(record_line(self.summary) + "\n")
        return p


def write_plot_csv(path, rows: list[dict]) -> Path:
    """Plot-ready CSV with one row per (curve_id, n_t)."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with open(p, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(PLOT_COLUMNS)
        for row in rows:
            writer.writerow([row.get(col, "") for col in PLOT_COLUMNS])
    return p


def load_jsonl(path) -> list[dict]:
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(json.loads(line))
    return out
