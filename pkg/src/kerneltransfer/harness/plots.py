"""Static figure rendering for report paths.

Figures are written as PNG files next to the delimited outputs. matplotlib
is imported lazily with the Agg backend so headless runs and --no-figures
paths never touch a display.
"""

from __future__ import annotations

import math
from pathlib import Path


def _pyplot():
    import matplotlib
    matplotlib.use("Agg", force=True)
    import matplotlib.pyplot as plt
    return plt


def render_curves(plot_rows: list[dict], path, *, title: str = "",
                  xlabel: str = "target examples", ylabel: str = "metric") -> Path | None:
    """Curves of mean +/- stderr vs n_t, one line per curve_id, with fits."""
    by_curve: dict[str, list[dict]] = {}
    for row in plot_rows:
        by_curve.setdefault(str(row["curve_id"]), []).append(row)
    if not by_curve:
        return None
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for curve_id, rows in sorted(by_curve.items()):
        rows = sorted(rows, key=lambda r: r["n_t"])
        xs = [r["n_t"] for r in rows]
        ys = [r["mean"] for r in rows]
        es = [r.get("stderr") or 0.0 for r in rows]
        line = ax.errorbar(xs, ys, yerr=es, marker="o", capsize=3,
                           label=curve_id)[0]
        fit_a = rows[0].get("fit_a")
        if fit_a not in (None, ""):
            a, b = float(fit_a), float(rows[0]["fit_b"])
            ax.plot(xs, [a * math.log2(x) + b for x in xs], linestyle="--",
                    color=line.get_color(), alpha=0.6)
    ax.set_xscale("log", base=2)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    return _save(fig, path)


def render_theory(records: list[dict], path) -> Path | None:
    """Closed form vs Monte Carlo scatter with +/- band error bars."""
    rows = [r for r in records
            if r.get("kind") in ("theorem1", "theorem2", "baseline")
            and "mc_mean" in r]
    if not rows:
        return None
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 6))
    colors = {"theorem1": "tab:red", "theorem2": "tab:blue", "baseline": "tab:gray"}
    for kind in colors:
        pts = [r for r in rows if r["kind"] == kind]
        if not pts:
            continue
        xs = [r["closed_form"] for r in pts]
        ys = [r["mc_mean"] for r in pts]
        es = [(r.get("band", 4.0)) * r["mc_stderr"] for r in pts]
        ax.errorbar(xs, ys, yerr=es, fmt="o", ms=3, color=colors[kind],
                    alpha=0.6, label=kind, lw=0.8)
    lims = ax.get_xlim()
    lo = min(lims[0], ax.get_ylim()[0])
    hi = max(lims[1], ax.get_ylim()[1])
    ax.plot([lo, hi], [lo, hi], "k:", lw=1)
    ax.set_xlabel("closed form")
    ax.set_ylabel("Monte Carlo mean")
    ax.set_title("closed-form risk vs Monte Carlo (bars = acceptance band)")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    return _save(fig, path)


def render_scaling(points: list[tuple], fit, path, *, extra: list[tuple] = ()) -> Path | None:
    """A fitted logarithmic curve over its points; `extra` marks extrapolations."""
    if not points:
        return None
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6.5, 4.2))
    xs = [p[0] for p in points]
    ys = [p[1] for p in points]
    ax.plot(xs, ys, "o", label="points")
    grid = [min(xs) * (max(max(xs), max([e[0] for e in extra], default=1)) / min(xs)) ** (i / 99)
            for i in range(100)]
    ax.plot(grid, [fit.a * math.log2(x) + fit.b for x in grid], "--",
            label=f"fit a={fit.a:.4g} b={fit.b:.4g} r2={fit.r_squared:.4g}")
    if extra:
        ax.plot([e[0] for e in extra], [e[1] for e in extra], "s",
                label="extrapolated")
    ax.set_xscale("log", base=2)
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    return _save(fig, path)


def _save(fig, path) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(p, dpi=130)
    import matplotlib.pyplot as plt
    plt.close(fig)
    return p
