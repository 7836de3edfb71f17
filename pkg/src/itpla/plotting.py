"""Matplotlib charts written next to the CSV outputs."""

from __future__ import annotations

import io as _io
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .io import atomic_write  # noqa: E402
from .solver import RunTrace  # noqa: E402

# no timestamps or version strings in the PNG, so reruns give identical bytes
_PNG_META = {"Software": None}


def _save(fig, path) -> None:
    buf = _io.BytesIO()
    fig.savefig(buf, format="png", dpi=110, metadata=_PNG_META)
    plt.close(fig)
    atomic_write(Path(path), buf.getvalue())


def plot_trace(trace: RunTrace, path, title: str | None = None) -> None:
    """Module count and total overlap against iteration, removals marked."""
    it = [r.iteration for r in trace.records]
    fig, ax = plt.subplots(figsize=(7, 3.6))
    ax.step(it, [r.module_count for r in trace.records], where="post", color="tab:blue")
    ax.set_xlabel("iteration")
    ax.set_ylabel("modules", color="tab:blue")
    ax2 = ax.twinx()
    ax2.plot(it, [r.total_overlap for r in trace.records], color="tab:red", lw=0.8)
    ax2.set_ylabel("total overlap", color="tab:red")
    for r in trace.records:
        if r.event == "remove":
            ax.axvline(r.iteration, color="0.7", lw=0.6, ls="--")
    ax.set_title(title or f"seed {trace.seed}")
    fig.tight_layout()
    _save(fig, path)


def plot_bench(rows: list[dict], path) -> None:
    """Grouped bars of ItPla count, grid count and upper bound per polygon."""
    names = [r["polygon"] for r in rows]
    x = range(len(rows))
    w = 0.27
    fig, ax = plt.subplots(figsize=(max(5, 1.4 * len(rows)), 3.6))
    ax.bar([i - w for i in x], [r["itpla_count"] for r in rows], w, label="itpla")
    ax.bar(list(x), [r["baseline_count"] for r in rows], w, label="grid sweep")
    ax.bar([i + w for i in x], [r["bound"] for r in rows], w, label="upper bound", color="0.75")
    ax.set_xticks(list(x))
    ax.set_xticklabels(names, rotation=20, ha="right")
    ax.set_ylabel("modules")
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    _save(fig, path)


__all__ = ["plot_trace", "plot_bench"]
