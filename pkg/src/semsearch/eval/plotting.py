"""Report figures written as PNG files next to the TSV outputs."""

from __future__ import annotations

import io
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .._io import atomic_write_bytes  # noqa: E402
from .latency import LatencyTable  # noqa: E402
from .report import EvalReport  # noqa: E402

# no Software/date chunks, so reruns produce identical bytes
_PNG_META = {"Software": None}


def _save(fig, path: str | Path) -> Path:
    buf = io.BytesIO()
    fig.savefig(buf, format="png", dpi=100, metadata=_PNG_META)
    plt.close(fig)
    atomic_write_bytes(path, buf.getvalue())
    return Path(path)


def plot_series(report: EvalReport, names: Sequence[str], path: str | Path, title: str,
                ylabel: str) -> Path:
    """Each named metric against k on a shared axis."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for name in names:
        pts = report.series(name)
        if pts:
            ks, vals = zip(*pts)
            ax.plot(ks, vals, marker="o", label=name)
    ax.set_xlabel("k")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.set_ylim(0.0, 1.02)
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    return _save(fig, path)


def plot_recall(report: EvalReport, path: str | Path) -> Path:
    names = sorted({n for n, k, _ in report.rows if k is not None and n.startswith("recall")})
    return plot_series(report, names, path, "Retrieval recall", "recall")


def plot_coverage(report: EvalReport, path: str | Path) -> Path:
    names = sorted({n for n, k, _ in report.rows if k is not None and n.startswith("cov")})
    return plot_series(report, names, path, "Predicted-word coverage", "coverage")


def plot_latency(table: LatencyTable, path: str | Path) -> Path:
    """Mean latency per engine against K, with the p50..p95 band shaded."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for engine in table.engines:
        mean = [table.cells[(k, engine)][0] for k in table.ks]
        p50 = [table.cells[(k, engine)][1] for k in table.ks]
        p95 = [table.cells[(k, engine)][2] for k in table.ks]
        ax.plot(table.ks, mean, marker="o", label=engine)
        ax.fill_between(table.ks, p50, p95, alpha=0.2)
    ax.set_xlabel("K (candidates retrieved)")
    ax.set_ylabel("latency per query (µs)")
    ax.set_yscale("log")
    ax.set_title("Retrieval latency")
    ax.grid(alpha=0.3, which="both")
    ax.legend()
    fig.tight_layout()
    return _save(fig, path)
