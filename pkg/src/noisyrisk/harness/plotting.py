"""Matplotlib figures written as standalone SVG files.

Output is byte-stable: the Agg backend is forced, SVG ids use a fixed hash
salt and the date metadata is dropped.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

plt.rcParams["svg.hashsalt"] = "noisyrisk"

_MARKERS = {False: "o", True: "s"}


def _save(fig, path: Path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def tradeoff_scatter(points, scenario: str, path: str | Path) -> None:
    """BAC (vertical) against risk (horizontal); the desirable region is top-left.

    Each point gets its own ``marker-<k>`` id so the output can be inspected.
    """
    fig, ax = plt.subplots(figsize=(6, 4.5))
    methods = sorted({p.cell.method for p in points})
    colors = {m: plt.cm.tab10(i % 10) for i, m in enumerate(methods)}
    seen = set()
    for k, p in enumerate(points):
        key = (p.cell.method, p.cell.cost_sensitive)
        ax.plot(
            [p.risk],
            [p.bac],
            linestyle="none",
            marker=_MARKERS[p.cell.cost_sensitive],
            markersize=7,
            markerfacecolor="none" if p.collapse else colors[p.cell.method],
            markeredgecolor=colors[p.cell.method],
            label=p.cell.label if key not in seen else None,
            gid=f"marker-{k}",
        )
        seen.add(key)
        ax.annotate(f"{p.cell.noise_rate:g}", (p.risk, p.bac), textcoords="offset points", xytext=(4, 4), fontsize=7)
    ax.set_xlabel(f"Risk {scenario}")
    ax.set_ylabel("balanced accuracy")
    ax.set_title(f"accuracy vs Risk {scenario} (labels: noise rate; hollow: collapsed)", fontsize=9)
    ax.grid(alpha=0.3)
    ax.legend(fontsize=7, loc="lower right")
    fig.tight_layout()
    _save(fig, Path(path))


def noise_impact_figure(report, path: str | Path) -> None:
    """Grouped FN/FP bars per noise rate with each risk scenario on a second axis."""
    rows = report.rows
    fig, ax = plt.subplots(figsize=(6, 4))
    x = np.arange(len(rows))
    ax.bar(x - 0.2, [r.fn for r in rows], width=0.4, label="FN", color="tab:red")
    ax.bar(x + 0.2, [r.fp for r in rows], width=0.4, label="FP", color="tab:blue")
    ax.set_xticks(x, [f"{r.noise_rate:g}" + ("+CS" if r.cost_sensitive else "") for r in rows])
    ax.set_xlabel("noise rate")
    ax.set_ylabel("count (mean over seeds)")
    ax2 = ax.twinx()
    for s, style in zip(report.scenarios, ("k--", "k-", "k:", "k-.")):
        ys = [np.nan if r.risks.get(s) is None else r.risks[s] for r in rows]
        ax2.plot(x, ys, style, marker="o", label=f"Risk {s}")
    ax2.set_ylabel("risk")
    # headroom for the legend and collapse labels
    top = max([max(r.fn, r.fp) for r in rows] + [1.0])
    ax.set_ylim(0, top * 1.45)
    ax2.set_ylim(0, max([v for r in rows for v in r.risks.values() if v is not None] + [1e-9]) * 1.45)
    for i, r in enumerate(rows):
        if r.collapse:
            ax.annotate("collapse", (i, max(r.fn, r.fp)), ha="center", va="bottom", fontsize=7)
    h1, l1 = ax.get_legend_handles_labels()
    h2, l2 = ax2.get_legend_handles_labels()
    ax.legend(h1 + h2, l1 + l2, fontsize=7, loc="upper left")
    ax.set_title(f"noise impact: {report.method}", fontsize=9)
    fig.tight_layout()
    _save(fig, Path(path))
