"""Matplotlib rendering of evaluation results.

Figures are returned as PNG bytes so callers can write them atomically;
rendering is deterministic for fixed inputs (Agg backend, fixed dpi, no
timestamp metadata).
"""

from __future__ import annotations

import io
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)

from livereid.evaluator import EvalCurve  # noqa: E402

_DPI = 110


def _png_bytes(fig) -> bytes:
    buf = io.BytesIO()
    fig.savefig(buf, format="png", dpi=_DPI, metadata={"Software": None})
    plt.close(fig)
    return buf.getvalue()


def render_curve_figure(curve: EvalCurve, title: str = "") -> bytes:
    """Trade-off curve plus both rates against the threshold."""
    fig, (left, right) = plt.subplots(1, 2, figsize=(10, 4))
    defined = curve.defined_points()
    left.plot([p.fr for p in defined], [p.tvr for p in defined], "o-", ms=3)
    left.set_xlabel("finding rate")
    left.set_ylabel("true validation rate")
    left.set_xlim(-0.02, 1.02)
    left.set_ylim(-0.02, 1.02)
    left.grid(True, alpha=0.3)

    betas = [p.beta for p in curve.points]
    nan = float("nan")
    right.plot(betas, [p.fr if p.fr is not None else nan for p in curve.points],
               label="FR")
    right.plot(betas, [p.tvr if p.tvr is not None else nan for p in curve.points],
               label="TVR")
    right.plot(betas, [p.f1 if p.f1 is not None else nan for p in curve.points],
               label="F1")
    right.set_xlabel("alert threshold")
    right.set_ylim(-0.02, 1.02)
    right.legend()
    right.grid(True, alpha=0.3)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    return _png_bytes(fig)


def render_sweep_figure(rows: Sequence[dict], title: str = "") -> bytes:
    """Metrics and work against the tracklet length cap, log-scaled."""
    fig, (left, right) = plt.subplots(1, 2, figsize=(10, 4))
    ns = [row["n"] for row in rows]
    for key, label in (("fr", "FR"), ("tvr", "TVR"),
                       ("f1_star", "F1*"), ("map", "mAP")):
        values = [row[key] for row in rows]
        if any(v is not None for v in values):
            left.plot(ns, [v if v is not None else float("nan") for v in values],
                      "o-", ms=4, label=label)
    left.set_xscale("log")
    left.set_xticks(ns)
    left.set_xticklabels([str(n) for n in ns])
    left.set_xlabel("tracklet length cap")
    left.legend()
    left.grid(True, alpha=0.3)

    right.plot(ns, [row["similarity_ops"] for row in rows], "o-", ms=4, color="tab:red")
    right.set_xscale("log")
    right.set_xticks(ns)
    right.set_xticklabels([str(n) for n in ns])
    right.set_xlabel("tracklet length cap")
    right.set_ylabel("similarity comparisons")
    right.grid(True, alpha=0.3)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    return _png_bytes(fig)


def render_compare_figure(rows: Sequence[dict], title: str = "") -> bytes:
    """Grouped bars of the headline metrics per gallery mode."""
    fig, ax = plt.subplots(figsize=(7, 4))
    metrics = [("fr", "FR"), ("tvr", "TVR"), ("f1_star", "F1*"), ("map", "mAP")]
    width = 0.8 / max(1, len(rows))
    for i, row in enumerate(rows):
        values = [row[key] if row[key] is not None else 0.0 for key, _ in metrics]
        positions = [j + i * width for j in range(len(metrics))]
        ax.bar(positions, values, width=width, label=row["mode"])
    ax.set_xticks([j + width * (len(rows) - 1) / 2 for j in range(len(metrics))])
    ax.set_xticklabels([label for _, label in metrics])
    ax.set_ylim(0, 1.05)
    ax.legend()
    ax.grid(True, axis="y", alpha=0.3)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    return _png_bytes(fig)
