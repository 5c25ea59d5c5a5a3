"""Figure rendering for CLI reports: log-log charts saved as SVG files.

Conventions: observed points as markers, fitted curves dashed, both axes
logarithmic.  Rendering is opt-in from the CLI; nothing here is required
for the numeric outputs.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .lawcore import ScalingLaw, eval_law, reducible_at

_AXIS_LABELS = {
    "model-size": "non-embedding parameters N",
    "compute": "compute (PF-days)",
    "data": "dataset size (tokens)",
    "position": "context position",
}


def curve_samples(law, x_lo: float, x_hi: float, n: int = 200) -> np.ndarray:
    """(x, loss, reducible) sampled at n log-spaced abscissae."""
    xs = np.logspace(np.log10(x_lo), np.log10(x_hi), n)
    if isinstance(law, ScalingLaw):
        rows = [(x, eval_law(law, x), reducible_at(law, x)) for x in xs]
    else:
        rows = [(x, law.eval(x), law.eval(x)) for x in xs]
    return np.asarray(rows)


def save_fit_figure(path: str, points: np.ndarray, law, variable: str = "compute",
                    reducible_only: bool = False, title: str = "") -> None:
    """Scatter observed points with the fitted curve dashed, log-log axes."""
    points = np.asarray(points, dtype=float)
    fig, ax = plt.subplots(figsize=(5.5, 4))
    x = points[:, 0]
    y = points[:, 1]
    label = "observed"
    if reducible_only and isinstance(law, ScalingLaw):
        y = np.maximum(y - law.irreducible, 1e-300)
        label = "observed - irreducible"
    ax.plot(x, y, "o", ms=4, label=label)
    samples = curve_samples(law, x.min(), x.max())
    col = 2 if reducible_only else 1
    ax.plot(samples[:, 0], samples[:, col], "--", label="fit")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel(_AXIS_LABELS.get(variable, variable))
    ax.set_ylabel("reducible loss (nats)" if reducible_only else "loss (nats)")
    if title:
        ax.set_title(title)
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def save_frontier_figure(path: str, pareto, hull, title: str = "") -> None:
    fig, ax = plt.subplots(figsize=(5.5, 4))
    ax.plot([p.compute for p in pareto], [p.loss for p in pareto], ".", ms=3, label="pareto")
    if hull:
        ax.plot([p.compute for p in hull], [p.loss for p in hull], "o--", ms=5,
                fillstyle="none", label="hull")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel(_AXIS_LABELS["compute"])
    ax.set_ylabel("loss (nats)")
    if title:
        ax.set_title(title)
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
