from __future__ import annotations

import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

from app.schemas.harness import SweepConfig, SweepResult  # noqa: E402
from app.services.artifacts import sweep_frame  # noqa: E402

logger = logging.getLogger(__name__)

AXIS_LABELS = {
    "p": "dimension p",
    "s": "relevant attributes s",
    "gamma": "gamma",
    "eta": "noise rate eta",
    "n": "sample size n",
    "beta": "beta",
}

plt.rcParams["svg.hashsalt"] = "max-margin-lab"


def plot_frame(frame: pd.DataFrame, cfg: SweepConfig, path: Path, *, train_curve: bool = False) -> None:
    """Mean test error against the swept axis, one curve per series.

    Each noise level is drawn as a dotted olive line. With `train_curve` the
    mean train error is added dashed in the series color.
    """
    if frame.empty:
        raise ValueError("nothing to plot")
    points = {point.grid_id: point for point in cfg.grid_points()}
    unknown = set(frame["grid_id"]) - set(points)
    if unknown:
        raise ValueError(f"grid ids {sorted(unknown)} are not part of sweep {cfg.name}")

    frame = frame.assign(beta=frame["grid_id"].map(lambda grid_id: points[grid_id].beta))
    x_axis = cfg.x_axis()
    series = cfg.series_axis()
    keys = [series, x_axis] if series else [x_axis]
    means = frame.groupby(keys)[["test_err", "train_err"]].mean().reset_index()

    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    groups = means.groupby(series) if series else [(None, means)]
    for label, group in groups:
        group = group.sort_values(x_axis)
        (line,) = ax.plot(
            group[x_axis],
            group["test_err"],
            marker="o",
            markersize=3,
            label="test error" if label is None else f"{series} = {label:g}",
        )
        if train_curve:
            ax.plot(group[x_axis], group["train_err"], linestyle="--", color=line.get_color(), alpha=0.6)
    for eta in sorted(frame["eta"].unique()):
        ax.axhline(eta, linestyle=":", color="olive", linewidth=1.2)

    ax.set_xlabel(AXIS_LABELS[x_axis])
    ax.set_ylabel("error")
    ax.set_ylim(bottom=0.0)
    ax.set_title(cfg.name)
    ax.legend(loc="best", fontsize="small")
    fig.tight_layout()
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    logger.info("plot written path=%s series=%s x_axis=%s", path, series, x_axis)


def emit_plot(result: SweepResult, path: Path, *, train_curve: bool = False) -> None:
    if not result.records:
        raise ValueError("sweep result has no records")
    plot_frame(sweep_frame(result), result.config, path, train_curve=train_curve)
