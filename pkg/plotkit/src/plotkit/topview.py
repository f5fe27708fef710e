"""Top-view lapse frames: both vehicles on perpendicular roads."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg", force=False)
import matplotlib.pyplot as plt
from matplotlib.patches import Rectangle

from .schema import (
    AV_COLOR,
    CROSSING_LINE_M,
    HV_COLOR,
    VEHICLE_LENGTH_M,
    VEHICLE_WIDTH_M,
    load_run_log,
)

ROAD_HALF_WIDTH_M = 2.0
VIEW_HALF_EXTENT_M = 26.0


def _draw_frame(ax, hv_s: float, av_s: float, time_s: float) -> None:
    lim = VIEW_HALF_EXTENT_M
    ax.add_patch(
        Rectangle((-lim, -ROAD_HALF_WIDTH_M), 2 * lim, 2 * ROAD_HALF_WIDTH_M,
                  facecolor="lightgray", edgecolor="none", zorder=0)
    )
    ax.add_patch(
        Rectangle((-ROAD_HALF_WIDTH_M, -lim), 2 * ROAD_HALF_WIDTH_M, 2 * lim,
                  facecolor="lightgray", edgecolor="none", zorder=0)
    )
    # Crossing lines at the intersection entrances, 6.5 m before the merge.
    ax.plot([CROSSING_LINE_M, CROSSING_LINE_M],
            [-ROAD_HALF_WIDTH_M, ROAD_HALF_WIDTH_M],
            color="white", linewidth=2, zorder=1)
    ax.plot([-ROAD_HALF_WIDTH_M, ROAD_HALF_WIDTH_M],
            [CROSSING_LINE_M, CROSSING_LINE_M],
            color="white", linewidth=2, zorder=1)
    ax.plot(0.0, 0.0, marker="+", color="black", markersize=6, zorder=1)
    # AV eastbound on x, HV northbound on y; positions are vehicle centers.
    ax.add_patch(
        Rectangle((av_s - VEHICLE_LENGTH_M / 2, -VEHICLE_WIDTH_M / 2),
                  VEHICLE_LENGTH_M, VEHICLE_WIDTH_M,
                  facecolor=AV_COLOR, edgecolor="black", zorder=2)
    )
    ax.add_patch(
        Rectangle((-VEHICLE_WIDTH_M / 2, hv_s - VEHICLE_LENGTH_M / 2),
                  VEHICLE_WIDTH_M, VEHICLE_LENGTH_M,
                  facecolor=HV_COLOR, edgecolor="black", zorder=2)
    )
    ax.set_xlim(-lim, lim)
    ax.set_ylim(-lim, lim)
    ax.set_aspect("equal")
    ax.set_title(f"t = {time_s:.1f} s", fontsize="small")
    ax.set_xticks([])
    ax.set_yticks([])


def build_topview_figure(csv_path: str | Path, times: Sequence[float]):
    """Build one frame per requested time; times must lie inside the log."""
    if not times:
        raise ValueError("need at least one frame time")
    log = load_run_log(csv_path)
    positions = [log.positions_at(t) for t in times]
    fig, axes = plt.subplots(1, len(times), figsize=(3.0 * len(times), 3.2),
                             squeeze=False)
    for ax, t, (hv_s, av_s) in zip(axes[0], times, positions):
        _draw_frame(ax, hv_s, av_s, t)
    fig.tight_layout()
    return fig


def render_topview(csv_path: str | Path, times: Sequence[float],
                   out_path: str | Path) -> Path:
    """Render the lapse frames to ``out_path``; nothing is written on error."""
    fig = build_topview_figure(csv_path, times)
    out = Path(out_path)
    try:
        fig.savefig(out)
    finally:
        plt.close(fig)
    return out
