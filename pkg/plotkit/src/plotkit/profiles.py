"""Four-row time-profile figures: role, belief, speed, acceleration."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg", force=False)
import matplotlib.pyplot as plt

from .schema import AV_COLOR, HV_COLOR, RunLog, load_run_log

ROW_ORDER = ("role", "belief", "speed", "acceleration")


@dataclass(frozen=True)
class ProfileFigureSpec:
    """One or two run logs rendered side by side, four rows per column."""

    csv_paths: Sequence[str | Path]
    column_titles: Sequence[str] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        if not 1 <= len(self.csv_paths) <= 2:
            raise ValueError("profile figures take one or two run logs")
        if self.column_titles and len(self.column_titles) != len(self.csv_paths):
            raise ValueError("need one title per run log")


def _plot_column(axes, log: RunLog, title: str) -> None:
    role_axis, belief_axis, speed_axis, accel_axis = axes
    role_num = [1.0 if r == "leader" else 0.0 for r in log.hv_role]
    role_axis.step(log.t, role_num, where="post", color=HV_COLOR)
    role_axis.set_yticks([0.0, 1.0], labels=["follower", "leader"])
    role_axis.set_ylim(-0.3, 1.3)
    role_axis.set_ylabel("HV role")
    if title:
        role_axis.set_title(title)

    belief_axis.plot(log.t, log.hv_belief, color=HV_COLOR, label="HV on AV")
    belief_axis.plot(log.t, log.av_belief, color=AV_COLOR, label="AV on HV")
    belief_axis.set_ylim(-0.05, 1.05)
    belief_axis.set_ylabel("P(other = leader)")
    belief_axis.legend(loc="best", fontsize="small")

    speed_axis.plot(log.t, log.hv_v, color=HV_COLOR, label="HV")
    speed_axis.plot(log.t, log.av_v, color=AV_COLOR, label="AV")
    speed_axis.set_ylabel("speed [m/s]")
    speed_axis.legend(loc="best", fontsize="small")

    accel_axis.step(log.t, log.hv_a, where="post", color=HV_COLOR)
    accel_axis.step(log.t, log.av_a, where="post", color=AV_COLOR)
    accel_axis.set_ylabel("accel [m/s$^2$]")
    accel_axis.set_xlabel("time [s]")


def build_profile_figure(spec: ProfileFigureSpec):
    """Build the 4 x n_runs profile figure without writing it to disk."""
    logs = [load_run_log(p) for p in spec.csv_paths]
    n_cols = len(logs)
    fig, axes = plt.subplots(
        4, n_cols, figsize=(5.2 * n_cols, 9.0), sharex="col", squeeze=False
    )
    titles = spec.column_titles or [Path(p).stem for p in spec.csv_paths]
    for c, log in enumerate(logs):
        _plot_column(axes[:, c], log, titles[c])
    fig.tight_layout()
    return fig


def render_profiles(spec: ProfileFigureSpec, out_path: str | Path) -> Path:
    """Render the profile figure to ``out_path``; nothing is written on error."""
    fig = build_profile_figure(spec)
    out = Path(out_path)
    try:
        fig.savefig(out)
    finally:
        plt.close(fig)
    return out
