"""Run-log CSV contract of the intersection simulator.

plotkit consumes the simulator only through this file format; the column
order below is the interface and must match byte for byte.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

RUN_LOG_COLUMNS = [
    "t_s",
    "hv_s_m",
    "hv_v_mps",
    "hv_a_mps2",
    "hv_role",
    "hv_belief_av_leader",
    "av_s_m",
    "av_v_mps",
    "av_a_mps2",
    "av_belief_hv_leader",
    "av_feasible",
]

CROSSING_LINE_M = -6.5  # intersection entrance, distance from the merging point
VEHICLE_LENGTH_M = 5.0
VEHICLE_WIDTH_M = 2.0

HV_COLOR = "tab:blue"
AV_COLOR = "tab:red"


class SchemaError(ValueError):
    """Raised when a run log does not match the expected schema."""


class RunLog:
    """Columns of one run log as numpy arrays (roles and flags as objects)."""

    def __init__(self, path: str | Path, rows: list[dict]) -> None:
        self.path = Path(path)
        if not rows:
            raise SchemaError(f"{path}: run log has no data rows")
        self.t = np.array([float(r["t_s"]) for r in rows])
        self.hv_s = np.array([float(r["hv_s_m"]) for r in rows])
        self.hv_v = np.array([float(r["hv_v_mps"]) for r in rows])
        self.hv_a = np.array([float(r["hv_a_mps2"]) for r in rows])
        self.hv_role = [r["hv_role"] for r in rows]
        self.hv_belief = np.array([float(r["hv_belief_av_leader"]) for r in rows])
        self.av_s = np.array([float(r["av_s_m"]) for r in rows])
        self.av_v = np.array([float(r["av_v_mps"]) for r in rows])
        self.av_a = np.array([float(r["av_a_mps2"]) for r in rows])
        self.av_belief = np.array([float(r["av_belief_hv_leader"]) for r in rows])
        self.av_feasible = np.array([r["av_feasible"] == "true" for r in rows])

    @property
    def t_min(self) -> float:
        return float(self.t[0])

    @property
    def t_max(self) -> float:
        return float(self.t[-1])

    def positions_at(self, time_s: float) -> tuple[float, float]:
        """Linearly interpolated (hv_s, av_s) at a time inside the log range."""
        if not self.t_min <= time_s <= self.t_max:
            raise ValueError(
                f"time {time_s} s outside the log range "
                f"[{self.t_min}, {self.t_max}] of {self.path}"
            )
        return (
            float(np.interp(time_s, self.t, self.hv_s)),
            float(np.interp(time_s, self.t, self.av_s)),
        )


def load_run_log(path: str | Path) -> RunLog:
    """Parse a run log, validating the exact column schema."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise SchemaError(f"{path}: empty file")
        if header != RUN_LOG_COLUMNS:
            for got, want in zip(header, RUN_LOG_COLUMNS):
                if got != want:
                    raise SchemaError(f"{path}: expected column {want!r}, found {got!r}")
            raise SchemaError(
                f"{path}: expected {len(RUN_LOG_COLUMNS)} columns, found {len(header)}"
            )
        rows = [dict(zip(RUN_LOG_COLUMNS, rec)) for rec in reader]
    return RunLog(path, rows)
