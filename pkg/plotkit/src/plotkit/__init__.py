"""Offline figures from intersection-game run logs."""

from .profiles import ProfileFigureSpec, build_profile_figure, render_profiles
from .schema import (
    AV_COLOR,
    CROSSING_LINE_M,
    HV_COLOR,
    RUN_LOG_COLUMNS,
    RunLog,
    SchemaError,
    load_run_log,
)
from .topview import build_topview_figure, render_topview

__version__ = "0.1.0"
