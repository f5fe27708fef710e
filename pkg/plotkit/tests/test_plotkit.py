"""Schema parsing, profile grids, top-view frames and the CLI."""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import pytest

from plotkit.cli import main
from plotkit.profiles import ProfileFigureSpec, build_profile_figure, render_profiles
from plotkit.schema import (
    AV_COLOR,
    CROSSING_LINE_M,
    HV_COLOR,
    RUN_LOG_COLUMNS,
    SchemaError,
    load_run_log,
)
from plotkit.topview import build_topview_figure, render_topview

DATA = Path(__file__).parent / "data"
LFG_CSV = DATA / "sample_lfg.csv"
MPC_CSV = DATA / "sample_mpc.csv"


class TestSchema:
    def test_load_golden_logs(self):
        log = load_run_log(MPC_CSV)
        assert log.t[0] == 0.0
        assert log.t.shape == log.hv_s.shape == log.av_s.shape
        assert set(log.hv_role) <= {"leader", "follower"}
        assert log.av_feasible.dtype == bool

    def test_wrong_column_named_in_error(self, tmp_path):
        bad = tmp_path / "bad.csv"
        cols = RUN_LOG_COLUMNS.copy()
        cols[3] = "hv_accel"
        bad.write_text(",".join(cols) + "\n")
        with pytest.raises(SchemaError, match="hv_a_mps2"):
            load_run_log(bad)

    def test_empty_csv_rejected(self, tmp_path):
        empty = tmp_path / "empty.csv"
        empty.write_text(",".join(RUN_LOG_COLUMNS) + "\n")
        with pytest.raises(SchemaError, match="no data rows"):
            load_run_log(empty)

    def test_interpolated_positions_and_range_check(self):
        log = load_run_log(LFG_CSV)
        hv0, av0 = log.positions_at(0.0)
        assert hv0 == pytest.approx(log.hv_s[0])
        assert av0 == pytest.approx(log.av_s[0])
        mid_hv, _ = log.positions_at(0.25)
        assert min(log.hv_s[0], log.hv_s[1]) <= mid_hv <= max(log.hv_s[0], log.hv_s[1])
        with pytest.raises(ValueError, match="outside the log range"):
            log.positions_at(log.t_max + 1.0)


class TestProfiles:
    def test_single_run_grid_is_4x1(self):
        fig = build_profile_figure(ProfileFigureSpec([LFG_CSV]))
        assert len(fig.axes) == 4

    def test_two_run_grid_is_4x2_with_color_convention(self):
        fig = build_profile_figure(ProfileFigureSpec([LFG_CSV, MPC_CSV]))
        assert len(fig.axes) == 8
        speed_axis = fig.axes[2 * 2]  # row 2 (speed), column 0
        colors = [line.get_color() for line in speed_axis.get_lines()]
        assert colors == [HV_COLOR, AV_COLOR]

    def test_row_order_labels(self):
        fig = build_profile_figure(ProfileFigureSpec([MPC_CSV]))
        labels = [ax.get_ylabel() for ax in fig.axes]
        assert labels[0] == "HV role"
        assert "leader" in [t.get_text() for t in fig.axes[0].get_yticklabels()]
        assert "speed" in labels[2]
        assert "accel" in labels[3]

    def test_render_writes_file(self, tmp_path):
        out = render_profiles(ProfileFigureSpec([LFG_CSV, MPC_CSV]), tmp_path / "fig.pdf")
        assert out.exists() and out.stat().st_size > 0

    def test_empty_csv_no_file_written(self, tmp_path):
        empty = tmp_path / "empty.csv"
        empty.write_text(",".join(RUN_LOG_COLUMNS) + "\n")
        out = tmp_path / "fig.pdf"
        with pytest.raises(SchemaError):
            render_profiles(ProfileFigureSpec([empty]), out)
        assert not out.exists()

    def test_too_many_runs_rejected(self):
        with pytest.raises(ValueError):
            ProfileFigureSpec([LFG_CSV, MPC_CSV, LFG_CSV])

    def test_rendering_is_deterministic(self, tmp_path):
        a = render_profiles(ProfileFigureSpec([LFG_CSV]), tmp_path / "a.png")
        b = render_profiles(ProfileFigureSpec([LFG_CSV]), tmp_path / "b.png")
        assert a.read_bytes() == b.read_bytes()


class TestTopview:
    def test_frame_count_matches_times(self):
        fig = build_topview_figure(MPC_CSV, [0.0, 2.0, 4.0])
        assert len(fig.axes) == 3

    def test_initial_frame_positions(self):
        log = load_run_log(MPC_CSV)
        fig = build_topview_figure(MPC_CSV, [0.0])
        ax = fig.axes[0]
        # Vehicle rectangles are 5 m x 2 m; the AV is the one lying along x.
        av_rect = next(
            p for p in ax.patches if p.get_width() == 5.0 and p.get_height() == 2.0
        )
        hv_rect = next(
            p for p in ax.patches if p.get_width() == 2.0 and p.get_height() == 5.0
        )
        assert av_rect.get_x() + 2.5 == pytest.approx(log.av_s[0])
        assert hv_rect.get_y() + 2.5 == pytest.approx(log.hv_s[0])

    def test_crossing_line_at_minus_6_5(self):
        fig = build_topview_figure(LFG_CSV, [0.0, 1.0])
        for ax in fig.axes:
            xdata = [tuple(line.get_xdata()) for line in ax.get_lines()]
            assert (CROSSING_LINE_M, CROSSING_LINE_M) in xdata
        assert CROSSING_LINE_M == -6.5

    def test_out_of_range_time_rejected(self):
        with pytest.raises(ValueError, match="outside the log range"):
            build_topview_figure(MPC_CSV, [0.0, 999.0])

    def test_render_writes_file(self, tmp_path):
        out = render_topview(MPC_CSV, [0.0, 1.5, 3.0, 4.5], tmp_path / "top.pdf")
        assert out.exists() and out.stat().st_size > 0


class TestCli:
    def test_profiles_command(self, tmp_path, capsys):
        out = tmp_path / "fig.pdf"
        code = main(["profiles", str(LFG_CSV), str(MPC_CSV), "--out", str(out)])
        assert code == 0
        assert out.exists()
        assert str(out) in capsys.readouterr().out

    def test_topview_command(self, tmp_path):
        out = tmp_path / "top.png"
        code = main(["topview", str(MPC_CSV), "--times", "0,2,4", "--out", str(out)])
        assert code == 0
        assert out.exists()

    def test_bad_time_exits_nonzero(self, tmp_path, capsys):
        code = main(["topview", str(MPC_CSV), "--times", "0,999",
                     "--out", str(tmp_path / "x.png")])
        assert code == 1
        assert "error" in capsys.readouterr().err
