"""Trajectory generation: speed ranges, tracking rollouts, stop-at-line."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lfgplan.actions import (
    POSITION_TOLERANCE,
    ActionGenParams,
    TrajectoryKind,
    generate_action_set,
    reachable_speed_range,
)
from lfgplan.core import Axis, VehicleState, step_kinematics

GEN = ActionGenParams(n_mesh=10, a_min=-4.0, a_max=2.0, v_max=10.0, ovm_gain=1.0,
                      crossing_line=-6.5)


def veh(s, v):
    return VehicleState(Axis.X, s, v)


class TestReachableSpeedRange:
    def test_both_caps_bind(self):
        lo, hi = reachable_speed_range(veh(0, 4.0), GEN, 5.0)
        assert (lo, hi) == (0.0, 10.0)

    def test_stopped_vehicle(self):
        lo, _ = reachable_speed_range(veh(0, 0.0), GEN, 5.0)
        assert lo == 0.0

    def test_at_speed_limit(self):
        _, hi = reachable_speed_range(veh(0, 10.0), GEN, 5.0)
        assert hi == 10.0

    def test_unclamped_interior(self):
        lo, hi = reachable_speed_range(veh(0, 5.0), GEN, 1.0)
        assert lo == pytest.approx(1.0)
        assert hi == pytest.approx(7.0)

    def test_nonpositive_horizon_rejected(self):
        with pytest.raises(ValueError):
            reachable_speed_range(veh(0, 5.0), GEN, 0.0)


class TestGenerateActionSet:
    def test_set_size_is_n_mesh_plus_one(self):
        assert len(generate_action_set(veh(-20, 4.0), GEN, 10, 0.5)) == 11

    def test_keep_speed_is_zero_accel_and_last(self):
        actions = generate_action_set(veh(-20, 4.0), GEN, 10, 0.5)
        keep = actions[10]
        assert keep.tag.kind is TrajectoryKind.KEEP_SPEED
        assert np.all(keep.accels == 0.0)
        assert np.all(keep.speeds == 4.0)

    def test_targets_ascending_and_tracking_fixed_point(self):
        gen = ActionGenParams(n_mesh=6, a_min=-4.0, a_max=2.0, v_max=10.0,
                              ovm_gain=1.0, crossing_line=-6.5)
        actions = generate_action_set(veh(-200, 4.0), gen, 10, 0.5)
        targets = [t.tag.target_speed for t in actions[:6]]
        assert targets == sorted(targets)
        # A target equal to the current speed reproduces keep-speed exactly.
        idx = targets.index(4.0)
        assert np.array_equal(actions[idx].accels, actions[6].accels)

    def test_rollout_consistency_invariant(self):
        actions = generate_action_set(veh(-20, 4.0), GEN, 10, 0.5)
        for traj in actions:
            state = traj.state_at(0)
            for k in range(len(traj)):
                state = step_kinematics(state, float(traj.accels[k]), 0.5, GEN.v_max)
                assert state.s == pytest.approx(traj.positions[k + 1], abs=1e-12)
                assert state.v == pytest.approx(traj.speeds[k + 1], abs=1e-12)

    def test_bounds_invariants(self):
        for v0 in (0.0, 2.0, 4.7, 10.0):
            actions = generate_action_set(veh(-15, v0), GEN, 10, 0.5)
            assert len(actions) == 11
            assert np.all(actions.accels >= GEN.a_min - 1e-12)
            assert np.all(actions.accels <= GEN.a_max + 1e-12)
            assert np.all(actions.speeds >= 0.0)
            assert np.all(actions.speeds <= GEN.v_max + 1e-12)

    def test_determinism(self):
        a = generate_action_set(veh(-20, 4.0), GEN, 10, 0.5)
        b = generate_action_set(veh(-20, 4.0), GEN, 10, 0.5)
        assert np.array_equal(a.accels, b.accels)
        assert np.array_equal(a.positions, b.positions)
        assert a.tags == b.tags

    def test_degenerate_range_keeps_size(self):
        # Cannot accelerate or brake out of the window within one tiny step.
        gen = ActionGenParams(n_mesh=4, a_min=-0.001, a_max=0.001, v_max=4.0,
                              ovm_gain=1.0, crossing_line=-6.5)
        actions = generate_action_set(veh(-20, 4.0), gen, 1, 0.001)
        assert len(actions) == 5


class TestStopAtLine:
    def test_exact_stop_example(self):
        # d = 8 m at 4 m/s: constant -1 m/s^2 for 4 s (8 steps) lands exactly
        # on the line at rest (kinematics oracle v^2 = 2 |a| d).
        actions = generate_action_set(veh(-14.5, 4.0), GEN, 10, 0.5)
        stop = actions[0]
        assert stop.tag.kind is TrajectoryKind.STOP_AT_LINE
        assert np.allclose(stop.accels[:8], -1.0)
        assert np.all(stop.accels[8:] == 0.0)
        assert stop.positions[-1] == pytest.approx(-6.5, abs=1e-9)
        assert stop.speeds[8] == pytest.approx(0.0, abs=1e-12)

    def test_non_integral_stop_time_still_lands_on_line(self):
        # d = 8.3 m at 4 m/s: stop time 4.15 s is not a whole number of steps;
        # the redistributed profile must still stop exactly on the line.
        actions = generate_action_set(veh(-14.8, 4.0), GEN, 10, 0.5)
        stop = actions[0]
        assert stop.tag.kind is TrajectoryKind.STOP_AT_LINE
        assert stop.positions[-1] == pytest.approx(-6.5, abs=1e-9)
        assert stop.speeds[-1] == 0.0
        assert np.all(stop.accels <= 1e-12)
        assert np.all(stop.accels >= GEN.a_min - 1e-12)

    def test_no_substitution_when_stop_needs_too_long(self):
        # d = 27 m at 4 m/s needs 13.5 s to stop at the line, beyond the
        # 5 s horizon: the plain lowest-target trajectory is kept.
        actions = generate_action_set(veh(-33.5, 4.0), GEN, 10, 0.5)
        assert actions[0].tag.kind is TrajectoryKind.TARGET_SPEED

    def test_no_substitution_past_the_line(self):
        actions = generate_action_set(veh(-5.0, 4.0), GEN, 10, 0.5)
        assert actions[0].tag.kind is TrajectoryKind.TARGET_SPEED

    def test_no_substitution_when_braking_infeasible(self):
        # Required deceleration exceeds the bound.
        actions = generate_action_set(veh(-7.0, 8.0), GEN, 10, 0.5)
        assert actions[0].tag.kind is TrajectoryKind.TARGET_SPEED

    @settings(max_examples=150, deadline=None)
    @given(s=st.floats(-40.0, -6.6), v=st.floats(0.1, 10.0))
    def test_stop_trajectory_contract(self, s, v):
        actions = generate_action_set(veh(s, v), GEN, 10, 0.5)
        traj = actions[0]
        if traj.tag.kind is not TrajectoryKind.STOP_AT_LINE:
            return
        # Never past the line (within tolerance), at rest by horizon end,
        # and at rest for good once stopped.
        assert np.all(traj.positions <= GEN.crossing_line + POSITION_TOLERANCE)
        assert traj.positions[-1] == pytest.approx(GEN.crossing_line, abs=1e-6)
        assert traj.speeds[-1] == pytest.approx(0.0, abs=1e-9)
        stopped = np.flatnonzero(traj.speeds <= 1e-12)
        assert stopped.size > 0
        assert np.all(traj.speeds[stopped[0]:] <= 1e-12)
