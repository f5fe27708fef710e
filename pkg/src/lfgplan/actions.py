"""Discrete admissible trajectory sets for the intersection game.

Each agent chooses from n_mesh target-speed trajectories (targets linearly
spaced over the speeds reachable within the horizon) generated by a
first-order speed-tracking law, plus one keep-current-speed trajectory. When
the agent can come to a stop, the lowest-target trajectory is replaced by a
constant-deceleration stop exactly at the crossing line, provided that stop
is realizable within the horizon and the acceleration bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterator, Optional, Sequence

import numpy as np

from .core import Axis, VehicleState

POSITION_TOLERANCE = 0.05  # m, slack allowed past the crossing line for a stop


class TrajectoryKind(Enum):
    TARGET_SPEED = "target_speed"
    KEEP_SPEED = "keep_speed"
    STOP_AT_LINE = "stop_at_line"


@dataclass(frozen=True)
class TrajectoryTag:
    kind: TrajectoryKind
    target_speed: Optional[float] = None


@dataclass(frozen=True)
class ActionGenParams:
    """Parameters of the trajectory generator.

    ``crossing_line`` is where the stop trajectory comes to rest. The default
    places the vehicle center one half length before the entrance line at
    -6.5 m, i.e. nose at the line, which keeps a waiting vehicle outside the
    1.5-vehicle-length safe radius of anything crossing the merge point.
    """

    n_mesh: int = 10
    a_min: float = -4.0
    a_max: float = 2.0
    v_max: float = 8.0
    ovm_gain: float = 1.0  # 1/s, speed-tracking gain
    crossing_line: float = -9.0  # m, stop point of the yield trajectory

    def __post_init__(self) -> None:
        if self.n_mesh < 2:
            raise ValueError("n_mesh must be >= 2")
        if not self.a_min < 0.0 < self.a_max:
            raise ValueError("need a_min < 0 < a_max")
        if self.ovm_gain <= 0.0:
            raise ValueError("ovm_gain must be positive")
        if self.v_max <= 0.0:
            raise ValueError("v_max must be positive")


@dataclass(frozen=True, eq=False)
class ActionTrajectory:
    """A horizon-length acceleration sequence with its induced rollout."""

    axis: Axis
    accels: np.ndarray  # (N,)
    positions: np.ndarray  # (N+1,)
    speeds: np.ndarray  # (N+1,)
    tag: TrajectoryTag

    def __len__(self) -> int:
        return len(self.accels)

    @property
    def states(self) -> tuple[VehicleState, ...]:
        return tuple(
            VehicleState(self.axis, float(s), float(v))
            for s, v in zip(self.positions, self.speeds)
        )

    def state_at(self, k: int) -> VehicleState:
        return VehicleState(self.axis, float(self.positions[k]), float(self.speeds[k]))


class ActionSet(Sequence[ActionTrajectory]):
    """Ordered set of trajectories sharing one start state.

    Backed by stacked arrays so policy code can evaluate whole payoff tables
    without materializing per-trajectory objects.
    """

    def __init__(
        self,
        axis: Axis,
        accels: np.ndarray,
        positions: np.ndarray,
        speeds: np.ndarray,
        tags: tuple[TrajectoryTag, ...],
    ) -> None:
        self.axis = axis
        self.accels = accels  # (n, N)
        self.positions = positions  # (n, N+1)
        self.speeds = speeds  # (n, N+1)
        self.tags = tags

    def __len__(self) -> int:
        return self.accels.shape[0]

    def __getitem__(self, index):  # type: ignore[override]
        if isinstance(index, slice):
            return [self[i] for i in range(*index.indices(len(self)))]
        return ActionTrajectory(
            self.axis,
            self.accels[index],
            self.positions[index],
            self.speeds[index],
            self.tags[index],
        )

    def __iter__(self) -> Iterator[ActionTrajectory]:
        for i in range(len(self)):
            yield self[i]

    @staticmethod
    def from_trajectories(trajectories: Sequence[ActionTrajectory]) -> "ActionSet":
        if not trajectories:
            raise ValueError("cannot build an action set from zero trajectories")
        axis = trajectories[0].axis
        return ActionSet(
            axis,
            np.stack([t.accels for t in trajectories]),
            np.stack([t.positions for t in trajectories]),
            np.stack([t.speeds for t in trajectories]),
            tuple(t.tag for t in trajectories),
        )


def reachable_speed_range(
    state: VehicleState, params: ActionGenParams, horizon_s: float
) -> tuple[float, float]:
    """Min and max speed reachable within the horizon, capped at stop / limit."""
    if horizon_s <= 0.0:
        raise ValueError("horizon must be positive")
    v_hi = min(state.v + params.a_max * horizon_s, params.v_max)
    v_lo = max(state.v + params.a_min * horizon_s, 0.0)
    return v_lo, v_hi


def rollout_accels(
    s0: float, v0: float, accels: np.ndarray, dt: float, v_max: float
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized rollout of acceleration sequences, matching step_kinematics.

    ``accels`` has shape (..., N); returns positions and speeds of shape
    (..., N+1).
    """
    n_steps = accels.shape[-1]
    lead = accels.shape[:-1]
    s = np.empty(lead + (n_steps + 1,))
    v = np.empty(lead + (n_steps + 1,))
    s[..., 0] = s0
    v[..., 0] = v0
    for k in range(n_steps):
        v_next = np.clip(v[..., k] + accels[..., k] * dt, 0.0, v_max)
        s[..., k + 1] = s[..., k] + 0.5 * (v[..., k] + v_next) * dt
        v[..., k + 1] = v_next
    return s, v


def _tracking_rollout(
    s0: float, v0: float, targets: np.ndarray, params: ActionGenParams, n_steps: int, dt: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Fused tracking law a = gain * (v_tgt - v) and kinematic rollout."""
    n = targets.shape[0]
    accels = np.empty((n, n_steps))
    s = np.empty((n, n_steps + 1))
    v = np.empty((n, n_steps + 1))
    s[:, 0] = s0
    v[:, 0] = v0
    for k in range(n_steps):
        a = params.ovm_gain * (targets - v[:, k])
        np.maximum(a, params.a_min, out=a)
        np.minimum(a, params.a_max, out=a)
        v_next = v[:, k] + a * dt
        np.maximum(v_next, 0.0, out=v_next)
        np.minimum(v_next, params.v_max, out=v_next)
        s[:, k + 1] = s[:, k] + (0.5 * dt) * (v[:, k] + v_next)
        v[:, k + 1] = v_next
        accels[:, k] = a
    return accels, s, v


def _stop_at_line_accels(
    s0: float, v0: float, params: ActionGenParams, n_steps: int, dt: float
) -> Optional[np.ndarray]:
    """Accelerations realizing a stop exactly at the crossing line, or None.

    The stop must be reachable with a constant deceleration within the
    acceleration bounds and must complete within the horizon. When the stop
    time is not a whole number of steps, the decelerations are redistributed
    over ceil(T/dt) steps so the discrete rollout still lands exactly on the
    line with zero speed; if the redistribution would exceed the bounds the
    substitution is not possible.
    """
    d = params.crossing_line - s0
    if d <= 0.0 or v0 <= 0.0:
        return None
    a_star = -(v0 * v0) / (2.0 * d)
    if a_star < params.a_min - 1e-12:
        return None
    stop_time = 2.0 * d / v0
    n_exact = stop_time / dt
    n_round = int(round(n_exact))
    accels = np.zeros(n_steps)
    if n_round >= 1 and abs(n_exact - n_round) <= 1e-9:
        n = n_round
        if n > n_steps:
            return None
        accels[:n] = a_star
    else:
        n = int(math.ceil(n_exact))
        if n < 2 or n > n_steps:
            return None
        # Speeds v_k = beta * (n - k) for k >= 1 stop at step n and cover d
        # exactly under the trapezoidal position update.
        beta = (2.0 * d / dt - v0) / (n * (n - 1))
        if beta < 0.0:
            return None
        v1 = beta * (n - 1)
        a_first = (v1 - v0) / dt
        a_ramp = -beta / dt
        if a_first > 1e-12 or a_first < params.a_min - 1e-12 or a_ramp < params.a_min - 1e-12:
            return None
        accels[0] = a_first
        accels[1:n] = a_ramp
    # Replace the last braking step with one-ulp over-braking so the rollout
    # clamp lands the speed at exactly zero despite accumulated rounding.
    v = v0
    for k in range(n - 1):
        v += accels[k] * dt
    accels[n - 1] = np.nextafter(-v / dt, -np.inf)
    return accels


def generate_action_set(
    state: VehicleState, params: ActionGenParams, n_steps: int, dt: float
) -> ActionSet:
    """Build the admissible set of n_mesh + 1 trajectories from ``state``.

    Ordering is deterministic: target-speed trajectories ascending in target,
    then the keep-speed trajectory last. When the minimum reachable speed is
    zero and a stop exactly at the crossing line is realizable, the lowest
    target-speed trajectory is replaced by that stop trajectory.
    """
    if n_steps < 1:
        raise ValueError("need at least one step")
    v_lo, v_hi = reachable_speed_range(state, params, n_steps * dt)
    targets = np.linspace(v_lo, v_hi, params.n_mesh)
    # Tracking the current speed holds it exactly, so the keep-speed
    # trajectory is the tracking law with the current speed as its target.
    all_targets = np.append(targets, state.v)
    accels, positions, speeds = _tracking_rollout(
        state.s, state.v, all_targets, params, n_steps, dt
    )
    tags = [
        TrajectoryTag(TrajectoryKind.TARGET_SPEED, float(t)) for t in targets
    ] + [TrajectoryTag(TrajectoryKind.KEEP_SPEED)]
    if v_lo == 0.0:
        stop_accels = _stop_at_line_accels(state.s, state.v, params, n_steps, dt)
        if stop_accels is not None:
            accels[0] = stop_accels
            positions[0], speeds[0] = rollout_accels(
                state.s, state.v, stop_accels, dt, params.v_max
            )
            tags[0] = TrajectoryTag(TrajectoryKind.STOP_AT_LINE)
    return ActionSet(state.axis, accels, positions, speeds, tuple(tags))
