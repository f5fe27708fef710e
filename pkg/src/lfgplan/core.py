"""Domain types and primitive operations for the two-vehicle intersection game.

Two vehicles approach a perpendicular 2-way 1-lane intersection: the robot
(AV) travels eastbound along the x axis, the human (HV) northbound along the
y axis. Each vehicle is described by its longitudinal position ``s`` on its
own travel axis (negative = before the merging point at the origin) and its
speed ``v``. Everything downstream (trajectory generation, game policies,
branch MPC, the simulation harness) is built on the kinematic step, the safe
set and the step reward defined here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from .actions import ActionTrajectory

DEFAULT_V_MAX = 10.0  # m/s, speed limit used when no generator params are in scope


class Axis(Enum):
    """Travel axis of a vehicle. The off-axis coordinate is identically 0."""

    X = "x"
    Y = "y"


class Agent(Enum):
    HUMAN = "H"
    ROBOT = "R"

    @property
    def other(self) -> "Agent":
        return Agent.ROBOT if self is Agent.HUMAN else Agent.HUMAN


@dataclass(frozen=True)
class VehicleState:
    """Longitudinal state of one vehicle on its travel axis."""

    axis: Axis
    s: float
    v: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.s):
            raise ValueError(f"position must be finite, got {self.s}")
        if not math.isfinite(self.v) or self.v < 0.0:
            raise ValueError(f"speed must be finite and nonnegative, got {self.v}")

    def position(self) -> tuple[float, float]:
        """2-D position; the merging point is at (0, 0)."""
        if self.axis is Axis.X:
            return (self.s, 0.0)
        return (0.0, self.s)


@dataclass(frozen=True)
class GameState:
    """Joint state of the two-player game at discrete time index ``t``."""

    human: VehicleState
    robot: VehicleState
    t: int = 0
    dt: float = 0.5

    def __post_init__(self) -> None:
        if self.human.axis is self.robot.axis:
            raise ValueError("human and robot must travel on different axes")
        if self.t < 0:
            raise ValueError(f"time index must be nonnegative, got {self.t}")
        if self.dt <= 0.0:
            raise ValueError(f"sampling period must be positive, got {self.dt}")

    def vehicle(self, agent: Agent) -> VehicleState:
        return self.human if agent is Agent.HUMAN else self.robot

    def replace_vehicle(self, agent: Agent, vehicle: VehicleState) -> "GameState":
        if agent is Agent.HUMAN:
            return GameState(vehicle, self.robot, self.t, self.dt)
        return GameState(self.human, vehicle, self.t, self.dt)


@dataclass(frozen=True)
class RewardParams:
    """Weights of the liveliness / effort / collision reward."""

    w1: float = 100.0  # collision penalty weight
    w2: float = 0.1  # effort weight, multiplies |acceleration|
    discount: float = 1.0

    def __post_init__(self) -> None:
        if self.w1 <= 0.0:
            raise ValueError("w1 must be positive")
        if self.w2 < 0.0:
            raise ValueError("w2 must be nonnegative")
        if not 0.0 < self.discount <= 1.0:
            raise ValueError("discount must be in (0, 1]")


@dataclass(frozen=True)
class SafetyParams:
    """Safe-set geometry and chance-constraint risk level."""

    veh_length: float = 5.0
    clearance_factor: float = 1.5
    epsilon: float = 0.02

    def __post_init__(self) -> None:
        if self.veh_length <= 0.0:
            raise ValueError("veh_length must be positive")
        if self.clearance_factor < 1.0:
            raise ValueError("clearance_factor must be >= 1")
        if not 0.0 <= self.epsilon < 1.0:
            raise ValueError("epsilon must be in [0, 1)")

    @property
    def min_separation(self) -> float:
        return self.clearance_factor * self.veh_length


def step_kinematics(
    state: VehicleState, accel: float, dt: float, v_max: float = DEFAULT_V_MAX
) -> VehicleState:
    """Advance one vehicle by one sampling period under constant acceleration.

    Speed is clamped to [0, v_max] after the update; the position increment
    uses the mean of the pre- and post-clamp speeds, so a braking vehicle
    stops instead of reversing and a vehicle at the speed limit does not gain
    distance it cannot drive. Without clamping this is exactly
    s + v*dt + accel*dt^2/2.
    """
    v_next = min(max(state.v + accel * dt, 0.0), v_max)
    s_next = state.s + 0.5 * (state.v + v_next) * dt
    return VehicleState(state.axis, s_next, v_next)


def separation(state: GameState) -> float:
    """Euclidean distance between the two vehicles' 2-D positions."""
    # Perpendicular axes with the merging point at the origin.
    return math.hypot(state.robot.s, state.human.s)


def in_safe_set(state: GameState, params: SafetyParams) -> bool:
    """True iff the joint state keeps at least 1.5 vehicle lengths of separation."""
    return separation(state) >= params.min_separation


def step_reward(
    state_next: GameState,
    agent: Agent,
    accel: float,
    initial_pos: float,
    collided: bool,
    params: RewardParams,
) -> float:
    """Single-step reward of ``agent`` evaluated at the post-step joint state.

    Progress since the episode start, minus effort, minus a speed-dependent
    collision penalty (1 + v) * w1 when the safe set is violated.
    """
    vehicle = state_next.vehicle(agent)
    c = (1.0 + vehicle.v) if collided else 0.0
    return (vehicle.s - initial_pos) - params.w1 * c - params.w2 * abs(accel)


def cumulative_reward(
    initial: GameState,
    robot_traj: "ActionTrajectory",
    human_traj: "ActionTrajectory",
    agent: Agent,
    params: RewardParams,
    safety: SafetyParams,
    v_max: float = DEFAULT_V_MAX,
) -> float:
    """Discounted sum of step rewards along the joint rollout of two trajectories.

    Both vehicles are rolled out from ``initial`` with the acceleration
    sequences of the trajectories; the collision indicator of each step is the
    safe-set predicate at the rolled-out joint state.
    """
    robot_accels = robot_traj.accels
    human_accels = human_traj.accels
    if len(robot_accels) != len(human_accels):
        raise ValueError(
            f"trajectory horizons differ: robot {len(robot_accels)} steps, "
            f"human {len(human_accels)} steps"
        )
    initial_pos = initial.vehicle(agent).s
    human = initial.human
    robot = initial.robot
    total = 0.0
    disc = 1.0
    for tau in range(len(robot_accels)):
        human = step_kinematics(human, float(human_accels[tau]), initial.dt, v_max)
        robot = step_kinematics(robot, float(robot_accels[tau]), initial.dt, v_max)
        joint = GameState(human, robot, initial.t + tau + 1, initial.dt)
        collided = not in_safe_set(joint, safety)
        own_accel = float(human_accels[tau] if agent is Agent.HUMAN else robot_accels[tau])
        total += disc * step_reward(joint, agent, own_accel, initial_pos, collided, params)
        disc *= params.discount
    return total
