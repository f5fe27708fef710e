"""Leader and follower decision strategies over discrete trajectory sets.

The follower maximizes its worst-case cumulative reward over the leader's
admissible set (max-min); the leader assumes the other player is such a
follower, restricts it to its optimal set, and best-responds against the
worst member of that set. Payoffs are materialized as full |U_l| x |U_f|
tables (at most 11 x 11 here), so every policy is an exact enumeration.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Optional

import numpy as np

from .actions import ActionGenParams, ActionSet, ActionTrajectory, generate_action_set
from .core import Agent, GameState, RewardParams, SafetyParams


@lru_cache(maxsize=64)
def _discount_powers(discount: float, n: int) -> np.ndarray:
    powers = discount ** np.arange(n)
    powers.setflags(write=False)
    return powers

Q_TOLERANCE = 1e-9  # relative tolerance for optimal-set membership


class Role(Enum):
    LEADER = "leader"
    FOLLOWER = "follower"

    @property
    def other(self) -> "Role":
        return Role.FOLLOWER if self is Role.LEADER else Role.LEADER


class EmptyActionSetError(ValueError):
    pass


def _require_nonempty(*sets) -> None:
    for s in sets:
        if len(s) == 0:
            raise EmptyActionSetError("action sets must be nonempty")


# ---------------------------------------------------------------------------
# Table-level policies. Convention: rows index leader actions, columns index
# follower actions; L and F are the leader's and follower's payoff tables.
# Ties are broken by the lowest index, so results are deterministic.
# ---------------------------------------------------------------------------


def follower_values(follower_payoff: np.ndarray) -> np.ndarray:
    """Worst-case value of each follower action over all leader actions."""
    _require_nonempty(follower_payoff, follower_payoff.T)
    return follower_payoff.min(axis=0)


def follower_decision_index(follower_payoff: np.ndarray) -> int:
    return int(np.argmax(follower_values(follower_payoff)))


def follower_optimal_set_indices(
    follower_payoff: np.ndarray, tol: float = Q_TOLERANCE
) -> np.ndarray:
    """Indices of all max-min maximizers within a relative tolerance."""
    values = follower_values(follower_payoff)
    best = values.max()
    return np.flatnonzero(values >= best - tol * max(1.0, abs(best)))


def leader_decision_index(
    leader_payoff: np.ndarray, follower_payoff: np.ndarray, tol: float = Q_TOLERANCE
) -> int:
    """Best response against the worst member of the follower's optimal set."""
    _require_nonempty(leader_payoff, leader_payoff.T)
    optimal = follower_optimal_set_indices(follower_payoff, tol)
    q_leader = leader_payoff[:, optimal].min(axis=1)
    return int(np.argmax(q_leader))


# ---------------------------------------------------------------------------
# Payoff tables over concrete trajectory sets.
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class GamePayoffs:
    """Cumulative-reward tables of one game bound to a joint initial state."""

    leader_payoff: np.ndarray  # (n_leader, n_follower)
    follower_payoff: np.ndarray
    leader_agent: Agent


def _pair_payoffs(
    x: GameState,
    ego_set: ActionSet,
    other_set: ActionSet,
    ego: Agent,
    reward: RewardParams,
    safety: SafetyParams,
) -> tuple[np.ndarray, np.ndarray]:
    """Payoff tables (ego, other), rows indexing ego actions.

    Uses the rollouts stored in the action sets, which by construction match
    a joint step_kinematics rollout from ``x``.
    """
    ego_s0 = x.vehicle(ego).s
    other_s0 = x.vehicle(ego.other).s
    disc = _discount_powers(reward.discount, ego_set.accels.shape[1])
    # Squared separation at the post-step states 1..N; axes are perpendicular.
    d2 = ego_set.positions[:, None, 1:] ** 2 + other_set.positions[None, :, 1:] ** 2
    coll = d2 < safety.min_separation**2
    ego_base = disc @ (ego_set.positions[:, 1:] - ego_s0 - reward.w2 * np.abs(ego_set.accels)).T
    other_base = disc @ (
        other_set.positions[:, 1:] - other_s0 - reward.w2 * np.abs(other_set.accels)
    ).T
    ego_pen = np.einsum("ijt,it->ij", coll, disc * (1.0 + ego_set.speeds[:, 1:]))
    other_pen = np.einsum("ijt,jt->ij", coll, disc * (1.0 + other_set.speeds[:, 1:]))
    ego_table = ego_base[:, None] - reward.w1 * ego_pen
    other_table = other_base[None, :] - reward.w1 * other_pen
    return ego_table, other_table


def payoff_tables(
    x: GameState,
    leader_set: ActionSet,
    follower_set: ActionSet,
    reward: RewardParams,
    safety: SafetyParams,
) -> GamePayoffs:
    """Build both payoff tables; the sets are matched to agents by axis."""
    _require_nonempty(leader_set, follower_set)
    if leader_set.axis is follower_set.axis:
        raise ValueError("leader and follower sets must live on different axes")
    leader_agent = Agent.HUMAN if leader_set.axis is x.human.axis else Agent.ROBOT
    lead_table, follow_table = _pair_payoffs(
        x, leader_set, follower_set, leader_agent, reward, safety
    )
    return GamePayoffs(lead_table, follow_table, leader_agent)


# ---------------------------------------------------------------------------
# Spec-level operations over trajectory sets.
# ---------------------------------------------------------------------------


def follower_value(
    x: GameState,
    u_f: ActionTrajectory,
    leader_set: ActionSet,
    reward: RewardParams,
    safety: SafetyParams,
) -> float:
    """Worst-case cumulative reward of one follower trajectory."""
    single = ActionSet.from_trajectories([u_f])
    payoffs = payoff_tables(x, leader_set, single, reward, safety)
    return float(follower_values(payoffs.follower_payoff)[0])


def follower_decision(
    x: GameState,
    follower_set: ActionSet,
    leader_set: ActionSet,
    reward: RewardParams,
    safety: SafetyParams,
) -> ActionTrajectory:
    payoffs = payoff_tables(x, leader_set, follower_set, reward, safety)
    return follower_set[follower_decision_index(payoffs.follower_payoff)]


def follower_optimal_set(
    x: GameState,
    follower_set: ActionSet,
    leader_set: ActionSet,
    reward: RewardParams,
    safety: SafetyParams,
) -> list[ActionTrajectory]:
    payoffs = payoff_tables(x, leader_set, follower_set, reward, safety)
    return [follower_set[i] for i in follower_optimal_set_indices(payoffs.follower_payoff)]


def leader_decision(
    x: GameState,
    leader_set: ActionSet,
    follower_set: ActionSet,
    reward: RewardParams,
    safety: SafetyParams,
) -> ActionTrajectory:
    payoffs = payoff_tables(x, leader_set, follower_set, reward, safety)
    return leader_set[leader_decision_index(payoffs.leader_payoff, payoffs.follower_payoff)]


# ---------------------------------------------------------------------------
# Bound model: parameters plus the glue used by prediction and planning.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RoleDecisions:
    """LFG decisions of one agent under each role hypothesis, from one state."""

    leader: ActionTrajectory
    follower: ActionTrajectory
    leader_index: int
    follower_index: int

    def __getitem__(self, role: Role) -> ActionTrajectory:
        return self.leader if role is Role.LEADER else self.follower


@dataclass(frozen=True)
class LfgModel:
    """Action generation and payoff parameters bound into one game model."""

    gen: ActionGenParams
    reward: RewardParams
    safety: SafetyParams
    n_steps: int = 10

    def action_set(
        self,
        vehicle,
        dt: float,
        n_steps: Optional[int] = None,
        cache: Optional[dict] = None,
    ) -> ActionSet:
        """Generate (or fetch from a per-query cache) one admissible set.

        The cache key is the exact start state, so hits return bit-identical
        sets and caching never changes results.
        """
        steps = n_steps or self.n_steps
        if cache is None:
            return generate_action_set(vehicle, self.gen, steps, dt)
        key = (vehicle.axis, vehicle.s, vehicle.v, steps)
        found = cache.get(key)
        if found is None:
            found = generate_action_set(vehicle, self.gen, steps, dt)
            cache[key] = found
        return found

    def decide_both(
        self,
        x: GameState,
        ego: Agent,
        n_steps: Optional[int] = None,
        cache: Optional[dict] = None,
    ) -> RoleDecisions:
        """Ego's leader and follower decisions, sharing one payoff evaluation."""
        steps = n_steps or self.n_steps
        ego_set = self.action_set(x.vehicle(ego), x.dt, steps, cache)
        other_set = self.action_set(x.vehicle(ego.other), x.dt, steps, cache)
        ego_table, other_table = _pair_payoffs(x, ego_set, other_set, ego, self.reward, self.safety)
        # Ego as follower: rows of the tables must index the leader (the other
        # player), so transpose the ego-rowed tables.
        follower_idx = follower_decision_index(ego_table.T)
        leader_idx = leader_decision_index(ego_table, other_table)
        return RoleDecisions(
            leader=ego_set[leader_idx],
            follower=ego_set[follower_idx],
            leader_index=leader_idx,
            follower_index=follower_idx,
        )

    def decide(
        self, x: GameState, ego: Agent, role: Role, n_steps: Optional[int] = None
    ) -> ActionTrajectory:
        return self.decide_both(x, ego, n_steps)[role]
