"""Bayesian role belief, plausible-role maps, and probabilistic role switching.

An agent never observes the other player's leader/follower role directly. It
predicts the other's previous action under each role hypothesis with the game
model, compares the prediction against the observed state, and updates a
Bernoulli belief with a Gaussian likelihood on the residual. The belief feeds
a "plausible role" map and a column-stochastic transition matrix that governs
how willingly the agent adapts its own role.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import Agent, GameState, step_kinematics
from .lfg import LfgModel, Role, RoleDecisions

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RoleBelief:
    """Probability that a given agent holds the leader role."""

    p_leader: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.p_leader <= 1.0:
            raise ValueError(f"p_leader must be in [0, 1], got {self.p_leader}")

    @property
    def p_follower(self) -> float:
        return 1.0 - self.p_leader

    def p(self, role: Role) -> float:
        return self.p_leader if role is Role.LEADER else self.p_follower


NEUTRAL_BELIEF = RoleBelief(0.5)


@dataclass(frozen=True)
class LikelihoodParams:
    """Residual covariance (diagonal, position and speed) and belief floor."""

    position_var: float = 0.5  # m^2
    speed_var: float = 0.5  # (m/s)^2
    belief_floor: float = 0.01

    def __post_init__(self) -> None:
        if self.position_var <= 0.0 or self.speed_var <= 0.0:
            raise ValueError("residual covariance must be positive definite")
        if not 0.0 < self.belief_floor < 0.5:
            raise ValueError("belief_floor must be in (0, 0.5)")


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """2x2 column-stochastic matrix over roles; columns index the previous role."""

    matrix: np.ndarray  # rows and columns ordered (leader, follower)

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (2, 2):
            raise ValueError("transition matrix must be 2x2")
        entries = (m[0, 0], m[0, 1], m[1, 0], m[1, 1])
        if any(e < -1e-12 or e > 1.0 + 1e-12 for e in entries):
            raise ValueError("transition probabilities must lie in [0, 1]")
        if abs(m[0, 0] + m[1, 0] - 1.0) > 1e-9 or abs(m[0, 1] + m[1, 1] - 1.0) > 1e-9:
            raise ValueError("columns must sum to 1")
        object.__setattr__(self, "matrix", m)

    def column(self, previous: Role) -> np.ndarray:
        return self.matrix[:, 0] if previous is Role.LEADER else self.matrix[:, 1]


def one_hot(role: Role) -> RoleBelief:
    return RoleBelief(1.0 if role is Role.LEADER else 0.0)


def predict_other_action(
    x_prev: GameState, role_hypothesis: Role, who: Agent, model: LfgModel
):
    """The action trajectory agent ``who`` would have chosen under a hypothesized role."""
    return model.decide(x_prev, who, role_hypothesis)


def belief_update(
    belief: RoleBelief,
    x_prev: GameState,
    own_action: float,
    x_obs: GameState,
    other: Agent,
    params: LikelihoodParams,
    model: LfgModel,
    hypotheses: Optional[RoleDecisions] = None,
) -> RoleBelief:
    """One Bayesian update of the belief on ``other``'s role.

    For each role hypothesis the other agent's next state is predicted from
    its LFG decision at ``x_prev``; the residual against the observation on
    the other agent's (position, speed) enters a zero-mean Gaussian
    likelihood. The posterior is renormalized and floored so neither
    hypothesis is ever fully absorbed. ``own_action`` is the ego agent's
    executed acceleration, which cancels out of the residual because the ego
    predicts its own motion exactly.

    ``hypotheses`` may carry precomputed LFG decisions of ``other`` at
    ``x_prev`` to avoid re-solving the game.
    """
    del own_action  # the residual is restricted to the other agent's components
    if hypotheses is None:
        hypotheses = model.decide_both(x_prev, other)
    observed = x_obs.vehicle(other)
    prev_vehicle = x_prev.vehicle(other)
    log_liks = {}
    for role in (Role.LEADER, Role.FOLLOWER):
        accel = float(hypotheses[role].accels[0])
        predicted = step_kinematics(prev_vehicle, accel, x_prev.dt, model.gen.v_max)
        r_s = observed.s - predicted.s
        r_v = observed.v - predicted.v
        log_liks[role] = -0.5 * (r_s**2 / params.position_var + r_v**2 / params.speed_var)
    shift = max(log_liks.values())
    w_l = math.exp(log_liks[Role.LEADER] - shift) * belief.p_leader
    w_f = math.exp(log_liks[Role.FOLLOWER] - shift) * belief.p_follower
    total = w_l + w_f
    if not math.isfinite(total) or total <= 0.0:
        log.warning("degenerate likelihoods at t=%d, keeping prior", x_prev.t)
        p_l = belief.p_leader
    else:
        p_l = w_l / total
    floor = params.belief_floor
    p_l = min(max(p_l, floor), 1.0 - floor)
    p_f = min(max(1.0 - p_l, floor), 1.0 - floor)
    return RoleBelief(p_l / (p_l + p_f))


def plausible_role_complementary(belief_on_other: RoleBelief) -> RoleBelief:
    """Distribution over the ego's role complementary to the other's belief."""
    return RoleBelief(belief_on_other.p_follower)


def plausible_role_mle(belief_on_other: RoleBelief, current_role: Role) -> Role:
    """Most-likely complementary role; an exact tie keeps the current role."""
    if belief_on_other.p_leader < belief_on_other.p_follower:
        return Role.LEADER
    if belief_on_other.p_leader > belief_on_other.p_follower:
        return Role.FOLLOWER
    return current_role


def transition_matrix(plausible: RoleBelief, p_a: float) -> TransitionMatrix:
    """Role transition matrix from a plausible-role distribution.

    ``p_a`` is the likelihood of altering the role towards the plausible one;
    a role equal to the plausible role is kept with probability 1.
    """
    if not 0.0 <= p_a <= 1.0:
        raise ValueError("p_a must be in [0, 1]")
    to_leader = np.array([[1.0, p_a], [0.0, 1.0 - p_a]])
    to_follower = np.array([[1.0 - p_a, 0.0], [p_a, 1.0]])
    return TransitionMatrix(plausible.p_leader * to_leader + plausible.p_follower * to_follower)


def sample_role(current: Role, matrix: TransitionMatrix, rng: np.random.Generator) -> Role:
    """Draw the next role from the transition column of the current role."""
    p_leader_next = float(matrix.column(current)[0])
    return Role.LEADER if rng.random() < p_leader_next else Role.FOLLOWER


def conflict_resolved(x: GameState) -> bool:
    """True once both vehicles have passed the merging point."""
    return x.human.s > 0.0 and x.robot.s > 0.0
