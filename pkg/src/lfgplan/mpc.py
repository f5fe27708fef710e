"""Two-stage, four-branch chance-constrained MPC for the robot.

For every candidate robot trajectory, the human's behavior is predicted on a
scenario tree: stage 1 branches on the human's current role (weighted by the
robot's belief), stage 2 on the role the human may adapt to after observing
the robot for the first T1 steps. The adaptation is simulated with the
human's own inference machinery: a neutral belief on the robot is updated
along the candidate prefix, mapped to a plausible role, and pushed through
the assumed transition matrix with likelihood ``p_a_hat``. A candidate is
feasible when the probability mass of branches containing any safe-set
violation stays within the risk level; the best feasible candidate under the
expected discounted reward wins, and when nothing is feasible the collision
penalty inside the reward picks the least dangerous fallback.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .actions import ActionTrajectory
from .core import Agent, GameState, SafetyParams
from .lfg import LfgModel, Role, RoleDecisions, _discount_powers
from .roles import (
    NEUTRAL_BELIEF,
    LikelihoodParams,
    RoleBelief,
    TransitionMatrix,
    belief_update,
    one_hot,
    plausible_role_mle,
    transition_matrix,
)

PROB_TOLERANCE = 1e-12


@dataclass(frozen=True)
class MpcParams:
    """Horizon split, risk level and assumed adaptation likelihood.

    ``safety_margin`` inflates the safe-set radius used by the planner's
    chance constraint (planning only; the realized safe set and the reward
    are untouched), absorbing the mismatch between predicted and realized
    human motion.
    """

    t1: int = 1  # stage-1 length, steps
    n_steps: int = 10  # horizon, steps
    epsilon: float = 0.02
    p_a_hat: float = 1.0
    discount: float = 1.0
    safety_margin: float = 0.25  # m, added to the planner's clearance radius
    margin_growth: float = 0.4  # m/s, extra clearance per second of lookahead

    def __post_init__(self) -> None:
        if not 0 < self.t1 < self.n_steps:
            raise ValueError("need 0 < t1 < n_steps")
        if not 0.0 <= self.epsilon < 1.0:
            raise ValueError("epsilon must be in [0, 1)")
        if not 0.0 <= self.p_a_hat <= 1.0:
            raise ValueError("p_a_hat must be in [0, 1]")
        if not 0.0 < self.discount <= 1.0:
            raise ValueError("discount must be in (0, 1]")
        if self.safety_margin < 0.0 or self.margin_growth < 0.0:
            raise ValueError("margins must be nonnegative")


@dataclass(frozen=True, eq=False)
class Stage2Branch:
    """One adapted-role continuation over the remaining horizon."""

    role: Role
    prob: float  # conditional on the stage-1 branch
    human_traj: ActionTrajectory
    human_positions: np.ndarray  # states T1+1 .. N


@dataclass(frozen=True, eq=False)
class Stage1Branch:
    """One current-role hypothesis over the first T1 steps."""

    role: Role
    prob: float
    human_traj: ActionTrajectory  # full-horizon decision; first T1(+1) actions used
    human_positions: np.ndarray  # states 1 .. T1+1; the last one is the virtual
    # state induced by the stage-1 action at step T1, used only by the reward.
    simulated_belief: RoleBelief  # human's belief on the robot at t+T1
    plausible: Role
    transition: TransitionMatrix
    stage2: tuple[Stage2Branch, Stage2Branch]


@dataclass(frozen=True, eq=False)
class BranchTree:
    """Four-leaf prediction for one robot candidate."""

    robot_accels: np.ndarray  # (N,)
    robot_positions: np.ndarray  # states 1 .. N
    robot_speeds: np.ndarray  # states 1 .. N
    t1: int
    stage1: tuple[Stage1Branch, Stage1Branch]

    def leaf_probs(self) -> np.ndarray:
        return np.array(
            [b1.prob * b2.prob for b1 in self.stage1 for b2 in b1.stage2]
        )


@dataclass(frozen=True, eq=False)
class PlanResult:
    trajectory: ActionTrajectory
    tree: BranchTree
    feasible: bool
    objective: float
    index: int
    violation_probs: np.ndarray  # per candidate, in generation order
    objectives: np.ndarray


def branch_violation_prob(tree: BranchTree, safety: SafetyParams) -> float:
    """Probability mass of leaf paths containing any safe-set violation.

    A path consists of the stage-1 prefix states 1..T1 followed by the
    stage-2 suffix states T1+1..N; a violation in the prefix counts against
    both of its children.
    """
    t1 = tree.t1
    min_sep2 = safety.min_separation**2
    r2_prefix = tree.robot_positions[:t1] ** 2
    r2_suffix = tree.robot_positions[t1:] ** 2
    total = 0.0
    for branch in tree.stage1:
        prefix_viol = bool(
            (r2_prefix + branch.human_positions[:t1] ** 2 < min_sep2).any()
        )
        for sub in branch.stage2:
            if prefix_viol or (r2_suffix + sub.human_positions**2 < min_sep2).any():
                total += branch.prob * sub.prob
    return total


class BranchMpcPlanner:
    """Enumerative branch MPC over the generated robot action set."""

    def __init__(
        self, mpc: MpcParams, model: LfgModel, likelihood: LikelihoodParams
    ) -> None:
        if mpc.n_steps != model.n_steps:
            raise ValueError("planner horizon must match the game model horizon")
        self.mpc = mpc
        self.model = model
        self.likelihood = likelihood

    # -- prediction ---------------------------------------------------------

    def predict_branches(
        self,
        x: GameState,
        robot_candidate: ActionTrajectory,
        belief: RoleBelief,
        stage1_decisions: Optional[RoleDecisions] = None,
        robot_hypotheses_at_x: Optional[RoleDecisions] = None,
        cache: Optional[dict] = None,
    ) -> BranchTree:
        """Build the two-stage tree for one candidate.

        ``stage1_decisions``, ``robot_hypotheses_at_x`` and ``cache`` allow
        the planner to share candidate-independent game solves and action-set
        generation across candidates; they never change the result.
        """
        t1, n = self.mpc.t1, self.mpc.n_steps
        if len(robot_candidate) != n:
            raise ValueError("candidate must span the full horizon")
        if cache is None:
            cache = {}
        if stage1_decisions is None:
            stage1_decisions = self.model.decide_both(x, Agent.HUMAN, cache=cache)
        if robot_hypotheses_at_x is None:
            robot_hypotheses_at_x = self.model.decide_both(x, Agent.ROBOT, cache=cache)
        branches = []
        for role in (Role.LEADER, Role.FOLLOWER):
            human_traj = stage1_decisions[role]
            # Simulate the human's belief on the robot along the prefix,
            # starting from neutral each planning cycle.
            sim_belief = NEUTRAL_BELIEF
            for tau in range(t1):
                joint = GameState(
                    human_traj.state_at(tau),
                    robot_candidate.state_at(tau),
                    x.t + tau,
                    x.dt,
                )
                observed = GameState(
                    human_traj.state_at(tau + 1),
                    robot_candidate.state_at(tau + 1),
                    x.t + tau + 1,
                    x.dt,
                )
                if tau == 0:
                    hyp = robot_hypotheses_at_x
                else:
                    hyp = self.model.decide_both(joint, Agent.ROBOT, cache=cache)
                sim_belief = belief_update(
                    sim_belief,
                    joint,
                    float(human_traj.accels[tau]),
                    observed,
                    Agent.ROBOT,
                    self.likelihood,
                    self.model,
                    hypotheses=hyp,
                )
            plausible = plausible_role_mle(sim_belief, role)
            trans = transition_matrix(one_hot(plausible), self.mpc.p_a_hat)
            q_leader, q_follower = trans.column(role)
            branch_state = GameState(
                human_traj.state_at(t1), robot_candidate.state_at(t1), x.t + t1, x.dt
            )
            stage2_decisions = self.model.decide_both(
                branch_state, Agent.HUMAN, n_steps=n - t1, cache=cache
            )
            stage2 = tuple(
                Stage2Branch(
                    role=r2,
                    prob=float(q),
                    human_traj=stage2_decisions[r2],
                    human_positions=stage2_decisions[r2].positions[1:],
                )
                for r2, q in ((Role.LEADER, q_leader), (Role.FOLLOWER, q_follower))
            )
            branches.append(
                Stage1Branch(
                    role=role,
                    prob=belief.p(role),
                    human_traj=human_traj,
                    human_positions=human_traj.positions[1 : t1 + 2],
                    simulated_belief=sim_belief,
                    plausible=plausible,
                    transition=trans,
                    stage2=stage2,
                )
            )
        return BranchTree(
            robot_accels=robot_candidate.accels,
            robot_positions=robot_candidate.positions[1:],
            robot_speeds=robot_candidate.speeds[1:],
            t1=t1,
            stage1=tuple(branches),
        )

    # -- chance constraint --------------------------------------------------

    def _chance_violation(self, tree: BranchTree, dt: float) -> float:
        """Violation mass under the planner's time-growing clearance radius.

        Same leaf bookkeeping as branch_violation_prob, but each lookahead
        state must clear min_separation + safety_margin + margin_growth * t,
        reflecting that prediction error compounds along the horizon.
        """
        t1, n = self.mpc.t1, self.mpc.n_steps
        steps = np.arange(1, n + 1)
        radius = (
            self.model.safety.min_separation
            + self.mpc.safety_margin
            + self.mpc.margin_growth * steps * dt
        )
        thresh2 = radius**2
        rp2 = tree.robot_positions**2
        total = 0.0
        for branch in tree.stage1:
            prefix_viol = bool(
                (rp2[:t1] + branch.human_positions[:t1] ** 2 < thresh2[:t1]).any()
            )
            for sub in branch.stage2:
                if prefix_viol or (
                    rp2[t1:] + sub.human_positions**2 < thresh2[t1:]
                ).any():
                    total += branch.prob * sub.prob
        return total

    # -- objective ----------------------------------------------------------

    def _objective(self, x: GameState, tree: BranchTree) -> float:
        """Expected discounted reward of the robot along the tree.

        The reward term at step tau uses the state at tau+1; the term at
        exactly tau = T1 is weighted within stage 1 and uses the stage-1
        human action, while stage-2 terms start at tau = T1+1.
        """
        t1, n = self.mpc.t1, self.mpc.n_steps
        w1, w2 = self.model.reward.w1, self.model.reward.w2
        min_sep2 = self.model.safety.min_separation**2
        disc = _discount_powers(self.mpc.discount, n)
        progress = tree.robot_positions - x.robot.s
        deterministic = float(disc @ (progress - w2 * np.abs(tree.robot_accels)))
        coeff = disc * (1.0 + tree.robot_speeds)  # indexed by state-1-based step
        r2 = tree.robot_positions**2
        penalty = 0.0
        for branch in tree.stage1:
            coll1 = r2[: t1 + 1] + branch.human_positions**2 < min_sep2
            penalty += branch.prob * float(coeff[: t1 + 1] @ coll1)
            if t1 + 1 < n:
                for sub in branch.stage2:
                    coll2 = r2[t1 + 1 :] + sub.human_positions[1:] ** 2 < min_sep2
                    penalty += branch.prob * sub.prob * float(coeff[t1 + 1 :] @ coll2)
        return deterministic - w1 * penalty

    # -- planning -----------------------------------------------------------

    def plan(self, x: GameState, belief: RoleBelief) -> PlanResult:
        """Pick the best feasible candidate, falling back to the best overall.

        Deterministic: candidates are scanned in generation order and ties go
        to the lowest index.
        """
        cache: dict = {}
        candidates = self.model.action_set(x.robot, x.dt, cache=cache)
        stage1_decisions = self.model.decide_both(x, Agent.HUMAN, cache=cache)
        robot_hypotheses = self.model.decide_both(x, Agent.ROBOT, cache=cache)
        violations = np.empty(len(candidates))
        objectives = np.empty(len(candidates))
        trees: list[BranchTree] = []
        for i, candidate in enumerate(candidates):
            tree = self.predict_branches(
                x, candidate, belief, stage1_decisions, robot_hypotheses, cache
            )
            trees.append(tree)
            violations[i] = self._chance_violation(tree, x.dt)
            objectives[i] = self._objective(x, tree)
        feasible_mask = violations <= self.mpc.epsilon + PROB_TOLERANCE
        if feasible_mask.any():
            pool = np.flatnonzero(feasible_mask)
            best = int(pool[np.argmax(objectives[pool])])
            feasible = True
        else:
            best = int(np.argmax(objectives))
            feasible = False
        return PlanResult(
            trajectory=candidates[best],
            tree=trees[best],
            feasible=feasible,
            objective=float(objectives[best]),
            index=best,
            violation_probs=violations,
            objectives=objectives,
        )
