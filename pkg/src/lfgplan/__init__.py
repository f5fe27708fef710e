"""Leader-follower intersection game with role-adaptive prediction and branch MPC."""

from .actions import (
    ActionGenParams,
    ActionSet,
    ActionTrajectory,
    TrajectoryKind,
    TrajectoryTag,
    generate_action_set,
    reachable_speed_range,
)
from .core import (
    Agent,
    Axis,
    GameState,
    RewardParams,
    SafetyParams,
    VehicleState,
    cumulative_reward,
    in_safe_set,
    separation,
    step_kinematics,
    step_reward,
)
from .lfg import (
    GamePayoffs,
    LfgModel,
    Role,
    RoleDecisions,
    follower_decision,
    follower_optimal_set,
    follower_value,
    leader_decision,
    payoff_tables,
)
from .mpc import BranchMpcPlanner, BranchTree, MpcParams, PlanResult, branch_violation_prob
from .roles import (
    LikelihoodParams,
    RoleBelief,
    TransitionMatrix,
    belief_update,
    conflict_resolved,
    one_hot,
    plausible_role_complementary,
    plausible_role_mle,
    predict_other_action,
    sample_role,
    transition_matrix,
)
from .sim import (
    ScenarioConfig,
    SimConfig,
    SweepSummary,
    RunRecord,
    load_config,
    run_batch,
    run_episode,
    write_run_log,
    write_summary,
)

__version__ = "0.1.0"
