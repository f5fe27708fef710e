"""Closed-loop intersection simulation, Monte Carlo batches and persistence.

One episode rolls the two vehicles forward at the sampling period: the human
driver is always an adaptive leader-follower game player (belief update on
the robot, plausible-role map, probabilistic role switch with likelihood
p_a, then its LFG decision), while the autonomous vehicle either plays the
same adaptive LFG or plans with the branch MPC under its assumed adaptation
likelihood p_a_hat. Batches derive one reproducible random stream per run
from the master seed, so percentages are independent of execution order and
stable when more runs are appended.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from .actions import ActionGenParams
from .core import (
    Agent,
    Axis,
    GameState,
    RewardParams,
    SafetyParams,
    VehicleState,
    in_safe_set,
    separation,
    step_kinematics,
)
from .lfg import LfgModel, Role
from .mpc import BranchMpcPlanner, MpcParams
from .roles import (
    NEUTRAL_BELIEF,
    LikelihoodParams,
    RoleBelief,
    belief_update,
    conflict_resolved,
    one_hot,
    plausible_role_complementary,
    plausible_role_mle,
    sample_role,
    transition_matrix,
)

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


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    """Scenario-level settings of one closed-loop run."""

    crossing_line: float = -6.5
    av_init_s: float = -20.0
    av_init_v: float = 4.0
    hv_init_s_center: float = -20.0
    hv_init_v_center: float = 4.0
    hv_init_s_jitter: float = 5.0
    hv_init_v_jitter: float = 1.0
    hv_initial_role: Role = Role.LEADER
    p_a: float = 1.0  # the human's true adaptation likelihood
    p_a_hat: float = 1.0  # the value assumed by the MPC
    hv_policy: str = "lfg-adaptive"  # the only supported human model
    av_policy: str = "mpc"  # "lfg" or "mpc"
    av_role_adaptive: bool = True  # only meaningful for the lfg policy
    plausible_map: str = "mle"  # "mle" or "complementary"
    dt: float = 0.5
    max_sim_time: float = 30.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.hv_init_s_jitter < 0.0 or self.hv_init_v_jitter < 0.0:
            raise ConfigError("jitter bounds must be nonnegative")
        if self.hv_policy != "lfg-adaptive":
            raise ConfigError(f"unknown hv_policy {self.hv_policy!r}")
        if self.av_policy not in ("lfg", "mpc"):
            raise ConfigError(f"unknown av_policy {self.av_policy!r}")
        if self.plausible_map not in ("mle", "complementary"):
            raise ConfigError(f"unknown plausible_map {self.plausible_map!r}")
        if not 0.0 <= self.p_a <= 1.0 or not 0.0 <= self.p_a_hat <= 1.0:
            raise ConfigError("adaptation likelihoods must be in [0, 1]")
        if self.dt <= 0.0 or self.max_sim_time <= 0.0:
            raise ConfigError("dt and max_sim_time must be positive")


@dataclass(frozen=True)
class SimConfig:
    """Full configuration: the scenario plus every model parameter block."""

    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    mpc: MpcParams = field(default_factory=MpcParams)
    reward: RewardParams = field(default_factory=RewardParams)
    safety: SafetyParams = field(default_factory=SafetyParams)
    action_gen: ActionGenParams = field(default_factory=ActionGenParams)
    likelihood: LikelihoodParams = field(default_factory=LikelihoodParams)

    def to_dict(self) -> dict:
        raw = asdict(self)
        raw["scenario"]["hv_initial_role"] = self.scenario.hv_initial_role.value
        return raw

    @staticmethod
    def from_dict(data: dict) -> "SimConfig":
        sections = {
            "scenario": ScenarioConfig,
            "mpc": MpcParams,
            "reward": RewardParams,
            "safety": SafetyParams,
            "action_gen": ActionGenParams,
            "likelihood": LikelihoodParams,
        }
        kwargs = {}
        unknown = set(data) - set(sections)
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        for name, cls in sections.items():
            section = dict(data.get(name, {}))
            if name == "scenario" and "hv_initial_role" in section:
                try:
                    section["hv_initial_role"] = Role(section["hv_initial_role"])
                except ValueError as exc:
                    raise ConfigError(str(exc)) from exc
            try:
                kwargs[name] = cls(**section)
            except TypeError as exc:
                raise ConfigError(f"bad [{name}] section: {exc}") from exc
            except ValueError as exc:
                raise ConfigError(f"bad [{name}] section: {exc}") from exc
        return SimConfig(**kwargs)


def load_config(path: str | Path) -> SimConfig:
    """Load a YAML config file; missing sections fall back to defaults."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    data = yaml.safe_load(text) or {}
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a mapping of sections")
    return SimConfig.from_dict(data)


def apply_overrides(cfg: SimConfig, overrides: list[str]) -> SimConfig:
    """Apply ``section.key=value`` overrides on top of a config."""
    data = cfg.to_dict()
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        dotted, value = item.split("=", 1)
        parts = dotted.strip().split(".")
        if len(parts) != 2:
            raise ConfigError(f"override key {dotted!r} must be section.key")
        section, key = parts
        if section not in data or key not in data[section]:
            raise ConfigError(f"unknown config key {dotted!r}")
        data[section][key] = yaml.safe_load(value)
    return SimConfig.from_dict(data)


# ---------------------------------------------------------------------------
# Episode records.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StepRow:
    """One executed step: the pre-step states and the actions applied."""

    t_s: float
    hv_s: float
    hv_v: float
    hv_a: float
    hv_role: Role
    hv_belief_av_leader: float
    av_s: float
    av_v: float
    av_a: float
    av_belief_hv_leader: float
    av_feasible: bool


@dataclass(frozen=True)
class EpisodeOutcome:
    first_arrival: str  # "AV" or "HV"
    t_av: Optional[float]  # interpolated crossing times, s
    t_hv: Optional[float]
    safety_violation: bool
    collision: bool
    timed_out: bool


@dataclass(frozen=True)
class RunRecord:
    rows: list[StepRow]
    outcome: EpisodeOutcome
    seed: int


@dataclass(frozen=True)
class RunStats:
    seed: int
    first: str
    t_av: Optional[float]
    t_hv: Optional[float]
    safety_violation: bool
    collision: bool


@dataclass(frozen=True)
class SweepSummary:
    n_runs: int
    av_first_pct: float
    hv_first_pct: float
    violation_count: int
    collision_count: int
    mean_arrival_gap: Optional[float]  # mean of (t_hv - t_av), positive = AV first
    per_run: list[RunStats]


# ---------------------------------------------------------------------------
# Closed loop.
# ---------------------------------------------------------------------------


def _adapted_role(
    role: Role,
    belief_on_other: RoleBelief,
    p_a: float,
    plausible_map: str,
    rng: np.random.Generator,
) -> Role:
    if plausible_map == "mle":
        plausible = one_hot(plausible_role_mle(belief_on_other, role))
    else:
        plausible = plausible_role_complementary(belief_on_other)
    return sample_role(role, transition_matrix(plausible, p_a), rng)


def _can_still_yield(vehicle: VehicleState, stop_line: float, a_min: float) -> bool:
    """Whether the vehicle can still brake to a stop at or before the stop line."""
    gap = stop_line - vehicle.s
    if gap <= 0.0:
        return False
    return vehicle.v * vehicle.v <= 2.0 * (-a_min) * gap


def _gated_role(
    role: Role,
    vehicle: VehicleState,
    arrived: bool,
    other_arrived: bool,
    belief_on_other: RoleBelief,
    cfg: SimConfig,
    rng: np.random.Generator,
) -> Role:
    """Role adaptation with the state-dependent gates of the intersection.

    Whoever crosses the line first has claimed the right of way, so its
    plausible role is leader and the other agent's is follower; an agent
    that can no longer physically stop before its standoff point keeps its
    role instead of gambling on a switch it cannot execute. Both gates act
    through the same transition matrix, so the adaptation likelihood p_a
    still governs every switch.
    """
    if arrived != other_arrived:
        plausible = one_hot(Role.LEADER if arrived else Role.FOLLOWER)
        return sample_role(role, transition_matrix(plausible, cfg.scenario.p_a), rng)
    if not _can_still_yield(vehicle, cfg.action_gen.crossing_line, cfg.action_gen.a_min):
        return role
    return _adapted_role(
        role, belief_on_other, cfg.scenario.p_a, cfg.scenario.plausible_map, rng
    )


def _crossing_time(
    s_before: float, s_after: float, step: int, dt: float, line: float
) -> Optional[float]:
    if s_before > line:
        return step * dt  # already past at the start of the step
    if s_after > line:
        return (step + (line - s_before) / (s_after - s_before)) * dt
    return None


def run_episode(cfg: SimConfig, rng: Optional[np.random.Generator] = None) -> RunRecord:
    """Simulate one closed-loop run until both vehicles clear the intersection."""
    sc = cfg.scenario
    if rng is None:
        rng = np.random.default_rng(np.random.SeedSequence([sc.seed, 0]))
    model = LfgModel(cfg.action_gen, cfg.reward, cfg.safety, n_steps=cfg.mpc.n_steps)
    planner = None
    if sc.av_policy == "mpc":
        planner = BranchMpcPlanner(
            replace(cfg.mpc, p_a_hat=sc.p_a_hat), model, cfg.likelihood
        )
    hv_s = rng.uniform(sc.hv_init_s_center - sc.hv_init_s_jitter,
                       sc.hv_init_s_center + sc.hv_init_s_jitter)
    hv_v = rng.uniform(sc.hv_init_v_center - sc.hv_init_v_jitter,
                       sc.hv_init_v_center + sc.hv_init_v_jitter)
    hv = VehicleState(Axis.Y, hv_s, max(hv_v, 0.0))
    av = VehicleState(Axis.X, sc.av_init_s, sc.av_init_v)
    state = GameState(human=hv, robot=av, t=0, dt=sc.dt)

    hv_role = sc.hv_initial_role
    av_role = hv_role.other
    hv_belief = NEUTRAL_BELIEF  # HV's belief that the AV is a leader
    av_belief = NEUTRAL_BELIEF  # AV's belief that the HV is a leader
    av_tracks_belief = sc.av_policy == "mpc" or sc.av_role_adaptive

    clearance = cfg.safety.min_separation
    line = sc.crossing_line
    t_hv = _crossing_time(hv.s, hv.s, 0, sc.dt, line)
    t_av = _crossing_time(av.s, av.s, 0, sc.dt, line)
    violation = not in_safe_set(state, cfg.safety)
    collision = separation(state) < cfg.safety.veh_length

    rows: list[StepRow] = []
    prev = None  # (state, hv_accel, av_accel, hv_decisions, av_decisions)
    max_steps = math.ceil(sc.max_sim_time / sc.dt)
    cleared = False
    for step in range(max_steps):
        if prev is not None:
            prev_state, prev_hv_a, prev_av_a, hv_dec, av_dec = prev
            hv_belief = belief_update(
                hv_belief, prev_state, prev_hv_a, state, Agent.ROBOT,
                cfg.likelihood, model, hypotheses=av_dec,
            )
            if av_tracks_belief:
                av_belief = belief_update(
                    av_belief, prev_state, prev_av_a, state, Agent.HUMAN,
                    cfg.likelihood, model, hypotheses=hv_dec,
                )
        if not conflict_resolved(state):
            hv_arrived, av_arrived = t_hv is not None, t_av is not None
            hv_role = _gated_role(hv_role, hv, hv_arrived, av_arrived, hv_belief, cfg, rng)
            if sc.av_policy == "lfg" and sc.av_role_adaptive:
                av_role = _gated_role(av_role, av, av_arrived, hv_arrived, av_belief, cfg, rng)
        hv_decisions = model.decide_both(state, Agent.HUMAN)
        av_decisions = model.decide_both(state, Agent.ROBOT)
        hv_accel = float(hv_decisions[hv_role].accels[0])
        if planner is not None:
            result = planner.plan(state, av_belief)
            av_accel = float(result.trajectory.accels[0])
            av_feasible = result.feasible
        else:
            av_accel = float(av_decisions[av_role].accels[0])
            av_feasible = True
        rows.append(
            StepRow(
                t_s=step * sc.dt,
                hv_s=hv.s, hv_v=hv.v, hv_a=hv_accel,
                hv_role=hv_role, hv_belief_av_leader=hv_belief.p_leader,
                av_s=av.s, av_v=av.v, av_a=av_accel,
                av_belief_hv_leader=av_belief.p_leader,
                av_feasible=av_feasible,
            )
        )
        next_hv = step_kinematics(hv, hv_accel, sc.dt, cfg.action_gen.v_max)
        next_av = step_kinematics(av, av_accel, sc.dt, cfg.action_gen.v_max)
        next_state = GameState(next_hv, next_av, step + 1, sc.dt)
        sep = separation(next_state)
        violation = violation or sep < cfg.safety.min_separation
        collision = collision or sep < cfg.safety.veh_length
        if t_hv is None:
            t_hv = _crossing_time(hv.s, next_hv.s, step, sc.dt, line)
        if t_av is None:
            t_av = _crossing_time(av.s, next_av.s, step, sc.dt, line)
        prev = (state, hv_accel, av_accel, hv_decisions, av_decisions)
        state, hv, av = next_state, next_hv, next_av
        if hv.s > clearance and av.s > clearance:
            cleared = True
            break

    first = _classify_first(t_av, t_hv, av.s, hv.s, line)
    outcome = EpisodeOutcome(
        first_arrival=first,
        t_av=t_av,
        t_hv=t_hv,
        safety_violation=violation,
        collision=collision,
        timed_out=not cleared,
    )
    return RunRecord(rows=rows, outcome=outcome, seed=sc.seed)


def _classify_first(
    t_av: Optional[float], t_hv: Optional[float], av_s: float, hv_s: float, line: float
) -> str:
    """Exhaustive, exclusive arrival classification; exact ties go to the AV."""
    if t_av is not None and (t_hv is None or t_av <= t_hv):
        return "AV"
    if t_hv is not None:
        return "HV"
    # Neither crossed (timeout anomaly): closest to the line wins, ties to AV.
    return "AV" if (line - av_s) <= (line - hv_s) else "HV"


# ---------------------------------------------------------------------------
# Monte Carlo batches.
# ---------------------------------------------------------------------------


def run_seed(master_seed: int, index: int) -> int:
    """Deterministic per-run seed; appending runs never changes earlier ones."""
    return int(np.random.SeedSequence([master_seed, index]).generate_state(1)[0])


def _run_stats(cfg: SimConfig, index: int) -> RunStats:
    seq = np.random.SeedSequence([cfg.scenario.seed, index])
    record = run_episode(cfg, rng=np.random.default_rng(seq))
    out = record.outcome
    return RunStats(
        seed=run_seed(cfg.scenario.seed, index),
        first=out.first_arrival,
        t_av=out.t_av,
        t_hv=out.t_hv,
        safety_violation=out.safety_violation,
        collision=out.collision,
    )


def _batch_worker(args: tuple[SimConfig, int]) -> RunStats:
    return _run_stats(*args)


def run_batch(cfg: SimConfig, n_runs: int, parallelism: int = 1) -> SweepSummary:
    """Run ``n_runs`` independent episodes and aggregate arrival statistics."""
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    if parallelism > 1:
        jobs = [(cfg, i) for i in range(n_runs)]
        chunk = max(1, n_runs // (parallelism * 8))
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            stats = list(pool.map(_batch_worker, jobs, chunksize=chunk))
    else:
        stats = [_run_stats(cfg, i) for i in range(n_runs)]
    av_first = sum(1 for s in stats if s.first == "AV")
    gaps = [s.t_hv - s.t_av for s in stats if s.t_av is not None and s.t_hv is not None]
    av_pct = 100.0 * av_first / n_runs
    return SweepSummary(
        n_runs=n_runs,
        av_first_pct=av_pct,
        hv_first_pct=100.0 - av_pct,
        violation_count=sum(1 for s in stats if s.safety_violation),
        collision_count=sum(1 for s in stats if s.collision),
        mean_arrival_gap=(sum(gaps) / len(gaps)) if gaps else None,
        per_run=stats,
    )


# ---------------------------------------------------------------------------
# Persistence.
# ---------------------------------------------------------------------------


def _fmt(value: float) -> str:
    return repr(float(value))


def write_run_log(record: RunRecord, path: str | Path) -> None:
    """Write the per-step rows as CSV with the fixed column schema."""
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(RUN_LOG_COLUMNS)
            for r in record.rows:
                writer.writerow(
                    [
                        _fmt(r.t_s),
                        _fmt(r.hv_s), _fmt(r.hv_v), _fmt(r.hv_a),
                        r.hv_role.value, _fmt(r.hv_belief_av_leader),
                        _fmt(r.av_s), _fmt(r.av_v), _fmt(r.av_a),
                        _fmt(r.av_belief_hv_leader),
                        "true" if r.av_feasible else "false",
                    ]
                )
    except OSError as exc:
        raise OSError(f"cannot write run log {path}: {exc}") from exc


def read_run_log(path: str | Path) -> list[StepRow]:
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != RUN_LOG_COLUMNS:
                raise ValueError(f"unexpected run-log header in {path}: {header}")
            rows = []
            for rec in reader:
                rows.append(
                    StepRow(
                        t_s=float(rec[0]),
                        hv_s=float(rec[1]), hv_v=float(rec[2]), hv_a=float(rec[3]),
                        hv_role=Role(rec[4]), hv_belief_av_leader=float(rec[5]),
                        av_s=float(rec[6]), av_v=float(rec[7]), av_a=float(rec[8]),
                        av_belief_hv_leader=float(rec[9]),
                        av_feasible=rec[10] == "true",
                    )
                )
            return rows
    except OSError as exc:
        raise OSError(f"cannot read run log {path}: {exc}") from exc


def summary_to_dict(summary: SweepSummary, cfg: SimConfig) -> dict:
    return {
        "config": cfg.to_dict(),
        "n_runs": summary.n_runs,
        "av_first_pct": summary.av_first_pct,
        "hv_first_pct": summary.hv_first_pct,
        "violations": summary.violation_count,
        "collisions": summary.collision_count,
        "mean_arrival_gap": summary.mean_arrival_gap,
        "per_run": [
            {"seed": s.seed, "first": s.first, "t_av": s.t_av, "t_hv": s.t_hv}
            for s in summary.per_run
        ],
    }


def write_summary(summary: SweepSummary, cfg: SimConfig, path: str | Path) -> None:
    """Write a batch summary as JSON, echoing the full configuration."""
    try:
        with open(path, "w") as fh:
            json.dump(summary_to_dict(summary, cfg), fh, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"cannot write summary {path}: {exc}") from exc
