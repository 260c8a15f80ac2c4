"""Closed-loop step-to-step walking simulation and the multi-environment benchmark."""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .baseline import DdMpcPipeline
from .environment import Environment, generate_environment
from .lip import LipParams, LipState, StanceFoot, StepControl, integrate_within_step
from .planner import LipMpcPlanner, PlannerConfig, SolveStatus
from .safety import Obstacle, inflate

PLANNERS = ("lip", "dd")


@dataclass(frozen=True)
class Disturbance:
    """Zero-mean Gaussian kick added to the state at every touchdown."""

    sigma_pos: float = 0.0
    sigma_vel: float = 0.0
    seed: int = 0


@dataclass(frozen=True)
class SimConfig:
    replans_per_step: int = 8
    max_steps: int = 100
    arrival_radius: float = 0.3
    lateral_offset: float = 0.1  # deadbeat tracker foot separation (DD pipeline)
    disturbance: Optional[Disturbance] = None

    def __post_init__(self):
        if self.replans_per_step < 1:
            raise ValueError("replans_per_step must be >= 1")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")


@dataclass(frozen=True)
class Sample:
    time: float
    step: int
    state: LipState
    control: StepControl
    stance: StanceFoot
    min_h_true: float
    min_h_inflated: float
    status: SolveStatus
    max_slack: float


@dataclass(frozen=True)
class OutcomeFlags:
    finish: bool = False
    violate: bool = False
    enter: bool = False
    collide: bool = False


@dataclass
class EpisodeLog:
    samples: list[Sample]
    outcome: OutcomeFlags
    steps: int
    wall_time: float
    termination: str  # "arrival", "collision" or "max_steps"
    planner: str = ""
    seed: int = 0
    # per completed step: |actual touchdown CoM - planner's prediction at step start|
    deviations: list[float] = field(default_factory=list)
    plan_times: list[float] = field(default_factory=list)


def min_barrier(obstacles: Sequence[Obstacle], p) -> float:
    if not obstacles:
        return math.inf
    return min(float(o.barrier(p[0], p[1])) for o in obstacles)


def make_planner(kind: str, cfg: PlannerConfig, params: LipParams, sim: SimConfig):
    if kind == "lip":
        return LipMpcPlanner(cfg, params)
    if kind == "dd":
        return DdMpcPipeline(cfg, params, sim.lateral_offset)
    raise ValueError(f"unknown planner {kind!r}; expected one of {PLANNERS}")


def run_episode(
    env: Environment,
    planner: str,
    cfg: PlannerConfig,
    params: LipParams,
    sim: SimConfig = SimConfig(),
) -> EpisodeLog:
    """Walk from ``env.start`` to ``env.goal``, replanning ``replans_per_step`` times per step.

    The walker starts at rest facing the goal, right foot under the CoM. At
    each touchdown the latest commanded foothold becomes the stance foot.
    """
    t_start = time.perf_counter()
    walker = make_planner(planner, cfg, params, sim).with_goal(env.goal)
    margin = cfg.cbf.inflation_margin
    true_obs = env.obstacles
    inflated = tuple(inflate(o, margin) for o in true_obs)
    T = params.step_duration
    R = sim.replans_per_step
    dt = T / R
    noise = None
    if sim.disturbance is not None:
        noise = np.random.default_rng([sim.disturbance.seed & (2**63 - 1), env.seed & (2**63 - 1)])

    sx, sy = env.start
    heading = math.atan2(env.goal[1] - sy, env.goal[0] - sx)
    x = LipState(sx, 0.0, sy, 0.0, heading)
    u_cur = StepControl(sx, sy, 0.0)
    stance = StanceFoot.RIGHT
    samples: list[Sample] = []
    deviations: list[float] = []
    plan_times: list[float] = []
    pending: Optional[StepControl] = None
    termination = "max_steps"
    t = 0.0
    steps = 0

    for step in range(sim.max_steps):
        predicted = None
        # a failed solve falls back to the last good control of this step only;
        # a foothold from an earlier step would be stale in the world frame
        pending = None
        for i in range(R):
            t_rem = T - i * dt
            ps = walker.command(x, u_cur, stance, t_rem, true_obs, new_step=(i == 0))
            plan_times.append(ps.wall_time)
            if ps.status is not SolveStatus.FAILED or pending is None:
                pending = ps.control
            if i == 0:
                predicted = ps.predicted_boundary
            h_true = min_barrier(true_obs, x.position)
            h_infl = min_barrier(inflated, x.position)
            samples.append(Sample(t, step, x, u_cur, stance, h_true, h_infl, ps.status, ps.max_slack))
            if h_true < 0.0:
                termination = "collision"
                break
            if math.hypot(x.p_x - env.goal[0], x.p_y - env.goal[1]) <= sim.arrival_radius:
                termination = "arrival"
                break
            x = integrate_within_step(x, u_cur.foot, u_cur.omega, dt, params)
            t = (step * R + i + 1) * dt
        if termination != "max_steps":
            break
        steps = step + 1
        deviations.append(math.hypot(x.p_x - predicted[0], x.p_y - predicted[1]))
        u_cur = pending
        stance = stance.other()
        if noise is not None:
            d = sim.disturbance
            kick = noise.normal(0.0, 1.0, 4) * np.array([d.sigma_pos, d.sigma_vel, d.sigma_pos, d.sigma_vel])
            x = LipState.from_array(x.to_array() + np.append(kick, 0.0))

    log = EpisodeLog(
        samples=samples,
        outcome=OutcomeFlags(),
        steps=steps,
        wall_time=time.perf_counter() - t_start,
        termination=termination,
        planner=planner,
        seed=env.seed,
        deviations=deviations,
        plan_times=plan_times,
    )
    log.outcome = classify(log, env, margin)
    return log


def classify(log: EpisodeLog, env: Environment, margin: float) -> OutcomeFlags:
    """Outcome flags from a finished log; boundary contact (h = 0) is not an entry."""
    inflated = [inflate(o, margin) for o in env.obstacles]
    collide = any(min_barrier(env.obstacles, s.state.position) < 0.0 for s in log.samples)
    enter = collide or any(min_barrier(inflated, s.state.position) < 0.0 for s in log.samples)
    violate = any(
        s.status in (SolveStatus.SLACK_RELAXED, SolveStatus.FAILED) or s.max_slack > 1e-6 for s in log.samples
    )
    finish = log.termination == "arrival" and not collide
    return OutcomeFlags(finish=finish, violate=violate, enter=enter, collide=collide)


@dataclass
class EpisodeRow:
    seed: int
    planner: str
    outcome: OutcomeFlags
    steps: int
    termination: str
    wall_time: float
    error: Optional[str] = None


@dataclass
class BenchmarkTable:
    rows: list[EpisodeRow]
    planners: tuple[str, ...]

    def counts(self, planner: str) -> dict[str, int]:
        sel = [r for r in self.rows if r.planner == planner]
        return {
            "finish": sum(r.outcome.finish for r in sel),
            "violate": sum(r.outcome.violate for r in sel),
            "enter": sum(r.outcome.enter for r in sel),
            "collide": sum(r.outcome.collide for r in sel),
            "episodes": len(sel),
        }


def _episode_task(args) -> EpisodeRow:
    env, planner, cfg, params, sim = args
    try:
        log = run_episode(env, planner, cfg, params, sim)
    except Exception as exc:  # recorded per episode, never aborts the batch
        return EpisodeRow(env.seed, planner, OutcomeFlags(), 0, "error", 0.0, f"{type(exc).__name__}: {exc}")
    return EpisodeRow(env.seed, planner, log.outcome, log.steps, log.termination, log.wall_time)


def run_benchmark(
    envs: Iterable[Union[int, Environment]],
    planners: Sequence[str] = PLANNERS,
    cfg: PlannerConfig = PlannerConfig(),
    params: LipParams = LipParams(),
    sim: SimConfig = SimConfig(),
    jobs: int = 1,
    n_obstacles: int = 8,
) -> BenchmarkTable:
    """Run every planner on every environment; integers are treated as seeds.

    Rows come back ordered by planner then environment, whatever ``jobs`` is.
    """
    environments = [
        e if isinstance(e, Environment) else generate_environment(e, n_obstacles, margin=cfg.cbf.inflation_margin)
        for e in envs
    ]
    for p in planners:
        if p not in PLANNERS:
            raise ValueError(f"unknown planner {p!r}")
    tasks = [(env, p, cfg, params, sim) for p in planners for env in environments]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_episode_task, tasks))
    else:
        rows = [_episode_task(t) for t in tasks]
    # wall times are the only non-deterministic field
    return BenchmarkTable(rows, tuple(planners))
