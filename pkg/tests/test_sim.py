import math
from dataclasses import replace

import numpy as np
import pytest

from lipnav import sim as simmod
from lipnav.environment import Environment, GenerationError, SplitMix64, generate_environment
from lipnav.lip import LipParams, LipState, StanceFoot, StepControl, integrate_within_step
from lipnav.planner import PlannerConfig, PlanStep, SolveStatus
from lipnav.safety import Circle, barrier_value, inflate
from lipnav.sim import (
    Disturbance,
    EpisodeLog,
    OutcomeFlags,
    Sample,
    SimConfig,
    classify,
    run_benchmark,
    run_episode,
)

P = LipParams()
CFG = PlannerConfig()
EMPTY = Environment(())


@pytest.fixture(scope="module")
def empty_lip():
    return run_episode(EMPTY, "lip", CFG, P)


@pytest.fixture(scope="module")
def seed0_lip():
    return run_episode(generate_environment(0), "lip", CFG, P)


# --- environments ---------------------------------------------------------


def test_splitmix_reference_stream():
    # first outputs for seed 0 of the reference splitmix64
    rng = SplitMix64(0)
    assert [rng.next_u64() for _ in range(3)] == [
        0xE220A8397B1DCDAF,
        0x6E789E6AA1B965F4,
        0x06C45D188009454F,
    ]
    assert 0.0 <= SplitMix64(7).random() < 1.0


def test_generation_is_deterministic():
    assert generate_environment(5) == generate_environment(5)
    assert generate_environment(5) != generate_environment(6)
    assert generate_environment(3, 0).obstacles == ()


def test_generated_environments_honour_clearance():
    for seed in range(20):
        env = generate_environment(seed)
        assert len(env.obstacles) == 8
        for ob in env.obstacles:
            grown = inflate(ob, 0.4 + 0.2)
            assert barrier_value(grown, env.start) > 0 and barrier_value(grown, env.goal) > 0
            assert 1.0 <= ob.center_x <= 9.0 and 1.0 <= ob.center_y <= 9.0
            if isinstance(ob, Circle):
                assert 0.3 <= ob.radius <= 0.8
            else:
                assert 0.3 <= ob.semi_minor <= ob.semi_major <= 1.0 and 0.0 <= ob.rotation < math.pi


def test_generation_errors():
    with pytest.raises(ValueError):
        generate_environment(0, -1)
    # the clearance disc around the start covers the whole placement box
    with pytest.raises(GenerationError):
        generate_environment(0, 1, start=(5.0, 5.0), goal=(5.0, 5.0), margin=10.0, max_attempts=20)


def test_rest_is_stationary():
    x = LipState(1.0, 0.0, 2.0, 0.0, 0.3)
    for _ in range(100):
        x = integrate_within_step(x, (1.0, 2.0), 0.0, P.step_duration, P)
    assert x == LipState(1.0, 0.0, 2.0, 0.0, 0.3)


# --- episodes -------------------------------------------------------------


def test_empty_environment_finishes(empty_lip):
    log = empty_lip
    assert log.outcome == OutcomeFlags(finish=True)
    assert log.termination == "arrival"
    # near-straight: CoM stays close to the start-goal diagonal
    off = [abs(s.state.p_x - s.state.p_y) / math.sqrt(2) for s in log.samples]
    assert max(off) < 0.5


def test_log_invariants(seed0_lip):
    for log in (seed0_lip,):
        t = [s.time for s in log.samples]
        assert all(b > a for a, b in zip(t, t[1:]))
        for a, b in zip(log.samples, log.samples[1:]):
            if b.step == a.step:
                assert b.stance is a.stance
            else:
                assert b.step == a.step + 1 and b.stance is a.stance.other()
        assert log.samples[0].stance is StanceFoot.RIGHT


def test_lip_prediction_is_exact(empty_lip, seed0_lip):
    for log in (empty_lip, seed0_lip):
        assert len(log.deviations) == log.steps
        assert max(log.deviations) <= 1e-9


def test_goal_distance_non_increasing_without_obstacles(empty_lip):
    boundary = {}
    for s in empty_lip.samples:
        boundary.setdefault(s.step, s.state)
    d = [math.hypot(10 - x.p_x, 10 - x.p_y) for _, x in sorted(boundary.items())]
    assert all(b <= a + 1e-9 for a, b in zip(d[3:], d[4:]))


def test_dd_prediction_deviates():
    log = run_episode(EMPTY, "dd", CFG, P)
    assert log.outcome.finish
    dev = np.array(log.deviations)
    assert dev.max() > 1e-3
    assert np.count_nonzero(dev > 0) >= 0.9 * len(dev)


def test_episode_is_deterministic(seed0_lip):
    again = run_episode(generate_environment(0), "lip", CFG, P)
    assert again.samples == seed0_lip.samples and again.outcome == seed0_lip.outcome


def test_disturbance_is_seeded():
    sim = SimConfig(max_steps=10, disturbance=Disturbance(0.01, 0.02, seed=3))
    a = run_episode(EMPTY, "lip", CFG, P, sim)
    b = run_episode(EMPTY, "lip", CFG, P, sim)
    assert a.samples == b.samples
    calm = run_episode(EMPTY, "lip", CFG, P, replace(sim, disturbance=None))
    other = run_episode(EMPTY, "lip", CFG, P, replace(sim, disturbance=Disturbance(0.01, 0.02, seed=4)))
    assert a.samples[7].state == calm.samples[7].state
    assert a.samples[8].state != calm.samples[8].state
    assert a.samples[-1].state != other.samples[-1].state


def test_unknown_planner_rejected():
    with pytest.raises(ValueError):
        run_episode(EMPTY, "rrt", CFG, P)


def test_failed_solve_keeps_last_control_of_the_step(monkeypatch):
    class Flaky:
        """Returns a fresh foothold on the first replan of a step and fails afterwards."""

        def __init__(self):
            self.calls = 0

        def with_goal(self, goal):
            return self

        def command(self, x_cur, u_cur, stance_cur, t_rem, env, new_step):
            self.calls += 1
            status = SolveStatus.OPTIMAL if new_step else SolveStatus.FAILED
            foot = StepControl(x_cur.p_x + 0.05, x_cur.p_y + (0.1 if new_step else 5.0), 0.0)
            return PlanStep(foot, status, 0.0, x_cur.position, 0.0)

    monkeypatch.setattr(simmod, "make_planner", lambda *a: Flaky())
    log = run_episode(EMPTY, "lip", CFG, P, SimConfig(max_steps=3))
    feet = {s.step: s.control for s in log.samples}
    # the wild feet of failed solves never become stance feet
    assert all(abs(feet[k].f_y - log.samples[0].state.p_y) < 1.0 for k in feet)
    assert log.outcome.violate and log.steps == 3


# --- classification -------------------------------------------------------


def _log(points, status=SolveStatus.OPTIMAL, termination="arrival", slack=0.0, env=None):
    env = env or Environment((Circle(5.0, 5.0, 1.0),))
    samples = []
    for i, p in enumerate(points):
        x = LipState(p[0], 0.0, p[1], 0.0)
        h_true = min(o.barrier(*p) for o in env.obstacles)
        h_infl = min(inflate(o, 0.4).barrier(*p) for o in env.obstacles)
        samples.append(Sample(0.05 * i, i // 8, x, StepControl(*p), StanceFoot.RIGHT, h_true, h_infl, status, slack))
    return EpisodeLog(samples, OutcomeFlags(), 1, 0.0, termination), env


def test_classify_clear_run():
    log, env = _log([(0, 0), (1, 1), (10, 10)])
    assert classify(log, env, 0.4) == OutcomeFlags(finish=True)


def test_classify_boundary_is_not_entry():
    log, env = _log([(0, 0), (5.0, 6.4), (10, 10)])
    assert classify(log, env, 0.4) == OutcomeFlags(finish=True)


def test_classify_nesting_and_flags():
    log, env = _log([(0, 0), (5.0, 5.5)], termination="collision")
    assert classify(log, env, 0.4) == OutcomeFlags(finish=False, violate=False, enter=True, collide=True)
    log, env = _log([(0, 0), (5.0, 6.2), (10, 10)])
    assert classify(log, env, 0.4) == OutcomeFlags(finish=True, enter=True)
    log, env = _log([(0, 0), (10, 10)], status=SolveStatus.SLACK_RELAXED)
    assert classify(log, env, 0.4).violate
    log, env = _log([(0, 0), (10, 10)], slack=1e-3)
    assert classify(log, env, 0.4).violate
    log, env = _log([(0, 0)], termination="max_steps")
    assert not classify(log, env, 0.4).finish


# --- benchmark ------------------------------------------------------------


def test_empty_benchmark():
    table = run_benchmark([], ("lip", "dd"))
    assert table.rows == [] and table.counts("lip")["episodes"] == 0


def test_benchmark_parallel_matches_serial():
    envs = [EMPTY, generate_environment(2, 2)]
    sim = SimConfig(max_steps=15)
    a = run_benchmark(envs, ("lip", "dd"), CFG, P, sim, jobs=1)
    b = run_benchmark(envs, ("lip", "dd"), CFG, P, sim, jobs=2)
    strip = lambda t: [replace(r, wall_time=0.0) for r in t.rows]  # noqa: E731
    assert strip(a) == strip(b)
    assert [r.planner for r in a.rows] == ["lip", "lip", "dd", "dd"]
    assert a.counts("dd")["episodes"] == 2


def test_benchmark_records_episode_errors(monkeypatch):
    def boom(*a, **k):
        raise RuntimeError("solver exploded")

    monkeypatch.setattr(simmod, "run_episode", boom)
    table = run_benchmark([EMPTY], ("lip",))
    assert table.rows[0].termination == "error" and "solver exploded" in table.rows[0].error
    with pytest.raises(ValueError):
        run_benchmark([EMPTY], ("astar",))
