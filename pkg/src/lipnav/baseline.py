"""Hierarchical comparison pipeline: differential-drive MPC plus a LIP gait tracker.

The path layer treats the walker as a unicycle and plans ``(v, omega)`` with the
same goal cost and DCBF rows as the LIP planner, but without the walking
constraints. A deadbeat foot-placement law then turns the commanded velocity
into footholds.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .lip import LipParams, LipState, StanceFoot, StepControl, foot_for_end_velocity, wrap_angle
from .planner import (
    PlannerConfig,
    PlanStep,
    SolveStatus,
    _cost_terms,
    preprocess_state,
    run_slsqp,
)
from .safety import Obstacle, dcbf_residual, inflate


@dataclass(frozen=True)
class DdPose:
    x: float
    y: float
    theta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "theta", wrap_angle(float(self.theta)))


@dataclass(frozen=True)
class DdCommand:
    v: float
    omega: float  # rad per step


def dd_dynamics(p: DdPose, cmd: DdCommand, dt: float, step_duration: float) -> DdPose:
    """Forward-Euler unicycle; ``omega`` is per step, so it is scaled by ``dt / T``."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    return DdPose(
        p.x + cmd.v * math.cos(p.theta) * dt,
        p.y + cmd.v * math.sin(p.theta) * dt,
        p.theta + cmd.omega * (dt / step_duration),
    )


@dataclass
class DdPlan:
    commands: list[DdCommand]
    poses: list[DdPose]
    status: SolveStatus
    max_slack: float
    objective: float
    iterations: int
    wall_time: float
    z: np.ndarray = field(repr=False)


class DdProblem:
    """Unicycle horizon NLP over ``z = [v_0, w_0, ..., v_{N-1}, w_{N-1}, slacks]``."""

    def __init__(self, p0: DdPose, env: Sequence[Obstacle], cfg: PlannerConfig, dt: float, T: float, warm):
        self.p0 = np.array([p0.x, p0.y, p0.theta])
        self.env = tuple(env)
        self.cfg = cfg
        self.dt = dt
        self.T = T
        self.N = cfg.horizon
        self.n_controls = 2 * self.N
        self.n_slack = len(self.env) * self.N
        self.warm = np.asarray(warm, dtype=float)
        self._key = None
        self._roll = None

    def split(self, z):
        z = np.asarray(z, dtype=float)
        return z[: self.n_controls].reshape(self.N, 2), z[self.n_controls :]

    def rollout(self, z):
        """Poses ``p_0..p_N`` (unwrapped heading) and ``d p_k / d controls``."""
        key = np.asarray(z, dtype=float).tobytes()
        if key == self._key:
            return self._roll
        U, _ = self.split(z)
        N, dt, rate = self.N, self.dt, self.dt / self.T
        P = np.empty((N + 1, 3))
        P[0] = self.p0
        J = np.zeros((N + 1, 3, self.n_controls))
        for k in range(N):
            v, w = U[k]
            th = P[k, 2]
            c, s = math.cos(th), math.sin(th)
            P[k + 1] = P[k] + (v * c * dt, v * s * dt, w * rate)
            J[k + 1] = J[k]
            # heading of p_k depends on earlier omegas; chain through it
            J[k + 1, 0] += -v * s * dt * J[k, 2]
            J[k + 1, 1] += v * c * dt * J[k, 2]
            J[k + 1, 0, 2 * k] += c * dt
            J[k + 1, 1, 2 * k] += s * dt
            J[k + 1, 2, 2 * k + 1] += rate
        self._key, self._roll = key, (P, J)
        return P, J

    def _as_lip_rows(self, P):
        X = np.zeros((len(P), 5))
        X[:, 0], X[:, 2], X[:, 4] = P[:, 0], P[:, 1], P[:, 2]
        return X

    def objective_and_gradient(self, z):
        P, J = self.rollout(z)
        _, s = self.split(z)
        cost, gX = _cost_terms(self._as_lip_rows(P[1:]), self.cfg.goal, self.cfg.q, self.cfg.r)
        gP = gX[:, [0, 2, 4]]
        w = self.cfg.slack_penalty
        g = np.empty(self.n_controls + self.n_slack)
        g[: self.n_controls] = np.einsum("ki,kij->j", gP, J[1:])
        g[self.n_controls :] = w * (1.0 + 2.0 * s)
        return float(cost.sum() + w * (s.sum() + s @ s)), g

    def _rows(self, z):
        P, J = self.rollout(z)
        U, _ = self.split(z)
        lim, gamma = self.cfg.limits, self.cfg.cbf.gamma
        vals, jac, dcbf = [], [], []
        for k in range(self.N):
            for ob in self.env:
                h_cur = float(ob.barrier(P[k, 0], P[k, 1]))
                h_next = float(ob.barrier(P[k + 1, 0], P[k + 1, 1]))
                gx0, gy0 = ob.barrier_grad(P[k, 0], P[k, 1])
                gx1, gy1 = ob.barrier_grad(P[k + 1, 0], P[k + 1, 1])
                row = gx1 * J[k + 1, 0] + gy1 * J[k + 1, 1] + (gamma - 1.0) * (gx0 * J[k, 0] + gy0 * J[k, 1])
                dcbf.append(len(vals))
                vals.append(dcbf_residual(h_next, h_cur, gamma))
                jac.append(row)
            v, w = U[k]
            for val, col, sign in (
                (v - lim.v_x_min, 2 * k, 1.0),
                (lim.v_x_max - v, 2 * k, -1.0),
                (lim.Omega_max - w, 2 * k + 1, -1.0),
                (w + lim.Omega_max, 2 * k + 1, 1.0),
            ):
                row = np.zeros(self.n_controls)
                row[col] = sign
                vals.append(val)
                jac.append(row)
        return np.array(vals), np.array(jac).reshape(len(vals), self.n_controls), np.array(dcbf, dtype=int)

    def residuals(self, z):
        vals, _, dcbf = self._rows(z)
        _, s = self.split(z)
        vals = vals.copy()
        vals[dcbf] += s
        return vals

    def residual_jacobian(self, z):
        vals, J, dcbf = self._rows(z)
        Jz = np.zeros((len(vals), self.n_controls + self.n_slack))
        Jz[:, : self.n_controls] = J
        Jz[dcbf, self.n_controls + np.arange(self.n_slack)] = 1.0
        return Jz

    def dcbf_residuals(self, z) -> np.ndarray:
        vals, _, dcbf = self._rows(z)
        return vals[dcbf]

    def hard_violation(self, z) -> float:
        vals, _, dcbf = self._rows(z)
        mask = np.ones(len(vals), bool)
        mask[dcbf] = False
        hard = vals[mask]
        return float(max(0.0, -hard.min())) if hard.size else 0.0

    def variable_scale(self) -> np.ndarray:
        _, J = self.rollout(self.warm)
        w = np.array([2.0 * self.cfg.q, 2.0 * self.cfg.q, 2.0 * self.cfg.r])
        h = np.einsum("kij,i,kij->j", J[1:], w, J[1:])
        h = np.concatenate([h, np.full(self.n_slack, 2.0 * self.cfg.slack_penalty)])
        return np.where(h > 1.0, 1.0 / np.sqrt(np.maximum(h, 1.0)), 1.0)


def dd_assemble(
    p: DdPose,
    env: Sequence[Obstacle],
    cfg: PlannerConfig,
    params: LipParams,
    warm: Optional[DdPlan] = None,
    shift_warm: bool = True,
) -> DdProblem:
    N, T = cfg.horizon, params.step_duration
    if warm is not None and len(warm.commands) == N:
        U = np.array([(c.v, c.omega) for c in warm.commands])
        if shift_warm:
            U = np.vstack([U[1:], U[-1:]])
    else:
        U = np.tile([0.5 * (cfg.limits.v_x_min + cfg.limits.v_x_max), 0.0], (N, 1))
    n_slack = len(env) * N
    prob = DdProblem(p, env, cfg, T, T, np.concatenate([U.ravel(), np.zeros(n_slack)]))
    if n_slack:
        s0 = np.maximum(0.0, -prob.dcbf_residuals(prob.warm))
        prob = DdProblem(p, env, cfg, T, T, np.concatenate([U.ravel(), s0]))
    return prob


def dd_plan(
    p: DdPose,
    env: Sequence[Obstacle],
    cfg: PlannerConfig,
    params: LipParams,
    warm: Optional[DdPlan] = None,
    shift_warm: bool = True,
) -> DdPlan:
    """Unicycle MPC over ``cfg.horizon`` steps of length ``T``; ``env`` pre-inflated."""
    t0 = time.perf_counter()
    prob = dd_assemble(p, env, cfg, params, warm, shift_warm)
    z, status, nit = run_slsqp(prob, cfg)
    U, s = prob.split(z)
    P, _ = prob.rollout(z)
    return DdPlan(
        commands=[DdCommand(float(v), float(w)) for v, w in U],
        poses=[DdPose(*map(float, row)) for row in P[1:]],
        status=status,
        max_slack=float(s.max()) if s.size else 0.0,
        objective=prob.objective_and_gradient(z)[0],
        iterations=nit,
        wall_time=time.perf_counter() - t0,
        z=z,
    )


def deadbeat_foot_placement(
    x: LipState,
    stance: StanceFoot,
    v_des_world: tuple[float, float],
    params: LipParams,
    lateral_offset: float = 0.1,
) -> StepControl:
    """Foothold that ends the step at ``v_des_world``, shifted sideways by stance.

    The right foot lands ``lateral_offset`` to the right of the deadbeat point
    (body frame) and the left foot to the left. ``omega`` is left at zero.
    """
    fx, fy = foot_for_end_velocity(x, v_des_world, params)
    side = -1.0 if stance is StanceFoot.RIGHT else 1.0
    nx, ny = -math.sin(x.theta), math.cos(x.theta)
    return StepControl(fx + side * lateral_offset * nx, fy + side * lateral_offset * ny, 0.0)


class DdMpcPipeline:
    """Unicycle planner from the current CoM pose, tracked by deadbeat footholds.

    Each replan commands ``(v_0, w_0)``. The foothold for the next step is the
    deadbeat placement from the predicted end of the current step that reaches
    speed ``v_0`` along the heading the robot will have after turning ``w_0``.
    """

    name = "dd"

    def __init__(self, cfg: PlannerConfig, params: LipParams, lateral_offset: float = 0.1):
        self.cfg = cfg
        self.params = params
        self.lateral_offset = lateral_offset
        self.warm: Optional[DdPlan] = None
        self.last: Optional[DdPlan] = None

    def with_goal(self, goal) -> "DdMpcPipeline":
        return type(self)(replace(self.cfg, goal=(float(goal[0]), float(goal[1]))), self.params, self.lateral_offset)

    def reset(self):
        self.warm = None
        self.last = None

    def command(self, x_cur, u_cur, stance_cur, t_rem, env, new_step: bool) -> PlanStep:
        inflated = [inflate(o, self.cfg.cbf.inflation_margin) for o in env]
        pose = DdPose(x_cur.p_x, x_cur.p_y, x_cur.theta)
        # the unicycle replans from wherever the CoM is, so the warm start is never shifted
        sol = dd_plan(pose, inflated, self.cfg, self.params, self.warm, shift_warm=False)
        self.last = sol
        if sol.status is not SolveStatus.FAILED:
            self.warm = sol
        cmd = sol.commands[0]
        x0 = preprocess_state(x_cur, u_cur, t_rem, self.params)
        heading = x0.theta + cmd.omega
        v_des = (cmd.v * math.cos(heading), cmd.v * math.sin(heading))
        x_head = replace(x0, theta=heading)
        foot = deadbeat_foot_placement(x_head, stance_cur.other(), v_des, self.params, self.lateral_offset)
        control = StepControl(foot.f_x, foot.f_y, cmd.omega)
        # unicycle's view of where the CoM is after t_rem
        ahead = dd_dynamics(pose, cmd, t_rem, self.params.step_duration) if t_rem > 0 else pose
        return PlanStep(control, sol.status, sol.max_slack, (ahead.x, ahead.y), sol.wall_time)
