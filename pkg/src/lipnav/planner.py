"""N-step LIP model-predictive planner with discrete CBF obstacle avoidance.

The dynamics are linear, so states are eliminated by forward substitution and
the nonlinear program is posed over the ``3N`` step controls plus one slack per
DCBF row. Kinematic rows are hard; DCBF rows are softened by non-negative
slacks with an exact (linear plus quadratic) penalty so a foothold is always
produced and slacks stay at zero whenever the DCBF rows can be met.
"""

from __future__ import annotations

import enum
import functools
import math
import time
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from .lip import (
    LipParams,
    LipState,
    StanceFoot,
    StepControl,
    foot_for_end_velocity,
    integrate_within_step,
    step_matrices,
    wrap_angle,
    wrap_angles,
)
from .safety import CbfConfig, KinematicLimits, Obstacle, constraint_bundle, inflate


class SolveStatus(str, enum.Enum):
    OPTIMAL = "Optimal"
    SLACK_RELAXED = "SlackRelaxed"
    MAX_ITERATIONS = "MaxIterations"
    FAILED = "Failed"


@dataclass(frozen=True)
class PlannerConfig:
    horizon: int = 3
    q: float = 1.0
    r: float = 50.0
    limits: KinematicLimits = field(default_factory=KinematicLimits)
    cbf: CbfConfig = field(default_factory=CbfConfig)
    goal: tuple[float, float] = (10.0, 10.0)
    feasibility_tol: float = 1e-6
    optimality_tol: float = 1e-6
    max_iterations: int = 100
    slack_penalty: float = 1e4
    # False drops the turn/speed coupling rows (ablation)
    maneuverability: bool = True
    # barrier samples per step between footholds (0 = step boundaries only)
    substeps: int = 8

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.q < 0 or self.r < 0:
            raise ValueError("stage weights must be non-negative")
        if min(self.feasibility_tol, self.optimality_tol) <= 0 or self.max_iterations < 1:
            raise ValueError("solver tolerances and iteration cap must be positive")
        if self.slack_penalty <= 0:
            raise ValueError("slack_penalty must be positive")
        if self.substeps < 0:
            raise ValueError("substeps must be >= 0")


def heading_goal(x, goal) -> float:
    """Direction from the CoM to the goal; falls back to the current heading at the goal."""
    px, py, th = (x.p_x, x.p_y, x.theta) if isinstance(x, LipState) else (x[0], x[2], x[4])
    dx, dy = goal[0] - px, goal[1] - py
    if math.hypot(dx, dy) < 1e-9:
        return wrap_angle(th)
    return math.atan2(dy, dx)


def _cost_terms(X: np.ndarray, goal, q: float, r: float):
    """Vectorised stage cost over rows of ``X`` and its gradient w.r.t. each row."""
    dx = X[:, 0] - goal[0]
    dy = X[:, 2] - goal[1]
    d2 = dx * dx + dy * dy
    at_goal = d2 < 1e-18
    safe = np.where(at_goal, 1.0, d2)
    th_goal = np.where(at_goal, X[:, 4], np.arctan2(-dy, -dx))
    e = wrap_angles(X[:, 4] - th_goal)
    cost = q * d2 + r * e * e
    grad = np.zeros_like(X)
    tg = np.where(at_goal, 0.0, 2.0 * r * e / safe)
    grad[:, 0] = 2.0 * q * dx + tg * dy
    grad[:, 2] = 2.0 * q * dy - tg * dx
    grad[:, 4] = 2.0 * r * e
    return cost, grad


def stage_cost(x, goal, q: float, r: float) -> float:
    """Squared goal distance plus squared heading error toward the goal."""
    X = np.atleast_2d(x.to_array() if isinstance(x, LipState) else np.asarray(x, float))
    return float(_cost_terms(X, goal, q, r)[0][0])


def stage_cost_gradient(x, goal, q: float, r: float) -> np.ndarray:
    X = np.atleast_2d(x.to_array() if isinstance(x, LipState) else np.asarray(x, float))
    return _cost_terms(X, goal, q, r)[1][0]


@functools.lru_cache(maxsize=32)
def _shooting_matrices(params: LipParams, N: int):
    """``X = Phi @ x0 + Gamma @ u`` for stacked states ``x_1..x_N``."""
    m = step_matrices(params)
    Phi = np.zeros((5 * N, 5))
    Gamma = np.zeros((5 * N, 3 * N))
    powers = [np.eye(5)]
    for _ in range(N):
        powers.append(m.A @ powers[-1])
    for k in range(1, N + 1):
        Phi[5 * (k - 1) : 5 * k] = powers[k]
        for j in range(k):
            Gamma[5 * (k - 1) : 5 * k, 3 * j : 3 * j + 3] = powers[k - 1 - j] @ m.B
    Phi.setflags(write=False)
    Gamma.setflags(write=False)
    return Phi, Gamma


@functools.lru_cache(maxsize=32)
def _substep_matrices(params: LipParams, N: int, S: int):
    """CoM positions strictly inside each step as affine maps of ``[x_0, u]``.

    Row ``k * (S - 1) + j - 1`` is the position ``j T / S`` into step ``k``.
    Returns ``(Mx, My)`` of shape ``(N (S - 1), 5 + 3N)``.
    """
    Phi, Gamma = _shooting_matrices(params, N)
    # x_k as a map of [x0, u], k = 0..N-1
    maps = [np.hstack([np.eye(5), np.zeros((5, 3 * N))])]
    for k in range(1, N):
        maps.append(np.hstack([Phi[5 * (k - 1) : 5 * k], Gamma[5 * (k - 1) : 5 * k]]))
    b = params.beta
    n = N * max(S - 1, 0)
    Mx = np.zeros((n, 5 + 3 * N))
    My = np.zeros((n, 5 + 3 * N))
    row = 0
    for k in range(N):
        for j in range(1, S):
            t = j * params.step_duration / S
            c, sh = math.cosh(b * t), math.sinh(b * t)
            Mx[row] = c * maps[k][0] + sh / b * maps[k][1]
            My[row] = c * maps[k][2] + sh / b * maps[k][3]
            Mx[row, 5 + 3 * k] += 1.0 - c
            My[row, 5 + 3 * k + 1] += 1.0 - c
            row += 1
    for m in (Mx, My):
        m.setflags(write=False)
    return Mx, My


def rollout(x0: LipState, controls, params: LipParams) -> np.ndarray:
    """Unwrapped ``(N, 5)`` array of ``x_1..x_N`` under the step map."""
    U = np.asarray([u.to_array() if isinstance(u, StepControl) else u for u in controls], float)
    Phi, Gamma = _shooting_matrices(params, len(U))
    return (Phi @ x0.to_array() + Gamma @ U.ravel()).reshape(-1, 5)


@dataclass
class NlpSolution:
    controls: list[StepControl]
    states: list[LipState]
    status: SolveStatus
    max_slack: float
    objective: float
    iterations: int
    wall_time: float
    z: np.ndarray = field(repr=False)

    @property
    def first(self) -> StepControl:
        return self.controls[0]


class NlpProblem:
    """Single-shooting NLP over ``z = [u_0..u_{N-1}, slacks]``."""

    def __init__(
        self,
        x0: LipState,
        stance0: StanceFoot,
        env: Sequence[Obstacle],
        cfg: PlannerConfig,
        params: LipParams,
        warm: np.ndarray,
    ):
        self.x0 = x0
        self.stance0 = stance0
        self.env = tuple(env)
        self.cfg = cfg
        self.params = params
        self.N = cfg.horizon
        self.n_controls = 3 * self.N
        self.n_slack = len(self.env) * self.N
        self.Phi, self.Gamma = _shooting_matrices(params, self.N)
        self._free = self.Phi @ x0.to_array()
        S = cfg.substeps if self.env else 0
        self.n_sub = max(S - 1, 0)
        if self.n_sub:
            Mx, My = _substep_matrices(params, self.N, S)
            xa = x0.to_array()
            self._sub = (Mx[:, :5] @ xa, Mx[:, 5:], My[:, :5] @ xa, My[:, 5:])
        self.warm = np.asarray(warm, dtype=float)
        if self.warm.shape != (self.n_controls + self.n_slack,):
            raise ValueError("warm start has the wrong dimension")
        self._cache_key = None
        self._cache = None

    @property
    def dimension(self) -> int:
        return self.n_controls + self.n_slack

    def split(self, z):
        z = np.asarray(z, dtype=float)
        return z[: self.n_controls].reshape(self.N, 3), z[self.n_controls :]

    def states(self, z) -> np.ndarray:
        U, _ = self.split(z)
        return (self._free + self.Gamma @ U.ravel()).reshape(self.N, 5)

    def _bundle(self, z):
        key = np.asarray(z, dtype=float).tobytes()
        if key != self._cache_key:
            U, _ = self.split(z)
            X = self.states(z)
            b = constraint_bundle(
                X,
                U,
                self.x0.to_array(),
                self.stance0,
                self.env,
                self.cfg.limits,
                self.cfg.cbf,
                maneuverability=self.cfg.maneuverability,
            )
            self._cache_key, self._cache = key, b
        return self._cache

    def objective(self, z) -> float:
        return self.objective_and_gradient(z)[0]

    def objective_and_gradient(self, z):
        _, s = self.split(z)
        X = self.states(z)
        cost, gX = _cost_terms(X, self.cfg.goal, self.cfg.q, self.cfg.r)
        w = self.cfg.slack_penalty
        # linear + quadratic: exact for small multipliers, strictly convex in s
        f = float(cost.sum() + w * (s.sum() + s @ s))
        g = np.empty(self.dimension)
        g[: self.n_controls] = self.Gamma.T @ gX.ravel()
        g[self.n_controls :] = w * (1.0 + 2.0 * s)
        return f, g

    def substep_barriers(self, z):
        """Barrier values ``(n_obs, N, S - 1)`` between footholds and their control gradients."""
        U, _ = self.split(z)
        u = U.ravel()
        ax, Lx, ay, Ly = self._sub
        px, py = ax + Lx @ u, ay + Ly @ u
        n_obs = len(self.env)
        H = np.empty((n_obs, len(px)))
        G = np.empty((n_obs, len(px), self.n_controls))
        for j, ob in enumerate(self.env):
            H[j] = ob.barrier(px, py)
            gx, gy = ob.barrier_grad(px, py)
            G[j] = gx[:, None] * Lx + gy[:, None] * Ly
        return H.reshape(n_obs, self.N, self.n_sub), G.reshape(n_obs, self.N, self.n_sub, self.n_controls)

    def _slack_index(self):
        # slack of (step k, obstacle j) sits at k * n_obs + j, matching the DCBF row order
        n_obs = len(self.env)
        return (np.arange(self.N)[None, :, None] * n_obs + np.arange(n_obs)[:, None, None]) + np.zeros(
            (1, 1, self.n_sub), dtype=int
        )

    def _kept_rows(self, b) -> np.ndarray:
        """Bundle rows handed to the solver.

        For k >= 1 the coupling row (alpha/pi)|w_k| + v_long(x_k) <= v_max
        implies the velocity row v_long(x_k) <= v_max of step k - 1, and that
        step's v_long(x_k) >= v_min implies the coupling lower row. At w = 0
        the pairs coincide and make the active set rank deficient, so the
        implied rows are left out; the feasible set is unchanged.
        """
        keep = np.ones(len(b.values), dtype=bool)
        if self.cfg.maneuverability:
            for k in range(1, self.N):
                keep[np.flatnonzero((b.kinds == "maneuver") & (b.step == k))[1]] = False
                keep[np.flatnonzero((b.kinds == "velocity") & (b.step == k - 1))[1]] = False
        return keep

    def residuals(self, z) -> np.ndarray:
        """Hard-form residuals with slacks added to the DCBF and in-step barrier rows."""
        b = self._bundle(z)
        _, s = self.split(z)
        vals = b.values.copy()
        vals[b.dcbf_rows] += s
        vals = vals[self._kept_rows(b)]
        if self.n_sub:
            H, _ = self.substep_barriers(z)
            vals = np.concatenate([vals, (H + s[self._slack_index()]).ravel()])
        return vals

    def residual_jacobian(self, z) -> np.ndarray:
        b = self._bundle(z)
        nx = 5 * self.N
        Jz = np.zeros((len(b.values), self.dimension))
        Jz[:, : self.n_controls] = b.jacobian[:, :nx] @ self.Gamma + b.jacobian[:, nx:]
        Jz[b.dcbf_rows, self.n_controls + np.arange(self.n_slack)] = 1.0
        Jz = Jz[self._kept_rows(b)]
        if self.n_sub:
            _, G = self.substep_barriers(z)
            Js = np.zeros((G[..., 0].size, self.dimension))
            Js[:, : self.n_controls] = G.reshape(-1, self.n_controls)
            Js[np.arange(len(Js)), self.n_controls + self._slack_index().ravel()] = 1.0
            Jz = np.vstack([Jz, Js])
        return Jz

    def soft_violation(self, z) -> np.ndarray:
        """Per-slack shortfall of the unslackened soft rows (DCBF and in-step barrier)."""
        b = self._bundle(z)
        need = np.maximum(0.0, -b.values[b.dcbf_rows])
        if self.n_sub:
            H, _ = self.substep_barriers(z)
            need = np.maximum(need, np.maximum(0.0, -H.min(axis=2)).T.ravel())
        return need

    def raw_constraints(self, z):
        """Unslackened bundle at ``z``."""
        return self._bundle(z)

    def variable_scale(self) -> np.ndarray:
        """Diagonal scaling from the Gauss-Newton Hessian of the objective."""
        w = np.zeros(5 * self.N)
        w[0::5] = w[2::5] = 2.0 * self.cfg.q
        w[4::5] = 2.0 * self.cfg.r
        h = np.einsum("ij,i,ij->j", self.Gamma, w, self.Gamma)
        h = np.concatenate([h, np.full(self.n_slack, 2.0 * self.cfg.slack_penalty)])
        return np.where(h > 1.0, 1.0 / np.sqrt(np.maximum(h, 1.0)), 1.0)

    def hard_violation(self, z) -> float:
        """Largest violation among non-DCBF rows (0 when all hold)."""
        b = self._bundle(z)
        hard = b.values[b.kinds != "dcbf"]
        return float(max(0.0, -hard.min())) if hard.size else 0.0


def preprocess_state(x_cur: LipState, u_cur: StepControl, t_rem: float, params: LipParams) -> LipState:
    """Predict the end-of-step state that seeds the horizon."""
    return integrate_within_step(x_cur, u_cur.foot, u_cur.omega, t_rem, params)


def _cruise_foot(x: np.ndarray, stance: StanceFoot, cfg: PlannerConfig, params: LipParams):
    """Deadbeat foothold to a mid-range body velocity, pulled inside the reach limit."""
    lim = cfg.limits
    c, s = math.cos(x[4]), math.sin(x[4])
    v_lon = 0.5 * (lim.v_x_min + lim.v_x_max)
    v_lat = 0.5 * (lim.v_y_min + lim.v_y_max)
    lat = v_lat if stance is StanceFoot.RIGHT else -v_lat
    v_des = (c * v_lon - s * lat, s * v_lon + c * lat)
    fx, fy = foot_for_end_velocity(LipState.from_array(x), v_des, params)
    d = np.array([fx - x[0], fy - x[2]])
    n = float(np.hypot(*d))
    reach = 0.95 * lim.L_max
    if n > reach:
        d *= reach / n
    return x[0] + d[0], x[2] + d[1]


def _default_controls(x0: LipState, stance0: StanceFoot, cfg: PlannerConfig, params: LipParams) -> np.ndarray:
    """Straight-ahead cruise guess: mid-range body velocity, no turning."""
    m = step_matrices(params)
    x = x0.to_array()
    U = np.zeros((cfg.horizon, 3))
    for k in range(cfg.horizon):
        U[k, :2] = _cruise_foot(x, stance0.after(k), cfg, params)
        x = m.A @ x + m.B @ U[k]
    return U


def _shifted_controls(prev: np.ndarray, x0: LipState, stance0: StanceFoot, cfg: PlannerConfig, params: LipParams):
    """Drop the first control and repeat the last turn increment.

    A world-frame foothold cannot simply be repeated (the CoM has moved on),
    so the appended foothold is re-derived from the cruise rule.
    """
    N = cfg.horizon
    U = np.vstack([prev[1:], prev[-1:]])
    X = rollout(x0, U[:-1], params) if N > 1 else np.empty((0, 5))
    x_last = X[-1] if N > 1 else x0.to_array()
    U[-1, :2] = _cruise_foot(x_last, stance0.after(N - 1), cfg, params)
    return U


def assemble(
    x0: LipState,
    stance0: StanceFoot,
    env: Sequence[Obstacle],
    cfg: PlannerConfig,
    params: LipParams,
    warm: Optional[NlpSolution] = None,
    shift_warm: bool = True,
) -> NlpProblem:
    """Build the NLP for a horizon starting at ``x0`` with ``stance0`` on step 0.

    ``env`` must already be inflated. A previous solution is shifted by one
    step unless ``shift_warm`` is False, which is the
    right choice when replanning inside the same step.
    """
    N = cfg.horizon
    if warm is not None and len(warm.controls) == N:
        U = np.array([u.to_array() for u in warm.controls])
        if shift_warm:
            U = _shifted_controls(U, x0, stance0, cfg, params)
    else:
        U = _default_controls(x0, stance0, cfg, params)
    n_slack = len(env) * N
    prob = NlpProblem(x0, stance0, env, cfg, params, np.concatenate([U.ravel(), np.zeros(n_slack)]))
    if n_slack:
        s0 = prob.soft_violation(prob.warm)
        prob = NlpProblem(x0, stance0, env, cfg, params, np.concatenate([U.ravel(), s0]))
    return prob


def _solution(prob: NlpProblem, z, status, it, t0) -> NlpSolution:
    U, s = prob.split(z)
    X = prob.states(z)
    return NlpSolution(
        controls=[StepControl.from_array(u) for u in U],
        states=[LipState.from_array(x) for x in X],
        status=status,
        max_slack=float(s.max()) if s.size else 0.0,
        objective=prob.objective(z),
        iterations=it,
        wall_time=time.perf_counter() - t0,
        z=np.array(z, dtype=float),
    )


# SLSQP stops once one iteration changes the objective by less than ftol,
# which can happen early in flat valleys. A converged solve is refined from its
# own answer with a much smaller ftol and a short iteration budget.
_REFINE_FTOL = 1e-3
_REFINE_ITERATIONS = 20


def run_slsqp(prob, cfg: PlannerConfig, ftol_scale: float = 1.0, max_iterations: Optional[int] = None):
    """Drive SLSQP on any slack-augmented problem; returns ``(z, status, iterations)``.

    ``prob`` supplies ``warm``, ``n_controls``, ``n_slack``, ``variable_scale()``,
    ``objective_and_gradient``, ``residuals``, ``residual_jacobian``,
    ``hard_violation`` and ``split``. The search runs in diagonally scaled
    variables. When the solver does not converge the best iterate seen
    (smallest hard violation, then lowest objective) is returned.
    """
    D = prob.variable_scale()
    bounds = [(None, None)] * prob.n_controls + [(0.0, None)] * prob.n_slack
    iterates = [prob.warm.copy()]

    def merit(z):
        f = prob.objective_and_gradient(z)[0]
        if not math.isfinite(f):
            return (math.inf, math.inf)
        return (round(prob.hard_violation(z), 9), f)

    f0 = prob.objective_and_gradient(prob.warm)[0]
    # sqrt keeps SLSQP's relative tolerance meaningful for large costs
    fs = 1.0 / math.sqrt(max(1.0, abs(f0))) if math.isfinite(f0) else 1.0

    def fun(y):
        f, g = prob.objective_and_gradient(D * y)
        if not math.isfinite(f):
            raise FloatingPointError("objective is not finite")
        return fs * f, fs * D * g

    try:
        res = minimize(
            fun,
            prob.warm / D,
            jac=True,
            method="SLSQP",
            bounds=bounds,
            constraints=[
                {
                    "type": "ineq",
                    "fun": lambda y: prob.residuals(D * y),
                    "jac": lambda y: prob.residual_jacobian(D * y) * D,
                }
            ],
            callback=lambda yk: iterates.append(D * np.asarray(yk, dtype=float)),
            # ftol is absolute on the scaled objective
            options={"maxiter": max_iterations or cfg.max_iterations, "ftol": ftol_scale * cfg.optimality_tol * fs},
        )
    except (FloatingPointError, ValueError, np.linalg.LinAlgError):
        return min(iterates, key=merit), SolveStatus.FAILED, len(iterates) - 1

    z = D * np.asarray(res.x, dtype=float)
    if not np.all(np.isfinite(z)) or not math.isfinite(prob.objective_and_gradient(z)[0]):
        return min(iterates, key=merit), SolveStatus.FAILED, res.nit

    tol = cfg.feasibility_tol
    if res.status == 0 and prob.hard_violation(z) <= tol:
        _, s = prob.split(z)
        relaxed = s.size and s.max() > tol
        return z, (SolveStatus.SLACK_RELAXED if relaxed else SolveStatus.OPTIMAL), res.nit

    status = SolveStatus.MAX_ITERATIONS if res.status == 9 else SolveStatus.FAILED
    return min(iterates + [z], key=merit), status, res.nit


def _rank(status: SolveStatus) -> int:
    return [SolveStatus.OPTIMAL, SolveStatus.SLACK_RELAXED, SolveStatus.MAX_ITERATIONS, SolveStatus.FAILED].index(status)


def solve(prob: NlpProblem, cfg: PlannerConfig) -> NlpSolution:
    """Solve the LIP horizon problem with SLSQP and classify the outcome.

    A warm-started run that fails or hits the iteration cap is retried once
    from the default guess; the better-classified result is kept.
    """
    t0 = time.perf_counter()
    z, status, nit = run_slsqp(prob, cfg)
    if status in (SolveStatus.FAILED, SolveStatus.MAX_ITERATIONS):
        cold = assemble(prob.x0, prob.stance0, prob.env, cfg, prob.params)
        if not np.array_equal(cold.warm, prob.warm):
            z2, status2, nit2 = run_slsqp(cold, cfg)
            if _rank(status2) < _rank(status):
                z, status, nit = z2, status2, nit + nit2
    if status in (SolveStatus.OPTIMAL, SolveStatus.SLACK_RELAXED):
        fine = NlpProblem(prob.x0, prob.stance0, prob.env, cfg, prob.params, z)
        z2, status2, nit2 = run_slsqp(fine, cfg, _REFINE_FTOL, _REFINE_ITERATIONS)
        nit += nit2
        if status2 is status and prob.objective(z2) < prob.objective(z):
            z = z2
    return _solution(prob, z, status, nit, t0)


def plan(
    x_cur: LipState,
    u_cur: StepControl,
    stance_cur: StanceFoot,
    t_rem: float,
    env: Sequence[Obstacle],
    cfg: PlannerConfig,
    params: LipParams,
    warm: Optional[NlpSolution] = None,
    shift_warm: bool = True,
) -> NlpSolution:
    """Preprocess, inflate, assemble and solve; ``controls[0]`` is the next foothold.

    ``env`` holds true obstacle geometry. The planned step 0 lands the foot that
    is currently swinging, so its stance is the opposite of ``stance_cur``.
    """
    x0 = preprocess_state(x_cur, u_cur, t_rem, params)
    inflated = [inflate(o, cfg.cbf.inflation_margin) for o in env]
    prob = assemble(x0, stance_cur.other(), inflated, cfg, params, warm, shift_warm)
    sol = solve(prob, cfg)
    # the rest of the current step is already fixed; a plan that starts inside
    # the inflated set cannot be reported as meeting its safety rows
    short = -committed_clearance(x_cur, u_cur, t_rem, inflated, params, cfg.substeps)
    if short > cfg.feasibility_tol and sol.status is SolveStatus.OPTIMAL:
        sol.status = SolveStatus.SLACK_RELAXED
    if short > sol.max_slack:
        sol.max_slack = short
    return sol


def committed_clearance(x_cur, u_cur, t_rem, env, params: LipParams, substeps: int = 8) -> float:
    """Smallest barrier value on the remaining, already committed part of the step.

    Samples ``x_cur`` and then every ``T / substeps`` up to the end of the step.
    """
    if not env:
        return math.inf
    T = params.step_duration
    n = max(1, int(math.ceil(t_rem / T * max(substeps, 1) - 1e-9)))
    ts = np.linspace(0.0, t_rem, n + 1)
    pts = [x_cur.position] + [
        integrate_within_step(x_cur, u_cur.foot, u_cur.omega, float(t), params).position for t in ts[1:]
    ]
    P = np.array(pts)
    return float(min(np.min(o.barrier(P[:, 0], P[:, 1])) for o in env))


@dataclass(frozen=True)
class PlanStep:
    """What a receding-horizon planner hands to the walker on each replan.

    ``predicted_boundary`` is the planner's own prediction of the CoM position
    at the end of the current step.
    """

    control: StepControl
    status: SolveStatus
    max_slack: float
    predicted_boundary: tuple[float, float]
    wall_time: float


class LipMpcPlanner:
    """Receding-horizon LIP-MPC that keeps its warm start between calls."""

    name = "lip"

    def __init__(self, cfg: PlannerConfig, params: LipParams):
        self.cfg = cfg
        self.params = params
        self.warm: Optional[NlpSolution] = None
        self.last: Optional[NlpSolution] = None

    def with_goal(self, goal) -> "LipMpcPlanner":
        return type(self)(replace(self.cfg, goal=(float(goal[0]), float(goal[1]))), self.params)

    def reset(self):
        self.warm = None
        self.last = None

    def command(self, x_cur, u_cur, stance_cur, t_rem, env, new_step: bool) -> PlanStep:
        """Replan; ``new_step`` is True on the first call after a foot touchdown."""
        sol = plan(x_cur, u_cur, stance_cur, t_rem, env, self.cfg, self.params, self.warm, new_step)
        self.last = sol
        if sol.status is not SolveStatus.FAILED:
            self.warm = sol
        x0 = preprocess_state(x_cur, u_cur, t_rem, self.params)
        return PlanStep(sol.first, sol.status, sol.max_slack, x0.position, sol.wall_time)
