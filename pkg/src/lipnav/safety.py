"""Obstacle barriers, discrete CBF residuals and kinematic walking limits.

Every constraint is exposed as a residual: a value ``>= 0`` means satisfied.
Scalar helpers take :class:`LipState`/:class:`StepControl` (or raw arrays) and
return numpy vectors; :func:`constraint_bundle` evaluates the whole horizon at
once together with its analytic Jacobian.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .lip import LipState, StanceFoot, StepControl

# d^2 >= REACH_FLOOR stands in for the strict 0 < d^2.
REACH_FLOOR = 1e-4
# |w| is smoothed as sqrt(w^2 + eps^2) - eps.
ABS_SMOOTHING = 1e-6


@dataclass(frozen=True)
class Circle:
    center_x: float
    center_y: float
    radius: float

    def __post_init__(self):
        if not (self.radius > 0.0 and math.isfinite(self.radius)):
            raise ValueError(f"circle radius must be positive, got {self.radius!r}")

    @property
    def center(self) -> tuple[float, float]:
        return (self.center_x, self.center_y)

    def barrier(self, px, py):
        dx = px - self.center_x
        dy = py - self.center_y
        return dx * dx + dy * dy - self.radius * self.radius

    def barrier_grad(self, px, py):
        return 2.0 * (px - self.center_x), 2.0 * (py - self.center_y)

    def contains(self, px, py):
        """Geometric inside test (no use of the conic)."""
        return np.hypot(px - self.center_x, py - self.center_y) < self.radius


@dataclass(frozen=True)
class Ellipse:
    """Rotated ellipse; the conic coefficients are derived from the axes.

    ``rotation`` is the angle of the semi-major axis from the world x-axis.
    """

    center_x: float
    center_y: float
    semi_major: float
    semi_minor: float
    rotation: float = 0.0
    A: float = field(init=False, repr=False)
    B: float = field(init=False, repr=False)
    C: float = field(init=False, repr=False)
    D: float = field(init=False, repr=False)

    def __post_init__(self):
        coeffs = ellipse_coefficients(self.semi_major, self.semi_minor, self.rotation)
        for name, v in zip("ABCD", coeffs):
            object.__setattr__(self, name, v)

    @property
    def center(self) -> tuple[float, float]:
        return (self.center_x, self.center_y)

    def barrier(self, px, py):
        dx = px - self.center_x
        dy = py - self.center_y
        return self.A * dx * dx + self.B * dx * dy + self.C * dy * dy - self.D * self.D

    def barrier_grad(self, px, py):
        dx = px - self.center_x
        dy = py - self.center_y
        return 2.0 * self.A * dx + self.B * dy, self.B * dx + 2.0 * self.C * dy

    def contains(self, px, py):
        c, s = math.cos(self.rotation), math.sin(self.rotation)
        dx = np.asarray(px) - self.center_x
        dy = np.asarray(py) - self.center_y
        lx = c * dx + s * dy
        ly = -s * dx + c * dy
        return (lx / self.semi_major) ** 2 + (ly / self.semi_minor) ** 2 < 1.0


Obstacle = Union[Circle, Ellipse]


@dataclass(frozen=True)
class KinematicLimits:
    v_x_min: float = 0.4
    v_x_max: float = 0.8
    v_y_min: float = 0.15
    v_y_max: float = 0.35
    L_max: float = 0.3
    Omega_max: float = math.pi / 16
    alpha: float = 3.6

    def __post_init__(self):
        if not self.v_x_min <= self.v_x_max:
            raise ValueError("v_x_min must not exceed v_x_max")
        if not 0.0 < self.v_y_min <= self.v_y_max:
            raise ValueError("need 0 < v_y_min <= v_y_max")
        if self.L_max <= 0.0 or self.Omega_max <= 0.0 or self.alpha < 0.0:
            raise ValueError("L_max and Omega_max must be positive, alpha non-negative")


@dataclass(frozen=True)
class CbfConfig:
    gamma: float = 0.3
    inflation_margin: float = 0.4

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma!r}")
        if self.inflation_margin < 0.0:
            raise ValueError("inflation_margin must be non-negative")


def ellipse_coefficients(semi_major: float, semi_minor: float, rotation: float):
    """Conic ``(A, B, C, D)`` with ``A dx^2 + B dx dy + C dy^2 = D^2`` on the boundary.

    Scaling is pinned by ``D = semi_major * semi_minor``.
    """
    a, b = float(semi_major), float(semi_minor)
    if not (math.isfinite(a) and math.isfinite(b) and math.isfinite(rotation)):
        raise ValueError("ellipse parameters must be finite")
    if not a >= b > 0.0:
        raise ValueError(f"need semi_major >= semi_minor > 0, got {a!r}, {b!r}")
    c, s = math.cos(rotation), math.sin(rotation)
    a2, b2 = a * a, b * b
    A = b2 * c * c + a2 * s * s
    B = 2.0 * c * s * (b2 - a2)
    C = b2 * s * s + a2 * c * c
    return A, B, C, a * b


def barrier_value(obs: Obstacle, p) -> float:
    """Barrier of ``obs`` at point ``p``: positive outside, zero on the boundary."""
    return float(obs.barrier(float(p[0]), float(p[1])))


def inflate(obs: Obstacle, margin: float) -> Obstacle:
    if margin < 0.0:
        raise ValueError("margin must be non-negative")
    if margin == 0.0:
        return obs
    if isinstance(obs, Circle):
        return Circle(obs.center_x, obs.center_y, obs.radius + margin)
    return Ellipse(
        obs.center_x,
        obs.center_y,
        obs.semi_major + margin,
        obs.semi_minor + margin,
        obs.rotation,
    )


def dcbf_residual(h_next: float, h_cur: float, gamma: float) -> float:
    return h_next + (gamma - 1.0) * h_cur


def _as_state(x) -> np.ndarray:
    return x.to_array() if isinstance(x, LipState) else np.asarray(x, dtype=float)


def _as_control(u) -> np.ndarray:
    return u.to_array() if isinstance(u, StepControl) else np.asarray(u, dtype=float)


def _lateral_bounds(stance: StanceFoot, lim: KinematicLimits) -> tuple[float, float]:
    # Right stance ends the step drifting left (positive body-y), left stance the opposite.
    if stance is StanceFoot.RIGHT:
        return lim.v_y_min, lim.v_y_max
    return -lim.v_y_max, -lim.v_y_min


def smooth_abs(w):
    return np.sqrt(w * w + ABS_SMOOTHING**2) - ABS_SMOOTHING


def velocity_residuals(x, stance: StanceFoot, lim: KinematicLimits) -> np.ndarray:
    """Body-frame velocity box: ``[lon - min, max - lon, lat - lo, hi - lat]``."""
    return velocity_jacobian(x, stance, lim)[0]


def velocity_jacobian(x, stance: StanceFoot, lim: KinematicLimits):
    """Residuals and their derivative with respect to the 5-vector state."""
    x = _as_state(x)
    vx, vy, th = x[1], x[3], x[4]
    c, s = math.cos(th), math.sin(th)
    lon = c * vx + s * vy
    lat = -s * vx + c * vy
    lo, hi = _lateral_bounds(stance, lim)
    r = np.array([lon - lim.v_x_min, lim.v_x_max - lon, lat - lo, hi - lat])
    d_lon = np.array([0.0, c, 0.0, s, lat])  # d(lon)/d(theta) = lat
    d_lat = np.array([0.0, -s, 0.0, c, -lon])
    J = np.vstack([d_lon, -d_lon, d_lat, -d_lat])
    return r, J


def reachability_residuals(x, u, lim: KinematicLimits) -> np.ndarray:
    """``[L_max^2 - d^2, d^2 - floor]`` for the CoM-to-foot distance ``d``."""
    return reachability_jacobian(x, u, lim)[0]


def reachability_jacobian(x, u, lim: KinematicLimits):
    x, u = _as_state(x), _as_control(u)
    dx, dy = x[0] - u[0], x[2] - u[1]
    d2 = dx * dx + dy * dy
    r = np.array([lim.L_max**2 - d2, d2 - REACH_FLOOR])
    gx = np.array([2 * dx, 0.0, 2 * dy, 0.0, 0.0])
    gu = np.array([-2 * dx, -2 * dy, 0.0])
    return r, np.vstack([-gx, gx]), np.vstack([-gu, gu])


def turn_rate_residuals(u, lim: KinematicLimits) -> np.ndarray:
    w = _as_control(u)[2]
    return np.array([lim.Omega_max - w, w + lim.Omega_max])


def maneuverability_residuals(x, u, lim: KinematicLimits, bounds=None) -> np.ndarray:
    """Turn/speed coupling ``v_min <= (alpha/pi)|w| + v_long <= v_max``.

    ``bounds`` overrides ``(v_min, v_max)``.
    """
    return maneuverability_jacobian(x, u, lim, bounds)[0]


def maneuverability_jacobian(x, u, lim: KinematicLimits, bounds=None):
    x, u = _as_state(x), _as_control(u)
    lo, hi = (lim.v_x_min, lim.v_x_max) if bounds is None else bounds
    vx, vy, th, w = x[1], x[3], x[4], u[2]
    c, s = math.cos(th), math.sin(th)
    k = lim.alpha / math.pi
    m = k * float(smooth_abs(w)) + c * vx + s * vy
    dm_dx = np.array([0.0, c, 0.0, s, -s * vx + c * vy])
    dm_du = np.array([0.0, 0.0, k * w / math.sqrt(w * w + ABS_SMOOTHING**2)])
    r = np.array([hi - m, m - lo])
    return r, np.vstack([-dm_dx, dm_dx]), np.vstack([-dm_du, dm_du])


@dataclass(frozen=True)
class ConstraintValues:
    """Stacked residuals over a horizon.

    ``jacobian`` is taken with respect to ``[x_1..x_N, u_0..u_{N-1}]`` flattened
    row-major (``5N + 3N`` columns). ``kinds`` labels each row and ``step``
    gives the horizon index ``k`` it belongs to.
    """

    values: np.ndarray
    jacobian: np.ndarray
    kinds: np.ndarray
    step: np.ndarray

    @property
    def dcbf_rows(self) -> np.ndarray:
        return np.flatnonzero(self.kinds == "dcbf")


def _rows_per_step(n_obs: int, maneuverability: bool) -> list[str]:
    kinds = ["dcbf"] * n_obs + ["reach"] * 2 + ["turn"] * 2
    if maneuverability:
        kinds += ["maneuver"] * 2
    return kinds + ["velocity"] * 4


def constraint_bundle(
    states,
    controls,
    x0,
    stance0: StanceFoot,
    env: Sequence[Obstacle],
    lim: KinematicLimits,
    cbf: CbfConfig,
    maneuverability: bool = True,
) -> ConstraintValues:
    """All safety residuals of an N-step plan.

    For each step ``k``: a DCBF row per obstacle on ``(x_k, x_{k+1})``, leg
    reachability and turn/speed coupling on ``(x_k, u_k)``, the turn-rate box on
    ``u_k`` and the body-frame velocity box on ``x_{k+1}`` with the stance of
    step ``k`` (alternating from ``stance0``).

    ``x_0`` is not a decision quantity, so at ``k = 0`` the coupling bounds are
    widened to include the current longitudinal speed. This keeps the row
    satisfiable when starting from rest or after a disturbance.
    """
    X = np.atleast_2d(np.asarray([_as_state(s) for s in states], dtype=float))
    U = np.atleast_2d(np.asarray([_as_control(u) for u in controls], dtype=float))
    N = len(U)
    if N == 0 or len(X) != N:
        raise ValueError(f"need N >= 1 states and controls, got {len(X)} and {N}")
    x0 = _as_state(x0)
    full = np.vstack([x0, X])  # x_0..x_N
    gamma = cbf.gamma
    n_obs = len(env)

    per = _rows_per_step(n_obs, maneuverability)
    R = len(per)
    nz = 8 * N
    vals = np.empty(N * R)
    J = np.zeros((N * R, nz))

    def xcol(k):  # column slice of x_k, k >= 1
        return slice(5 * (k - 1), 5 * k)

    def ucol(k):
        return slice(5 * N + 3 * k, 5 * N + 3 * k + 3)

    # barrier values and gradients for every state and obstacle at once
    px, py = full[:, 0], full[:, 2]
    H = np.empty((n_obs, N + 1))
    Gx = np.empty((n_obs, N + 1))
    Gy = np.empty((n_obs, N + 1))
    for j, ob in enumerate(env):
        H[j] = ob.barrier(px, py)
        Gx[j], Gy[j] = ob.barrier_grad(px, py)

    v_long0 = math.cos(x0[4]) * x0[1] + math.sin(x0[4]) * x0[3]
    row = 0
    for k in range(N):
        xk, xn, uk = full[k], full[k + 1], U[k]
        if n_obs:
            rs = slice(row, row + n_obs)
            vals[rs] = H[:, k + 1] + (gamma - 1.0) * H[:, k]
            c = xcol(k + 1)
            J[rs, c.start] = Gx[:, k + 1]
            J[rs, c.start + 2] = Gy[:, k + 1]
            if k > 0:
                c = xcol(k)
                J[rs, c.start] = (gamma - 1.0) * Gx[:, k]
                J[rs, c.start + 2] = (gamma - 1.0) * Gy[:, k]
            row += n_obs

        r, jx, ju = reachability_jacobian(xk, uk, lim)
        vals[row : row + 2] = r
        if k > 0:
            J[row : row + 2, xcol(k)] = jx
        J[row : row + 2, ucol(k)] = ju
        row += 2

        vals[row : row + 2] = turn_rate_residuals(uk, lim)
        J[row, ucol(k).start + 2] = -1.0
        J[row + 1, ucol(k).start + 2] = 1.0
        row += 2

        if maneuverability:
            bounds = None
            if k == 0:
                bounds = (min(lim.v_x_min, v_long0), max(lim.v_x_max, v_long0))
            r, jx, ju = maneuverability_jacobian(xk, uk, lim, bounds)
            vals[row : row + 2] = r
            if k > 0:
                J[row : row + 2, xcol(k)] = jx
            J[row : row + 2, ucol(k)] = ju
            row += 2

        r, jx = velocity_jacobian(xn, stance0.after(k), lim)
        vals[row : row + 4] = r
        J[row : row + 4, xcol(k + 1)] = jx
        row += 4

    kinds = np.array(per * N)
    step = np.repeat(np.arange(N), R)
    return ConstraintValues(vals, J, kinds, step)
