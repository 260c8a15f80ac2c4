"""3D linear inverted pendulum with a heading state.

State layout is ``[p_x, v_x, p_y, v_y, theta]`` in the fixed world frame and
the step control is ``[f_x, f_y, omega]``: the stance-foot position held for
the whole step and the heading increment applied over that step.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np


def wrap_angle(angle: float) -> float:
    """Map an angle to (-pi, pi]."""
    a = math.fmod(angle + math.pi, 2.0 * math.pi)
    if a <= 0.0:
        a += 2.0 * math.pi
    return a - math.pi


def wrap_angles(angles: np.ndarray) -> np.ndarray:
    """Vectorised :func:`wrap_angle`."""
    a = np.fmod(np.asarray(angles, dtype=float) + np.pi, 2.0 * np.pi)
    a = np.where(a <= 0.0, a + 2.0 * np.pi, a)
    return a - np.pi


@dataclass(frozen=True)
class LipParams:
    com_height: float = 1.0
    gravity: float = 9.81
    step_duration: float = 0.4
    beta: float = field(init=False)

    def __post_init__(self):
        for name in ("com_height", "gravity", "step_duration"):
            v = getattr(self, name)
            if not math.isfinite(v) or v <= 0.0:
                raise ValueError(f"{name} must be finite and positive, got {v!r}")
        object.__setattr__(self, "beta", math.sqrt(self.gravity / self.com_height))


@dataclass(frozen=True)
class LipState:
    p_x: float
    v_x: float
    p_y: float
    v_y: float
    theta: float = 0.0

    def __post_init__(self):
        vals = (self.p_x, self.v_x, self.p_y, self.v_y, self.theta)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"non-finite LIP state {vals}")
        object.__setattr__(self, "theta", wrap_angle(float(self.theta)))

    @classmethod
    def from_array(cls, a) -> "LipState":
        a = np.asarray(a, dtype=float)
        return cls(float(a[0]), float(a[1]), float(a[2]), float(a[3]), float(a[4]))

    def to_array(self) -> np.ndarray:
        return np.array([self.p_x, self.v_x, self.p_y, self.v_y, self.theta])

    @property
    def position(self) -> tuple[float, float]:
        return (self.p_x, self.p_y)

    @property
    def velocity(self) -> tuple[float, float]:
        return (self.v_x, self.v_y)


@dataclass(frozen=True)
class StepControl:
    f_x: float
    f_y: float
    omega: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.f_x, self.f_y, self.omega)):
            raise ValueError(f"non-finite step control {(self.f_x, self.f_y, self.omega)}")

    @classmethod
    def from_array(cls, a) -> "StepControl":
        a = np.asarray(a, dtype=float)
        return cls(float(a[0]), float(a[1]), float(a[2]))

    def to_array(self) -> np.ndarray:
        return np.array([self.f_x, self.f_y, self.omega])

    @property
    def foot(self) -> tuple[float, float]:
        return (self.f_x, self.f_y)


class StanceFoot(enum.Enum):
    LEFT = "left"
    RIGHT = "right"

    def other(self) -> "StanceFoot":
        return StanceFoot.LEFT if self is StanceFoot.RIGHT else StanceFoot.RIGHT

    def after(self, steps: int) -> "StanceFoot":
        """Stance foot ``steps`` completed steps later."""
        return self if steps % 2 == 0 else self.other()


@dataclass(frozen=True)
class StepMatrices:
    A_d: np.ndarray  # 2x2
    B_d: np.ndarray  # 2x1
    A: np.ndarray  # 5x5
    B: np.ndarray  # 5x3


def step_matrices(params: LipParams, duration: float | None = None) -> StepMatrices:
    """Closed-form flow of the pendulum over ``duration`` (defaults to one step).

    The heading entries are the unit blocks of the full step; for a partial
    step the caller scales omega itself.
    """
    t = params.step_duration if duration is None else float(duration)
    if not math.isfinite(t) or t < 0.0:
        raise ValueError(f"duration must be finite and >= 0, got {duration!r}")
    b = params.beta
    c, s = math.cosh(b * t), math.sinh(b * t)
    A_d = np.array([[c, s / b], [b * s, c]])
    B_d = np.array([[1.0 - c], [-b * s]])

    A = np.zeros((5, 5))
    A[0:2, 0:2] = A_d
    A[2:4, 2:4] = A_d
    A[4, 4] = 1.0
    B = np.zeros((5, 3))
    B[0:2, 0:1] = B_d
    B[2:4, 1:2] = B_d
    B[4, 2] = 1.0
    for m in (A_d, B_d, A, B):
        m.setflags(write=False)
    return StepMatrices(A_d, B_d, A, B)


def _advance(x: np.ndarray, foot, omega: float, t: float, params: LipParams) -> np.ndarray:
    b = params.beta
    c, s = math.cosh(b * t), math.sinh(b * t)
    out = np.empty(5)
    for i, f in ((0, foot[0]), (2, foot[1])):
        dp = x[i] - f
        out[i] = f + c * dp + s / b * x[i + 1]
        out[i + 1] = b * s * dp + c * x[i + 1]
    out[4] = wrap_angle(x[4] + omega * (t / params.step_duration))
    return out


def step_dynamics(x: LipState, u: StepControl, params: LipParams) -> LipState:
    """End-of-step state after one full step on foot ``u``."""
    m = step_matrices(params)
    nxt = m.A @ x.to_array() + m.B @ u.to_array()
    return LipState.from_array(nxt)


def integrate_within_step(
    x: LipState,
    stance_foot_pos: tuple[float, float],
    omega: float,
    t_rem: float,
    params: LipParams,
) -> LipState:
    """Advance ``x`` by ``t_rem`` seconds with the foot fixed.

    The per-step heading increment is spread linearly over the step, so the
    heading advances by ``omega * t_rem / T``.
    """
    T = params.step_duration
    if not (0.0 <= t_rem <= T * (1.0 + 1e-12)):
        raise ValueError(f"t_rem must lie in [0, {T}], got {t_rem!r}")
    t_rem = min(t_rem, T)
    if t_rem == 0.0:
        return x
    return LipState.from_array(_advance(x.to_array(), stance_foot_pos, omega, t_rem, params))


def foot_for_end_velocity(x: LipState, v_des: tuple[float, float], params: LipParams, duration: float | None = None):
    """Foothold whose step ends with world velocity ``v_des`` (per axis).

    Inverts the velocity row of the step map:
    ``v' = beta sinh(beta T) (p - f) + cosh(beta T) v``.
    """
    t = params.step_duration if duration is None else duration
    b = params.beta
    s, c = math.sinh(b * t), math.cosh(b * t)
    if b * s == 0.0:
        raise ValueError("zero step duration has no deadbeat foothold")
    fx = x.p_x - (v_des[0] - c * x.v_x) / (b * s)
    fy = x.p_y - (v_des[1] - c * x.v_y) / (b * s)
    return fx, fy
