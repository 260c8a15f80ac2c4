"""Seeded random obstacle fields."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .safety import Circle, Ellipse, Obstacle, barrier_value, inflate

_MASK = (1 << 64) - 1

DEFAULT_BOUNDS = (0.0, 0.0, 10.0, 10.0)
START_GOAL_CLEARANCE = 0.2


class SplitMix64:
    """splitmix64 generator; identical streams in any language for a given seed."""

    def __init__(self, seed: int):
        self.state = seed & _MASK

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def random(self) -> float:
        """Uniform double in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()


class GenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class Environment:
    obstacles: tuple[Obstacle, ...]
    start: tuple[float, float] = (0.0, 0.0)
    goal: tuple[float, float] = (10.0, 10.0)
    bounds: tuple[float, float, float, float] = DEFAULT_BOUNDS
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "obstacles", tuple(self.obstacles))


def clears_endpoints(obs: Obstacle, start, goal, margin: float) -> bool:
    grown = inflate(obs, margin + START_GOAL_CLEARANCE)
    return barrier_value(grown, start) > 0.0 and barrier_value(grown, goal) > 0.0


def generate_environment(
    seed: int,
    n_obstacles: int = 8,
    bounds=DEFAULT_BOUNDS,
    start=(0.0, 0.0),
    goal=(10.0, 10.0),
    margin: float = 0.4,
    max_attempts: int = 1000,
) -> Environment:
    """Draw ``n_obstacles`` circles/ellipses deterministically from ``seed``.

    Draw order per attempt: shape (< 0.5 means circle), center x, center y,
    then the radius for a circle or two semi-axes and a rotation for an
    ellipse. Centers lie in ``bounds`` shrunk by 1 m. An obstacle whose
    ``margin + 0.2`` m growth covers the start or goal is redrawn.
    """
    if n_obstacles < 0:
        raise ValueError("n_obstacles must be non-negative")
    xmin, ymin, xmax, ymax = bounds
    if xmax - xmin <= 2.0 or ymax - ymin <= 2.0:
        raise ValueError("bounds must be wider than 2 m on each axis")
    rng = SplitMix64(seed)
    obstacles: list[Obstacle] = []
    for i in range(n_obstacles):
        for _ in range(max_attempts):
            circle = rng.random() < 0.5
            cx = rng.uniform(xmin + 1.0, xmax - 1.0)
            cy = rng.uniform(ymin + 1.0, ymax - 1.0)
            if circle:
                obs: Obstacle = Circle(cx, cy, rng.uniform(0.3, 0.8))
            else:
                a1, a2 = rng.uniform(0.3, 1.0), rng.uniform(0.3, 1.0)
                obs = Ellipse(cx, cy, max(a1, a2), min(a1, a2), rng.uniform(0.0, math.pi))
            if clears_endpoints(obs, start, goal, margin):
                obstacles.append(obs)
                break
        else:
            raise GenerationError(f"could not place obstacle {i} for seed {seed} in {max_attempts} attempts")
    return Environment(tuple(obstacles), tuple(start), tuple(goal), tuple(bounds), seed)
