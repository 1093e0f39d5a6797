"""Planar rover trajectory planning as a constrained benchmark.

Decision variables are the 2-D coordinates of spline control points in the
unit square. A clamped cubic B-spline through [start, control points, goal]
defines the trajectory, discretized at fixed resolution. Each square obstacle
contributes one constraint whose value is the worst penetration depth of the
sampled trajectory (positive inside, negative clearance outside, continuous
across the boundary). The objective is trajectory cost: path length plus a
quadratic penalty on endpoint deviation, negated so larger is better.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import BSpline

from .problems import ProblemSpec

__all__ = [
    "RoverSpec",
    "default_obstacles",
    "rover_trajectory",
    "rover_violations",
    "rover_objective",
    "make_rover_problem",
]

# Layout constants: fixed seed so every run sees the same course.
_LAYOUT_SEED = 7
_NUM_OBSTACLES = 15
_ENDPOINT_CLEARANCE = 0.10


@dataclass(frozen=True)
class RoverSpec:
    """Course geometry and discretization for one rover instance."""

    num_control_points: int
    start: np.ndarray
    goal: np.ndarray
    obstacles: np.ndarray  # (K, 3) rows of center_x, center_y, half_width
    num_samples: int = 250
    endpoint_penalty_weight: float = 10.0


def default_obstacles(
    start: np.ndarray,
    goal: np.ndarray,
    count: int = _NUM_OBSTACLES,
    seed: int = _LAYOUT_SEED,
) -> np.ndarray:
    """Fixed random course: `count` axis-aligned squares clear of both endpoints.

    Centers are drawn uniformly in [0.15, 0.85]^2 and half-widths in
    [0.03, 0.08]; draws that come within `half_width + 0.10` (Chebyshev) of the
    start or goal are rejected so both endpoints sit in free space.
    """
    gen = np.random.Generator(np.random.PCG64(seed))
    rows = []
    while len(rows) < count:
        cx, cy = gen.uniform(0.15, 0.85, 2)
        hw = gen.uniform(0.03, 0.08)
        center = np.array([cx, cy])
        clear = hw + _ENDPOINT_CLEARANCE
        if np.max(np.abs(center - start)) <= clear or np.max(np.abs(center - goal)) <= clear:
            continue
        rows.append((cx, cy, hw))
    return np.array(rows)


def rover_trajectory(spec: RoverSpec, control_points: np.ndarray) -> np.ndarray:
    """Sampled clamped cubic B-spline through [start, controls, goal].

    Clamped knots pin the curve to the start and goal exactly; collinear
    control points give a straight segment. Returns an array of shape
    (num_samples, 2).
    """
    pts = np.asarray(control_points, dtype=np.float64).reshape(spec.num_control_points, 2)
    ctrl = np.vstack([spec.start, pts, spec.goal])
    n = ctrl.shape[0]
    k = 3
    if n < k + 1:
        raise ValueError("need at least 2 control points for a cubic spline")
    interior = np.linspace(0.0, 1.0, n - k + 1)[1:-1]
    knots = np.concatenate([np.zeros(k + 1), interior, np.ones(k + 1)])
    curve = BSpline(knots, ctrl, k)
    u = np.linspace(0.0, 1.0, spec.num_samples)
    return curve(u)


def _signed_depth(traj: np.ndarray, obstacle: np.ndarray) -> float:
    # Positive: worst penetration among samples strictly inside the square.
    # Negative: minus the smallest euclidean clearance when nothing is inside.
    center, hw = obstacle[:2], obstacle[2]
    delta = np.abs(traj - center)
    cheb = np.max(delta, axis=1)
    inside = cheb < hw
    if np.any(inside):
        return float(np.max(hw - cheb[inside]))
    excess = np.maximum(delta - hw, 0.0)
    return float(-np.min(np.hypot(excess[:, 0], excess[:, 1])))


def rover_violations(spec: RoverSpec, traj: np.ndarray) -> np.ndarray:
    """Per-obstacle constraint values for a sampled trajectory."""
    return np.array([_signed_depth(traj, ob) for ob in spec.obstacles])


def rover_objective(spec: RoverSpec, traj: np.ndarray) -> float:
    """Negated trajectory cost; shorter collision-free paths score higher."""
    length = float(np.sum(np.linalg.norm(np.diff(traj, axis=0), axis=1)))
    dev = float(np.sum((traj[0] - spec.start) ** 2) + np.sum((traj[-1] - spec.goal) ** 2))
    return -(length + spec.endpoint_penalty_weight * dev)


def make_rover_problem(num_control_points: int = 30) -> ProblemSpec:
    """Package a rover course as a ProblemSpec over [0,1]^(2P)."""
    start = np.array([0.05, 0.05])
    goal = np.array([0.95, 0.95])
    spec = RoverSpec(
        num_control_points=num_control_points,
        start=start,
        goal=goal,
        obstacles=default_obstacles(start, goal),
    )
    dim = 2 * num_control_points

    def objective(x: np.ndarray) -> float:
        # Benchmark scale (minimize): positive trajectory cost.
        return -rover_objective(spec, rover_trajectory(spec, x))

    def constraints(x: np.ndarray) -> np.ndarray:
        return rover_violations(spec, rover_trajectory(spec, x))

    return ProblemSpec(
        name="rover",
        dim=dim,
        lower=np.zeros(dim),
        upper=np.ones(dim),
        num_constraints=spec.obstacles.shape[0],
        objective=objective,
        constraints=constraints,
        known_feasible_optimum=None,
        feasible_start=None,
        chord=None,
        metadata={"rover": spec},
    )
