"""Constrained benchmark problems.

Synthetic tasks pair a classic test function with two shared constraints,

    g1(x) = sum_i x_i        <= 0
    g2(x) = ||x||^2 - 30     <= 0

evaluated on a box domain. The origin satisfies both (g1 tight) and is the
constrained minimizer of rastrigin and ackley, so those report exact regret;
rosenbrock and rover report regret against a 0 lower bound.

Internally the optimizer maximizes ``y = -benchmark``, so "bigger is better"
holds uniformly; trace output converts back to benchmark scale.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .rng import RandomSource

__all__ = [
    "ProblemSpec",
    "EvalRecord",
    "rastrigin",
    "ackley",
    "rosenbrock",
    "constraint_values",
    "to_indicator",
    "evaluate",
    "hit_and_run_feasible",
    "get_problem",
    "list_problems",
    "BoundsError",
    "FeasibleSamplingError",
]


class BoundsError(ValueError):
    """Input outside the problem's box domain."""


class FeasibleSamplingError(RuntimeError):
    """Feasible-region sampling is unavailable or failed."""


def rastrigin(x: np.ndarray) -> float:
    """Rastrigin function.

    .. math:: f(x) = 10 d + \\sum_{i=1}^{d} \\left( x_i^2 - 10 \\cos(2 \\pi x_i) \\right)

    Highly multimodal with a regular lattice of local minima; global minimum
    f(0) = 0.
    """
    x = np.asarray(x, dtype=np.float64)
    return float(10.0 * x.size + np.sum(x * x - 10.0 * np.cos(2.0 * np.pi * x)))


def ackley(x: np.ndarray) -> float:
    """Ackley function.

    .. math:: f(x) = -a \\exp\\!\\big({-b \\sqrt{\\tfrac{1}{d} \\sum x_i^2}}\\big)
              - \\exp\\!\\big(\\tfrac{1}{d} \\sum \\cos(c x_i)\\big) + a + e

    with a = 20, b = 0.2, c = 2 pi. Nearly flat outer region with a deep hole
    at the origin; global minimum f(0) = 0.
    """
    x = np.asarray(x, dtype=np.float64)
    a, b, c = 20.0, 0.2, 2.0 * np.pi
    return float(
        -a * np.exp(-b * np.sqrt(np.mean(x * x)))
        - np.exp(np.mean(np.cos(c * x)))
        + a
        + np.e
    )


def rosenbrock(x: np.ndarray) -> float:
    """Rosenbrock function.

    .. math:: f(x) = \\sum_{i=1}^{d-1} \\left( 100 (x_{i+1} - x_i^2)^2 + (1 - x_i)^2 \\right)

    A narrow curved valley; unconstrained minimum f(1) = 0 at the all-ones
    point, which violates g1 here, so the constrained optimum is unknown and
    regret is reported against a 0 lower bound.
    """
    x = np.asarray(x, dtype=np.float64)
    return float(np.sum(100.0 * (x[1:] - x[:-1] ** 2) ** 2 + (1.0 - x[:-1]) ** 2))


def constraint_values(x: np.ndarray) -> np.ndarray:
    """The two shared synthetic constraints, [sum(x), ||x||^2 - 30]."""
    x = np.asarray(x, dtype=np.float64)
    return np.array([np.sum(x), np.sum(x * x) - 30.0])


def to_indicator(c: np.ndarray) -> np.ndarray:
    """Binary violation feedback: 1 where c > 0 (strict), else 0. Idempotent."""
    return (np.asarray(c, dtype=np.float64) > 0.0).astype(np.float64)


def _synthetic_chord(x: np.ndarray, u: np.ndarray) -> tuple[float, float]:
    # Interval of s for which x + s*u stays in {sum <= 0} and {||.||^2 <= 30},
    # given that x is strictly inside both. Box handled by the caller.
    lo, hi = -np.inf, np.inf
    su = float(np.sum(u))
    sx = float(np.sum(x))
    if su > 1e-300:
        hi = min(hi, -sx / su)
    elif su < -1e-300:
        lo = max(lo, -sx / su)
    # ||x + s u||^2 <= 30 with ||u|| = 1: s^2 + 2(x.u)s + (||x||^2 - 30) <= 0
    b = 2.0 * float(x @ u)
    c = float(x @ x) - 30.0
    disc = b * b - 4.0 * c
    root = np.sqrt(disc)
    lo = max(lo, (-b - root) / 2.0)
    hi = min(hi, (-b + root) / 2.0)
    return lo, hi


@dataclass(frozen=True)
class ProblemSpec:
    """Everything the optimizer needs to know about one task."""

    name: str
    dim: int
    lower: np.ndarray
    upper: np.ndarray
    num_constraints: int
    objective: Callable[[np.ndarray], float]
    constraints: Callable[[np.ndarray], np.ndarray]
    indicator: bool = False
    known_feasible_optimum: float | None = None
    feasible_start: np.ndarray | None = None
    chord: Callable[[np.ndarray, np.ndarray], tuple[float, float]] | None = None
    metadata: dict = field(default_factory=dict)


@dataclass(frozen=True)
class EvalRecord:
    """One evaluated point: input, objective on the maximize scale, constraints.

    `y` is the negated benchmark value. `c` holds raw constraint values, or
    0/1 violation indicators when the problem runs in indicator mode.
    """

    x: np.ndarray
    y: float
    c: np.ndarray

    @property
    def benchmark_value(self) -> float:
        return -self.y

    @property
    def feasible(self) -> bool:
        return bool(np.all(self.c <= 0.0))


def evaluate(spec: ProblemSpec, x: np.ndarray) -> EvalRecord:
    """Evaluate one point. Rejects out-of-domain inputs rather than clamping."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (spec.dim,):
        raise ValueError(f"{spec.name}: expected shape ({spec.dim},), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise BoundsError(f"{spec.name}: non-finite input")
    if np.any(x < spec.lower) or np.any(x > spec.upper):
        raise BoundsError(f"{spec.name}: input outside box domain")
    c = np.asarray(spec.constraints(x), dtype=np.float64)
    if spec.indicator:
        c = to_indicator(c)
    return EvalRecord(x=x.copy(), y=-spec.objective(x), c=c)


def hit_and_run_feasible(
    rng: RandomSource,
    spec: ProblemSpec,
    n: int,
    burn_in: int = 100,
    thinning: int = 10,
) -> np.ndarray:
    """Sample `n` feasible points by hit-and-run over the constraint region.

    Walks the convex region {all constraints <= 0} intersected with the box:
    from the current interior point, pick a uniform direction, intersect the
    line with the region, and jump to a uniform point on the chord. The first
    `burn_in` steps are discarded and one point is kept every `thinning` steps
    after that.
    """
    if spec.chord is None or spec.feasible_start is None:
        raise FeasibleSamplingError(f"{spec.name}: no feasible-region sampler available")
    x = np.asarray(spec.feasible_start, dtype=np.float64).copy()
    for scale in (1.0, 0.5, 0.1):
        cand = x * scale
        if np.all(spec.constraints(cand) < 0.0) and np.all(cand > spec.lower) and np.all(cand < spec.upper):
            x = cand
            break
    else:
        raise FeasibleSamplingError(f"{spec.name}: could not find a strictly interior start")

    out = np.empty((n, spec.dim))
    kept = 0
    step = 0
    total = burn_in + n * thinning
    while step < total:
        u = rng.standard_normal(spec.dim)
        u /= np.linalg.norm(u)
        lo, hi = spec.chord(x, u)
        # Box chord per coordinate.
        with np.errstate(divide="ignore"):
            t_lower = (spec.lower - x) / u
            t_upper = (spec.upper - x) / u
        pos = u > 0
        neg = u < 0
        if np.any(pos):
            hi = min(hi, float(np.min(t_upper[pos])))
            lo = max(lo, float(np.max(t_lower[pos])))
        if np.any(neg):
            hi = min(hi, float(np.min(t_lower[neg])))
            lo = max(lo, float(np.max(t_upper[neg])))
        if not (lo < hi):
            continue  # degenerate chord, resample direction
        s = rng.uniform(lo, hi)
        x = x + s * u
        step += 1
        if step > burn_in and (step - burn_in) % thinning == 0:
            if np.any(spec.constraints(x) > 0.0) or np.any(x < spec.lower) or np.any(x > spec.upper):
                raise FeasibleSamplingError(f"{spec.name}: walker left the feasible region")
            out[kept] = x
            kept += 1
    assert kept == n
    return out


def _synthetic_spec(name: str, fn, low: float, high: float, dim: int, exact_opt: bool) -> ProblemSpec:
    return ProblemSpec(
        name=name,
        dim=dim,
        lower=np.full(dim, low),
        upper=np.full(dim, high),
        num_constraints=2,
        objective=fn,
        constraints=constraint_values,
        known_feasible_optimum=0.0 if exact_opt else None,
        feasible_start=np.full(dim, -0.01),
        chord=_synthetic_chord,
        metadata={"constraints": "sum(x) <= 0, ||x||^2 <= 30"},
    )


_SYNTHETIC = {
    "rastrigin": (rastrigin, -5.0, 5.0, True),
    "ackley": (ackley, -5.0, 10.0, True),
    "rosenbrock": (rosenbrock, -5.0, 10.0, False),
}


def get_problem(name: str, dim: int, indicator: bool = False) -> ProblemSpec:
    """Look up a problem by name at the requested dimension."""
    if name in _SYNTHETIC:
        fn, low, high, exact = _SYNTHETIC[name]
        if dim < 2:
            raise ValueError(f"{name}: dim must be >= 2")
        spec = _synthetic_spec(name, fn, low, high, dim, exact)
        return replace(spec, indicator=indicator) if indicator else spec
    if name == "rover":
        from .rover import make_rover_problem

        if dim % 2 != 0 or dim < 4:
            raise ValueError("rover: dim must be an even number >= 4 (two per control point)")
        spec = make_rover_problem(num_control_points=dim // 2)
        if indicator:
            raise FeasibleSamplingError("rover: indicator mode needs feasible init, not available")
        return spec
    raise KeyError(f"unknown problem {name!r}; known: {sorted(list_problems())}")


def list_problems() -> dict[str, str]:
    """Problem names with a one-line description."""
    return {
        "rastrigin": "rastrigin on [-5,5]^d, constraints sum(x)<=0 and ||x||^2<=30, optimum 0",
        "ackley": "ackley on [-5,10]^d, same constraints, optimum 0",
        "rosenbrock": "rosenbrock on [-5,10]^d, same constraints, regret vs 0 bound",
        "rover": "planar rover trajectory, dim/2 spline control points in [0,1]^2, "
        "15 square obstacles, regret vs 0 bound",
    }
