"""Tour of the benchmark problems, constraints, and evaluation records.

Run with:  python demos/01_problems_and_data.py
"""

import numpy as np

from cibo.problems import (
    BoundsError,
    evaluate,
    get_problem,
    hit_and_run_feasible,
    list_problems,
)
from cibo.rng import RandomSource

# -- catalog ---------------------------------------------------------------

print("available problems:")
for name, desc in list_problems().items():
    print(f"  {name:12s} {desc}")

# -- a constrained synthetic problem ---------------------------------------
#
# Synthetic problems share two constraints: sum(x) <= 0 and ||x||^2 <= 30.
# The feasible optimum sits at the origin with value 0.

problem = get_problem("rastrigin", 4)
print(f"\nrastrigin-4d bounds: [{problem.lower[0]}, {problem.upper[0]}]")
print(f"constraints: {problem.metadata['constraints']}")

rec = evaluate(problem, np.zeros(4))
print(f"\nat the origin: objective y={rec.y} (maximize scale), c={rec.c}")
print(f"  benchmark value (minimize scale) = {rec.benchmark_value}")
print(f"  feasible = {rec.feasible}")

rec = evaluate(problem, np.full(4, 2.5))
print(f"at (2.5, ...): y={rec.y:.2f}, c={np.round(rec.c, 2)}, feasible={rec.feasible}")

# Out-of-bounds inputs are rejected rather than silently clipped.
try:
    evaluate(problem, np.full(4, 99.0))
except BoundsError as e:
    print(f"out-of-bounds rejected: {e}")

# -- indicator (binary) constraint feedback --------------------------------
#
# With indicator=True the record keeps only the sign of each constraint:
# 0.0 when satisfied, 1.0 when violated. Magnitudes are hidden.

ind = get_problem("rastrigin", 4, indicator=True)
rec = evaluate(ind, np.full(4, 2.5))
print(f"\nindicator mode at (2.5, ...): c={rec.c}, feasible={rec.feasible}")

# -- feasible starting points via hit-and-run ------------------------------
#
# Indicator runs need known-feasible seeds. The sampler walks random chords
# of the feasible region (half-space + ball + box), so every point it
# returns satisfies all constraints exactly.

rng = RandomSource(7)
pts = hit_and_run_feasible(rng, problem, 5)
print("\nhit-and-run feasible points (first coords):")
for p in pts:
    r = evaluate(problem, p)
    print(f"  x[:2]={np.round(p[:2], 3)}  feasible={r.feasible}")
