import time

import numpy as np
import pytest

from cibo.rng import RandomSource

import oracles


@pytest.fixture
def rng():
    return RandomSource(12345)


def assert_close(actual, expected, tol, what=""):
    actual = np.asarray(actual, dtype=np.float64)
    expected = np.asarray(expected, dtype=np.float64)
    err = np.max(np.abs(actual - expected))
    assert err <= tol, f"{what}: max abs err {err:.3e} > {tol:.1e}"


def mixed_rel_err(a: float, b: float) -> float:
    """|a-b| scaled by max(1, |a|, |b|): relative for large, absolute for small."""
    return abs(a - b) / max(1.0, abs(a), abs(b))


# Expensive trained-model oracles are session-scoped so the focused module
# tests and the acceptance gate share one computation. Each dict carries the
# wall-clock seconds its own construction took, measured here rather than at
# the consuming test, so timing budgets hold no matter which test runs first.


@pytest.fixture(scope="session")
def flow_oracles():
    t0 = time.perf_counter()
    out = {
        "point_mass": oracles.train_point_mass_prior(),
        "bimodal": oracles.train_bimodal_prior(),
        "rk4_slope": oracles.rk4_error_slope(),
    }
    out["seconds"] = time.perf_counter() - t0
    return out


@pytest.fixture(scope="session")
def sampler_oracles():
    t0 = time.perf_counter()
    out = {
        "conjugate": oracles.train_conjugate_sampler(),
        "true_log_z": oracles.conjugate_1d_true_log_z(),
        "bimodal_off": [
            oracles.train_bimodal_sampler(s, True) for s in oracles.BIMODAL_SEEDS
        ],
        "bimodal_on": [
            oracles.train_bimodal_sampler(s, False) for s in oracles.BIMODAL_SEEDS
        ],
    }
    out["seconds"] = time.perf_counter() - t0
    return out


def _desk_base():
    from cibo.config import build_experiment

    return build_experiment({"preset": "rastrigin-desk"})


@pytest.fixture(scope="session")
def desk_runs():
    from cibo.loop import run_optimization, run_random_search

    exp = _desk_base()
    t0 = time.perf_counter()
    cibo = [run_optimization(exp.run_config_for_seed(s)) for s in range(4)]
    rand = [run_random_search(exp.run_config_for_seed(s)) for s in range(4)]
    return {"cibo": cibo, "random": rand, "seconds": time.perf_counter() - t0}


@pytest.fixture(scope="session")
def ablation_runs():
    from dataclasses import replace

    from cibo.loop import run_optimization

    exp = _desk_base()
    t0 = time.perf_counter()
    lam0 = [
        run_optimization(replace(exp.run_config_for_seed(s), lam=0.0)) for s in range(4)
    ]
    lam10 = [
        run_optimization(replace(exp.run_config_for_seed(s), lam=10.0)) for s in range(4)
    ]
    n10 = [
        run_optimization(replace(exp.run_config_for_seed(s), filter_coef=10))
        for s in range(4)
    ]
    return {"lam0": lam0, "lam10": lam10, "n10": n10, "seconds": time.perf_counter() - t0}


@pytest.fixture(scope="session")
def indicator_runs():
    """Binary-feedback desk runs, driven round by round to expose the dataset.

    Mirrors run_optimization's composition (same child-stream layout) but
    keeps the live state in hand so per-round dataset feasibility counts and
    the initial best feasible value are observable.
    """
    from dataclasses import replace

    from cibo.loop import RunState, initialize_dataset, run_round
    from cibo.problems import get_problem

    exp = _desk_base()
    t0 = time.perf_counter()
    runs = []
    for seed in range(4):
        cfg = replace(exp.run_config_for_seed(seed), indicator=True)
        problem = get_problem(cfg.problem, cfg.dim, indicator=True)
        rng = RandomSource(cfg.seed)
        records = initialize_dataset(problem, cfg, rng.child("init"))
        ref = problem.known_feasible_optimum or 0.0
        initial_best = min(r.benchmark_value for r in records if r.feasible)
        state = RunState(
            records=records,
            evals=len(records),
            best_feasible=None,
            regret=max(r.benchmark_value for r in records) - ref,
            optimum_ref=ref,
        )
        for rec in records:
            state.observe(rec)
        min_feasible = sum(r.feasible for r in state.records)
        for r in range(cfg.rounds):
            run_round(problem, cfg, state, rng.child("round", r))
            min_feasible = min(min_feasible, sum(rec.feasible for rec in state.records))
        runs.append(
            {
                "initial_best": initial_best,
                "final_best": state.best_feasible,
                "min_feasible_in_dataset": min_feasible,
            }
        )
    return {"runs": runs, "seconds": time.perf_counter() - t0}
