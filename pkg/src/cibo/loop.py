"""Round-based optimizer: fit models on the dataset, sample candidates, evaluate.

Each round retrains from scratch on the current dataset (no warm starts):

1. weight the dataset by softmax of penalized scores, fit the flow prior and
   the surrogate ensemble on it;
2. train the latent sampler toward log p(z) + beta * reward(push_forward(z)),
   draw filter_coef * batch_size latents, map them through the flow, keep the
   batch_size candidates with the highest predicted reward;
3. evaluate the batch, merge into the dataset, truncate to the buffer size by
   penalized score, and append one trace row.

A uniform-random baseline with the same evaluation budget and trace schema
lives alongside for comparisons.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np

from .flow import FlowPrior, push_forward, train_prior
from .nets import TrainConfig
from .problems import EvalRecord, ProblemSpec, evaluate, get_problem, hit_and_run_feasible
from .rng import RandomSource
from .sampler import LatentSampler, SamplerTrainConfig, sample_latents, train_sampler
from .surrogates import (
    LagrangianParams,
    Standardizer,
    SurrogateEnsemble,
    WeightedDataset,
    compute_weights,
    penalized_scores,
)

__all__ = [
    "ProxyConfig",
    "FlowConfig",
    "SamplerConfig",
    "RunConfig",
    "RunState",
    "TraceRow",
    "TRACE_COLUMNS",
    "initialize_dataset",
    "make_latent_log_reward",
    "filter_top_b",
    "move_dataset",
    "run_round",
    "run_optimization",
    "run_random_search",
]

TRACE_COLUMNS = ("round", "evals", "best_feasible", "regret", "feasibility_ratio", "seconds")


@dataclass
class ProxyConfig:
    width: int = 1024
    hidden_layers: int = 3
    num_ensemble: int = 5
    epochs: int = 100
    batch_size: int = 256
    learning_rate: float = 1e-3


@dataclass
class FlowConfig:
    width: int = 512
    hidden_layers: int = 3
    epochs: int = 500
    batch_size: int = 256
    learning_rate: float = 1e-3
    integration_steps: int = 250


@dataclass
class SamplerConfig:
    width: int = 256
    hidden_layers: int = 2
    iterations: int = 50
    batch_size: int = 256
    learning_rate: float = 1e-3
    num_steps: int = 50
    off_policy: bool = True


@dataclass
class RunConfig:
    """Everything one optimization run needs, training knobs included."""

    problem: str
    dim: int
    rounds: int
    batch_size: int
    init_size: int
    buffer_size: int
    filter_coef: int
    lam: float
    beta: float
    gamma: float = 1.0
    indicator: bool = False
    feasible_init_count: int = 10
    seed: int = 0
    sentinel_regret: float | None = None
    proxy: ProxyConfig = dc_field(default_factory=ProxyConfig)
    flow: FlowConfig = dc_field(default_factory=FlowConfig)
    sampler: SamplerConfig = dc_field(default_factory=SamplerConfig)

    def validate(self) -> None:
        if self.dim < 1 or self.rounds < 0 or self.init_size < 1:
            raise ValueError("dim, rounds, init_size must be positive")
        if self.batch_size < 1 or self.filter_coef < 1:
            raise ValueError("batch_size and filter_coef must be >= 1")
        if self.buffer_size < self.batch_size:
            raise ValueError("buffer_size must hold at least one batch")
        if self.lam < 0 or self.beta < 0 or self.gamma < 0:
            raise ValueError("lam, beta, gamma must be non-negative")
        if self.indicator and not (0 < self.feasible_init_count <= self.init_size):
            raise ValueError("feasible_init_count must be in (0, init_size]")

    @property
    def total_evaluations(self) -> int:
        return self.init_size + self.rounds * self.batch_size


@dataclass
class TraceRow:
    round: int
    evals: int
    best_feasible: float | None
    regret: float
    feasibility_ratio: float
    seconds: float


@dataclass
class RunState:
    """Mutable run bookkeeping: dataset, budget, incumbent, trace."""

    records: list[EvalRecord]
    evals: int
    best_feasible: float | None  # benchmark scale, min over all feasible evals
    regret: float  # running minimum, sentinel-seeded
    optimum_ref: float
    rows: list[TraceRow] = dc_field(default_factory=list)
    round: int = 0

    def observe(self, rec: EvalRecord) -> None:
        if rec.feasible:
            v = rec.benchmark_value
            if self.best_feasible is None or v < self.best_feasible:
                self.best_feasible = v
        if self.best_feasible is not None:
            self.regret = min(self.regret, self.best_feasible - self.optimum_ref)


def initialize_dataset(
    problem: ProblemSpec, config: RunConfig, rng: RandomSource
) -> list[EvalRecord]:
    """Uniform initial design; indicator mode swaps in known-feasible points.

    With binary feedback a violation value carries no gradient toward the
    feasible region, so the first `feasible_init_count` points come from the
    hit-and-run sampler over the true feasible set instead.
    """
    xs = rng.uniform(problem.lower, problem.upper, (config.init_size, problem.dim))
    if config.indicator:
        feasible = hit_and_run_feasible(rng, problem, config.feasible_init_count)
        xs[: config.feasible_init_count] = feasible
    return [evaluate(problem, x) for x in xs]


def make_latent_log_reward(
    prior: FlowPrior, ensemble: SurrogateEnsemble, params: LagrangianParams
) -> Callable[[np.ndarray], np.ndarray]:
    """Terminal log-reward for the latent sampler.

    log N(z; 0, I) + beta * predicted reward of the de-normalized push-forward
    of z, i.e. the log of the reward-tilted prior expressed in latent space
    through the deterministic flow map.
    """
    d = prior.dim
    log_norm = -0.5 * d * np.log(2.0 * np.pi)

    def log_reward(z: np.ndarray) -> np.ndarray:
        log_p = -0.5 * np.sum(z * z, axis=1) + log_norm
        xs = prior.denormalize(push_forward(prior, z))
        return log_p + params.beta * ensemble.candidate_rewards(xs, params)

    return log_reward


def filter_top_b(rewards: np.ndarray, b: int) -> np.ndarray:
    """Indices of the b highest rewards; ties broken by lower index."""
    rewards = np.asarray(rewards, dtype=np.float64)
    if b < 1 or b > rewards.shape[0]:
        raise ValueError(f"cannot keep {b} of {rewards.shape[0]} candidates")
    return np.argsort(-rewards, kind="stable")[:b]


def move_dataset(
    records: list[EvalRecord], incoming: list[EvalRecord], capacity: int, lam: float
) -> list[EvalRecord]:
    """Union old and new records, keep the `capacity` best penalized scores.

    Scores are standardized against the union. Ties keep the earlier record;
    the survivors stay in insertion order.
    """
    union = records + incoming
    if len(union) <= capacity:
        return union
    stats = Standardizer.from_records(union)
    ys = np.array([r.y for r in union])
    cs = np.stack([r.c for r in union])
    scores = penalized_scores(ys, cs, lam, stats)
    keep = np.sort(np.argsort(-scores, kind="stable")[:capacity])
    return [union[i] for i in keep]


SurrogateBuilder = Callable[[WeightedDataset, RandomSource], SurrogateEnsemble]


def _default_surrogates(
    problem: ProblemSpec, config: RunConfig
) -> SurrogateBuilder:
    def build(weighted: WeightedDataset, rng: RandomSource) -> SurrogateEnsemble:
        ensemble = SurrogateEnsemble(
            problem.dim,
            problem.num_constraints,
            config.proxy.num_ensemble,
            config.proxy.width,
            config.proxy.hidden_layers,
            rng.child("init"),
        )
        ensemble.fit(
            weighted,
            TrainConfig(config.proxy.epochs, config.proxy.batch_size, config.proxy.learning_rate),
            rng.child("fit"),
        )
        return ensemble

    return build


def run_round(
    problem: ProblemSpec,
    config: RunConfig,
    state: RunState,
    rng: RandomSource,
    surrogate_builder: SurrogateBuilder | None = None,
) -> float:
    """One full round. Returns the evaluated batch's feasibility ratio.

    Exactly batch_size evaluations are consumed; models are created fresh and
    trained only on the current dataset.
    """
    stats = Standardizer.from_records(state.records)
    weighted = compute_weights(state.records, config.lam, stats)

    prior = FlowPrior.create(
        problem.lower,
        problem.upper,
        config.flow.width,
        config.flow.hidden_layers,
        rng.child("flow-init"),
        config.flow.integration_steps,
    )
    train_prior(
        prior,
        weighted,
        TrainConfig(config.flow.epochs, config.flow.batch_size, config.flow.learning_rate),
        rng.child("flow-train"),
    )

    builder = surrogate_builder or _default_surrogates(problem, config)
    ensemble = builder(weighted, rng.child("proxy"))

    params = LagrangianParams(config.lam, config.gamma, config.beta)
    sampler = LatentSampler.create(
        problem.dim,
        config.sampler.width,
        config.sampler.hidden_layers,
        rng.child("sampler-init"),
        config.sampler.num_steps,
    )
    train_sampler(
        sampler,
        make_latent_log_reward(prior, ensemble, params),
        SamplerTrainConfig(
            iterations=config.sampler.iterations,
            batch_size=config.sampler.batch_size,
            learning_rate=config.sampler.learning_rate,
            off_policy=config.sampler.off_policy,
        ),
        rng.child("sampler-train"),
    )

    z = sample_latents(sampler, rng.child("draw"), config.filter_coef * config.batch_size)
    # Clip in model space: the flow map is unconstrained, evaluation is not.
    xs = prior.denormalize(np.clip(push_forward(prior, z), -1.0, 1.0))
    rewards = ensemble.candidate_rewards(xs, params)
    chosen = filter_top_b(rewards, config.batch_size)

    batch = [evaluate(problem, x) for x in xs[chosen]]
    for rec in batch:
        state.observe(rec)
    state.evals += len(batch)
    state.records = move_dataset(state.records, batch, config.buffer_size, config.lam)
    state.round += 1
    return float(np.mean([r.feasible for r in batch]))


def _init_state(problem: ProblemSpec, config: RunConfig, rng: RandomSource) -> RunState:
    records = initialize_dataset(problem, config, rng.child("init"))
    ref = problem.known_feasible_optimum if problem.known_feasible_optimum is not None else 0.0
    if config.sentinel_regret is not None:
        sentinel = config.sentinel_regret
    else:
        sentinel = max(r.benchmark_value for r in records) - ref
    state = RunState(
        records=records,
        evals=len(records),
        best_feasible=None,
        regret=sentinel,
        optimum_ref=ref,
    )
    for rec in records:
        state.observe(rec)
    return state


def _emit_row(state, ratio, clock, t0, row_callback) -> None:
    row = TraceRow(
        round=state.round - 1,
        evals=state.evals,
        best_feasible=state.best_feasible,
        regret=state.regret,
        feasibility_ratio=ratio,
        seconds=clock() - t0,
    )
    state.rows.append(row)
    if row_callback is not None:
        row_callback(row)


def run_optimization(
    config: RunConfig,
    clock: Callable[[], float] | None = None,
    row_callback: Callable[[TraceRow], None] | None = None,
    surrogate_builder: SurrogateBuilder | None = None,
) -> RunState:
    """Full run: initialize, then `rounds` rounds with one trace row each.

    `clock` defaults to time.perf_counter; inject a deterministic callable for
    reproducible trace files. Failures propagate after the rows produced so
    far are already in `state.rows` and delivered to `row_callback`.
    """
    config.validate()
    clock = clock or time.perf_counter
    problem = get_problem(config.problem, config.dim, config.indicator)
    rng = RandomSource(config.seed)
    t0 = clock()
    state = _init_state(problem, config, rng)
    for r in range(config.rounds):
        ratio = run_round(problem, config, state, rng.child("round", r), surrogate_builder)
        _emit_row(state, ratio, clock, t0, row_callback)
    return state


def run_random_search(
    config: RunConfig,
    clock: Callable[[], float] | None = None,
    row_callback: Callable[[TraceRow], None] | None = None,
) -> RunState:
    """Uniform-sampling baseline on the same budget and trace schema."""
    config.validate()
    clock = clock or time.perf_counter
    problem = get_problem(config.problem, config.dim, config.indicator)
    rng = RandomSource(config.seed)
    t0 = clock()
    state = _init_state(problem, config, rng)
    for r in range(config.rounds):
        draw = rng.child("random-round", r)
        xs = draw.uniform(problem.lower, problem.upper, (config.batch_size, problem.dim))
        batch = [evaluate(problem, x) for x in xs]
        for rec in batch:
            state.observe(rec)
        state.evals += len(batch)
        state.records = move_dataset(state.records, batch, config.buffer_size, config.lam)
        state.round += 1
        _emit_row(state, float(np.mean([r2.feasible for r2 in batch])), clock, t0, row_callback)
    return state
