"""Constrained black-box optimization with generative priors.

The optimizer alternates two phases on a bounded dataset of evaluated
designs: fit a flow-matching prior and penalty-aware surrogate ensembles on
softmax-reweighted data, then train a latent diffusion sampler with a
trajectory-balance objective to draw candidates from the reward-tilted prior.
Candidates are filtered by predicted reward, evaluated, and merged back.

Library layout:
    autodiff, nets, rng   numeric substrate (tape, MLP + Adam, seeded RNG)
    problems, rover       constrained benchmarks
    surrogates            dataset weighting and proxy ensembles
    flow                  flow-matching prior
    sampler               trajectory-balance latent sampler
    loop                  the round loop and random-search baseline
    config, runner, cli   presets, multi-seed driver, command line
"""

from .autodiff import NonFiniteError, Tensor, gelu, gelu_grad, gradients
from .config import ConfigError, ExperimentConfig, PRESETS, build_experiment
from .flow import FlowPrior, fm_loss, load_prior, push_forward, sample_prior, save_prior, train_prior
from .loop import (
    FlowConfig,
    ProxyConfig,
    RunConfig,
    RunState,
    SamplerConfig,
    TraceRow,
    filter_top_b,
    initialize_dataset,
    make_latent_log_reward,
    move_dataset,
    run_optimization,
    run_random_search,
    run_round,
)
from .nets import AdamState, MlpNet, TrainConfig, adam_step
from .problems import (
    BoundsError,
    EvalRecord,
    FeasibleSamplingError,
    ProblemSpec,
    ackley,
    constraint_values,
    evaluate,
    get_problem,
    hit_and_run_feasible,
    list_problems,
    rastrigin,
    rosenbrock,
    to_indicator,
)
from .rng import RandomSource, sample_standard_normal
from .rover import make_rover_problem, rover_objective, rover_trajectory, rover_violations
from .runner import ExperimentResult, aggregate_rows, read_trace, run_experiment, write_trace
from .sampler import (
    LatentSampler,
    ReplayBuffer,
    SamplerTrainConfig,
    Trajectory,
    backward_trajectory,
    forward_trajectory,
    sample_latents,
    tb_loss,
    train_sampler,
)
from .surrogates import (
    LagrangianParams,
    Standardizer,
    SurrogateEnsemble,
    WeightedDataset,
    compute_weights,
    lagrangian_score,
    penalized_scores,
    reward_exponent,
)

__version__ = "0.1.0"
