"""Latent-space diffusion sampler trained with trajectory balance.

The sampler learns a drift for the discretized SDE

    z_{i+1} = z_i + drift(z_i, t_i) dt + noise_scale * sqrt(dt) * eps,

started at z_0 = 0, with T uniform steps on [0, 1]. Training minimizes the
squared trajectory-balance discrepancy

    (log_Z + sum_i log p_F(z_{i+1}|z_i) - log_reward(z_1) - sum_i log p_B(z_{i-1}|z_i))^2

whose unique optimum makes the terminal law proportional to exp(log_reward)
with log_Z the log normalizer. The backward kernel is fixed, not learned: the
time reversal of the zero-drift process pinned at the origin (a Brownian
bridge step toward 0), so p_B needs no parameters and backward trajectories
can be generated from terminal points alone for off-policy updates. The step
into z_0 is deterministic under that bridge and contributes zero by
convention; log p(z_0) is likewise zero since z_0 is a point mass.

With zero drift the terminal law is N(0, noise_scale^2 I) and the forward
path density factorizes as that marginal times the backward bridge, so when
log_reward is exactly the reference terminal log-density the discrepancy
reduces to log_Z alone: the loss is log_Z^2 for every trajectory and the
optimum is log_Z = 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .autodiff import Tensor, as_tensor, gradients
from .nets import AdamState, MlpNet, adam_step
from .rng import RandomSource

__all__ = [
    "LatentSampler",
    "SamplerTrainConfig",
    "Trajectory",
    "ReplayBuffer",
    "forward_trajectory",
    "backward_trajectory",
    "tb_loss",
    "train_sampler",
    "sample_latents",
]

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass
class LatentSampler:
    """Learned drift, learned scalar log-normalizer, fixed noise schedule."""

    drift_net: MlpNet
    log_z: Tensor
    num_steps: int = 50
    noise_scale: float = 1.0

    @property
    def dim(self) -> int:
        return self.drift_net.widths[-1]

    @property
    def dt(self) -> float:
        return 1.0 / self.num_steps

    @classmethod
    def create(
        cls,
        dim: int,
        width: int,
        hidden_layers: int,
        rng: RandomSource,
        num_steps: int = 50,
        noise_scale: float = 1.0,
    ) -> "LatentSampler":
        if num_steps < 1:
            raise ValueError("num_steps must be >= 1")
        net = MlpNet.create(
            [dim + 1, *([width] * hidden_layers), dim],
            rng,
            zero_init_last=True,
            name="drift",
        )
        return cls(net, Tensor(0.0, requires_grad=True, name="log_Z"), num_steps, noise_scale)


@dataclass
class SamplerTrainConfig:
    iterations: int = 50
    batch_size: int = 256
    learning_rate: float = 1e-3
    off_policy: bool = True
    buffer_capacity_factor: int = 10


@dataclass
class Trajectory:
    """One batch of chains with per-step transition log-probs.

    `states` has shape (T+1, batch, dim), row i at time i*dt. `log_pf[i]` is
    the forward density of the step i -> i+1; `log_pb[i]` the backward density
    of the step i+1 -> i (index 0 is the deterministic step into the origin,
    always 0). `log_rewards` is attached once the terminal reward is known.
    """

    states: np.ndarray
    log_pf: np.ndarray
    log_pb: np.ndarray
    log_rewards: np.ndarray | None = None

    @property
    def terminal(self) -> np.ndarray:
        return self.states[-1]


def _diag_normal_logpdf(x: np.ndarray, mean: np.ndarray, var: float) -> np.ndarray:
    d = x.shape[-1]
    sq = np.sum((x - mean) ** 2, axis=-1)
    return -0.5 * sq / var - 0.5 * d * (_LOG_2PI + np.log(var))


def _with_time(z: np.ndarray, t: float) -> np.ndarray:
    out = np.empty((z.shape[0], z.shape[1] + 1))
    out[:, :-1] = z
    out[:, -1] = t
    return out


def _bridge_coeffs(i: int, dt: float, noise_scale: float) -> tuple[float, float]:
    # Bridge step from time i*dt down to (i-1)*dt: mean shrinks by (i-1)/i,
    # variance (i-1)/i * dt * noise^2. Valid for i >= 2; i = 1 is deterministic.
    shrink = (i - 1.0) / i
    return shrink, shrink * dt * noise_scale**2


def forward_trajectory(sampler: LatentSampler, rng: RandomSource, batch_size: int) -> Trajectory:
    """Roll the learned process forward from the origin."""
    T, d = sampler.num_steps, sampler.dim
    dt, sig = sampler.dt, sampler.noise_scale
    states = np.zeros((T + 1, batch_size, d))
    log_pf = np.zeros((T, batch_size))
    log_pb = np.zeros((T, batch_size))
    step_var = sig * sig * dt
    for i in range(T):
        z = states[i]
        drift = sampler.drift_net.apply(_with_time(z, i * dt))
        mean = z + drift * dt
        nxt = mean + np.sqrt(step_var) * rng.standard_normal((batch_size, d))
        states[i + 1] = nxt
        log_pf[i] = _diag_normal_logpdf(nxt, mean, step_var)
    for i in range(2, T + 1):
        shrink, var = _bridge_coeffs(i, dt, sig)
        log_pb[i - 1] = _diag_normal_logpdf(states[i - 1], shrink * states[i], var)
    return Trajectory(states=states, log_pf=log_pf, log_pb=log_pb)


def backward_trajectory(sampler: LatentSampler, z1: np.ndarray, rng: RandomSource) -> Trajectory:
    """Fill a chain from terminal points by sampling the fixed bridge.

    Gives off-policy trajectories whose backward log-probs match the forward
    convention exactly; forward log-probs are evaluated under the current
    drift on the realized transitions.
    """
    z1 = np.asarray(z1, dtype=np.float64)
    T, d = sampler.num_steps, z1.shape[1]
    dt, sig = sampler.dt, sampler.noise_scale
    batch_size = z1.shape[0]
    states = np.zeros((T + 1, batch_size, d))
    log_pb = np.zeros((T, batch_size))
    states[T] = z1
    for i in range(T, 1, -1):
        shrink, var = _bridge_coeffs(i, dt, sig)
        mean = shrink * states[i]
        states[i - 1] = mean + np.sqrt(var) * rng.standard_normal((batch_size, d))
        log_pb[i - 1] = _diag_normal_logpdf(states[i - 1], mean, var)
    # states[0] stays at the origin: the i = 1 bridge step is deterministic.
    log_pf = np.zeros((T, batch_size))
    step_var = sig * sig * dt
    for i in range(T):
        z = states[i]
        drift = sampler.drift_net.apply(_with_time(z, i * dt))
        log_pf[i] = _diag_normal_logpdf(states[i + 1], z + drift * dt, step_var)
    return Trajectory(states=states, log_pf=log_pf, log_pb=log_pb)


def tb_loss(sampler: LatentSampler, traj: Trajectory) -> Tensor:
    """Mean squared trajectory-balance discrepancy over the batch.

    Re-traces the forward densities through the drift net so gradients reach
    the drift and log_Z; states, rewards, and backward densities enter as
    constants, which keeps the loss valid for trajectories generated by any
    means (on-policy rollouts or backward chains from a buffer).
    """
    if traj.log_rewards is None:
        raise ValueError("trajectory has no terminal log-rewards attached")
    T = sampler.num_steps
    batch_size = traj.states.shape[1]
    d = traj.states.shape[2]
    dt, sig = sampler.dt, sampler.noise_scale
    step_var = sig * sig * dt

    times = np.repeat(np.arange(T) * dt, batch_size)
    flat_in = np.empty((T * batch_size, d + 1))
    flat_in[:, :d] = traj.states[:-1].reshape(T * batch_size, d)
    flat_in[:, d] = times
    drift = sampler.drift_net.traced(flat_in)
    mean = as_tensor(flat_in[:, :d]) + drift * dt
    diff = as_tensor(traj.states[1:].reshape(T * batch_size, d)) - mean
    sq = diff.square().sum(axis=1)
    log_pf_flat = sq * (-0.5 / step_var) + (-0.5 * d * (_LOG_2PI + np.log(step_var)))
    log_pf_total = log_pf_flat.reshape(T, batch_size).sum(axis=0)

    const = traj.log_rewards + traj.log_pb.sum(axis=0)
    disc = sampler.log_z + log_pf_total - as_tensor(const)
    return disc.square().mean()


class ReplayBuffer:
    """Terminal-state buffer with rank-based prioritized sampling.

    Stores (z_1, energy) pairs sorted by energy ascending (energy is the
    negated terminal log-reward, cached when the point was generated).
    Sampling draws index `rank` with probability proportional to 1/(rank+1),
    favoring low-energy points. Capacity keeps the best entries.
    """

    def __init__(self, capacity: int, dim: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.z = np.empty((0, dim))
        self.energy = np.empty(0)

    @property
    def size(self) -> int:
        return self.z.shape[0]

    def add(self, z: np.ndarray, energy: np.ndarray) -> None:
        z = np.asarray(z, dtype=np.float64)
        energy = np.asarray(energy, dtype=np.float64)
        all_z = np.concatenate([self.z, z])
        all_e = np.concatenate([self.energy, energy])
        order = np.argsort(all_e, kind="stable")[: self.capacity]
        self.z = all_z[order]
        self.energy = all_e[order]

    def sample(self, rng: RandomSource, n: int) -> tuple[np.ndarray, np.ndarray]:
        """n terminal points with replacement, plus their cached log-rewards."""
        if self.size == 0:
            raise ValueError("cannot sample from an empty buffer")
        p = 1.0 / (np.arange(self.size) + 1.0)
        p /= p.sum()
        idx = rng.choice(self.size, n, p=p, replace=True)
        return self.z[idx].copy(), -self.energy[idx]


def train_sampler(
    sampler: LatentSampler,
    log_reward_fn: Callable[[np.ndarray], np.ndarray],
    cfg: SamplerTrainConfig,
    rng: RandomSource,
) -> dict:
    """Fit drift and log_Z against a terminal log-reward.

    Each iteration takes one on-policy gradient step and, when off-policy
    training is on, one step on backward trajectories resampled from the
    replay buffer with their cached rewards. Returns loss and log_Z traces.
    """
    params = [*sampler.drift_net.params, sampler.log_z]
    opt = AdamState.for_params(params, cfg.learning_rate)
    buffer = ReplayBuffer(cfg.buffer_capacity_factor * cfg.batch_size, sampler.dim)
    on_losses: list[float] = []
    off_losses: list[float] = []
    log_z_trace: list[float] = []

    def step(traj: Trajectory) -> float:
        loss = tb_loss(sampler, traj)
        grads = gradients(loss, params)
        new = adam_step(opt, [p.data for p in params], grads)
        for p, arr in zip(params, new):
            p.data = arr
        return loss.item()

    for _ in range(cfg.iterations):
        traj = forward_trajectory(sampler, rng, cfg.batch_size)
        log_r = log_reward_fn(traj.terminal)
        traj.log_rewards = log_r
        on_losses.append(step(traj))
        buffer.add(traj.terminal, -log_r)
        if cfg.off_policy:
            z1, cached = buffer.sample(rng, cfg.batch_size)
            btraj = backward_trajectory(sampler, z1, rng)
            btraj.log_rewards = cached
            off_losses.append(step(btraj))
        log_z_trace.append(sampler.log_z.item())

    return {
        "on_losses": on_losses,
        "off_losses": off_losses,
        "log_z_trace": log_z_trace,
        "final_log_z": sampler.log_z.item(),
    }


def sample_latents(sampler: LatentSampler, rng: RandomSource, n: int) -> np.ndarray:
    """n terminal latents from the learned process."""
    if n < 1:
        raise ValueError("n must be positive")
    return forward_trajectory(sampler, rng, n).terminal
