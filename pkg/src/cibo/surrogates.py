"""Dataset scoring, softmax reweighting, and surrogate ensembles.

Scoring convention used everywhere a penalized score appears: the objective is
z-scored against the current dataset, while constraint violations are scaled
by their per-constraint std but never centered, so the feasibility threshold
stays at zero:

    score(record) = (y - mean_y)/std_y - lambda * sum_m max(0, c_m) / std_{c_m}

Dataset weights are a softmax over these scores. The surrogate ensemble fits
K objective proxies and one proxy per constraint on the weighted dataset; its
standardized predictions feed the same formula (plus an uncertainty bonus) as
the candidate reward.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, gradients
from .nets import AdamState, MlpNet, TrainConfig, adam_step
from .problems import EvalRecord
from .rng import RandomSource

__all__ = [
    "STD_FLOOR",
    "LagrangianParams",
    "Standardizer",
    "WeightedDataset",
    "lagrangian_score",
    "penalized_scores",
    "compute_weights",
    "reward_exponent",
    "SurrogateEnsemble",
]

STD_FLOOR = 1e-8


@dataclass(frozen=True)
class LagrangianParams:
    """Penalty weight, uncertainty bonus, and reward sharpness."""

    lam: float
    gamma: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        if self.lam < 0 or self.gamma < 0 or self.beta < 0:
            raise ValueError("lam, gamma, beta must be non-negative")


def lagrangian_score(y: float, c: np.ndarray, lam: float) -> float:
    """Penalized objective y - lam * sum(max(0, c)). Equals y when feasible."""
    c = np.asarray(c, dtype=np.float64)
    return float(y - lam * np.sum(np.maximum(0.0, c)))


@dataclass(frozen=True)
class Standardizer:
    """Per-dataset normalization statistics.

    All stds are floored at STD_FLOOR. `c_mean`/`c_std` serve the constraint
    proxies' regression targets; penalized scores use `c_std` only so that
    c = 0 keeps meaning "on the boundary".
    """

    x_mean: np.ndarray
    x_std: np.ndarray
    y_mean: float
    y_std: float
    c_mean: np.ndarray
    c_std: np.ndarray

    @classmethod
    def from_records(cls, records: list[EvalRecord]) -> "Standardizer":
        if not records:
            raise ValueError("cannot standardize an empty dataset")
        xs = np.stack([r.x for r in records])
        ys = np.array([r.y for r in records])
        cs = np.stack([r.c for r in records])
        return cls(
            x_mean=xs.mean(axis=0),
            x_std=np.maximum(xs.std(axis=0), STD_FLOOR),
            y_mean=float(ys.mean()),
            y_std=float(max(ys.std(), STD_FLOOR)),
            c_mean=cs.mean(axis=0),
            c_std=np.maximum(cs.std(axis=0), STD_FLOOR),
        )

    def norm_x(self, xs: np.ndarray) -> np.ndarray:
        return (xs - self.x_mean) / self.x_std

    def norm_y(self, ys: np.ndarray) -> np.ndarray:
        return (ys - self.y_mean) / self.y_std

    def denorm_y(self, ys: np.ndarray) -> np.ndarray:
        return self.y_mean + self.y_std * ys

    def norm_c(self, cs: np.ndarray) -> np.ndarray:
        return (cs - self.c_mean) / self.c_std

    def denorm_c(self, cs: np.ndarray) -> np.ndarray:
        return self.c_mean + self.c_std * cs


def penalized_scores(
    ys: np.ndarray, cs: np.ndarray, lam: float, stats: Standardizer
) -> np.ndarray:
    """Standardized penalized score for each record (vectorized)."""
    ys = np.asarray(ys, dtype=np.float64)
    cs = np.asarray(cs, dtype=np.float64)
    viol = np.maximum(0.0, cs) / stats.c_std
    return stats.norm_y(ys) - lam * viol.sum(axis=1)


@dataclass(frozen=True)
class WeightedDataset:
    """Records plus normalized importance weights (non-negative, sum to 1)."""

    records: list[EvalRecord]
    weights: np.ndarray
    stats: Standardizer

    def __post_init__(self):
        if len(self.records) != self.weights.shape[0]:
            raise ValueError("one weight per record required")
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1.0) > 1e-9:
            raise ValueError("weights must be non-negative and sum to 1")


def compute_weights(
    records: list[EvalRecord], lam: float, stats: Standardizer | None = None
) -> WeightedDataset:
    """Softmax weights over standardized penalized scores.

    The max is subtracted before exponentiation, so weights are shift-invariant
    and finite for any score magnitudes.
    """
    stats = stats or Standardizer.from_records(records)
    ys = np.array([r.y for r in records])
    cs = np.stack([r.c for r in records])
    scores = penalized_scores(ys, cs, lam, stats)
    shifted = scores - scores.max()
    w = np.exp(shifted)
    w /= w.sum()
    return WeightedDataset(records=records, weights=w, stats=stats)


def reward_exponent(
    mu: np.ndarray, sigma: np.ndarray, viol: np.ndarray, params: LagrangianParams
) -> np.ndarray:
    """Candidate reward mu + gamma*sigma - lam*sum(max(0, viol)), vectorized.

    Inputs are the ensemble's standardized objective mean/std and the
    std-scaled predicted constraint values for a batch.
    """
    mu = np.asarray(mu, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    viol = np.asarray(viol, dtype=np.float64)
    penalty = np.maximum(0.0, viol).sum(axis=1)
    return mu + params.gamma * sigma - params.lam * penalty


def _fit_net(
    net: MlpNet,
    xs: np.ndarray,
    targets: np.ndarray,
    weights: np.ndarray,
    cfg: TrainConfig,
    rng: RandomSource,
) -> dict:
    """Weighted MSE regression. Returns first/final epoch mean losses.

    Minibatches are drawn uniformly; each record's squared error is multiplied
    by N * weight, an unbiased estimate of the weighted sum over the dataset.
    """
    n = xs.shape[0]
    scaled_w = n * weights
    opt = AdamState.for_params(net.params, cfg.learning_rate)
    batch = min(cfg.batch_size, n)
    first = last = np.nan
    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        losses = []
        for lo in range(0, n, batch):
            idx = perm[lo : lo + batch]
            pred = net.traced(xs[idx])
            err = (pred - targets[idx]).square().sum(axis=1)
            loss = (err * scaled_w[idx]).mean()
            grads = gradients(loss, net.params)
            new = adam_step(opt, [p.data for p in net.params], grads)
            for p, arr in zip(net.params, new):
                p.data = arr
            losses.append(loss.item())
        mean_loss = float(np.mean(losses))
        if epoch == 0:
            first = mean_loss
        last = mean_loss
    return {"first_loss": first, "final_loss": last}


class SurrogateEnsemble:
    """K objective proxies plus one proxy per constraint, trained per round.

    Proxies regress standardized targets on standardized inputs. Public
    predictions come back in raw units; the `*_standardized`/`*_scaled`
    variants feed penalized scoring directly.
    """

    def __init__(
        self,
        dim: int,
        num_constraints: int,
        ensemble_size: int,
        width: int,
        hidden_layers: int,
        rng: RandomSource,
    ):
        if ensemble_size < 1 or num_constraints < 0:
            raise ValueError("need ensemble_size >= 1 and num_constraints >= 0")
        hidden = [width] * hidden_layers
        self.dim = dim
        self.objective_nets = [
            MlpNet.create([dim, *hidden, 1], rng.child("objective", k), name=f"objective{k}")
            for k in range(ensemble_size)
        ]
        self.constraint_nets = [
            MlpNet.create([dim, *hidden, 1], rng.child("constraint", m), name=f"constraint{m}")
            for m in range(num_constraints)
        ]
        self.stats: Standardizer | None = None

    def fit(self, weighted: WeightedDataset, cfg: TrainConfig, rng: RandomSource) -> dict:
        """Train every member on the weighted dataset. Returns final losses."""
        self.stats = weighted.stats
        xs = self.stats.norm_x(np.stack([r.x for r in weighted.records]))
        ys = self.stats.norm_y(np.array([r.y for r in weighted.records]))[:, None]
        cs = self.stats.norm_c(np.stack([r.c for r in weighted.records]))
        losses = {}
        for k, net in enumerate(self.objective_nets):
            losses[net.name] = _fit_net(net, xs, ys, weighted.weights, cfg, rng.child("fit-obj", k))
        for m, net in enumerate(self.constraint_nets):
            losses[net.name] = _fit_net(
                net, xs, cs[:, m : m + 1], weighted.weights, cfg, rng.child("fit-con", m)
            )
        return losses

    def _require_fit(self):
        if self.stats is None:
            raise RuntimeError("ensemble must be fit before predicting")

    def predict_objective_standardized(self, xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Ensemble mean and population std in standardized units."""
        self._require_fit()
        xn = self.stats.norm_x(np.asarray(xs, dtype=np.float64))
        preds = np.stack([net.apply(xn)[:, 0] for net in self.objective_nets])
        return preds.mean(axis=0), preds.std(axis=0)

    def predict_objective(self, xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Ensemble mean and std in raw objective units (maximize scale)."""
        mu, sigma = self.predict_objective_standardized(xs)
        return self.stats.denorm_y(mu), self.stats.y_std * sigma

    def predict_constraints_scaled(self, xs: np.ndarray) -> np.ndarray:
        """Predicted constraint values divided by their std (threshold at 0)."""
        self._require_fit()
        xn = self.stats.norm_x(np.asarray(xs, dtype=np.float64))
        preds = np.stack([net.apply(xn)[:, 0] for net in self.constraint_nets], axis=1)
        return preds + self.stats.c_mean / self.stats.c_std

    def predict_constraints(self, xs: np.ndarray) -> np.ndarray:
        """Predicted constraint values in raw units, shape (n, M)."""
        return self.predict_constraints_scaled(np.asarray(xs)) * self.stats.c_std

    def candidate_rewards(self, xs: np.ndarray, params: LagrangianParams) -> np.ndarray:
        """Reward exponent for a batch of raw-unit inputs."""
        mu, sigma = self.predict_objective_standardized(xs)
        viol = self.predict_constraints_scaled(xs)
        return reward_exponent(mu, sigma, viol, params)
