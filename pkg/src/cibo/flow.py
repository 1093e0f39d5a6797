"""Flow-matching generative prior over the design box.

The prior is a velocity field v(x, t) trained so that integrating dx/dt = v
from t=0 to t=1 maps standard normal latents to (weighted) data. Training uses
the conditional flow-matching regression: draw data x, noise x0, time t, form
the straight-line point x_t = (1-t) x0 + t x, and regress v(x_t, t) onto the
line's velocity x - x0. Data lives in a normalized [-1, 1]^D model space; the
push-forward integrates with fixed-step fourth-order Runge-Kutta, so sampling
is deterministic given the latents.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import NonFiniteError, Tensor, gradients
from .nets import AdamState, MlpNet, TrainConfig, adam_step
from .rng import RandomSource
from .surrogates import WeightedDataset

__all__ = [
    "FlowPrior",
    "fm_loss",
    "train_prior",
    "push_forward",
    "sample_prior",
    "save_prior",
    "load_prior",
]


@dataclass
class FlowPrior:
    """Velocity net plus the box geometry it is normalized against."""

    velocity_net: MlpNet
    lower: np.ndarray
    upper: np.ndarray
    integration_steps: int = 250

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    @classmethod
    def create(
        cls,
        lower: np.ndarray,
        upper: np.ndarray,
        width: int,
        hidden_layers: int,
        rng: RandomSource,
        integration_steps: int = 250,
    ) -> "FlowPrior":
        lower = np.asarray(lower, dtype=np.float64)
        upper = np.asarray(upper, dtype=np.float64)
        if lower.shape != upper.shape or np.any(upper <= lower):
            raise ValueError("need matching bounds with upper > lower")
        dim = lower.shape[0]
        # Input is the state plus a scalar time column; zero-init output layer
        # makes the untrained map the identity.
        net = MlpNet.create(
            [dim + 1, *([width] * hidden_layers), dim],
            rng,
            zero_init_last=True,
            name="velocity",
        )
        return cls(net, lower, upper, integration_steps)

    def normalize(self, x: np.ndarray) -> np.ndarray:
        """Box coordinates to model space [-1, 1]^D."""
        return 2.0 * (x - self.lower) / (self.upper - self.lower) - 1.0

    def denormalize(self, xn: np.ndarray) -> np.ndarray:
        return self.lower + (xn + 1.0) * 0.5 * (self.upper - self.lower)


def _with_time(x: np.ndarray, t: np.ndarray) -> np.ndarray:
    out = np.empty((x.shape[0], x.shape[1] + 1))
    out[:, :-1] = x
    out[:, -1] = t
    return out


def fm_loss(
    prior: FlowPrior,
    xs_model: np.ndarray,
    weights: np.ndarray,
    rng: RandomSource | None = None,
    x0: np.ndarray | None = None,
    t: np.ndarray | None = None,
) -> Tensor:
    """Weighted flow-matching loss over the given model-space points.

    One Monte Carlo draw of (x0, t) per record, either from `rng` or passed
    explicitly. Per-record squared error is multiplied by N * weight, so
    weight-0 records contribute nothing and the full-batch value is invariant
    to their presence.
    """
    n, dim = xs_model.shape
    if x0 is None:
        x0 = rng.standard_normal((n, dim))
    if t is None:
        t = rng.uniform(0.0, 1.0, n)
    xt = (1.0 - t[:, None]) * x0 + t[:, None] * xs_model
    target = xs_model - x0
    pred = prior.velocity_net.traced(_with_time(xt, t))
    err = (pred - target).square().sum(axis=1)
    return (err * (n * weights)).mean()


def train_prior(
    prior: FlowPrior,
    weighted: WeightedDataset,
    cfg: TrainConfig,
    rng: RandomSource,
) -> dict:
    """Train the velocity field on the weighted dataset.

    Returns {"first_loss", "final_loss"}: mean minibatch loss of the first and
    last epoch.
    """
    xs = prior.normalize(np.stack([r.x for r in weighted.records]))
    w = weighted.weights
    n = xs.shape[0]
    scaled_w = n * w
    net = prior.velocity_net
    opt = AdamState.for_params(net.params, cfg.learning_rate)
    batch = min(cfg.batch_size, n)
    first = last = np.nan
    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        losses = []
        for lo in range(0, n, batch):
            idx = perm[lo : lo + batch]
            m = idx.shape[0]
            x0 = rng.standard_normal((m, xs.shape[1]))
            t = rng.uniform(0.0, 1.0, m)
            xt = (1.0 - t[:, None]) * x0 + t[:, None] * xs[idx]
            target = xs[idx] - x0
            pred = net.traced(_with_time(xt, t))
            err = (pred - target).square().sum(axis=1)
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


def push_forward(prior: FlowPrior, z: np.ndarray) -> np.ndarray:
    """Integrate latents through the velocity field, t: 0 -> 1.

    Fixed-step classical Runge-Kutta with `prior.integration_steps` steps;
    deterministic given z. Returns model-space points. Raises on numeric
    blow-up mid-integration.
    """
    z = np.asarray(z, dtype=np.float64)
    steps = prior.integration_steps
    h = 1.0 / steps
    net = prior.velocity_net
    x = z.copy()
    ones = np.ones(x.shape[0])
    for i in range(steps):
        t = i * h
        k1 = net.apply(_with_time(x, ones * t))
        k2 = net.apply(_with_time(x + 0.5 * h * k1, ones * (t + 0.5 * h)))
        k3 = net.apply(_with_time(x + 0.5 * h * k2, ones * (t + 0.5 * h)))
        k4 = net.apply(_with_time(x + h * k3, ones * (t + h)))
        x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x)):
            raise NonFiniteError(f"flow integration diverged at step {i + 1}/{steps}")
    return x


def sample_prior(prior: FlowPrior, rng: RandomSource, n: int) -> np.ndarray:
    """Draw n samples from the prior, de-normalized to box coordinates."""
    if n < 1:
        raise ValueError("n must be positive")
    z = rng.standard_normal((n, prior.dim))
    return prior.denormalize(push_forward(prior, z))


def save_prior(prior: FlowPrior, path) -> None:
    """Checkpoint the prior to an .npz file."""
    payload = {
        "format_version": np.array(1),
        "widths": np.array(prior.velocity_net.widths),
        "lower": prior.lower,
        "upper": prior.upper,
        "integration_steps": np.array(prior.integration_steps),
    }
    for key, arr in prior.velocity_net.state_arrays().items():
        payload[f"param_{key}"] = arr
    np.savez(path, **payload)


def load_prior(path) -> FlowPrior:
    """Restore a checkpointed prior; round-trips samples bit-exactly."""
    with np.load(path) as data:
        version = int(data["format_version"])
        if version != 1:
            raise ValueError(f"unsupported checkpoint version {version}")
        widths = [int(w) for w in data["widths"]]
        net = MlpNet(
            widths,
            params=[],
            name="velocity",
        )
        arrays = {
            key[len("param_") :]: data[key] for key in data.files if key.startswith("param_")
        }
        # Rebuild leaf tensors in layer order.
        params = []
        for i in range(len(widths) - 1):
            for tag in (f"W{i}", f"b{i}"):
                arr = np.asarray(arrays[tag], dtype=np.float64)
                params.append(Tensor(arr.copy(), requires_grad=True, name=f"velocity.{tag}"))
        net.params = params
        prior = FlowPrior(
            net,
            lower=data["lower"].copy(),
            upper=data["upper"].copy(),
            integration_steps=int(data["integration_steps"]),
        )
    return prior
