"""Dense MLPs with GELU hidden activations, plus Adam.

One network class serves every model in the package (objective proxies,
constraint proxies, flow velocity field, latent drift field). Networks carry
their parameters as named leaf :class:`~cibo.autodiff.Tensor` objects so a
training loop can trace a loss, pull gradients, and step Adam without extra
bookkeeping.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import NonFiniteError, Tensor, gelu, require_finite
from .rng import RandomSource

__all__ = ["MlpNet", "AdamState", "adam_step", "TrainConfig"]


@dataclass
class TrainConfig:
    """Knobs shared by the supervised training loops."""

    epochs: int = 100
    batch_size: int = 256
    learning_rate: float = 1e-3


class MlpNet:
    """Fully connected net: linear layers with GELU on all hidden layers.

    `widths` lists every layer width including input and output, e.g.
    ``[3, 64, 64, 1]``. Weights use Kaiming-uniform fan-in init,
    U(-sqrt(6/fan_in), +sqrt(6/fan_in)); biases start at zero. With
    ``zero_init_last=True`` the final linear layer starts at exactly zero so
    the net computes the zero function at init, which the flow and sampler
    fields rely on.
    """

    def __init__(self, widths: list[int], params: list[Tensor], name: str):
        self.widths = list(widths)
        self.params = params
        self.name = name

    @classmethod
    def create(
        cls,
        widths: list[int],
        rng: RandomSource,
        zero_init_last: bool = False,
        name: str = "mlp",
    ) -> "MlpNet":
        if len(widths) < 2 or any(w < 1 for w in widths):
            raise ValueError(f"widths must list >= 2 positive sizes, got {widths}")
        params: list[Tensor] = []
        n_layers = len(widths) - 1
        for i, (fan_in, fan_out) in enumerate(zip(widths[:-1], widths[1:])):
            if zero_init_last and i == n_layers - 1:
                w = np.zeros((fan_in, fan_out))
            else:
                bound = np.sqrt(6.0 / fan_in)
                w = rng.uniform(-bound, bound, (fan_in, fan_out))
            params.append(Tensor(w, requires_grad=True, name=f"{name}.W{i}"))
            params.append(Tensor(np.zeros(fan_out), requires_grad=True, name=f"{name}.b{i}"))
        return cls(widths, params, name)

    @property
    def param_count(self) -> int:
        return sum(p.data.size for p in self.params)

    def _check_input(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.widths[0]:
            raise ValueError(
                f"{self.name}: expected input of shape (n, {self.widths[0]}), got {x.shape}"
            )
        require_finite(x, f"{self.name} input")
        return x

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Forward pass without building a tape. Same op order as `traced`."""
        h = self._check_input(x)
        last = len(self.widths) - 2
        for i in range(last + 1):
            w, b = self.params[2 * i].data, self.params[2 * i + 1].data
            h = h @ w + b
            if i < last:
                h = gelu(h)
        return h

    def traced(self, x: np.ndarray) -> Tensor:
        """Forward pass recording the tape, for training."""
        h: Tensor = Tensor(self._check_input(x))
        last = len(self.widths) - 2
        for i in range(last + 1):
            h = h @ self.params[2 * i] + self.params[2 * i + 1]
            if i < last:
                h = h.gelu()
        return h

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {p.name.split(".", 1)[1]: p.data for p in self.params}

    def load_state_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        for p in self.params:
            key = p.name.split(".", 1)[1]
            if key not in arrays:
                raise KeyError(f"missing parameter {key} for {self.name}")
            src = np.asarray(arrays[key], dtype=np.float64)
            if src.shape != p.data.shape:
                raise ValueError(f"shape mismatch for {key}: {src.shape} vs {p.data.shape}")
            p.data = src.copy()


@dataclass
class AdamState:
    """First/second moment buffers plus the step counter."""

    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_params(cls, params: list[Tensor], learning_rate: float) -> "AdamState":
        return cls(
            learning_rate=learning_rate,
            m=[np.zeros_like(p.data) for p in params],
            v=[np.zeros_like(p.data) for p in params],
        )


def adam_step(state: AdamState, params: list[np.ndarray], grads: list[np.ndarray]) -> list[np.ndarray]:
    """One bias-corrected Adam update. Returns the new parameter arrays.

    Moment buffers and the step counter update in place on `state`. Non-finite
    gradients are rejected; starting from fresh moment buffers, zero gradients
    move nothing.
    """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("params, grads, and state must have matching lengths")
    for g in grads:
        if not np.all(np.isfinite(g)):
            raise NonFiniteError("non-finite gradient passed to adam_step")
    state.step += 1
    t = state.step
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t
    out = []
    for i, (p, g) in enumerate(zip(params, grads)):
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * (g * g)
        m_hat = state.m[i] / bc1
        v_hat = state.v[i] / bc2
        out.append(p - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps))
    return out
