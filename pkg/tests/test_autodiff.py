"""Gradient correctness against central finite differences, plus op edge cases."""

import math

import numpy as np
import pytest

from cibo.autodiff import NonFiniteError, Tensor, as_tensor, gelu, gelu_grad, gradients
from cibo.rng import RandomSource

from conftest import mixed_rel_err

FD_EPS = 1e-6
FD_TOL = 1e-4


def _finite_diff(build_loss, param: Tensor, idx) -> float:
    old = param.data[idx]
    param.data[idx] = old + FD_EPS
    up = build_loss().item()
    param.data[idx] = old - FD_EPS
    down = build_loss().item()
    param.data[idx] = old
    return (up - down) / (2.0 * FD_EPS)


def _check_all_params(build_loss, params):
    grads = gradients(build_loss(), params)
    for p, g in zip(params, grads):
        it = np.ndindex(p.data.shape) if p.data.shape else [()]
        for idx in it:
            fd = _finite_diff(build_loss, p, idx)
            err = mixed_rel_err(float(np.asarray(g)[idx]), fd)
            assert err <= FD_TOL, f"{p.name}[{idx}]: ad={np.asarray(g)[idx]} fd={fd}"


def _leaf(rng, shape, name):
    return Tensor(rng.standard_normal(shape), requires_grad=True, name=name)


def _graph_mlp(rng):
    w1 = _leaf(rng, (3, 4), "w1")
    b1 = _leaf(rng, (4,), "b1")
    w2 = _leaf(rng, (4, 2), "w2")
    b2 = _leaf(rng, (2,), "b2")
    x = rng.standard_normal((5, 3))
    y = rng.standard_normal((5, 2))

    def loss():
        h = ((Tensor(x) @ w1) + b1).gelu()
        out = (h @ w2) + b2
        return (out - y).square().sum(axis=1).mean()

    return loss, [w1, b1, w2, b2]


def _graph_elementwise(rng):
    a = _leaf(rng, (4, 3), "a")
    b = _leaf(rng, (3,), "b")
    c = _leaf(rng, (4, 3), "c")
    s = _leaf(rng, (), "s")

    def loss():
        prod = (a + b) * c
        return ((prod - 0.3).square() * 0.5 + s * prod).sum() * 0.1

    return loss, [a, b, c, s]


def _graph_chain(rng):
    w1 = _leaf(rng, (2, 6), "w1")
    w2 = _leaf(rng, (6, 6), "w2")
    x = rng.standard_normal((3, 2))

    def loss():
        h = (Tensor(x) @ w1).gelu() @ w2
        flat = h.reshape(2, 9).sum(axis=0)
        return (flat * flat).mean()

    return loss, [w1, w2]


def _graph_negsub(rng):
    u = _leaf(rng, (5,), "u")
    v = _leaf(rng, (5,), "v")

    def loss():
        return ((-u) - v * 2.0 + 1.5).square().sum() * 0.25

    return loss, [u, v]


def _graph_weighted(rng):
    w = _leaf(rng, (3, 1), "w")
    x = rng.standard_normal((6, 3))
    y = rng.standard_normal((6, 1))
    coef = np.abs(rng.standard_normal(6)) + 0.1

    def loss():
        err = ((Tensor(x) @ w) - y).square().sum(axis=1)
        return (err * coef).mean()

    return loss, [w]


GRAPH_BUILDERS = [_graph_mlp, _graph_elementwise, _graph_chain, _graph_negsub, _graph_weighted]


def fd_check(builder, seed: int) -> float:
    """Worst mixed relative error across every parameter entry of one instance."""
    loss, params = builder(RandomSource(1000 + seed).child(builder.__name__))
    worst = 0.0
    grads = gradients(loss(), params)
    for p, g in zip(params, grads):
        it = np.ndindex(p.data.shape) if p.data.shape else [()]
        for idx in it:
            fd = _finite_diff(loss, p, idx)
            worst = max(worst, mixed_rel_err(float(np.asarray(g)[idx]), fd))
    return worst


def test_finite_difference_many_instances():
    """50 random op-graph instances, every parameter entry checked."""
    count = 0
    for seed in range(10):
        for builder in GRAPH_BUILDERS:
            loss, params = builder(RandomSource(1000 + seed).child(builder.__name__))
            _check_all_params(loss, params)
            count += 1
    assert count == 50


def test_matmul_grad_analytic():
    # d/dW ||W x - y||^2 at W = 0 equals -2 y x^T
    x = np.array([1.0, -2.0, 0.5])
    y = np.array([3.0, -1.0])
    w = Tensor(np.zeros((2, 3)), requires_grad=True, name="w")
    loss = ((w @ Tensor(x.reshape(3, 1))).reshape(2) - y).square().sum()
    (g,) = gradients(loss, [w])
    np.testing.assert_allclose(g, -2.0 * np.outer(y, x), atol=1e-12)


def test_bias_broadcast_grad():
    b = Tensor(np.zeros(3), requires_grad=True, name="b")
    x = np.arange(12.0).reshape(4, 3)
    loss = (Tensor(x) + b).sum()
    (g,) = gradients(loss, [b])
    np.testing.assert_allclose(g, np.full(3, 4.0))


def test_unreached_parameter_gets_zero_gradient():
    used = Tensor(np.ones(2), requires_grad=True, name="used")
    unused = Tensor(np.ones(3), requires_grad=True, name="unused")
    loss = used.square().sum()
    g = gradients(loss, [used, unused])
    np.testing.assert_allclose(g[0], 2.0 * np.ones(2))
    np.testing.assert_allclose(g[1], np.zeros(3))


def test_nonfinite_gradient_names_parameter():
    p = Tensor(np.ones(2), requires_grad=True, name="culprit")
    loss = (p * np.array([np.inf, 1.0])).sum()
    with pytest.raises(NonFiniteError, match="culprit"):
        gradients(loss, [p])


def test_backward_requires_scalar():
    p = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(ValueError):
        (p * 2.0).backward()


def test_grad_accumulates_through_shared_node():
    p = Tensor(np.array(2.0), requires_grad=True, name="p")
    loss = p * p  # both parents are the same node
    (g,) = gradients(loss, [p])
    assert g == pytest.approx(4.0)


def test_gelu_values_and_asymptotics():
    assert gelu(0.0) == 0.0
    assert gelu(10.0) == pytest.approx(10.0, abs=1e-12)
    assert gelu(-10.0) == pytest.approx(0.0, abs=1e-12)
    # gelu(1) = 0.5 * (1 + erf(1/sqrt(2)))
    assert gelu(1.0) == pytest.approx(0.5 * (1.0 + math.erf(1.0 / math.sqrt(2.0))), abs=1e-15)


def test_gelu_grad_matches_finite_difference():
    xs = np.linspace(-4.0, 4.0, 33)
    fd = (gelu(xs + 1e-6) - gelu(xs - 1e-6)) / 2e-6
    np.testing.assert_allclose(gelu_grad(xs), fd, atol=1e-8)


def test_as_tensor_passthrough():
    t = Tensor(np.ones(2))
    assert as_tensor(t) is t
    assert isinstance(as_tensor(3.0), Tensor)
