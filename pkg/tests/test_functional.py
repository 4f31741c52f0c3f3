"""Tests for :mod:`semiringlib.functional`."""

import math
from typing import Callable, Optional, Sequence

import numpy as np
from assertionlib import assertion

from semiringlib.exceptions import ShapeError
from semiringlib.tensor import Tensor, Parameter, Tape
from semiringlib.verification import finite_diff_grad
from semiringlib.functional import (
    relu, gelu, layernorm, add, reshape, depthwise_conv2d, cross_entropy_loss
)


def _check_grads(func: Callable[..., Tensor], params: Sequence[Parameter], seed: int = 0) -> None:
    """Compare the recorded gradients of ``sum(func(*params) * weights)`` with finite differences."""  # noqa: E501
    out = func(*params)
    weights = np.asarray(np.random.default_rng(seed).normal(size=out.shape))

    tape = Tape()
    out = func(*params, tape=tape)
    tape.backward(out, grad=weights)

    def f(_: np.ndarray) -> float:
        return float((func(*params).data * weights).sum())

    for p in params:
        ref = finite_diff_grad(f, p.data)
        assertion.assert_(np.allclose, p.grad, ref, rtol=1e-5, atol=1e-7)


def test_relu() -> None:
    """Tests for :func:`relu`."""
    x = Parameter(np.array([-1.0, 0.0, 2.0]))
    tape = Tape()
    y = relu(x, tape=tape)
    assertion.eq(y.data.tolist(), [0.0, 0.0, 2.0])
    tape.backward(y)
    assertion.eq(x.grad.tolist(), [0.0, 0.0, 1.0])
    assertion.eq(relu(np.ones(2, dtype=np.float32)).dtype, np.float32)


def test_gelu() -> None:
    """Tests for :func:`gelu`."""
    y = gelu(np.array([0.0, 1.0, -1.0])).data
    assertion.eq(y[0], 0.0)
    assertion.isclose(y[1], 0.5 * (1 + math.erf(1 / math.sqrt(2))))
    assertion.isclose(y[1] - y[2], 1.0)

    x = Parameter(np.linspace(-3, 3, 7))
    _check_grads(gelu, [x])


def test_layernorm() -> None:
    """Tests for :func:`layernorm`."""
    x = np.array([[1.0, 2.0, 3.0, 4.0], [-5.0, 0.0, 5.0, 10.0]])
    y = layernorm(x).data
    assertion.assert_(np.allclose, y.mean(axis=-1), 0.0)
    assertion.assert_(np.allclose, y.var(axis=-1), 1.0, atol=1e-4)

    gamma = np.full(4, 2.0)
    beta = np.full(4, 1.0)
    y2 = layernorm(x, gamma, beta).data
    assertion.assert_(np.allclose, y2, 2 * y + 1)

    # Constant rows normalize to zero rather than NaN
    assertion.eq(layernorm(np.ones((1, 3))).data.tolist(), [[0.0, 0.0, 0.0]])

    assertion.assert_(layernorm, np.ones((2, 1)), exception=ShapeError)
    assertion.assert_(layernorm, x, gamma, exception=TypeError)
    assertion.assert_(layernorm, x, np.ones(3), np.ones(3), exception=ShapeError)


def test_layernorm_grad() -> None:
    """Test the gradients of :func:`layernorm` against finite differences."""
    rng = np.random.default_rng(1)
    x = Parameter(rng.normal(size=(3, 5)))
    gamma = Parameter(rng.normal(size=5), decay=False)
    beta = Parameter(rng.normal(size=5), decay=False)
    _check_grads(layernorm, [x, gamma, beta])
    x.zero_grad()
    _check_grads(layernorm, [x])


def test_add_reshape() -> None:
    """Tests for :func:`add` and :func:`reshape`."""
    a = Parameter(np.ones((2, 3)))
    b = Parameter(np.ones((2, 3)))
    tape = Tape()
    c = reshape(add(a, b, tape=tape), (3, 2), tape=tape)
    assertion.shape_eq(c, (3, 2))
    tape.backward(c, grad=np.arange(6.0).reshape(3, 2))
    assertion.eq(a.grad.tolist(), [[0.0, 1.0, 2.0], [3.0, 4.0, 5.0]])
    assertion.eq(b.grad.tolist(), a.grad.tolist())

    assertion.assert_(add, np.ones(2), np.ones(3), exception=ShapeError)
    assertion.assert_(reshape, np.ones(6), (4, 2), exception=ShapeError)


def test_depthwise_conv2d() -> None:
    """Tests for :func:`depthwise_conv2d`."""
    x = np.arange(16.0).reshape(4, 4, 1)

    # A centered delta kernel is the identity
    kernel = np.zeros((3, 3, 1))
    kernel[1, 1, 0] = 1.0
    assertion.eq(depthwise_conv2d(x, kernel).data.tolist(), x.tolist())

    # Zero padding at the borders
    y = depthwise_conv2d(x, np.ones((3, 3, 1))).data
    assertion.eq(y[0, 0, 0], 0.0 + 1.0 + 4.0 + 5.0)
    assertion.eq(y[1, 1, 0], sum(range(0, 3)) + sum(range(4, 7)) + sum(range(8, 11)))

    assertion.shape_eq(depthwise_conv2d(np.ones((2, 8, 8, 4)), np.ones((7, 7, 4))), (2, 8, 8, 4))
    assertion.assert_(depthwise_conv2d, np.ones((4, 4)), kernel, exception=ShapeError)
    assertion.assert_(depthwise_conv2d, x, np.ones((2, 2, 1)), exception=ShapeError)
    assertion.assert_(depthwise_conv2d, x, np.ones((3, 3, 2)), exception=ShapeError)


def test_depthwise_conv2d_grad() -> None:
    """Test the gradients of :func:`depthwise_conv2d` against finite differences."""
    rng = np.random.default_rng(2)
    x = Parameter(rng.normal(size=(2, 5, 5, 3)))
    kernel = Parameter(rng.normal(size=(3, 3, 3)))
    _check_grads(depthwise_conv2d, [x, kernel])


def test_cross_entropy_loss() -> None:
    """Tests for :func:`cross_entropy_loss`."""
    loss = cross_entropy_loss(np.zeros((2, 4)), np.array([0, 3]))
    assertion.isclose(loss.item(), math.log(4))

    # Large logits do not overflow
    logits = np.array([[1000.0, 0.0]])
    assertion.isclose(cross_entropy_loss(logits, np.array([0])).item(), 0.0, abs_tol=1e-12)
    assertion.isclose(cross_entropy_loss(logits, np.array([1])).item(), 1000.0)

    z = Parameter(np.array([[1.0, 2.0, 3.0]]))
    tape = Tape()
    loss = cross_entropy_loss(z, np.array([2]), tape=tape)
    tape.backward(loss)
    p = np.exp(z.data) / np.exp(z.data).sum()
    assertion.assert_(np.allclose, z.grad, p - [0.0, 0.0, 1.0])

    assertion.assert_(cross_entropy_loss, np.zeros((2, 3)), np.array([0, 3]),
                      exception=ValueError)
    assertion.assert_(cross_entropy_loss, np.zeros((2, 3)), np.array([0]), exception=ShapeError)
    assertion.assert_(cross_entropy_loss, np.zeros(3), np.array([0]), exception=ShapeError)


def test_cross_entropy_grad() -> None:
    """Test the gradient of :func:`cross_entropy_loss` against finite differences."""
    z = Parameter(np.random.default_rng(3).normal(size=(4, 3)))
    labels = np.array([0, 2, 1, 2])

    def func(logits: Tensor, tape: Optional[Tape] = None) -> Tensor:
        return cross_entropy_loss(logits, labels, tape=tape)

    _check_grads(func, [z])
