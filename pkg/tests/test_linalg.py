"""Tests for :mod:`semiringlib.linalg`."""

import math

import numpy as np
from assertionlib import assertion

from semiringlib.exceptions import ShapeError
from semiringlib.semiring import SemiringSpec, LINEAR, MAX_PLUS, MIN_PLUS
from semiringlib.tensor import Tensor, Parameter, Tape
from semiringlib.verification import reference_matvec, finite_diff_grad
from semiringlib.linalg import (
    semiring_matvec, semiring_matmul, semiring_bias, linear_matmul,
    semiring_forward, backward_tropical, backward_logplus
)

LOG_10 = SemiringSpec.log_plus(10.0)
LOG_M1 = SemiringSpec.log_plus(-1.0)
SEMIRINGS = (LINEAR, MAX_PLUS, MIN_PLUS, LOG_10, LOG_M1, SemiringSpec.log_plus(1.0))


def test_matvec() -> None:
    """Tests for :func:`semiring_matvec`."""
    W = np.array([[0.0, -1.0], [-1.0, 0.0]])
    x = np.array([1.0, 3.0])
    assertion.eq(semiring_matvec(MAX_PLUS, W, x).data.tolist(), [2.0, 3.0])
    assertion.eq(semiring_matvec(MIN_PLUS, W, x).data.tolist(), [1.0, 0.0])
    assertion.eq(semiring_matvec(LINEAR, W, x).data.tolist(), [-3.0, -1.0])

    y = semiring_matvec(LOG_M1, W, x).data
    ref = -np.log(np.exp(-1.0) + np.exp(-2.0)), -np.log(np.exp(0.0) + np.exp(-3.0))
    assertion.assert_(np.allclose, y, ref)

    assertion.assert_(semiring_matvec, MAX_PLUS, W, np.ones(3), exception=ShapeError)
    assertion.assert_(semiring_matvec, MAX_PLUS, W, np.ones((1, 2)), exception=ShapeError)


def test_matvec_oracle() -> None:
    """Test :func:`semiring_matvec` against the scalar fold."""
    rng = np.random.default_rng(0)
    for spec in SEMIRINGS:
        for n, m in [(1, 1), (3, 5), (8, 2)]:
            W = rng.normal(size=(n, m))
            x = rng.normal(size=m)
            y = semiring_matvec(spec, W, x).data
            ref = reference_matvec(spec, W, x)
            assertion.assert_(np.allclose, y, ref, rtol=1e-12, atol=1e-12)


def test_matvec_identity() -> None:
    """Test that a column of additive identities never wins."""
    W = np.array([[-math.inf, 0.5], [-math.inf, -math.inf]])
    x = np.array([100.0, 2.0])
    y = semiring_matvec(MAX_PLUS, W, x).data
    assertion.eq(y.tolist(), [2.5, -math.inf])

    W = np.array([[math.inf, 0.5]])
    y = semiring_matvec(LOG_M1, W, x).data
    assertion.isclose(y[0], 2.5)

    # Additive identities in the input itself
    x = np.array([-math.inf, 1.0])
    y = semiring_matvec(MAX_PLUS, np.zeros((1, 2)), x).data
    assertion.eq(y.tolist(), [1.0])


def test_logplus_stability() -> None:
    """Test that large entries neither overflow nor underflow the logarithmic product."""
    W = np.zeros((1, 2))
    x = np.array([1000.0, 0.0])
    y = semiring_matvec(LOG_10, W, x).data
    assertion.isclose(y[0], 1000.0)

    x = np.array([-1000.0, 0.0])
    y = semiring_matvec(LOG_M1, W, x).data
    assertion.isclose(y[0], -1000.0)


def test_matmul() -> None:
    """Test that the rows of :func:`semiring_matmul` equal :func:`semiring_matvec`."""
    rng = np.random.default_rng(1)
    X = rng.normal(size=(4, 3))
    W = rng.normal(size=(5, 3))
    for spec in SEMIRINGS:
        Y = semiring_matmul(spec, X, W).data
        assertion.shape_eq(Y, (4, 5))
        for x, y in zip(X, Y):
            assertion.assert_(np.allclose, y, semiring_matvec(spec, W, x).data)

    assertion.assert_(semiring_matmul, MAX_PLUS, X, W.T, exception=ShapeError)
    assertion.assert_(semiring_matmul, MAX_PLUS, X[0], W, exception=ShapeError)


def test_matmul_dtype() -> None:
    """Test that :func:`semiring_matmul` preserves single precision."""
    X = np.ones((2, 3), dtype=np.float32)
    W = np.zeros((4, 3), dtype=np.float32)
    for spec in (MAX_PLUS, LOG_10):
        assertion.eq(semiring_matmul(spec, X, W).dtype, np.float32)


def test_backward_tropical() -> None:
    """Tests for :func:`backward_tropical`."""
    W = np.array([[0.0, -1.0], [-1.0, 0.0]])
    x = np.array([1.0, 3.0])
    W_bar, x_bar = backward_tropical(W, x, np.array([1.0, 2.0]), np.array([1, 1]))
    assertion.eq(W_bar.tolist(), [[0.0, 1.0], [0.0, 2.0]])
    assertion.eq(x_bar.tolist(), [0.0, 3.0])

    # Zero gradient for infinite weights
    W[0, 1] = -math.inf
    W_bar, _ = backward_tropical(W, x, np.array([1.0, 2.0]), np.array([1, 1]))
    assertion.eq(W_bar[0, 1], 0.0)


def test_backward_tropical_ties() -> None:
    """Test that ties route the gradient to the lowest index only."""
    W = Parameter(np.zeros((1, 3)), group='semiring')
    x = Parameter(np.array([1.0, 1.0, 1.0]))
    tape = Tape()
    y = semiring_matvec(MAX_PLUS, W, x, tape=tape)
    tape.backward(y)
    assertion.eq(W.grad.tolist(), [[1.0, 0.0, 0.0]])
    assertion.eq(x.grad.tolist(), [1.0, 0.0, 0.0])


def test_backward_logplus() -> None:
    """Tests for :func:`backward_logplus`."""
    S = np.array([[0.25, 0.75], [0.5, 0.5]])
    W_bar, x_bar = backward_logplus(np.zeros((2, 2)), np.zeros(2), np.array([4.0, 2.0]), S)
    assertion.eq(W_bar.tolist(), [[1.0, 3.0], [1.0, 1.0]])
    assertion.eq(x_bar.tolist(), [2.0, 4.0])


def test_backward_logplus_saturated() -> None:
    """Test that a strongly penalized input keeps a small but non-zero logarithmic gradient."""
    spec = SemiringSpec.log_plus(1.0)
    W = Parameter(np.array([[0.0, -20.0]]), group='semiring')
    x = Parameter(np.zeros(2))
    tape = Tape()
    y = semiring_matvec(spec, W, x, tape=tape)
    tape.backward(y, grad=np.array([1.0]))

    tail = math.exp(-20) / (1 + math.exp(-20))
    assertion.isclose(y.data[0], math.log1p(math.exp(-20)), rel_tol=1e-6)
    assertion.isclose(x.grad[0], 1.0)
    assertion.isclose(x.grad[1], 2.06e-9, rel_tol=1e-3)
    assertion.isclose(x.grad[1], tail, rel_tol=1e-9)
    assertion.assert_(np.allclose, W.grad, [[1 - tail, tail]], rtol=1e-12, atol=0.0)

    _, saved = semiring_forward(spec, np.zeros((1, 2)), W.data)
    _, x_bar = backward_logplus(W.data, np.zeros(2), np.array([1.0]), saved['softmax_weights'][0])
    assertion.assert_(np.allclose, x_bar, x.grad, rtol=1e-12, atol=0.0)


def test_logplus_gradient_rows() -> None:
    """Test that each row of the logarithmic weight gradient sums to its output gradient."""
    rng = np.random.default_rng(2)
    for mu in (-10.0, -1.0, 1.0, 10.0):
        W = Parameter(rng.normal(size=(3, 4)), group='semiring')
        x = Tensor(rng.normal(size=4))
        tape = Tape()
        y = semiring_matvec(SemiringSpec.log_plus(mu), W, x, tape=tape)
        tape.backward(y, grad=np.array([1.0, 2.0, -0.5]))
        assertion.assert_(np.allclose, W.grad.sum(axis=1), [1.0, 2.0, -0.5])


def test_matmul_gradient() -> None:
    """Test the recorded gradients of :func:`semiring_matmul` against finite differences."""
    rng = np.random.default_rng(3)
    for spec in SEMIRINGS:
        X = Parameter(rng.uniform(-1, 1, size=(2, 3)))
        W = Parameter(rng.uniform(-1, 1, size=(4, 3)), group='semiring')
        weights = rng.normal(size=(2, 4))

        tape = Tape()
        Y = semiring_matmul(spec, X, W, tape=tape)
        tape.backward(Y, grad=weights)

        def f(_: np.ndarray) -> float:
            return float((semiring_matmul(spec, X, W).data * weights).sum())

        for p in (X, W):
            ref = finite_diff_grad(f, p.data)
            assertion.assert_(np.allclose, p.grad, ref, rtol=1e-4, atol=1e-6)


def test_bias() -> None:
    """Tests for :func:`semiring_bias`."""
    y = Parameter(np.array([[1.0, 5.0]]))
    c = Parameter(np.array([3.0, 2.0]), group='semiring')
    tape = Tape()
    out = semiring_bias(MAX_PLUS, y, c, tape=tape)
    assertion.eq(out.data.tolist(), [[3.0, 5.0]])
    tape.backward(out)
    assertion.eq(y.grad.tolist(), [[0.0, 1.0]])
    assertion.eq(c.grad.tolist(), [1.0, 0.0])

    out = semiring_bias(LOG_10, np.zeros(2), np.zeros(2))
    assertion.assert_(np.allclose, out.data, math.log(2) / 10)
    assertion.assert_(semiring_bias, MAX_PLUS, np.zeros(3), np.zeros(2), exception=ShapeError)


def test_linear_matmul() -> None:
    """Tests for :func:`linear_matmul`."""
    X = Parameter(np.array([[1.0, 2.0]]))
    W = Parameter(np.array([[1.0, 0.0], [1.0, 1.0], [0.0, 2.0]]))
    tape = Tape()
    Y = linear_matmul(X, W, tape=tape)
    assertion.eq(Y.data.tolist(), [[1.0, 3.0, 4.0]])
    tape.backward(Y)
    assertion.eq(X.grad.tolist(), [[2.0, 3.0]])
    assertion.eq(W.grad.tolist(), [[1.0, 2.0]] * 3)
    assertion.assert_(linear_matmul, X, W.data.T, exception=ShapeError)
