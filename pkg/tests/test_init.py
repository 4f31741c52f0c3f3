"""Tests for :mod:`semiringlib.init`."""

import math

import numpy as np
from assertionlib import assertion

from semiringlib.exceptions import ShapeError
from semiringlib.linalg import semiring_forward
from semiringlib.semiring import SemiringSpec, LINEAR, MAX_PLUS, MIN_PLUS
from semiringlib.verification import init_audit, uniform_sampler
from semiringlib.init import (
    InitScheme, InitSpec, fair_tropical_init, fair_log_init,
    kaiming_init, xavier_init, init_weights
)


def test_init_spec() -> None:
    """Tests for :class:`InitSpec`."""
    spec = InitSpec('kaiming', k=2.0)
    assertion.is_(spec.scheme, InitScheme.KAIMING)
    assertion.is_(InitSpec().scheme, InitScheme.FAIR_TROPICAL)
    assertion.assert_(InitSpec, k=0.0, exception=ValueError)
    assertion.assert_(InitSpec, epsilon=-0.1, exception=ValueError)
    assertion.assert_(InitSpec, 'orthogonal', exception=ValueError)

    rng = np.random.default_rng(0)
    assertion.is_(spec.get_rng(rng), rng)
    a = InitSpec(rng_seed=5).get_rng().uniform(size=3)
    b = InitSpec(rng_seed=5).get_rng().uniform(size=3)
    assertion.eq(a.tolist(), b.tolist())


def test_fair_tropical_pattern() -> None:
    """Tests for :func:`fair_tropical_init` without jitter."""
    spec = InitSpec(k=2.0, epsilon=0.0)
    W = fair_tropical_init(5, 3, spec, MAX_PLUS)
    ref = [
        [0.0, -2.0, -2.0],
        [-2.0, 0.0, -2.0],
        [-2.0, -2.0, 0.0],
        [0.0, -2.0, -2.0],
        [-2.0, 0.0, -2.0],
    ]
    assertion.eq(W.tolist(), ref)

    W = fair_tropical_init(2, 2, spec, MIN_PLUS)
    assertion.eq(W.tolist(), [[0.0, 2.0], [2.0, 0.0]])

    assertion.assert_(fair_tropical_init, 2, 2, spec, LINEAR, exception=ValueError)
    assertion.assert_(fair_tropical_init, 0, 2, spec, MAX_PLUS, exception=ValueError)


def test_fair_tropical_jitter() -> None:
    """Test that the jitter of :func:`fair_tropical_init` stays within epsilon."""
    spec = InitSpec(k=1.0, epsilon=0.25)
    W = fair_tropical_init(64, 8, spec, MAX_PLUS, rng=np.random.default_rng(1), dtype=np.float32)
    assertion.eq(W.dtype, np.float32)
    pattern = fair_tropical_init(64, 8, InitSpec(epsilon=0.0), MAX_PLUS)
    assertion.le(np.abs(W - pattern).max(), 0.25)


def test_fair_log_init() -> None:
    """Tests for :func:`fair_log_init`."""
    spec = InitSpec(k=1.0, epsilon=0.0)
    W_pos = fair_log_init(3, 2, spec, 10.0)
    W_neg = fair_log_init(3, 2, spec, -0.5)
    assertion.eq(W_pos.tolist(), fair_tropical_init(3, 2, spec, MAX_PLUS).tolist())
    assertion.eq(W_neg.tolist(), fair_tropical_init(3, 2, spec, MIN_PLUS).tolist())
    assertion.assert_(fair_log_init, 3, 2, spec, 0.0, exception=ValueError)
    assertion.assert_(fair_log_init, 3, 2, spec, math.inf, exception=ValueError)

    # Softmax weights of the first row at x = 0
    W = fair_log_init(2, 2, spec, 1.0)
    _, saved = semiring_forward(SemiringSpec.log_plus(1.0), np.zeros((1, 2)), W)
    weights = saved['softmax_weights'][0, 0]
    assertion.assert_(np.allclose, weights, [0.7311, 0.2689], atol=5e-5)
    assertion.isclose(weights[0], 1 / (1 + math.exp(-1)))


def test_fair_balance() -> None:
    """Test that every input wins either floor(n/m) or ceil(n/m) outputs."""
    rng = np.random.default_rng(2)
    for n, m in [(8, 3), (12, 4), (5, 7)]:
        for epsilon, half_width in [(0.0, 0.5), (0.1, 0.35)]:
            W = fair_tropical_init(n, m, InitSpec(k=1.0, epsilon=epsilon), MAX_PLUS, rng=rng)
            counts = init_audit(W, m, n, uniform_sampler(m, half_width), trials=200, rng=rng)
            assertion.shape_eq(counts, (200, m))
            assertion.assert_(np.all, counts.sum(axis=1) == n)
            assertion.ge(counts.min(), n // m)
            assertion.le(counts.max(), -(-n // m))

        W = fair_tropical_init(n, m, InitSpec(k=1.0, epsilon=0.0), MIN_PLUS, rng=rng)
        counts = init_audit(W, m, n, uniform_sampler(m, 0.5), trials=50, spec=MIN_PLUS, rng=rng)
        assertion.ge(counts.min(), n // m)
        assertion.le(counts.max(), -(-n // m))


def test_fair_balance_sizes() -> None:
    """Test the win counts of the fair tropical initialization on the model layer sizes."""
    rng = np.random.default_rng(5)
    k = 1.0
    for n, m in [(4, 2), (8, 4), (32, 8)]:
        # Without jitter every input wins exactly floor(n/m) or ceil(n/m) outputs
        W = fair_tropical_init(n, m, InitSpec(k=k, epsilon=0.0), MAX_PLUS)
        counts = init_audit(W, m, n, uniform_sampler(m, k / 2), trials=1000, rng=rng)
        assertion.eq(set(counts.ravel().tolist()), {n // m, -(-n // m)})
        assertion.eq(counts.min(axis=0).tolist(), counts.max(axis=0).tolist())

        # Jitter and inputs within K/4 keep the counts deterministic
        W = fair_tropical_init(n, m, InitSpec(k=k, epsilon=k / 4), MAX_PLUS, rng=rng)
        counts = init_audit(W, m, n, uniform_sampler(m, k / 4), trials=1000, rng=rng)
        assertion.eq(set(counts.ravel().tolist()), {n // m, -(-n // m)})

        # A jitter of K/2 starves an input only rarely
        starved = 0
        spec = InitSpec(k=k, epsilon=k / 2)
        for _ in range(1000):
            W = fair_tropical_init(n, m, spec, MAX_PLUS, rng=rng)
            counts = init_audit(W, m, n, uniform_sampler(m, k / 2), trials=1, rng=rng)
            starved += int(counts.min() == 0)
        assertion.le(starved, 150)

    W = fair_tropical_init(8, 4, InitSpec(epsilon=0.0), MAX_PLUS)
    assertion.assert_(init_audit, W, 8, 4, uniform_sampler(4, 0.5), 10, exception=ShapeError)

    # Equal weights: the first input wins every output
    counts = init_audit(np.zeros((8, 4)), 4, 8, lambda r: np.zeros(4), trials=3)
    assertion.eq(counts.tolist(), [[8, 0, 0, 0]] * 3)


def test_kaiming() -> None:
    """Tests for :func:`kaiming_init`."""
    W = kaiming_init(400, 50, rng=np.random.default_rng(3))
    assertion.shape_eq(W, (400, 50))
    assertion.isclose(W.std(), math.sqrt(2 / 50), rel_tol=0.05)
    assertion.assert_(kaiming_init, 4, 0, exception=ValueError)


def test_xavier() -> None:
    """Tests for :func:`xavier_init`."""
    W = xavier_init(30, 20, rng=np.random.default_rng(4))
    assertion.le(np.abs(W).max(), math.sqrt(6 / 50))
    assertion.assert_(xavier_init, 0, 4, exception=ValueError)


def test_init_weights() -> None:
    """Tests for :func:`init_weights`."""
    spec = InitSpec(epsilon=0.0, rng_seed=7)
    assertion.eq(init_weights(3, 2, spec, MAX_PLUS).tolist(),
                 fair_tropical_init(3, 2, spec, MAX_PLUS).tolist())
    assertion.eq(init_weights(3, 2, spec, SemiringSpec.log_plus(-1.0)).tolist(),
                 fair_tropical_init(3, 2, spec, MIN_PLUS).tolist())

    # The linear semiring falls back to Kaiming
    W1 = init_weights(3, 2, spec, LINEAR)
    W2 = kaiming_init(3, 2, rng=np.random.default_rng(7))
    assertion.eq(W1.tolist(), W2.tolist())

    W3 = init_weights(3, 2, InitSpec('xavier', rng_seed=7), MAX_PLUS)
    W4 = xavier_init(3, 2, rng=np.random.default_rng(7))
    assertion.eq(W3.tolist(), W4.tolist())
