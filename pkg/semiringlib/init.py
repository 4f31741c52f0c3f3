"""Weight initialization schemes for linear and semiring layers.

The fair tropical initialization places a single zero in every row of the weight matrix,
cycling over the columns, and penalizes all other entries by :math:`K`:

.. math::

    w_{ij} = u_{ij} + \\begin{cases}
        0 & \\text{if } j = i \\bmod m \\\\
        -K & \\text{otherwise}
    \\end{cases}
    \\qquad
    u_{ij} \\sim \\mathcal{U}[-\\epsilon, \\epsilon]

for the max-plus semiring (:math:`+K` for min-plus).
As long as the inputs stay in :math:`[-K/2, K/2]` every input then "wins" either
:math:`\\lfloor n/m \\rfloor` or :math:`\\lceil n/m \\rceil` of the *n* outputs.

Examples
--------
.. code:: python

    >>> from semiringlib.init import InitSpec, fair_tropical_init
    >>> from semiringlib.semiring import MAX_PLUS

    >>> fair_tropical_init(4, 2, InitSpec(epsilon=0.0), MAX_PLUS)
    array([[ 0., -1.],
           [-1.,  0.],
           [ 0., -1.],
           [-1.,  0.]])

Index
-----
.. currentmodule:: semiringlib.init
.. autosummary::
    InitScheme
    InitSpec
    fair_tropical_init
    fair_log_init
    kaiming_init
    xavier_init
    init_weights

API
---
.. autoclass:: InitScheme
.. autoclass:: InitSpec
.. autofunction:: fair_tropical_init
.. autofunction:: fair_log_init
.. autofunction:: kaiming_init
.. autofunction:: xavier_init
.. autofunction:: init_weights

"""

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.typing import DTypeLike

from .dataclass import AbstractConfig
from .semiring import SemiringSpec, SemiringKind

__all__ = [
    'InitScheme', 'InitSpec', 'fair_tropical_init', 'fair_log_init',
    'kaiming_init', 'xavier_init', 'init_weights'
]


class InitScheme(enum.Enum):
    """The available initialization schemes."""

    FAIR_TROPICAL = 'fair_tropical'
    KAIMING = 'kaiming'
    XAVIER = 'xavier'


@dataclass(frozen=True, repr=False)
class InitSpec(AbstractConfig):
    """Parameters of an initialization scheme.

    Parameters
    ----------
    scheme : :class:`InitScheme` or :class:`str`
        The initialization scheme.

    k : :class:`float`
        The magnitude of the off-pattern penalty :math:`K`; must be positive.

    epsilon : :class:`float`
        The half-width of the uniform jitter; must be non-negative.

    rng_seed : :class:`int`, optional
        Seed for the random number generator if none is passed explicitly.

    """

    scheme: InitScheme = InitScheme.FAIR_TROPICAL
    k: float = 1.0
    epsilon: float = 0.5
    rng_seed: Optional[int] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, 'scheme', InitScheme(self.scheme))
        if not self.k > 0:
            raise ValueError(f"'k' expected a positive value; observed {self.k!r}")
        elif not self.epsilon >= 0:
            raise ValueError(f"'epsilon' expected a non-negative value; observed {self.epsilon!r}")

    def get_rng(self, rng: Optional[np.random.Generator] = None) -> np.random.Generator:
        """Return **rng** or, if ``None``, a new generator seeded with :attr:`InitSpec.rng_seed`."""
        return rng if rng is not None else np.random.default_rng(self.rng_seed)


def _check_dims(n: int, m: int) -> None:
    if n < 1 or m < 1:
        raise ValueError(f"weight matrices require n >= 1 and m >= 1; observed n={n!r}, m={m!r}")


def _fair_pattern(n: int, m: int, penalty: float, spec: InitSpec,
                  rng: Optional[np.random.Generator], dtype: DTypeLike) -> np.ndarray:
    _check_dims(n, m)
    rng = spec.get_rng(rng)
    jitter = rng.uniform(-spec.epsilon, spec.epsilon, size=(n, m))
    ret = np.full((n, m), penalty)
    ret[np.arange(n), np.arange(n) % m] = 0
    return (ret + jitter).astype(dtype)


def fair_tropical_init(n: int, m: int, spec: InitSpec, variant: SemiringSpec,
                       rng: Optional[np.random.Generator] = None,
                       dtype: DTypeLike = np.float64) -> np.ndarray:
    """Return a fair tropical ``n x m`` weight matrix for the max-plus or min-plus semiring.

    Parameters
    ----------
    n : :class:`int`
        The number of outputs.

    m : :class:`int`
        The number of inputs.

    spec : :class:`InitSpec`
        The penalty :math:`K` and jitter :math:`\\epsilon`.

    variant : :class:`~semiringlib.semiring.SemiringSpec`
        Either the max-plus (penalty :math:`-K`) or the min-plus (penalty :math:`+K`) semiring.

    rng : :class:`numpy.random.Generator`, optional
        The random number generator; defaults to one seeded by :attr:`InitSpec.rng_seed`.

    dtype : :data:`numpy.typing.DTypeLike`
        The data type of the returned matrix.

    """
    if variant.kind is SemiringKind.MAX_PLUS:
        penalty = -spec.k
    elif variant.kind is SemiringKind.MIN_PLUS:
        penalty = spec.k
    else:
        raise ValueError(f"'variant' expected a tropical semiring; observed {variant.label!r}")
    return _fair_pattern(n, m, penalty, spec, rng, dtype)


def fair_log_init(n: int, m: int, spec: InitSpec, mu: float,
                  rng: Optional[np.random.Generator] = None,
                  dtype: DTypeLike = np.float64) -> np.ndarray:
    """Return a fair ``n x m`` weight matrix for the logarithmic semiring with parameter **mu**.

    The penalty is :math:`-\\operatorname{sign}(\\mu) |K|`, so positive **mu** reproduces
    the max-plus pattern and negative **mu** the min-plus pattern.

    """
    if mu == 0 or not math.isfinite(mu):
        raise ValueError(f"'mu' expected a finite non-zero value; observed {mu!r}")
    return _fair_pattern(n, m, -math.copysign(abs(spec.k), mu), spec, rng, dtype)


def kaiming_init(n: int, m: int, rng: Optional[np.random.Generator] = None,
                 dtype: DTypeLike = np.float64) -> np.ndarray:
    """Return an ``n x m`` matrix with i.i.d. :math:`\\mathcal{N}(0, 2/m)` entries."""
    _check_dims(n, m)
    rng = rng if rng is not None else np.random.default_rng()
    return rng.normal(0.0, math.sqrt(2 / m), size=(n, m)).astype(dtype)


def xavier_init(n: int, m: int, rng: Optional[np.random.Generator] = None,
                dtype: DTypeLike = np.float64) -> np.ndarray:
    """Return an ``n x m`` matrix with i.i.d. :math:`\\mathcal{U}[-a, a]` entries, :math:`a = \\sqrt{6 / (n + m)}`."""  # noqa: E501
    _check_dims(n, m)
    rng = rng if rng is not None else np.random.default_rng()
    a = math.sqrt(6 / (n + m))
    return rng.uniform(-a, a, size=(n, m)).astype(dtype)


def init_weights(n: int, m: int, spec: InitSpec, semiring: SemiringSpec,
                 rng: Optional[np.random.Generator] = None,
                 dtype: DTypeLike = np.float64) -> np.ndarray:
    """Initialize an ``n x m`` weight matrix for a layer over **semiring**.

    Fair initialization is used for the tropical and logarithmic semirings when
    :attr:`InitSpec.scheme` is :attr:`InitScheme.FAIR_TROPICAL`;
    the linear semiring always uses Kaiming or Xavier initialization (Kaiming by default).

    """
    rng = spec.get_rng(rng)
    kind = semiring.kind
    if kind is SemiringKind.LINEAR or spec.scheme is not InitScheme.FAIR_TROPICAL:
        if spec.scheme is InitScheme.XAVIER:
            return xavier_init(n, m, rng, dtype)
        return kaiming_init(n, m, rng, dtype)
    elif semiring.is_tropical:
        return fair_tropical_init(n, m, spec, semiring, rng, dtype)
    return fair_log_init(n, m, spec, semiring.mu, rng, dtype)  # type: ignore[arg-type]
