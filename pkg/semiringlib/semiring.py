"""Scalar semiring algebra: the linear, max-plus, min-plus and logarithmic semirings.

All operations accept Python floats or NumPy arrays (applied element-wise) and
return a :class:`float` for scalar input.
The extended reals are represented by the IEEE ``±inf`` sentinels;
only the additive identities ever hold an infinity.

Examples
--------
.. code:: python

    >>> from semiringlib.semiring import SemiringSpec, MAX_PLUS, add, mul, zero

    >>> add(MAX_PLUS, 3.0, 5.0)
    5.0
    >>> mul(MAX_PLUS, 3.0, 5.0)
    8.0
    >>> mul(MAX_PLUS, zero(MAX_PLUS), 4.0)
    -inf
    >>> add(SemiringSpec.log_plus(1.0), 0.0, 0.0)
    0.6931471805599453

Index
-----
.. currentmodule:: semiringlib.semiring
.. autosummary::
    SemiringKind
    SemiringSpec
    LINEAR
    MAX_PLUS
    MIN_PLUS
    add
    mul
    zero
    one
    add_reduce
    semiring_eye

API
---
.. autoclass:: SemiringKind
.. autoclass:: SemiringSpec
.. autodata:: LINEAR
.. autodata:: MAX_PLUS
.. autodata:: MIN_PLUS
.. autofunction:: add
.. autofunction:: mul
.. autofunction:: zero
.. autofunction:: one
.. autofunction:: add_reduce
.. autofunction:: semiring_eye

"""

import enum
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from numpy.typing import DTypeLike
from scipy.special import logsumexp

from .dataclass import AbstractConfig
from .exceptions import EmptyReductionError

__all__ = [
    'SemiringKind', 'SemiringSpec', 'LINEAR', 'MAX_PLUS', 'MIN_PLUS',
    'add', 'mul', 'zero', 'one', 'add_reduce', 'semiring_eye'
]

ArrayLike = Union[float, np.ndarray]


class SemiringKind(enum.Enum):
    """The four supported semirings."""

    LINEAR = 'linear'
    MAX_PLUS = 'maxplus'
    MIN_PLUS = 'minplus'
    LOG_PLUS = 'logplus'


@dataclass(frozen=True, repr=False)
class SemiringSpec(AbstractConfig):
    """A description of a semiring: its kind and, for the logarithmic semiring, its :math:`\\mu`.

    Parameters
    ----------
    kind : :class:`SemiringKind` or :class:`str`
        The kind of semiring; strings are converted with :class:`SemiringKind`.

    mu : :class:`float`, optional
        The temperature parameter of the logarithmic semiring.
        Must be non-zero and is only allowed if **kind** is :attr:`SemiringKind.LOG_PLUS`.

    """

    kind: SemiringKind
    mu: Optional[float] = None

    def __post_init__(self) -> None:
        try:
            kind = SemiringKind(self.kind)
        except ValueError as ex:
            valid = [k.value for k in SemiringKind]
            raise ValueError(f"'kind' expected one of {valid!r}; observed {self.kind!r}") from ex
        object.__setattr__(self, 'kind', kind)

        if kind is SemiringKind.LOG_PLUS:
            if self.mu is None or not math.isfinite(self.mu) or self.mu == 0:
                raise ValueError(f"the logarithmic semiring requires a finite non-zero 'mu'; "
                                 f"observed {self.mu!r}")
            object.__setattr__(self, 'mu', float(self.mu))
        elif self.mu is not None:
            raise ValueError(f"'mu' is only allowed for the logarithmic semiring; "
                             f"observed kind={kind.value!r} and mu={self.mu!r}")

    @classmethod
    def linear(cls) -> 'SemiringSpec':
        """Return the ordinary :math:`(\\mathbb{R}, +, \\times)` semiring."""
        return cls(SemiringKind.LINEAR)

    @classmethod
    def max_plus(cls) -> 'SemiringSpec':
        """Return the tropical max-plus semiring."""
        return cls(SemiringKind.MAX_PLUS)

    @classmethod
    def min_plus(cls) -> 'SemiringSpec':
        """Return the tropical min-plus semiring."""
        return cls(SemiringKind.MIN_PLUS)

    @classmethod
    def log_plus(cls, mu: float) -> 'SemiringSpec':
        """Return the logarithmic semiring with parameter **mu**."""
        return cls(SemiringKind.LOG_PLUS, mu)

    @classmethod
    def from_name(cls, name: str, mu: Optional[float] = None) -> 'SemiringSpec':
        """Construct a semiring from its name (``"linear"``, ``"maxplus"``, ``"minplus"`` or ``"logplus"``)."""  # noqa: E501
        return cls(name.strip().lower(), mu if name.strip().lower() == 'logplus' else None)

    @property
    def is_tropical(self) -> bool:
        """Whether this is the max-plus or min-plus semiring."""
        return self.kind in (SemiringKind.MAX_PLUS, SemiringKind.MIN_PLUS)

    @property
    def is_logarithmic(self) -> bool:
        """Whether this is a logarithmic semiring."""
        return self.kind is SemiringKind.LOG_PLUS

    @property
    def label(self) -> str:
        """A short human-readable name, *e.g.* ``"logplus(mu=10)"``."""
        if self.mu is None:
            return self.kind.value
        return f'{self.kind.value}(mu={self.mu:g})'

    def __repr__(self) -> str:
        if self.mu is None:
            return f'{self.__class__.__name__}({self.kind.value!r})'
        return f'{self.__class__.__name__}({self.kind.value!r}, mu={self.mu!r})'

    def __str__(self) -> str:
        return self.label


#: The linear semiring.
LINEAR = SemiringSpec.linear()

#: The max-plus semiring.
MAX_PLUS = SemiringSpec.max_plus()

#: The min-plus semiring.
MIN_PLUS = SemiringSpec.min_plus()


def _as_float(value: ArrayLike) -> np.ndarray:
    ret = np.asarray(value)
    if ret.dtype.kind != 'f':
        ret = ret.astype(np.float64)
    return ret


def _unpack(value: np.ndarray) -> ArrayLike:
    """Convert 0-dimensional arrays into a :class:`float`."""
    if value.ndim == 0:
        return float(value)
    return value


def zero(spec: SemiringSpec) -> float:
    """Return the additive identity :math:`0_R` of **spec**.

    ``-inf`` for max-plus and logplus with :math:`\\mu > 0`,
    ``+inf`` for min-plus and logplus with :math:`\\mu < 0` and ``0`` for the linear semiring.

    """
    kind = spec.kind
    if kind is SemiringKind.LINEAR:
        return 0.0
    elif kind is SemiringKind.MAX_PLUS:
        return -math.inf
    elif kind is SemiringKind.MIN_PLUS:
        return math.inf
    return -math.inf if spec.mu > 0 else math.inf  # type: ignore[operator]


def one(spec: SemiringSpec) -> float:
    """Return the multiplicative identity :math:`1_R` of **spec**: ``1`` if linear and ``0`` otherwise."""  # noqa: E501
    return 1.0 if spec.kind is SemiringKind.LINEAR else 0.0


def add(spec: SemiringSpec, a: ArrayLike, b: ArrayLike) -> ArrayLike:
    """Return the semiring sum :math:`a \\oplus b`.

    The logarithmic sum :math:`\\frac{1}{\\mu} \\log(e^{\\mu a} + e^{\\mu b})` is evaluated
    with :func:`numpy.logaddexp` and thus never overflows.
    NaN input propagates to the output.

    """
    a_ = _as_float(a)
    b_ = _as_float(b)
    kind = spec.kind
    if kind is SemiringKind.LINEAR:
        ret = a_ + b_
    elif kind is SemiringKind.MAX_PLUS:
        ret = np.maximum(a_, b_)
    elif kind is SemiringKind.MIN_PLUS:
        ret = np.minimum(a_, b_)
    else:
        mu = spec.mu
        ret = np.logaddexp(mu * a_, mu * b_) / mu
    return _unpack(np.asarray(ret))


def mul(spec: SemiringSpec, a: ArrayLike, b: ArrayLike) -> ArrayLike:
    """Return the semiring product :math:`a \\odot b`.

    For the non-linear semirings this is ordinary addition, with the exception that
    :math:`0_R` annihilates: ``(+inf) + (-inf)`` resolves to :func:`zero` rather than NaN.

    """
    a_ = _as_float(a)
    b_ = _as_float(b)
    if spec.kind is SemiringKind.LINEAR:
        return _unpack(np.asarray(a_ * b_))

    with np.errstate(invalid='ignore'):
        ret = a_ + b_
    clash = np.isinf(a_) & np.isinf(b_) & (a_ != b_)
    if clash.any():
        ret = np.where(clash, zero(spec), ret).astype(ret.dtype, copy=False)
    return _unpack(np.asarray(ret))


def add_reduce(spec: SemiringSpec, values: ArrayLike, axis: int = -1) -> ArrayLike:
    """Return the :math:`\\oplus`-fold of **values** along **axis**.

    The logarithmic fold uses the shifted log-sum-exp form: with :math:`z_j = \\mu v_j`
    and :math:`M = \\max_j z_j` the result is
    :math:`\\frac{1}{\\mu}(M + \\log \\sum_j e^{z_j - M})`;
    the shift uses the maximum of :math:`\\mu v` for either sign of :math:`\\mu`.

    Examples
    --------
    .. code:: python

        >>> from semiringlib.semiring import SemiringSpec, MAX_PLUS, add_reduce

        >>> add_reduce(MAX_PLUS, [1.0, -3.0, 2.0])
        2.0
        >>> add_reduce(SemiringSpec.log_plus(1.0), [10000.0, 0.0])
        10000.0

    Raises
    ------
    EmptyReductionError
        Raised if **values** has no elements along **axis**.

    """
    v = _as_float(values)
    if v.ndim == 0:
        v = v.reshape(1)
    if v.shape[axis] == 0:
        raise EmptyReductionError("empty reduction: a semiring fold requires at least one element")

    kind = spec.kind
    if kind is SemiringKind.LINEAR:
        ret = v.sum(axis=axis)
    elif kind is SemiringKind.MAX_PLUS:
        ret = v.max(axis=axis)
    elif kind is SemiringKind.MIN_PLUS:
        ret = v.min(axis=axis)
    else:
        mu = spec.mu
        with np.errstate(divide='ignore', invalid='ignore'):
            ret = logsumexp(mu * v, axis=axis) / mu
        ret = np.asarray(ret).astype(v.dtype, copy=False)
    return _unpack(np.asarray(ret))


def semiring_eye(spec: SemiringSpec, n: int, dtype: DTypeLike = np.float64) -> np.ndarray:
    """Return the :math:`n \\times n` semiring identity matrix: :func:`one` on the diagonal and :func:`zero` elsewhere."""  # noqa: E501
    ret = np.full((n, n), zero(spec), dtype=dtype)
    np.fill_diagonal(ret, one(spec))
    return ret
