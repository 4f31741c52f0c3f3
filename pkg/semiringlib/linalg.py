"""Quasilinear matrix operators :math:`B \\odot x` and their exact reverse-mode gradients.

The semiring matrix-vector product generalizes the ordinary one:

.. math::

    y_i = \\bigoplus_{j=1}^m w_{ij} \\odot x_j.

Batches are row-major with the batch as the leading axis:
:code:`semiring_matmul(spec, X, W)` maps ``X[b, m]`` and ``W[n, m]`` to ``Y[b, n]``.

The forward pass saves what the backward pass needs: the winning column per output
for the tropical semirings (lowest index on ties) and the softmax weights for the
logarithmic semiring. Gradients with respect to infinite weights are defined as zero.

Examples
--------
.. code:: python

    >>> import numpy as np
    >>> from semiringlib.semiring import MAX_PLUS
    >>> from semiringlib.linalg import semiring_matvec

    >>> W = np.array([[1.0, 0.0], [0.0, 2.0]])
    >>> semiring_matvec(MAX_PLUS, W, np.zeros(2)).data
    array([1., 2.])

Index
-----
.. currentmodule:: semiringlib.linalg
.. autosummary::
    semiring_matvec
    semiring_matmul
    semiring_bias
    linear_matmul
    semiring_forward
    backward_tropical
    backward_logplus
    backward_linear

API
---
.. autofunction:: semiring_matvec
.. autofunction:: semiring_matmul
.. autofunction:: semiring_bias
.. autofunction:: linear_matmul
.. autofunction:: semiring_forward
.. autofunction:: backward_tropical
.. autofunction:: backward_logplus
.. autofunction:: backward_linear

"""

from typing import Any, Dict, Optional, Tuple, Union

import numpy as np
from scipy.special import logsumexp, softmax

from .semiring import SemiringSpec, SemiringKind, mul, add
from .tensor import Tensor, Tape, as_tensor
from .exceptions import ShapeError

__all__ = [
    'semiring_matvec', 'semiring_matmul', 'semiring_bias', 'linear_matmul',
    'semiring_forward', 'backward_tropical', 'backward_logplus', 'backward_linear'
]

TensorLike = Union[Tensor, np.ndarray]


def _check_matmul(op: str, X: np.ndarray, W: np.ndarray) -> None:
    if W.ndim != 2 or X.ndim != 2 or X.shape[1] != W.shape[1]:
        raise ShapeError(f"{op}: cannot combine an input of shape {X.shape} with a weight "
                         f"matrix of shape {W.shape}; expected input (b, m) and weights (n, m)")


def semiring_forward(spec: SemiringSpec, X: np.ndarray,
                     W: np.ndarray) -> Tuple[np.ndarray, Dict[str, Any]]:
    """Compute ``Y[b, n]`` from ``X[b, m]`` and ``W[n, m]`` and return it with the saved forward context.

    The saved context holds ``"winners"`` (tropical) or ``"softmax_weights"`` (logarithmic).

    """  # noqa: E501
    _check_matmul('semiring_forward', X, W)
    dtype = np.result_type(X.dtype, W.dtype)
    kind = spec.kind

    if kind is SemiringKind.LINEAR:
        return (X @ W.T).astype(dtype, copy=False), {}

    candidates = np.asarray(mul(spec, X[:, None, :], W[None, :, :]), dtype=dtype)
    if kind is SemiringKind.MAX_PLUS:
        winners = candidates.argmax(axis=-1)
    elif kind is SemiringKind.MIN_PLUS:
        winners = candidates.argmin(axis=-1)
    else:
        mu = spec.mu
        scaled = mu * candidates
        with np.errstate(divide='ignore', invalid='ignore'):
            Y = logsumexp(scaled, axis=-1) / mu
            weights = softmax(scaled, axis=-1)
        weights = np.where(np.isfinite(weights), weights, 0).astype(dtype, copy=False)
        return np.asarray(Y, dtype=dtype), {'softmax_weights': weights}

    Y = np.take_along_axis(candidates, winners[..., None], axis=-1)[..., 0]
    return Y, {'winners': winners}


def backward_tropical(W: np.ndarray, x: np.ndarray, y_bar: np.ndarray,
                      winners: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Route each output gradient :math:`\\bar{y}_i` entirely to its winning input.

    .. math::

        \\bar{x}_j = \\sum_{i: \\text{winners}_i = j} \\bar{y}_i
        \\qquad
        \\bar{w}_{i, \\text{winners}_i} = \\bar{y}_i

    Accepts a single vector (``x[m]``, ``y_bar[n]``, ``winners[n]``) or a batch
    (``x[b, m]``, ``y_bar[b, n]``, ``winners[b, n]``); weight gradients are summed over the batch.

    Returns
    -------
    :class:`tuple` [:class:`numpy.ndarray`, :class:`numpy.ndarray`]
        The gradients ``(W_bar, x_bar)``.

    """
    W = np.asarray(W)
    x = np.asarray(x)
    batched = x.ndim == 2
    X = np.atleast_2d(x)
    Y_bar = np.atleast_2d(y_bar)
    win = np.atleast_2d(winners)
    b, n = Y_bar.shape
    dtype = np.result_type(X.dtype, W.dtype, Y_bar.dtype)

    x_bar = np.zeros(X.shape, dtype=dtype)
    np.add.at(x_bar, (np.broadcast_to(np.arange(b)[:, None], (b, n)), win), Y_bar)

    W_bar = np.zeros(W.shape, dtype=dtype)
    np.add.at(W_bar, (np.broadcast_to(np.arange(n), (b, n)), win), Y_bar)
    W_bar[~np.isfinite(W)] = 0
    return W_bar, (x_bar if batched else x_bar[0])


def backward_logplus(W: np.ndarray, x: np.ndarray, y_bar: np.ndarray,
                     softmax_weights: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Distribute each output gradient over the inputs according to the saved softmax weights.

    .. math::

        \\bar{w}_{ij} = s_{ij} \\bar{y}_i
        \\qquad
        \\bar{x}_j = \\sum_i s_{ij} \\bar{y}_i
        \\qquad
        s_{ij} = \\frac{e^{\\mu(x_j + w_{ij})}}{\\sum_k e^{\\mu(x_k + w_{ik})}}

    Accepts a single vector (``softmax_weights[n, m]``) or a batch (``softmax_weights[b, n, m]``).

    Returns
    -------
    :class:`tuple` [:class:`numpy.ndarray`, :class:`numpy.ndarray`]
        The gradients ``(W_bar, x_bar)``.

    """
    W = np.asarray(W)
    batched = np.ndim(x) == 2
    S = np.asarray(softmax_weights)
    if not batched:
        S = S[None]
    Y_bar = np.atleast_2d(y_bar)

    weighted = S * Y_bar[..., None]
    W_bar = weighted.sum(axis=0)
    W_bar[~np.isfinite(W)] = 0
    x_bar = weighted.sum(axis=1)
    return W_bar, (x_bar if batched else x_bar[0])


def backward_linear(X: np.ndarray, W: np.ndarray,
                    y_bar: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Return the gradients ``(W_bar, X_bar)`` of :math:`Y = X W^T`: :math:`\\bar{Y}^T X` and :math:`\\bar{Y} W`."""  # noqa: E501
    X2 = np.atleast_2d(X)
    Y_bar = np.atleast_2d(y_bar)
    W_bar = Y_bar.T @ X2
    X_bar = Y_bar @ W
    return W_bar, (X_bar if np.ndim(X) == 2 else X_bar[0])


def _semiring_backward(spec: SemiringSpec, X: np.ndarray, W: np.ndarray, saved: Dict[str, Any],
                       Y_bar: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Return ``(X_bar, W_bar)`` for a batched semiring product."""
    if spec.kind is SemiringKind.LINEAR:
        W_bar, X_bar = backward_linear(X, W, Y_bar)
    elif spec.is_tropical:
        W_bar, X_bar = backward_tropical(W, X, Y_bar, saved['winners'])
    else:
        W_bar, X_bar = backward_logplus(W, X, Y_bar, saved['softmax_weights'])
    return X_bar, W_bar


def semiring_matmul(spec: SemiringSpec, X: TensorLike, W: TensorLike,
                    tape: Optional[Tape] = None) -> Tensor:
    """Return the batched semiring product ``Y[b, n]`` whose row *k* is :code:`semiring_matvec(spec, W, X[k])`.

    Parameters
    ----------
    spec : :class:`~semiringlib.semiring.SemiringSpec`
        The semiring.

    X : :class:`~semiringlib.tensor.Tensor`, shape :math:`(b, m)`
        The batch of input vectors; may contain the additive identity of **spec**.

    W : :class:`~semiringlib.tensor.Tensor`, shape :math:`(n, m)`
        The weight matrix.

    tape : :class:`~semiringlib.tensor.Tape`, optional
        If supplied, record the operation for reverse-mode differentiation.

    Raises
    ------
    ShapeError
        Raised if the shapes of **X** and **W** do not conform.

    """  # noqa: E501
    X_t = as_tensor(X)
    W_t = as_tensor(W)
    Y, saved = semiring_forward(spec, X_t.data, W_t.data)
    out = Tensor(Y)
    if tape is None:
        return out

    def backward(Y_bar: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return _semiring_backward(spec, X_t.data, W_t.data, saved, Y_bar)

    saved = {**saved, 'spec': spec}
    return tape.record('semiring_matmul', (X_t, W_t), out, backward, saved=saved)


def semiring_matvec(spec: SemiringSpec, W: TensorLike, x: TensorLike,
                    tape: Optional[Tape] = None) -> Tensor:
    """Return the semiring matrix-vector product ``y[n]`` of ``W[n, m]`` and ``x[m]``.

    Raises
    ------
    ShapeError
        Raised if the shapes of **W** and **x** do not conform.

    """
    W_t = as_tensor(W)
    x_t = as_tensor(x)
    if x_t.ndim != 1:
        raise ShapeError(f"semiring_matvec: expected a vector; observed shape {x_t.shape}")
    if W_t.ndim != 2 or W_t.shape[1] != x_t.shape[0]:
        raise ShapeError(f"semiring_matvec: cannot multiply W of shape {W_t.shape} "
                         f"with x of shape {x_t.shape}")

    Y, saved = semiring_forward(spec, x_t.data[None], W_t.data)
    out = Tensor(Y[0])
    if tape is None:
        return out

    def backward(y_bar: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        X_bar, W_bar = _semiring_backward(spec, x_t.data[None], W_t.data, saved, y_bar[None])
        return X_bar[0], W_bar

    saved = {**saved, 'spec': spec}
    return tape.record('semiring_matvec', (x_t, W_t), out, backward, saved=saved)


def semiring_bias(spec: SemiringSpec, y: TensorLike, c: TensorLike,
                  tape: Optional[Tape] = None) -> Tensor:
    """Return the component-wise semiring sum :math:`y \\oplus c`.

    **y** may be a vector ``y[n]`` or a batch ``y[b, n]``; **c** is a vector ``c[n]``.
    On tropical ties the gradient goes to **y**.

    Raises
    ------
    ShapeError
        Raised if the trailing dimension of **y** does not match **c**.

    """
    y_t = as_tensor(y)
    c_t = as_tensor(c)
    if c_t.ndim != 1 or y_t.ndim not in (1, 2) or y_t.shape[-1] != c_t.shape[0]:
        raise ShapeError(f"semiring_bias: cannot add a bias of shape {c_t.shape} "
                         f"to an input of shape {y_t.shape}")

    out = Tensor(np.asarray(add(spec, y_t.data, c_t.data)))
    if tape is None:
        return out

    kind = spec.kind
    if kind is SemiringKind.LINEAR:
        share = np.ones_like(out.data)
    elif kind is SemiringKind.MAX_PLUS:
        share = (y_t.data >= c_t.data).astype(out.data.dtype)
    elif kind is SemiringKind.MIN_PLUS:
        share = (y_t.data <= c_t.data).astype(out.data.dtype)
    else:
        mu = spec.mu
        with np.errstate(invalid='ignore'):
            share = np.exp(mu * y_t.data - np.logaddexp(mu * y_t.data, mu * c_t.data))
        share = np.where(np.isfinite(share), share, 1).astype(out.data.dtype)

    def backward(y_bar: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        c_bar = (1 - share) * y_bar if kind is not SemiringKind.LINEAR else y_bar
        if c_bar.ndim == 2:
            c_bar = c_bar.sum(axis=0)
        return share * y_bar, c_bar

    return tape.record('semiring_bias', (y_t, c_t), out, backward, saved={'spec': spec})


def linear_matmul(X: TensorLike, W: TensorLike, tape: Optional[Tape] = None) -> Tensor:
    """Return the ordinary product :math:`Y = X W^T` of ``X[b, m]`` and ``W[n, m]``; no bias.

    Raises
    ------
    ShapeError
        Raised if the shapes of **X** and **W** do not conform.

    """
    X_t = as_tensor(X)
    W_t = as_tensor(W)
    _check_matmul('linear_matmul', X_t.data, W_t.data)
    out = Tensor(X_t.data @ W_t.data.T)
    if tape is None:
        return out

    def backward(Y_bar: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        W_bar, X_bar = backward_linear(X_t.data, W_t.data, Y_bar)
        return X_bar, W_bar

    return tape.record('linear_matmul', (X_t, W_t), out, backward)
