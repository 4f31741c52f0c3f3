"""Tape-aware elementwise operations, normalization, convolution and the classification loss.

Every function accepts either :class:`~semiringlib.tensor.Tensor` instances or plain arrays
and an optional :class:`~semiringlib.tensor.Tape`; if a tape is supplied the operation
and its backward rule are recorded on it.

Index
-----
.. currentmodule:: semiringlib.functional
.. autosummary::
    relu
    gelu
    layernorm
    add
    reshape
    depthwise_conv2d
    cross_entropy_loss

API
---
.. autofunction:: relu
.. autofunction:: gelu
.. autofunction:: layernorm
.. autofunction:: add
.. autofunction:: reshape
.. autofunction:: depthwise_conv2d
.. autofunction:: cross_entropy_loss

"""

import math
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import erf, log_softmax, softmax

from .tensor import Tensor, Tape, as_tensor
from .exceptions import ShapeError

__all__ = [
    'relu', 'gelu', 'layernorm', 'add', 'reshape', 'depthwise_conv2d', 'cross_entropy_loss'
]

TensorLike = Union[Tensor, np.ndarray]

#: The default :math:`\delta` of :func:`layernorm`.
LAYERNORM_EPS = 1e-5


def relu(x: TensorLike, tape: Optional[Tape] = None) -> Tensor:
    """Return :math:`\\max(x, 0)`; the gradient is the indicator :math:`x > 0`."""
    x_t = as_tensor(x)
    mask = x_t.data > 0
    out = Tensor(np.where(mask, x_t.data, 0).astype(x_t.dtype, copy=False))
    if tape is None:
        return out
    return tape.record('relu', (x_t,), out, lambda g: (g * mask,))


def gelu(x: TensorLike, tape: Optional[Tape] = None) -> Tensor:
    """Return the exact Gaussian error linear unit :math:`x \\Phi(x)`."""
    x_t = as_tensor(x)
    cdf = 0.5 * (1 + erf(x_t.data / math.sqrt(2)))
    out = Tensor((x_t.data * cdf).astype(x_t.dtype, copy=False))
    if tape is None:
        return out

    pdf = np.exp(-0.5 * x_t.data**2) / math.sqrt(2 * math.pi)
    deriv = cdf + x_t.data * pdf
    return tape.record('gelu', (x_t,), out, lambda g: (g * deriv,))


def layernorm(x: TensorLike, gamma: Optional[TensorLike] = None,
              beta: Optional[TensorLike] = None, eps: float = LAYERNORM_EPS,
              tape: Optional[Tape] = None) -> Tensor:
    """Normalize **x** over its last axis, optionally followed by an affine transform.

    .. math::

        \\hat{x} = \\frac{x - \\operatorname{mean}(x)}{\\sqrt{\\operatorname{var}(x) + \\delta}}
        \\qquad
        y = \\gamma \\hat{x} + \\beta

    Parameters
    ----------
    x : :class:`~semiringlib.tensor.Tensor`, shape :math:`(..., w)`
        The input; the last axis must have at least two elements.

    gamma, beta : :class:`~semiringlib.tensor.Tensor`, shape :math:`(w,)`, optional
        The affine scale and shift; either both or neither must be supplied.

    eps : :class:`float`
        The variance guard :math:`\\delta`.

    tape : :class:`~semiringlib.tensor.Tape`, optional
        If supplied, record the operation.

    """
    x_t = as_tensor(x)
    w = x_t.shape[-1] if x_t.ndim else 0
    if w < 2:
        raise ShapeError(f"layernorm requires a last axis of length >= 2; observed shape {x_t.shape}")
    if (gamma is None) is not (beta is None):
        raise TypeError("'gamma' and 'beta' must either both be supplied or both be None")

    mean = x_t.data.mean(axis=-1, keepdims=True)
    centered = x_t.data - mean
    rstd = 1 / np.sqrt((centered**2).mean(axis=-1, keepdims=True) + eps)
    x_hat = centered * rstd

    if gamma is None:
        out = Tensor(x_hat.astype(x_t.dtype, copy=False))
        inputs: Tuple[Tensor, ...] = (x_t,)
        g_arr = None
    else:
        g_t, b_t = as_tensor(gamma), as_tensor(beta)
        if g_t.shape != (w,) or b_t.shape != (w,):
            raise ShapeError(f"layernorm affine parameters of shapes {g_t.shape} and {b_t.shape} "
                             f"do not match an input of shape {x_t.shape}")
        out = Tensor((x_hat * g_t.data + b_t.data).astype(x_t.dtype, copy=False))
        inputs = (x_t, g_t, b_t)
        g_arr = g_t.data
    if tape is None:
        return out

    reduce_axes = tuple(range(x_t.ndim - 1))

    def backward(g: np.ndarray) -> Sequence[np.ndarray]:
        g_hat = g if g_arr is None else g * g_arr
        x_bar = rstd * (g_hat - g_hat.mean(axis=-1, keepdims=True)
                        - x_hat * (g_hat * x_hat).mean(axis=-1, keepdims=True))
        if g_arr is None:
            return (x_bar,)
        return x_bar, (g * x_hat).sum(axis=reduce_axes), g.sum(axis=reduce_axes)

    return tape.record('layernorm', inputs, out, backward)


def add(a: TensorLike, b: TensorLike, tape: Optional[Tape] = None) -> Tensor:
    """Return the ordinary sum of two equally shaped tensors, *e.g.* a residual join."""
    a_t, b_t = as_tensor(a), as_tensor(b)
    if a_t.shape != b_t.shape:
        raise ShapeError(f"cannot add tensors of shapes {a_t.shape} and {b_t.shape}")
    out = Tensor(a_t.data + b_t.data)
    if tape is None:
        return out
    return tape.record('add', (a_t, b_t), out, lambda g: (g, g))


def reshape(x: TensorLike, shape: Sequence[int], tape: Optional[Tape] = None) -> Tensor:
    """Return **x** with a new **shape**."""
    x_t = as_tensor(x)
    try:
        out = Tensor(x_t.data.reshape(shape))
    except ValueError as ex:
        raise ShapeError(f"cannot reshape a tensor of shape {x_t.shape} "
                         f"into shape {tuple(shape)}") from ex
    if tape is None:
        return out
    return tape.record('reshape', (x_t,), out, lambda g: (g.reshape(x_t.shape),))


def depthwise_conv2d(x: TensorLike, kernel: TensorLike, tape: Optional[Tape] = None) -> Tensor:
    """Apply a per-channel 2-D convolution with "same" zero padding and no bias.

    Parameters
    ----------
    x : :class:`~semiringlib.tensor.Tensor`, shape :math:`(h, w, c)` or :math:`(b, h, w, c)`
        The channels-last input image(s).

    kernel : :class:`~semiringlib.tensor.Tensor`, shape :math:`(k, k, c)`
        One odd-sized filter per channel.

    """
    x_t, k_t = as_tensor(x), as_tensor(kernel)
    if x_t.ndim not in (3, 4):
        raise ShapeError(f"depthwise_conv2d expected an input of shape (h, w, c) or (b, h, w, c); "
                         f"observed {x_t.shape}")
    k = k_t.shape[0]
    if k_t.ndim != 3 or k_t.shape[1] != k or k % 2 != 1 or k_t.shape[2] != x_t.shape[-1]:
        raise ShapeError(f"depthwise_conv2d expected an odd square kernel of shape "
                         f"(k, k, {x_t.shape[-1]}); observed {k_t.shape}")

    X = x_t.data if x_t.ndim == 4 else x_t.data[None]
    _, H, W, _ = X.shape
    p = k // 2
    padded = np.pad(X, ((0, 0), (p, p), (p, p), (0, 0)))

    Y = np.zeros(X.shape, dtype=np.result_type(X.dtype, k_t.dtype))
    for di in range(k):
        for dj in range(k):
            Y += padded[:, di:di + H, dj:dj + W, :] * k_t.data[di, dj]
    out = Tensor(Y if x_t.ndim == 4 else Y[0])
    if tape is None:
        return out

    def backward(g: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        G = g if x_t.ndim == 4 else g[None]
        padded_bar = np.zeros(padded.shape, dtype=G.dtype)
        k_bar = np.zeros(k_t.shape, dtype=G.dtype)
        for di in range(k):
            for dj in range(k):
                padded_bar[:, di:di + H, dj:dj + W, :] += G * k_t.data[di, dj]
                k_bar[di, dj] = (G * padded[:, di:di + H, dj:dj + W, :]).sum(axis=(0, 1, 2))
        x_bar = padded_bar[:, p:p + H, p:p + W, :]
        return (x_bar if x_t.ndim == 4 else x_bar[0]), k_bar

    return tape.record('depthwise_conv2d', (x_t, k_t), out, backward)


def cross_entropy_loss(logits: TensorLike, labels: np.ndarray,
                       tape: Optional[Tape] = None) -> Tensor:
    """Return the mean softmax cross-entropy of ``logits[b, c]`` against integer **labels**.

    The gradient with respect to the logits is :math:`(\\operatorname{softmax} - \\text{onehot}) / b`.

    Examples
    --------
    .. code:: python

        >>> import numpy as np
        >>> from semiringlib.functional import cross_entropy_loss

        >>> loss = cross_entropy_loss(np.zeros((2, 4)), np.array([0, 3]))
        >>> bool(np.isclose(loss.item(), np.log(4)))
        True

    """  # noqa: E501
    z_t = as_tensor(logits)
    y = np.asarray(labels)
    if z_t.ndim != 2 or y.shape != (z_t.shape[0],):
        raise ShapeError(f"cross_entropy_loss expected logits (b, c) and labels (b,); "
                         f"observed {z_t.shape} and {y.shape}")
    b, c = z_t.shape
    if b and (y.min() < 0 or y.max() >= c):
        raise ValueError(f"labels must lie in [0, {c}); observed range "
                         f"[{y.min()}, {y.max()}]")

    log_p = log_softmax(z_t.data, axis=-1)
    out = Tensor(np.asarray(-log_p[np.arange(b), y].mean(), dtype=z_t.dtype))
    if tape is None:
        return out

    def backward(g: np.ndarray) -> Tuple[np.ndarray]:
        grad = softmax(z_t.data, axis=-1)
        grad[np.arange(b), y] -= 1
        return (grad * (g / b),)

    return tape.record('cross_entropy_loss', (z_t,), out, backward)
