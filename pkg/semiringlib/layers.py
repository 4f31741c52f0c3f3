"""Layers, the fully connected model builders and the modified ConvNeXt block.

All fully connected models share a common layout: a bias-free linear stem mapping the
*n* input features to the width *w*, two blocks each wrapped in a residual connection and
a bias-free linear head mapping *w* to the *c* classes.
The block variants are:

* :attr:`BlockVariant.RELU_PLAIN`: Linear(w→w) → ReLU.
* :attr:`BlockVariant.RELU_NORM`: LayerNorm → Linear(w→w) → ReLU.
* :attr:`BlockVariant.SEMIRING_V1`: Linear(w→w/2) → Semiring(w/2→w).
* :attr:`BlockVariant.SEMIRING_V2`: LayerNorm → Semiring(w→w).

The ReLU baselines hold exactly as many parameters as their semiring counterparts.

Examples
--------
.. code:: python

    >>> from semiringlib.layers import ModelConfig, build_fc_model, count_parameters
    >>> from semiringlib.semiring import MAX_PLUS

    >>> config = ModelConfig(n_features=4, n_classes=3, width=4,
    ...                      block_variant='semiring_v1', semiring=MAX_PLUS)
    >>> model = build_fc_model(config, rng=0)
    >>> count_parameters(model)
    60
    >>> [p.name for p in model.parameters() if p.group == 'semiring']
    ['block1.semiring.weight', 'block2.semiring.weight']

Index
-----
.. currentmodule:: semiringlib.layers
.. autosummary::
    LayerKind
    LayerSpec
    BlockVariant
    ModelConfig
    Module
    Linear
    LayerNorm
    ReLU
    GELU
    SemiringLayer
    Sequential
    Residual
    DepthwiseConv2d
    ConvNeXtBlock
    Model
    linear_layer
    build_layer
    build_block_relu
    build_block_semiring_v1
    build_block_semiring_v2
    build_fc_model
    count_parameters
    convnext_block_forward
    save_checkpoint
    load_checkpoint

API
---
.. autoclass:: LayerKind
.. autoclass:: LayerSpec
.. autoclass:: BlockVariant
.. autoclass:: ModelConfig
.. autoclass:: Module
    :members:
.. autoclass:: Linear
.. autoclass:: LayerNorm
.. autoclass:: ReLU
.. autoclass:: GELU
.. autoclass:: SemiringLayer
.. autoclass:: Sequential
.. autoclass:: Residual
.. autoclass:: DepthwiseConv2d
.. autoclass:: ConvNeXtBlock
.. autoclass:: Model
.. autofunction:: linear_layer
.. autofunction:: build_layer
.. autofunction:: build_block_relu
.. autofunction:: build_block_semiring_v1
.. autofunction:: build_block_semiring_v2
.. autofunction:: build_fc_model
.. autofunction:: count_parameters
.. autofunction:: convnext_block_forward
.. autofunction:: save_checkpoint
.. autofunction:: load_checkpoint

"""

import os
import enum
import math
import logging
from dataclasses import dataclass
from typing import Dict, Iterator, List, Mapping, Optional, Tuple, Union

import numpy as np
from numpy.typing import DTypeLike

from . import functional as F
from .dataclass import AbstractConfig
from .exceptions import ShapeError, DataFormatError
from .init import InitSpec, init_weights
from .linalg import linear_matmul, semiring_matmul
from .semiring import SemiringSpec, LINEAR
from .tensor import Parameter, Tape, Tensor, as_tensor

__all__ = [
    'LayerKind', 'LayerSpec', 'BlockVariant', 'ModelConfig',
    'Module', 'Linear', 'LayerNorm', 'ReLU', 'GELU', 'SemiringLayer', 'Sequential',
    'Residual', 'DepthwiseConv2d', 'ConvNeXtBlock', 'Model',
    'linear_layer', 'build_layer', 'build_block_relu', 'build_block_semiring_v1',
    'build_block_semiring_v2', 'build_fc_model', 'count_parameters',
    'convnext_block_forward', 'save_checkpoint', 'load_checkpoint'
]

logger = logging.getLogger(__name__)

RNGLike = Union[None, int, np.random.Generator]

#: The first line of every checkpoint file.
CHECKPOINT_MAGIC = 'semiringlib-checkpoint 1'


class LayerKind(enum.Enum):
    """The kinds of layers."""

    LINEAR = 'linear'
    LAYER_NORM = 'layernorm'
    RELU = 'relu'
    GELU = 'gelu'
    SEMIRING = 'semiring'
    RESIDUAL = 'residual'
    DEPTHWISE_CONV = 'depthwise_conv'


@dataclass(frozen=True, repr=False)
class LayerSpec(AbstractConfig):
    """A declarative description of a single layer.

    Parameters
    ----------
    kind : :class:`LayerKind` or :class:`str`
        The kind of layer.

    in_width, out_width : :class:`int`
        The input and output widths; equal for all but linear and semiring layers.
        For depthwise convolutions these are the number of channels.

    semiring : :class:`~semiringlib.semiring.SemiringSpec`, optional
        The semiring; required for semiring layers and forbidden otherwise.

    affine : :class:`bool`
        Whether a layer normalization includes the affine transform.

    kernel_size : :class:`int`
        The (odd) kernel size of a depthwise convolution.

    """

    kind: LayerKind
    in_width: int
    out_width: int
    semiring: Optional[SemiringSpec] = None
    affine: bool = True
    kernel_size: int = 7

    def __post_init__(self) -> None:
        kind = LayerKind(self.kind)
        object.__setattr__(self, 'kind', kind)
        if self.in_width < 1 or self.out_width < 1:
            raise ValueError(f"layer widths must be positive; observed "
                             f"in_width={self.in_width!r} and out_width={self.out_width!r}")
        elif (kind is LayerKind.SEMIRING) is (self.semiring is None):
            raise ValueError(f"a semiring is required for, and only for, semiring layers; "
                             f"observed kind={kind.value!r} and semiring={self.semiring!r}")
        elif kind not in (LayerKind.LINEAR, LayerKind.SEMIRING) and self.in_width != self.out_width:
            raise ValueError(f"{kind.value!r} layers preserve their width; observed "
                             f"in_width={self.in_width!r} and out_width={self.out_width!r}")
        elif kind is LayerKind.DEPTHWISE_CONV and self.kernel_size % 2 != 1:
            raise ValueError(f"'kernel_size' expected an odd integer; observed {self.kernel_size!r}")


class BlockVariant(enum.Enum):
    """The block variants of the fully connected models."""

    RELU_PLAIN = 'relu_plain'
    RELU_NORM = 'relu_norm'
    SEMIRING_V1 = 'semiring_v1'
    SEMIRING_V2 = 'semiring_v2'

    @property
    def uses_semiring(self) -> bool:
        """Whether this variant contains a semiring layer."""
        return self in (BlockVariant.SEMIRING_V1, BlockVariant.SEMIRING_V2)


@dataclass(frozen=True, repr=False)
class ModelConfig(AbstractConfig):
    """A declarative description of a fully connected model.

    Parameters
    ----------
    n_features : :class:`int`
        The number of input features *n*.

    n_classes : :class:`int`
        The number of output classes *c*.

    width : :class:`int`
        The width *w* of the residual stream; must be even for :attr:`BlockVariant.SEMIRING_V1`.

    block_variant : :class:`BlockVariant` or :class:`str`
        The block variant.

    semiring : :class:`~semiringlib.semiring.SemiringSpec`, optional
        The semiring of the semiring blocks; must be ``None`` for the ReLU baselines.

    """

    n_features: int
    n_classes: int
    width: int
    block_variant: BlockVariant = BlockVariant.RELU_PLAIN
    semiring: Optional[SemiringSpec] = None

    def __post_init__(self) -> None:
        variant = BlockVariant(self.block_variant)
        object.__setattr__(self, 'block_variant', variant)
        for name in ('n_features', 'n_classes', 'width'):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise ValueError(f"{name!r} expected a positive integer; observed {value!r}")

        if variant.uses_semiring and self.semiring is None:
            raise ValueError(f"block variant {variant.value!r} requires a semiring")
        elif not variant.uses_semiring and self.semiring is not None:
            raise ValueError(f"block variant {variant.value!r} does not accept a semiring; "
                             f"observed {self.semiring.label!r}")
        elif variant is BlockVariant.SEMIRING_V1 and self.width % 2:
            raise ValueError(f"block variant {variant.value!r} requires an even width; "
                             f"observed {self.width!r}")


def _get_rng(rng: RNGLike) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


class Module:
    """Base class of all layers.

    Subclasses register their parameters in :attr:`Module._params` and their
    sub-modules in :attr:`Module._children`, and implement :meth:`Module.forward`.

    Attributes
    ----------
    path : :class:`str`
        The dotted path of this module within its model; used for parameter names
        and to label the operations it records on a :class:`~semiringlib.tensor.Tape`.

    """

    spec: Optional[LayerSpec] = None

    def __init__(self) -> None:
        self.path = ''
        self._params: Dict[str, Parameter] = {}
        self._children: Dict[str, 'Module'] = {}

    def forward(self, x: Tensor, tape: Optional[Tape] = None) -> Tensor:
        """Apply this module to **x**."""
        raise NotImplementedError

    def __call__(self, x: Union[Tensor, np.ndarray], tape: Optional[Tape] = None) -> Tensor:
        x_t = as_tensor(x)
        if tape is None:
            return self.forward(x_t)
        with tape.scope(self.path or self.__class__.__name__):
            return self.forward(x_t, tape)

    def named_modules(self) -> Iterator[Tuple[str, 'Module']]:
        """Yield all modules, this one included, together with their paths."""
        yield self.path, self
        for child in self._children.values():
            yield from child.named_modules()

    def parameters(self) -> List[Parameter]:
        """Return all parameters of this module and its sub-modules in registration order."""
        ret = list(self._params.values())
        for child in self._children.values():
            ret += child.parameters()
        return ret

    def zero_grad(self) -> None:
        """Reset the gradients of all parameters."""
        for p in self.parameters():
            p.zero_grad()

    def state_dict(self) -> Dict[str, np.ndarray]:
        """Return a mapping of parameter names to their data."""
        return {p.name: p.data for p in self.parameters()}  # type: ignore[misc]

    def load_state_dict(self, state: Mapping[str, np.ndarray]) -> None:
        """Copy the arrays in **state** into the parameters of the same name.

        Raises
        ------
        KeyError
            Raised if the parameter names of **state** and this module differ.

        ShapeError
            Raised if a shape differs.

        """
        params = {p.name: p for p in self.parameters()}
        missing = sorted(set(params) - set(state))
        unexpected = sorted(set(state) - set(params))
        if missing or unexpected:
            raise KeyError(f"state mismatch; missing: {missing!r}, unexpected: {unexpected!r}")
        for name, p in params.items():
            value = np.asarray(state[name])
            if value.shape != p.shape:
                raise ShapeError(f"parameter {name!r} has shape {p.shape}; "
                                 f"the state holds shape {value.shape}")
            p.data[...] = value

    def assign_paths(self, prefix: str = '') -> None:
        """Assign dotted paths to this module and its sub-modules and name the parameters accordingly."""  # noqa: E501
        self.path = prefix
        for name, p in self._params.items():
            p.name = f'{prefix}.{name}' if prefix else name
        for name, child in self._children.items():
            child.assign_paths(f'{prefix}.{name}' if prefix else name)

    def _extra_repr(self) -> str:
        if self.spec is None:
            return ''
        return f'{self.spec.in_width}->{self.spec.out_width}'

    def __repr__(self) -> str:
        ret = f'{self.__class__.__name__}({self._extra_repr()})'
        if not self._children:
            return ret
        indent = ' ' * 4
        body = '\n'.join(f'{indent}({k}): ' + repr(v).replace('\n', '\n' + indent)
                         for k, v in self._children.items())
        return f'{ret[:-1]}\n{body}\n)'


class Linear(Module):
    """A bias-free linear map :math:`y = W x` with ``W[out, in]``."""

    def __init__(self, in_width: int, out_width: int, rng: RNGLike = None,
                 init: InitSpec = InitSpec(), dtype: DTypeLike = np.float64) -> None:
        super().__init__()
        self.spec = linear_layer(in_width, out_width)
        data = init_weights(out_width, in_width, init, LINEAR, _get_rng(rng), dtype)
        self.weight = self._params['weight'] = Parameter(data, name='weight', group='linear')

    def forward(self, x: Tensor, tape: Optional[Tape] = None) -> Tensor:
        return linear_matmul(x, self.weight, tape=tape)


class LayerNorm(Module):
    """Layer normalization over the last axis, with an optional affine transform.

    The affine parameters are excluded from weight decay.

    """

    def __init__(self, width: int, affine: bool = True, eps: float = F.LAYERNORM_EPS,
                 dtype: DTypeLike = np.float64) -> None:
        super().__init__()
        self.spec = LayerSpec(LayerKind.LAYER_NORM, width, width, affine=affine)
        self.eps = eps
        self.gamma: Optional[Parameter] = None
        self.beta: Optional[Parameter] = None
        if affine:
            self.gamma = self._params['gamma'] = Parameter(
                np.ones(width, dtype=dtype), name='gamma', decay=False
            )
            self.beta = self._params['beta'] = Parameter(
                np.zeros(width, dtype=dtype), name='beta', decay=False
            )

    def forward(self, x: Tensor, tape: Optional[Tape] = None) -> Tensor:
        return F.layernorm(x, self.gamma, self.beta, eps=self.eps, tape=tape)

    def _extra_repr(self) -> str:
        assert self.spec is not None
        return f'{self.spec.in_width}, affine={self.spec.affine}'


class ReLU(Module):
    """The rectified linear unit."""

    def forward(self, x: Tensor, tape: Optional[Tape] = None) -> Tensor:
        return F.relu(x, tape=tape)


class GELU(Module):
    """The exact Gaussian error linear unit."""

    def forward(self, x: Tensor, tape: Optional[Tape] = None) -> Tensor:
        return F.gelu(x, tape=tape)


class SemiringLayer(Module):
    """A trainable quasilinear operator :math:`y = W \\odot x` with ``W[out, in]``; no bias.

    The weight is tagged with the ``"semiring"`` optimizer group and is initialized
    with :func:`~semiringlib.init.init_weights`.

    """

    def __init__(self, in_width: int, out_width: int, semiring: SemiringSpec,
                 rng: RNGLike = None, init: InitSpec = InitSpec(),
                 dtype: DTypeLike = np.float64) -> None:
        super().__init__()
        self.spec = LayerSpec(LayerKind.SEMIRING, in_width, out_width, semiring=semiring)
        self.semiring = semiring
        data = init_weights(out_width, in_width, init, semiring, _get_rng(rng), dtype)
        self.weight = self._params['weight'] = Parameter(data, name='weight', group='semiring')

    def forward(self, x: Tensor, tape: Optional[Tape] = None) -> Tensor:
        return semiring_matmul(self.semiring, x, self.weight, tape=tape)

    def _extra_repr(self) -> str:
        return f'{super()._extra_repr()}, {self.semiring.label}'


class Sequential(Module):
    """Apply the named sub-modules in order.

    Raises
    ------
    ShapeError
        Raised if the output width of a module does not match the input width of the next.

    """

    def __init__(self, layers: Mapping[str, Module]) -> None:
        super().__init__()
        prev: Optional[LayerSpec] = None
        prev_name = ''
        for name, layer in layers.items():
            spec = layer.spec
            if prev is not None and spec is not None and prev.out_width != spec.in_width:
                raise ShapeError(f"width mismatch: {prev_name!r} produces {prev.out_width} "
                                 f"features while {name!r} expects {spec.in_width}")
            if spec is not None:
                prev, prev_name = spec, name
            self._children[name] = layer

        specs = [m.spec for m in self._children.values() if m.spec is not None]
        if specs:
            self.spec = LayerSpec(LayerKind.LINEAR, specs[0].in_width, specs[-1].out_width)

    def __getitem__(self, name: str) -> Module:
        return self._children[name]

    def forward(self, x: Tensor, tape: Optional[Tape] = None) -> Tensor:
        for layer in self._children.values():
            x = layer(x, tape)
        return x


class Residual(Module):
    """Wrap a width-preserving block in a residual connection: ``block(x) + x``."""

    def __init__(self, block: Module) -> None:
        super().__init__()
        spec = block.spec
        if spec is not None and spec.in_width != spec.out_width:
            raise ShapeError(f"a residual block must preserve its width; "
                             f"observed {spec.in_width} -> {spec.out_width}")
        self.block = self._children['block'] = block
        if spec is not None:
            self.spec = LayerSpec(LayerKind.RESIDUAL, spec.in_width, spec.out_width)

    def forward(self, x: Tensor, tape: Optional[Tape] = None) -> Tensor:
        return F.add(self.block(x, tape), x, tape=tape)

    def assign_paths(self, prefix: str = '') -> None:
        # The block shares the path of its residual wrapper
        self.path = prefix
        self.block.assign_paths(prefix)


class DepthwiseConv2d(Module):
    """A bias-free per-channel 2-D convolution with "same" padding."""

    def __init__(self, channels: int, kernel_size: int = 7, rng: RNGLike = None,
                 dtype: DTypeLike = np.float64) -> None:
        super().__init__()
        self.spec = LayerSpec(LayerKind.DEPTHWISE_CONV, channels, channels, kernel_size=kernel_size)
        std = math.sqrt(2 / kernel_size**2)
        data = _get_rng(rng).normal(0.0, std, size=(kernel_size, kernel_size, channels))
        self.weight = self._params['weight'] = Parameter(data.astype(dtype), name='weight')

    def forward(self, x: Tensor, tape: Optional[Tape] = None) -> Tensor:
        return F.depthwise_conv2d(x, self.weight, tape=tape)


class ConvNeXtBlock(Module):
    """A channels-last ConvNeXt block whose pixel-wise MLP may be replaced by a semiring layer.

    The block computes depthwise convolution → layer normalization → pixel-wise MLP
    and adds its input. The MLP is either Linear(c→4c) → GELU → Linear(4c→c)
    (**variant** ``"mlp"``) or Semiring(c→4c) → Linear(4c→c) (**variant** a
    :class:`~semiringlib.semiring.SemiringSpec`).
    The normalization drops its affine transform for the logarithmic semirings.

    """

    def __init__(self, channels: int, variant: Union[str, SemiringSpec] = 'mlp',
                 kernel_size: int = 7, rng: RNGLike = None, init: InitSpec = InitSpec(),
                 dtype: DTypeLike = np.float64) -> None:
        super().__init__()
        rng = _get_rng(rng)
        self.spec = LayerSpec(LayerKind.RESIDUAL, channels, channels)
        self.channels = channels

        affine = True
        if isinstance(variant, SemiringSpec):
            affine = not variant.is_logarithmic
            self.variant = variant.label
            expand: Module = SemiringLayer(channels, 4 * channels, variant, rng, init, dtype)
            mlp = Sequential({'semiring': expand,
                              'pointwise': Linear(4 * channels, channels, rng, init, dtype)})
        elif variant == 'mlp':
            self.variant = variant
            mlp = Sequential({'expand': Linear(channels, 4 * channels, rng, init, dtype),
                              'gelu': GELU(),
                              'pointwise': Linear(4 * channels, channels, rng, init, dtype)})
        else:
            raise ValueError(f"'variant' expected 'mlp' or a SemiringSpec; observed {variant!r}")

        self.dwconv = self._children['dwconv'] = DepthwiseConv2d(channels, kernel_size, rng, dtype)
        self.norm = self._children['norm'] = LayerNorm(channels, affine=affine, dtype=dtype)
        self.mlp = self._children['mlp'] = mlp
        self.assign_paths()

    @property
    def final_linear(self) -> Linear:
        """The last linear map of the pixel-wise MLP."""
        ret = self.mlp['pointwise']  # type: ignore[index]
        assert isinstance(ret, Linear)
        return ret

    def forward(self, x: Tensor, tape: Optional[Tape] = None) -> Tensor:
        if x.ndim not in (3, 4) or x.shape[-1] != self.channels:
            raise ShapeError(f"{self.__class__.__name__} expected a channels-last input with "
                             f"{self.channels} channels; observed shape {x.shape}")
        h = self.norm(self.dwconv(x, tape), tape)
        flat = F.reshape(h, (-1, self.channels), tape=tape)
        h = F.reshape(self.mlp(flat, tape), x.shape, tape=tape)
        return F.add(h, x, tape=tape)

    def _extra_repr(self) -> str:
        return f'{self.channels}, variant={self.variant!r}'


class Model(Sequential):
    """A fully connected classifier: stem → residual block 1 → residual block 2 → head.

    Attributes
    ----------
    config : :class:`ModelConfig`
        The configuration this model was built from.

    """

    def __init__(self, config: ModelConfig, layers: Mapping[str, Module]) -> None:
        super().__init__(layers)
        self.config = config
        self.assign_paths()


def linear_layer(in_width: int, out_width: int) -> LayerSpec:
    """Return the :class:`LayerSpec` of a bias-free linear layer with ``in_width * out_width`` parameters."""  # noqa: E501
    return LayerSpec(LayerKind.LINEAR, in_width, out_width)


def build_layer(spec: LayerSpec, rng: RNGLike = None, init: InitSpec = InitSpec(),
                dtype: DTypeLike = np.float64) -> Module:
    """Construct a single layer from its :class:`LayerSpec`.

    Raises
    ------
    ValueError
        Raised for residual layers, which wrap a block and are built with :class:`Residual`.

    """
    kind = spec.kind
    if kind is LayerKind.LINEAR:
        return Linear(spec.in_width, spec.out_width, rng, init, dtype)
    elif kind is LayerKind.LAYER_NORM:
        return LayerNorm(spec.in_width, affine=spec.affine, dtype=dtype)
    elif kind is LayerKind.RELU:
        return ReLU()
    elif kind is LayerKind.GELU:
        return GELU()
    elif kind is LayerKind.SEMIRING:
        assert spec.semiring is not None
        return SemiringLayer(spec.in_width, spec.out_width, spec.semiring, rng, init, dtype)
    elif kind is LayerKind.DEPTHWISE_CONV:
        return DepthwiseConv2d(spec.in_width, spec.kernel_size, rng, dtype)
    raise ValueError(f"cannot build a {kind.value!r} layer from a LayerSpec alone")


def build_block_relu(width: int, with_norm: bool, rng: RNGLike = None,
                     init: InitSpec = InitSpec(), dtype: DTypeLike = np.float64) -> Sequential:
    """Return the baseline block: [LayerNorm →] Linear(w→w) → ReLU."""
    rng = _get_rng(rng)
    layers: Dict[str, Module] = {}
    if with_norm:
        layers['norm'] = LayerNorm(width, dtype=dtype)
    layers['linear'] = Linear(width, width, rng, init, dtype)
    layers['relu'] = ReLU()
    return Sequential(layers)


def build_block_semiring_v1(width: int, semiring: SemiringSpec, rng: RNGLike = None,
                            init: InitSpec = InitSpec(),
                            dtype: DTypeLike = np.float64) -> Sequential:
    """Return the bottleneck block Linear(w→w/2) → Semiring(w/2→w) with :math:`w^2` parameters."""
    if width % 2:
        raise ValueError(f"the bottleneck block requires an even width; observed {width!r}")
    rng = _get_rng(rng)
    return Sequential({
        'linear': Linear(width, width // 2, rng, init, dtype),
        'semiring': SemiringLayer(width // 2, width, semiring, rng, init, dtype),
    })


def build_block_semiring_v2(width: int, semiring: SemiringSpec, rng: RNGLike = None,
                            init: InitSpec = InitSpec(),
                            dtype: DTypeLike = np.float64) -> Sequential:
    """Return the normalized block LayerNorm(affine) → Semiring(w→w) with :math:`2w + w^2` parameters."""  # noqa: E501
    rng = _get_rng(rng)
    return Sequential({
        'norm': LayerNorm(width, dtype=dtype),
        'semiring': SemiringLayer(width, width, semiring, rng, init, dtype),
    })


def _build_block(config: ModelConfig, rng: np.random.Generator, init: InitSpec,
                 dtype: DTypeLike) -> Sequential:
    variant = config.block_variant
    w = config.width
    if variant is BlockVariant.RELU_PLAIN:
        return build_block_relu(w, False, rng, init, dtype)
    elif variant is BlockVariant.RELU_NORM:
        return build_block_relu(w, True, rng, init, dtype)
    assert config.semiring is not None
    if variant is BlockVariant.SEMIRING_V1:
        return build_block_semiring_v1(w, config.semiring, rng, init, dtype)
    return build_block_semiring_v2(w, config.semiring, rng, init, dtype)


def build_fc_model(config: ModelConfig, rng: RNGLike = None, init: InitSpec = InitSpec(),
                   dtype: DTypeLike = np.float64, zero_head: bool = True) -> Model:
    """Construct the fully connected model described by **config**.

    The returned model maps ``X[b, n]`` to logits ``Y[b, c]``.
    Its parameters are named after their module path, *e.g.* ``"block1.semiring.weight"``.

    With **zero_head** the head weights start at zero so that the initial logits are
    uniform and the first-batch loss equals ``log(c)``.
    The head is drawn from **rng** either way;
    the other parameters do not depend on **zero_head**.

    Parameters
    ----------
    config : :class:`ModelConfig`
        The architecture.

    rng : :class:`numpy.random.Generator` or :class:`int`, optional
        The random number generator (or its seed) used for all weights.

    init : :class:`~semiringlib.init.InitSpec`
        The initialization parameters of the semiring layers.

    dtype : :data:`numpy.typing.DTypeLike`
        The data type of all parameters.

    zero_head : :class:`bool`
        Whether to zero the head weights.

    """
    rng = _get_rng(rng)
    w = config.width
    model = Model(config, {
        'stem': Linear(config.n_features, w, rng, init, dtype),
        'block1': Residual(_build_block(config, rng, init, dtype)),
        'block2': Residual(_build_block(config, rng, init, dtype)),
        'head': Linear(w, config.n_classes, rng, init, dtype),
    })
    if zero_head:
        model['head'].weight.data[...] = 0
    return model


def count_parameters(model: Module) -> int:
    """Return the total number of trainable scalars of **model**."""
    return sum(p.size for p in model.parameters())


def convnext_block_forward(x: Union[Tensor, np.ndarray], block: ConvNeXtBlock,
                           tape: Optional[Tape] = None) -> Tensor:
    """Apply **block** to a channels-last image ``x[h, w, c]`` (or a batch thereof); the output has the shape of **x**."""  # noqa: E501
    return block(x, tape)


def save_checkpoint(model: Module, path: Union[str, os.PathLike]) -> None:
    """Write the parameters of **model** to **path**.

    The file starts with a plain-text header: a version line, the number of tensors,
    one ``name dim1,dim2,...`` line per tensor and an ``end`` line.
    The tensor data follows as little-endian 32-bit floats in header order.

    """
    params = model.parameters()
    lines = [CHECKPOINT_MAGIC, str(len(params))]
    lines += [f"{p.name} {','.join(str(i) for i in p.shape)}" for p in params]
    lines.append('end')
    with open(path, 'wb') as f:
        f.write(('\n'.join(lines) + '\n').encode('ascii'))
        for p in params:
            f.write(p.data.astype('<f4').tobytes())
    logger.debug("Wrote %d tensors to %r", len(params), os.fspath(path))


def load_checkpoint(path: Union[str, os.PathLike]) -> Dict[str, np.ndarray]:
    """Read a checkpoint written by :func:`save_checkpoint` and return a name → array mapping.

    Raises
    ------
    DataFormatError
        Raised if the header is malformed or the data is truncated.

    """
    filename = os.fspath(path)
    with open(filename, 'rb') as f:
        content = f.read()

    header_end = content.find(b'\nend\n')
    if header_end == -1:
        raise DataFormatError(f"{filename!r}: missing checkpoint header terminator")
    header = content[:header_end].decode('ascii').split('\n')
    offset = header_end + len(b'\nend\n')
    if header[0] != CHECKPOINT_MAGIC:
        raise DataFormatError(f"{filename!r}: unsupported checkpoint version {header[0]!r}")

    try:
        count = int(header[1])
        entries = [line.rsplit(' ', 1) for line in header[2:]]
        shapes = [(name, tuple(int(i) for i in dims.split(',') if i)) for name, dims in entries]
    except (IndexError, ValueError) as ex:
        raise DataFormatError(f"{filename!r}: malformed checkpoint header") from ex
    if count != len(shapes):
        raise DataFormatError(f"{filename!r}: header announces {count} tensors "
                              f"but lists {len(shapes)}")

    ret: Dict[str, np.ndarray] = {}
    for name, shape in shapes:
        size = int(np.prod(shape, dtype=np.int64))
        nbytes = 4 * size
        if offset + nbytes > len(content):
            raise DataFormatError(f"{filename!r}: truncated data for tensor {name!r}")
        ret[name] = np.frombuffer(content, dtype='<f4', count=size, offset=offset).reshape(shape)
        offset += nbytes
    return ret
