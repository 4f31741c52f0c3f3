"""Training configurations, the flat ``key = value`` config format, presets and run manifests.

A configuration file holds one ``key = value`` pair per line; blank lines and
everything following a ``#`` are ignored. Float values may be written as fractions.

.. code:: ini

    # iris
    dataset = iris
    variant = maxplus
    epochs = 40
    warmup_factor = 1/10

Examples
--------
.. code:: python

    >>> from semiringlib.config import parse_config

    >>> config = parse_config(text='dataset = iris\\nvariant = relu\\nepochs = 3')
    >>> config.epochs, config.semiring
    (3, None)

    >>> parse_config(text='dataset = iris\\ndepth = 3')
    Traceback (most recent call last):
        ...
    semiringlib.exceptions.ConfigError: line 2: unknown key 'depth'

Index
-----
.. currentmodule:: semiringlib.config
.. autosummary::
    TrainConfig
    VARIANTS
    parse_config
    preset_path
    load_preset
    format_config
    write_manifest

API
---
.. autoclass:: TrainConfig
    :members: semiring, semiring_lr, block_variant, model_config, init_spec, label
.. autodata:: VARIANTS
.. autofunction:: parse_config
.. autofunction:: preset_path
.. autofunction:: load_preset
.. autofunction:: format_config
.. autofunction:: write_manifest

"""

import os
import math
import logging
from fractions import Fraction
from dataclasses import dataclass
from typing import Any, Callable, Dict, Iterable, Mapping, Optional, Tuple, Union

from .__version__ import __version__
from .dataclass import AbstractConfig
from .data import DATASETS
from .exceptions import ConfigError
from .functions import source_hash
from .init import InitSpec
from .layers import BlockVariant, ModelConfig
from .semiring import SemiringSpec

__all__ = [
    'TrainConfig', 'VARIANTS', 'parse_config', 'preset_path', 'load_preset',
    'format_config', 'write_manifest'
]

logger = logging.getLogger(__name__)

PathType = Union[str, os.PathLike]

#: The model variants: the ReLU baseline and the semiring layers.
VARIANTS: Tuple[str, ...] = ('relu', 'linear', 'maxplus', 'minplus', 'logplus')

#: Datasets using the bottleneck block; all others use the normalized block.
_BOTTLENECK_DATASETS = frozenset({'iris', 'heart'})

PRESET_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'presets')


@dataclass(frozen=True, repr=False)
class TrainConfig(AbstractConfig):
    """A complete description of a training run.

    All randomness (the data split, initialization and shuffling) is derived from :attr:`seed`.

    Parameters
    ----------
    dataset : :class:`str`
        One of :data:`semiringlib.data.DATASETS`.

    variant : :class:`str`
        One of :data:`VARIANTS`.

    mu : :class:`float`, optional
        The parameter of the logarithmic semiring; required for and only for ``"logplus"``.

    epochs, batchsize : :class:`int`
        The number of epochs and the batch size.

    lr_linear, lr_tropical, lr_logarithmic : :class:`float`
        The peak learning rates of the linear group and of the semiring group
        for tropical and logarithmic variants.

    lr_semiring : :class:`float`, optional
        Overrides the semiring learning rate regardless of the variant.

    weight_decay : :class:`float`
        The decoupled weight decay of both groups.

    warmup_epochs, warmup_factor, annihilation_factor : :class:`float`
        The 1-cycle schedule.

    width : :class:`int`
        The width of the residual stream.

    seed : :class:`int`
        The seed of the first run; run *k* uses ``seed + k``.

    runs : :class:`int`
        The number of repetitions.

    test_fraction : :class:`float`
        The fraction of samples in the test split of the tabular datasets.

    data_path : :class:`str`, optional
        A CSV file (iris, heart) or directory of IDX files (fashion).

    dtype : :class:`str`
        ``"float32"`` or ``"float64"``.

    init_k, init_epsilon : :class:`float`
        The penalty and jitter of the fair initialization.

    """

    dataset: str = 'iris'
    variant: str = 'relu'
    mu: Optional[float] = None
    epochs: int = 40
    batchsize: int = 8
    lr_linear: float = 0.02
    lr_tropical: float = 0.004
    lr_logarithmic: float = 0.04
    lr_semiring: Optional[float] = None
    weight_decay: float = 0.01
    warmup_epochs: float = 18
    warmup_factor: float = 0.1
    annihilation_factor: float = 0.001
    width: int = 4
    seed: int = 42
    runs: int = 10
    test_fraction: float = 0.2
    data_path: Optional[str] = None
    dtype: str = 'float32'
    init_k: float = 1.0
    init_epsilon: float = 0.5

    def __post_init__(self) -> None:
        if self.dataset not in DATASETS:
            raise ConfigError(f"'dataset' expected one of {list(DATASETS)!r}; "
                              f"observed {self.dataset!r}")
        elif self.variant not in VARIANTS:
            raise ConfigError(f"'variant' expected one of {list(VARIANTS)!r}; "
                              f"observed {self.variant!r}")
        elif (self.variant == 'logplus') is (self.mu is None):
            raise ConfigError(f"'mu' is required for, and only for, the 'logplus' variant; "
                              f"observed variant={self.variant!r} and mu={self.mu!r}")
        elif self.mu is not None and (self.mu == 0 or not math.isfinite(self.mu)):
            raise ConfigError(f"'mu' expected a finite non-zero value; observed {self.mu!r}")
        elif self.dtype not in ('float32', 'float64'):
            raise ConfigError(f"'dtype' expected 'float32' or 'float64'; observed {self.dtype!r}")

        for name in ('batchsize', 'width', 'runs'):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name!r} expected a positive integer; "
                                  f"observed {getattr(self, name)!r}")
        if self.epochs < 0:
            raise ConfigError(f"'epochs' expected a non-negative integer; observed {self.epochs!r}")
        elif not 0 < self.test_fraction < 1:
            raise ConfigError(f"'test_fraction' expected a value in (0, 1); "
                              f"observed {self.test_fraction!r}")

    @property
    def semiring(self) -> Optional[SemiringSpec]:
        """The semiring of the semiring layers, ``None`` for the ReLU baseline."""
        if self.variant == 'relu':
            return None
        return SemiringSpec.from_name(self.variant, self.mu)

    @property
    def semiring_lr(self) -> float:
        """The peak learning rate of the semiring group."""
        if self.lr_semiring is not None:
            return self.lr_semiring
        elif self.variant in ('maxplus', 'minplus'):
            return self.lr_tropical
        elif self.variant == 'logplus':
            return self.lr_logarithmic
        return self.lr_linear

    @property
    def block_variant(self) -> BlockVariant:
        """The block variant: the bottleneck block for iris and heart, the normalized block otherwise."""  # noqa: E501
        bottleneck = self.dataset in _BOTTLENECK_DATASETS
        if self.variant == 'relu':
            return BlockVariant.RELU_PLAIN if bottleneck else BlockVariant.RELU_NORM
        return BlockVariant.SEMIRING_V1 if bottleneck else BlockVariant.SEMIRING_V2

    @property
    def label(self) -> str:
        """A short name of the model variant, *e.g.* ``"logplus(mu=-10)"``."""
        semiring = self.semiring
        return 'relu' if semiring is None else semiring.label

    def model_config(self, n_features: int, n_classes: int) -> ModelConfig:
        """Return the :class:`~semiringlib.layers.ModelConfig` for a dataset with the given dimensions."""  # noqa: E501
        return ModelConfig(n_features, n_classes, self.width, self.block_variant, self.semiring)

    def init_spec(self) -> InitSpec:
        """Return the :class:`~semiringlib.init.InitSpec` of the fair initialization."""
        return InitSpec(k=self.init_k, epsilon=self.init_epsilon)


def _to_float(value: str) -> float:
    return float(Fraction(value)) if '/' in value else float(value)


def _optional(func: Callable[[str], Any]) -> Callable[[str], Any]:
    def convert(value: str) -> Any:
        return None if value.lower() == 'none' else func(value)
    return convert


#: Value converters per key.
_CONVERTERS: Dict[str, Callable[[str], Any]] = {
    'dataset': str,
    'variant': str.lower,
    'mu': _optional(_to_float),
    'epochs': int,
    'batchsize': int,
    'lr_linear': _to_float,
    'lr_tropical': _to_float,
    'lr_logarithmic': _to_float,
    'lr_semiring': _optional(_to_float),
    'weight_decay': _to_float,
    'warmup_epochs': _to_float,
    'warmup_factor': _to_float,
    'annihilation_factor': _to_float,
    'width': int,
    'seed': int,
    'runs': int,
    'test_fraction': _to_float,
    'data_path': _optional(str),
    'dtype': str,
    'init_k': _to_float,
    'init_epsilon': _to_float,
}

#: Keys every configuration file must define.
REQUIRED_KEYS: Tuple[str, ...] = ('dataset', 'variant')


def _parse_line(line: str, where: str, dct: Dict[str, Any]) -> None:
    key, sep, value = line.partition('=')
    key = key.strip()
    value = value.strip()
    if not sep or not key:
        raise ConfigError(f"{where}: expected 'key = value'; observed {line.strip()!r}")
    elif key not in _CONVERTERS:
        raise ConfigError(f"{where}: unknown key {key!r}")
    elif not value:
        raise ConfigError(f"{where}: missing value for key {key!r}")

    try:
        dct[key] = _CONVERTERS[key](value)
    except (ValueError, ZeroDivisionError) as ex:
        raise ConfigError(f"{where}: invalid value {value!r} for key {key!r}") from ex


def parse_config(path: Optional[PathType] = None, overrides: Iterable[str] = (),
                 text: Optional[str] = None) -> TrainConfig:
    """Parse a configuration file (or **text**) into a :class:`TrainConfig`.

    Parameters
    ----------
    path : :class:`str` or :class:`os.PathLike`, optional
        The configuration file.

    overrides : :class:`~collections.abc.Iterable` [:class:`str`]
        ``key=value`` strings applied after the file, *e.g.* from ``--set``.

    text : :class:`str`, optional
        The configuration content; used instead of reading **path**.

    Raises
    ------
    ConfigError
        Raised for empty files, unknown keys, malformed values and missing required keys;
        the message names the key and line.

    """
    if text is None:
        if path is None:
            raise TypeError("parse_config() requires either 'path' or 'text'")
        with open(path, encoding='utf-8') as f:
            text = f.read()
    source = os.fspath(path) if path is not None else '<string>'

    dct: Dict[str, Any] = {}
    lines: Dict[str, int] = {}
    for i, raw in enumerate(text.splitlines(), 1):
        line = raw.split('#', 1)[0]
        if not line.strip():
            continue
        _parse_line(line, f'line {i}', dct)
        lines[line.partition('=')[0].strip()] = i

    if not dct:
        raise ConfigError(f"{source!r}: empty configuration")
    missing = [k for k in REQUIRED_KEYS if k not in dct]
    if missing:
        raise ConfigError(f"{source!r}: missing required key(s) {missing!r}")

    for item in overrides:
        _parse_line(item, f'--set {item!r}', dct)

    try:
        return TrainConfig.from_dict(dct)
    except ConfigError as ex:
        key = next((k for k in lines if repr(k) in str(ex)), None)
        if key is None:
            raise
        raise ConfigError(f"line {lines[key]}: {ex}") from ex


def preset_path(name: str) -> str:
    """Return the path of the bundled preset for dataset **name**."""
    if name not in DATASETS:
        raise ConfigError(f"no preset for dataset {name!r}; expected one of {list(DATASETS)!r}")
    return os.path.join(PRESET_DIR, f'{name}.cfg')


def load_preset(name: str, overrides: Iterable[str] = ()) -> TrainConfig:
    """Parse the bundled preset of dataset **name**, applying **overrides**."""
    return parse_config(preset_path(name), overrides)


def _format_value(value: Any) -> str:
    if value is None:
        return 'none'
    return repr(value) if isinstance(value, float) else str(value)


def format_config(config: Optional[TrainConfig], comments: Mapping[str, Any] = {}) -> str:
    """Return **config** in the ``key = value`` format, preceded by ``# key = value`` comment lines.

    If **config** is ``None`` only the comment lines are returned.

    """
    ret = [f'# {k} = {v}' for k, v in comments.items()]
    if config is not None:
        ret += [f'{k} = {_format_value(v)}' for k, v in config.as_dict().items()]
    return '\n'.join(ret) + '\n'


def write_manifest(config: Optional[TrainConfig], path: PathType, **extra: Any) -> str:
    """Write a replayable manifest of **config** to **path** and return its content.

    The provenance (package version, code content hash, config hash and any **extra**
    entries) is written as comments; the remainder is a valid configuration file.
    Commands without a training configuration pass ``None`` and record their
    arguments in **extra** instead.

    """
    comments: Dict[str, Any] = {
        'semiringlib': __version__,
        'source_hash': source_hash(),
    }
    if config is not None:
        comments['config_hash'] = config.content_hash()
    comments.update(extra)
    content = format_config(config, comments)
    with open(path, 'w', encoding='utf-8') as f:
        f.write(content)
    logger.info("Wrote manifest %r", os.fspath(path))
    return content
