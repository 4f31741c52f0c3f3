"""SemiringLib."""

import os
from nanoutils import VersionInfo

from .__version__ import __version__

from .ndrepr import NDRepr, aNDRepr
from .dataclass import AbstractConfig
from .exceptions import (
    ShapeError, EmptyReductionError, NonFiniteError, NonFiniteGradientError,
    NonFiniteLossError, ConfigError, DataFormatError
)
from .semiring import SemiringSpec, SemiringKind, LINEAR, MAX_PLUS, MIN_PLUS
from .tensor import Tensor, Parameter, Tape
from .linalg import semiring_matvec, semiring_matmul, semiring_bias, linear_matmul
from .init import InitScheme, InitSpec
from .layers import BlockVariant, ModelConfig, build_fc_model
from .optim import AdamW, ScheduleConfig
from .config import TrainConfig, parse_config, load_preset
from .train import RunMetrics, train_one, run_experiment
from .functions import load_readme

_README = os.path.join(__path__[0], 'README.rst')  # type: ignore
__doc__ = load_readme(_README, encoding='utf-8')
version_info = VersionInfo.from_str(__version__)

del _README, load_readme, os, VersionInfo

__author__ = "The SemiringLib developers"

__all__ = [
    'NDRepr', 'aNDRepr', 'AbstractConfig',
    'ShapeError', 'EmptyReductionError', 'NonFiniteError', 'NonFiniteGradientError',
    'NonFiniteLossError', 'ConfigError', 'DataFormatError',
    'SemiringSpec', 'SemiringKind', 'LINEAR', 'MAX_PLUS', 'MIN_PLUS',
    'Tensor', 'Parameter', 'Tape',
    'semiring_matvec', 'semiring_matmul', 'semiring_bias', 'linear_matmul',
    'InitScheme', 'InitSpec',
    'BlockVariant', 'ModelConfig', 'build_fc_model',
    'AdamW', 'ScheduleConfig',
    'TrainConfig', 'parse_config', 'load_preset',
    'RunMetrics', 'train_one', 'run_experiment'
]
