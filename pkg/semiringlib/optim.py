"""AdamW with decoupled weight decay, split parameter groups and the 1-cycle cosine schedule.

Parameters are split into two groups, ``"linear"`` and ``"semiring"``, each with its own
peak learning rate. Every group follows the same schedule shape: a cosine ramp from
``max_lr * warmup_factor`` up to ``max_lr`` followed by a cosine anneal down to
``max_lr * annihilation_factor``.

Examples
--------
.. code:: python

    >>> from semiringlib.optim import ScheduleConfig, onecycle_lr

    >>> cfg = ScheduleConfig({'linear': 0.02}, total_steps=100, warmup_steps=45)
    >>> round(onecycle_lr(0, cfg, 'linear'), 12)
    0.002
    >>> round(onecycle_lr(45, cfg, 'linear'), 12)
    0.02
    >>> round(onecycle_lr(100, cfg, 'linear'), 12)
    2e-05

Index
-----
.. currentmodule:: semiringlib.optim
.. autosummary::
    ParamGroup
    ScheduleConfig
    AdamState
    AdamW
    adamw_step
    onecycle_lr
    split_param_groups

API
---
.. autoclass:: ParamGroup
.. autoclass:: ScheduleConfig
    :members: from_epochs
.. autoclass:: AdamState
.. autoclass:: AdamW
    :members:
.. autofunction:: adamw_step
.. autofunction:: onecycle_lr
.. autofunction:: split_param_groups

"""

import math
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .dataclass import AbstractConfig
from .exceptions import NonFiniteGradientError, ShapeError
from .ndrepr import aNDRepr
from .tensor import Parameter

__all__ = [
    'ParamGroup', 'ScheduleConfig', 'AdamState', 'AdamW',
    'adamw_step', 'onecycle_lr', 'split_param_groups'
]

logger = logging.getLogger(__name__)

#: The labels of the optimizer groups, in a fixed order.
GROUP_LABELS: Tuple[str, ...] = ('linear', 'semiring')


@dataclass
class ParamGroup:
    """A set of parameters sharing a learning rate and a weight decay."""

    #: The group label: ``"linear"`` or ``"semiring"``.
    label: str

    #: The current learning rate.
    learning_rate: float = 0.0

    #: The decoupled weight decay coefficient.
    weight_decay: float = 0.0

    #: The member parameters.
    params: List[Parameter] = field(default_factory=list)


@dataclass(frozen=True, repr=False)
class ScheduleConfig(AbstractConfig):
    """The parameters of the 1-cycle learning rate schedule.

    Parameters
    ----------
    max_lr : :class:`~collections.abc.Mapping` [:class:`str`, :class:`float`]
        The peak learning rate per group label.

    total_steps : :class:`int`
        The total number of optimizer steps.

    warmup_steps : :class:`int`
        The number of steps until the peak; ``0 < warmup_steps < total_steps``.

    warmup_factor : :class:`float`
        The initial learning rate as a fraction of the peak; in :math:`(0, 1]`.

    annihilation_factor : :class:`float`
        The final learning rate as a fraction of the peak; in :math:`(0, 1]`.

    """

    max_lr: Mapping[str, float]
    total_steps: int
    warmup_steps: int
    warmup_factor: float = 0.1
    annihilation_factor: float = 0.001

    def __post_init__(self) -> None:
        object.__setattr__(self, 'max_lr', dict(self.max_lr))
        if not 0 < self.warmup_steps < self.total_steps:
            raise ValueError(f"expected 0 < warmup_steps < total_steps; observed "
                             f"warmup_steps={self.warmup_steps!r} and "
                             f"total_steps={self.total_steps!r}")
        for name in ('warmup_factor', 'annihilation_factor'):
            value = getattr(self, name)
            if not 0 < value <= 1:
                raise ValueError(f"{name!r} expected a value in (0, 1]; observed {value!r}")

    @classmethod
    def from_epochs(cls, max_lr: Mapping[str, float], epochs: int, steps_per_epoch: int,
                    warmup_epochs: float, warmup_factor: float = 0.1,
                    annihilation_factor: float = 0.001) -> 'ScheduleConfig':
        """Construct a schedule with the warmup length expressed in epochs.

        The warmup is clamped to ``[1, total_steps - 1]`` steps, with a warning, if it
        does not fit the run.

        Raises
        ------
        ValueError
            Raised if the run consists of fewer than 2 steps.

        """
        total = epochs * steps_per_epoch
        if total < 2:
            raise ValueError(f"the 1-cycle schedule requires at least 2 steps; "
                             f"observed {epochs} epoch(s) of {steps_per_epoch} step(s)")
        warmup = int(round(warmup_epochs * steps_per_epoch))
        clamped = min(max(warmup, 1), total - 1)
        if clamped != warmup:
            logger.warning("Clamping the warmup from %d to %d step(s) for a run of %d step(s)",
                           warmup, clamped, total)
        return cls(max_lr, total, clamped, warmup_factor, annihilation_factor)


def _annealing_cos(start: float, end: float, pct: float) -> float:
    """Cosine anneal from **start** to **end** as **pct** goes from 0.0 to 1.0."""
    cos_out = math.cos(math.pi * pct) + 1
    return end + (start - end) / 2.0 * cos_out


def onecycle_lr(step: int, cfg: ScheduleConfig, group: str) -> float:
    """Return the learning rate of **group** at **step** of the 1-cycle schedule.

    Raises
    ------
    ValueError
        Raised if **step** lies outside ``[0, total_steps]``.

    KeyError
        Raised if **cfg** has no peak learning rate for **group**.

    """
    if not 0 <= step <= cfg.total_steps:
        raise ValueError(f"'step' expected a value in [0, {cfg.total_steps}]; observed {step!r}")
    max_lr = cfg.max_lr[group]
    if step <= cfg.warmup_steps:
        pct = step / cfg.warmup_steps
        return _annealing_cos(max_lr * cfg.warmup_factor, max_lr, pct)
    pct = (step - cfg.warmup_steps) / (cfg.total_steps - cfg.warmup_steps)
    return _annealing_cos(max_lr, max_lr * cfg.annihilation_factor, pct)


class AdamState(NamedTuple):
    """The per-parameter state of :func:`adamw_step`."""

    #: The number of steps taken so far.
    step: int

    #: The first moment estimate.
    m: np.ndarray

    #: The second moment estimate.
    v: np.ndarray

    @classmethod
    def zeros_like(cls, param: np.ndarray) -> 'AdamState':
        """Return the initial state for **param**."""
        return cls(0, np.zeros_like(param), np.zeros_like(param))


def adamw_step(param: np.ndarray, grad: np.ndarray, state: AdamState, lr: float,
               weight_decay: float = 0.0, betas: Tuple[float, float] = (0.9, 0.999),
               eps: float = 1e-8, name: str = '') -> Tuple[np.ndarray, AdamState]:
    """Perform a single AdamW update and return the new parameter and state.

    The decoupled decay :math:`p \\leftarrow p - \\eta \\lambda p` is applied before the
    adaptive step :math:`p \\leftarrow p - \\eta \\hat{m} / (\\sqrt{\\hat{v}} + \\delta)`,
    where :math:`\\hat{m}` and :math:`\\hat{v}` are the bias-corrected moment estimates.

    Parameters
    ----------
    param, grad : :class:`numpy.ndarray`
        The parameter and its gradient.

    state : :class:`AdamState`
        The state of the previous step; see :meth:`AdamState.zeros_like`.

    lr : :class:`float`
        The learning rate :math:`\\eta`.

    weight_decay : :class:`float`
        The decay coefficient :math:`\\lambda`.

    betas : :class:`tuple` [:class:`float`, :class:`float`]
        The moment decay rates :math:`\\beta_1` and :math:`\\beta_2`.

    eps : :class:`float`
        The denominator guard :math:`\\delta`.

    name : :class:`str`
        The parameter name used in exception messages.

    Raises
    ------
    NonFiniteGradientError
        Raised if **grad** contains a NaN or infinity.

    ShapeError
        Raised if the shapes of **param**, **grad** and **state** differ.

    """
    if not np.isfinite(grad).all():
        raise NonFiniteGradientError(f"non-finite gradient for parameter {name!r}: "
                                     f"{aNDRepr.repr(grad)}")
    elif not (param.shape == grad.shape == state.m.shape == state.v.shape):
        raise ShapeError(f"parameter {name!r} of shape {param.shape} does not match its "
                         f"gradient {grad.shape} or state {state.m.shape}")

    beta1, beta2 = betas
    step = state.step + 1
    m = beta1 * state.m + (1 - beta1) * grad
    v = beta2 * state.v + (1 - beta2) * grad**2
    m_hat = m / (1 - beta1**step)
    v_hat = v / (1 - beta2**step)

    ret = param - lr * weight_decay * param
    ret = ret - lr * m_hat / (np.sqrt(v_hat) + eps)
    return ret.astype(param.dtype, copy=False), AdamState(step, m, v)


def split_param_groups(model: Any,
                       learning_rates: Optional[Mapping[str, float]] = None,
                       weight_decay: float = 0.0) -> List[ParamGroup]:
    """Split the parameters of **model** into the ``"linear"`` and ``"semiring"`` groups.

    Semiring-layer weights end up in the ``"semiring"`` group; every other parameter
    (linear weights, normalization scales and shifts) in the ``"linear"`` group.
    Both groups are always returned, possibly empty.

    """
    params = model.parameters() if hasattr(model, 'parameters') else model
    lrs = learning_rates or {}
    groups = {k: ParamGroup(k, lrs.get(k, 0.0), weight_decay) for k in GROUP_LABELS}
    for p in params:  # type: ignore[union-attr]
        groups[p.group].params.append(p)
    return list(groups.values())


class AdamW:
    """AdamW over a list of :class:`ParamGroup` instances.

    Parameters with :attr:`~semiringlib.tensor.Parameter.decay` set to ``False``
    are never decayed. Parameters without a gradient are skipped.

    """

    def __init__(self, groups: Sequence[ParamGroup], betas: Tuple[float, float] = (0.9, 0.999),
                 eps: float = 1e-8) -> None:
        self.groups = list(groups)
        self.betas = betas
        self.eps = eps
        self.state: Dict[int, AdamState] = {}

    def set_learning_rates(self, lrs: Mapping[str, float]) -> None:
        """Set the learning rate of every group whose label is in **lrs**."""
        for group in self.groups:
            if group.label in lrs:
                group.learning_rate = lrs[group.label]

    def step(self, lrs: Optional[Mapping[str, float]] = None) -> None:
        """Update all parameters in place, optionally setting the group learning rates first."""
        if lrs is not None:
            self.set_learning_rates(lrs)
        for group in self.groups:
            for p in group.params:
                if p.grad is None:
                    continue
                key = id(p)
                state = self.state.get(key)
                if state is None:
                    state = AdamState.zeros_like(p.data)
                decay = group.weight_decay if p.decay else 0.0
                new, self.state[key] = adamw_step(
                    p.data, p.grad, state, group.learning_rate, decay,
                    self.betas, self.eps, name=p.name or ''
                )
                p.data[...] = new

    def zero_grad(self) -> None:
        """Reset the gradients of all parameters."""
        for group in self.groups:
            for p in group.params:
                p.zero_grad()

