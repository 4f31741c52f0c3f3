"""The training loop, evaluation and multi-run experiments.

A run executes ``epochs * ceil(N / batchsize)`` AdamW steps over batches shuffled with the
run's random number generator, keeping the last partial batch.
Both parameter groups follow the 1-cycle schedule with their own peak learning rate;
the rates actually applied are recorded in :attr:`RunMetrics.lr_trace`.

Index
-----
.. currentmodule:: semiringlib.train
.. autosummary::
    RunMetrics
    ExperimentSummary
    train_model
    train_one
    evaluate
    run_experiment
    run_stem
    write_jsonl
    write_summary_csv

API
---
.. autoclass:: RunMetrics
    :members: finite, to_dict, to_json
.. autoclass:: ExperimentSummary
    :members: all_finite, n_failed, as_row
.. autofunction:: train_model
.. autofunction:: train_one
.. autofunction:: evaluate
.. autofunction:: run_experiment
.. autofunction:: run_stem
.. autofunction:: write_jsonl
.. autofunction:: write_summary_csv

"""

import os
import json
import math
import time
import logging
import dataclasses
from dataclasses import dataclass, field
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Dict, Iterable, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from .config import TrainConfig
from .data import Dataset, load_split
from .exceptions import NonFiniteError, NonFiniteLossError
from .functional import cross_entropy_loss
from .layers import Model, build_fc_model, count_parameters, save_checkpoint
from .optim import AdamW, GROUP_LABELS, ScheduleConfig, onecycle_lr, split_param_groups
from .tensor import Tape

__all__ = [
    'RunMetrics', 'ExperimentSummary', 'train_model', 'train_one', 'evaluate',
    'run_experiment', 'run_stem', 'write_jsonl', 'write_summary_csv'
]

logger = logging.getLogger(__name__)

#: The columns of the summary CSV file.
SUMMARY_COLUMNS: Tuple[str, ...] = ('dataset', 'variant', 'mu', 'mean_acc', 'sd_acc', 'params')


def _finite_or_none(obj: Any) -> Any:
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    elif isinstance(obj, dict):
        return {k: _finite_or_none(v) for k, v in obj.items()}
    elif isinstance(obj, (list, tuple)):
        return [_finite_or_none(v) for v in obj]
    return obj


@dataclass
class RunMetrics:
    """The record of a single training run; accuracies are percentages."""

    dataset: str
    variant: str
    mu: Optional[float]
    seed: int
    params: int
    config_hash: str
    train_loss: List[float] = field(default_factory=list)
    train_acc: List[float] = field(default_factory=list)
    test_acc: float = math.nan
    lr_trace: Dict[str, List[float]] = field(default_factory=dict)
    wall_clock: float = field(default=0.0, compare=False)

    #: The error message of a run aborted by a non-finite loss or gradient.
    error: Optional[str] = None

    @property
    def finite(self) -> bool:
        """Whether the run completed with a finite test accuracy."""
        return self.error is None and math.isfinite(self.test_acc)

    def to_dict(self) -> Dict[str, Any]:
        """Return a JSON-compatible dictionary."""
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        """Return this record as a single line of JSON; NaN and infinities become ``null``."""
        return json.dumps(_finite_or_none(self.to_dict()), allow_nan=False)


@dataclass
class ExperimentSummary:
    """The aggregate of all runs of one configuration.

    :attr:`mean_acc` and :attr:`sd_acc` are computed over the completed runs.

    """

    dataset: str
    variant: str
    mu: Optional[float]
    mean_acc: float
    sd_acc: float
    params: int
    runs: List[RunMetrics] = field(default_factory=list, repr=False)

    @property
    def all_finite(self) -> bool:
        """Whether every run completed with a finite test accuracy."""
        return bool(self.runs) and all(r.finite for r in self.runs)

    @property
    def n_failed(self) -> int:
        """The number of runs aborted by a non-finite loss or gradient."""
        return sum(not r.finite for r in self.runs)

    def as_row(self) -> Dict[str, Any]:
        """Return the row of the summary CSV file."""
        return {k: getattr(self, k) for k in SUMMARY_COLUMNS}


def evaluate(model: Model, dataset: Dataset, batch_size: int = 1024) -> float:
    """Return the percentage of samples in **dataset** whose largest logit is the true label."""
    if not len(dataset):
        raise ValueError(f"cannot evaluate on the empty dataset {dataset.name!r}")
    correct = 0
    for start in range(0, len(dataset), batch_size):
        logits = model(dataset.features[start:start + batch_size]).data
        correct += int((logits.argmax(axis=1) == dataset.labels[start:start + batch_size]).sum())
    return 100 * correct / len(dataset)


def train_model(config: TrainConfig, train: Dataset, test: Dataset,
                rng: Optional[np.random.Generator] = None) -> Tuple[Model, RunMetrics]:
    """Build and train the model described by **config** and return it with its metrics.

    Parameters
    ----------
    config : :class:`~semiringlib.config.TrainConfig`
        The run configuration.

    train, test : :class:`~semiringlib.data.Dataset`
        The preprocessed training and test sets.

    rng : :class:`numpy.random.Generator`, optional
        The run's random number generator, used for initialization and shuffling;
        defaults to one seeded with :attr:`TrainConfig.seed`.

    Raises
    ------
    NonFiniteLossError
        Raised if a step produces a non-finite loss; the message names the first module
        whose output was non-finite.

    NonFiniteGradientError
        Raised by the optimizer if a parameter receives a non-finite gradient.

    """
    start_time = time.perf_counter()
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    train = train.astype(config.dtype)
    test = test.astype(config.dtype)

    model = build_fc_model(config.model_config(train.n_features, train.n_classes),
                           rng, config.init_spec(), config.dtype)
    metrics = RunMetrics(config.dataset, config.variant, config.mu, config.seed,
                         count_parameters(model), config.content_hash(),
                         lr_trace={k: [] for k in GROUP_LABELS})

    n = len(train)
    bs = config.batchsize
    steps_per_epoch = math.ceil(n / bs)
    if config.epochs:
        max_lr = {'linear': config.lr_linear, 'semiring': config.semiring_lr}
        schedule = ScheduleConfig.from_epochs(
            max_lr, config.epochs, steps_per_epoch, config.warmup_epochs,
            config.warmup_factor, config.annihilation_factor
        )
        optimizer = AdamW(split_param_groups(model, max_lr, config.weight_decay))

    step = 0
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        loss_sum = 0.0
        correct = 0
        for i in range(steps_per_epoch):
            index = order[i * bs:(i + 1) * bs]
            x, y = train.features[index], train.labels[index]

            tape = Tape()
            logits = model(x, tape)
            loss = cross_entropy_loss(logits, y, tape=tape)
            if not np.isfinite(loss.data):
                node = tape.first_nonfinite()
                where = f'{node.label!r} ({node.op})' if node is not None else 'unknown'
                raise NonFiniteLossError(f"non-finite loss in epoch {epoch}, step {step}; "
                                         f"first non-finite output: {where}")

            model.zero_grad()
            tape.backward(loss)
            lrs = {k: onecycle_lr(step, schedule, k) for k in GROUP_LABELS}
            optimizer.step(lrs)
            for k, v in lrs.items():
                metrics.lr_trace[k].append(v)

            loss_sum += loss.item() * len(index)
            correct += int((logits.data.argmax(axis=1) == y).sum())
            step += 1

        metrics.train_loss.append(loss_sum / n)
        metrics.train_acc.append(100 * correct / n)
        logger.debug("%s/%s seed=%d epoch %d: loss=%.4f acc=%.2f", config.dataset,
                     config.label, config.seed, epoch, metrics.train_loss[-1],
                     metrics.train_acc[-1])

    metrics.test_acc = evaluate(model, test)
    metrics.wall_clock = time.perf_counter() - start_time
    return model, metrics


def train_one(config: TrainConfig, train: Dataset, test: Dataset,
              rng: Optional[np.random.Generator] = None) -> RunMetrics:
    """Train a single model and return its :class:`RunMetrics`; see :func:`train_model`."""
    return train_model(config, train, test, rng)[1]


def run_stem(config: TrainConfig) -> str:
    """Return a file name stem identifying the dataset, variant and seed of **config**, *e.g.* ``"iris-logplus-mu-10-seed42"``."""  # noqa: E501
    mu = '' if config.mu is None else f'-mu{config.mu:g}'
    return f'{config.dataset}-{config.variant}{mu}-seed{config.seed}'


_Task = Tuple[TrainConfig, Dataset, Dataset, Optional[str]]


def _run_seed(task: _Task) -> RunMetrics:
    config, train, test, checkpoint_dir = task
    try:
        model, metrics = train_model(config, train, test, np.random.default_rng(config.seed))
    except NonFiniteError as ex:
        logger.error("%s/%s seed=%d failed: %s", config.dataset, config.label, config.seed, ex)
        model_config = config.model_config(train.n_features, train.n_classes)
        return RunMetrics(config.dataset, config.variant, config.mu, config.seed,
                          count_parameters(build_fc_model(model_config, 0)),
                          config.content_hash(), error=str(ex))

    if checkpoint_dir is not None:
        save_checkpoint(model, os.path.join(checkpoint_dir, f'{run_stem(config)}.ckpt'))
    return metrics


def run_experiment(config: TrainConfig, train: Optional[Dataset] = None,
                   test: Optional[Dataset] = None, jobs: int = 1,
                   checkpoint_dir: Optional[Union[str, os.PathLike]] = None) -> ExperimentSummary:
    """Train :attr:`TrainConfig.runs` models with seeds ``seed, seed + 1, ...`` and summarize them.

    The data split is shared by all runs; it is loaded with
    :func:`~semiringlib.data.load_split` if **train** and **test** are not supplied.
    With **jobs** > 1 the runs are distributed over a process pool;
    the results do not depend on **jobs**.

    A run aborted by a :exc:`~semiringlib.exceptions.NonFiniteError` is logged and
    recorded with :attr:`RunMetrics.error` set; the remaining runs proceed.
    The summary statistics cover the completed runs only; with no completed run the
    mean is NaN.
    If **checkpoint_dir** is given, the parameters of every completed run are written there
    with :func:`~semiringlib.layers.save_checkpoint`.

    """
    if train is None or test is None:
        train, test = load_split(config.dataset, config.data_path,
                                 config.test_fraction, config.seed)

    logger.info("Starting %d run(s) of %s/%s", config.runs, config.dataset, config.label)
    directory = os.fspath(checkpoint_dir) if checkpoint_dir is not None else None
    tasks = [(config.copy(seed=config.seed + k), train, test, directory)
             for k in range(config.runs)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as executor:
            runs = list(executor.map(_run_seed, tasks))
    else:
        runs = [_run_seed(task) for task in tasks]

    acc = np.array([r.test_acc for r in runs if r.finite])
    mean = float(acc.mean()) if len(acc) else math.nan
    sd = float(acc.std(ddof=1)) if len(acc) > 1 else 0.0
    summary = ExperimentSummary(config.dataset, config.variant, config.mu, mean,
                                sd, runs[0].params, runs)
    logger.info("Finished %s/%s: %.2f ± %.2f %% over %d run(s)", config.dataset, config.label,
                summary.mean_acc, summary.sd_acc, len(acc))
    if summary.n_failed:
        logger.warning("%d of %d run(s) of %s/%s failed", summary.n_failed, len(runs),
                       config.dataset, config.label)
    return summary


def write_jsonl(runs: Iterable[RunMetrics], path: Union[str, os.PathLike]) -> None:
    """Write one JSON object per run to **path**."""
    with open(path, 'w', encoding='utf-8') as f:
        for run in runs:
            f.write(run.to_json() + '\n')


def write_summary_csv(summaries: Iterable[ExperimentSummary],
                      path: Union[str, os.PathLike]) -> pd.DataFrame:
    """Write the summary CSV file and return it as a :class:`~pandas.DataFrame`."""
    df = pd.DataFrame([s.as_row() for s in summaries], columns=list(SUMMARY_COLUMNS))
    df.to_csv(path, index=False)
    logger.info("Wrote %d summary row(s) to %r", len(df), os.fspath(path))
    return df
