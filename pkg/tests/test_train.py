"""Tests for :mod:`semiringlib.train`."""

import os
import json
import math
from os.path import join

import pytest
import numpy as np
import pandas as pd
from assertionlib import assertion
from nanoutils import delete_finally

from semiringlib import optim
from semiringlib.cli import TABLE1_VARIANTS
from semiringlib.exceptions import NonFiniteLossError
from semiringlib.functional import cross_entropy_loss
from semiringlib.config import TrainConfig, load_preset
from semiringlib.data import gen_circles, train_test_split, standardize, load_split
from semiringlib.layers import ModelConfig, build_fc_model, load_checkpoint
from semiringlib.train import (
    RunMetrics, ExperimentSummary, evaluate, train_model, train_one, run_experiment,
    run_stem, write_jsonl, write_summary_csv
)

PATH = join('tests', 'test_files')
CKPT_DIR = join(PATH, 'checkpoints')

#: Set to run the full-length reproduction tests.
SLOW = bool(os.environ.get('SEMIRINGLIB_SLOW'))


def _circles():
    ds = gen_circles(120, seed=0)
    train, test = train_test_split(ds, 0.25, seed=0)
    train, test, _ = standardize(train, test)
    return train, test


CONFIG = TrainConfig(dataset='circles', variant='maxplus', epochs=3, batchsize=16,
                     width=4, runs=2, warmup_epochs=1, seed=7)


def test_run_stem() -> None:
    """Tests for :func:`run_stem`."""
    assertion.eq(run_stem(CONFIG), 'circles-maxplus-seed7')
    config = TrainConfig(variant='logplus', mu=-10.0)
    assertion.eq(run_stem(config), 'iris-logplus-mu-10-seed42')


def test_evaluate() -> None:
    """Tests for :func:`evaluate`."""
    train, _ = _circles()
    model = build_fc_model(ModelConfig(2, 2, 4), rng=0)
    model['head'].weight.data[...] = 0

    # Ties in the logits resolve to the first class
    ref = 100 * np.mean(train.labels == 0)
    assertion.isclose(evaluate(model, train, batch_size=7), ref)
    assertion.assert_(evaluate, model, train.subset(np.array([], dtype=int)),
                      exception=ValueError)


def test_train_model() -> None:
    """Tests for :func:`train_model`."""
    train, test = _circles()
    model, metrics = train_model(CONFIG, train, test)
    steps = 3 * math.ceil(len(train) / 16)

    assertion.eq(metrics.dataset, 'circles')
    assertion.eq(metrics.params, 2 * 4 + 2 * (2 * 4 + 16) + 4 * 2)
    assertion.len_eq(metrics.train_loss, 3)
    assertion.len_eq(metrics.train_acc, 3)
    assertion.len_eq(metrics.lr_trace['linear'], steps)
    assertion.len_eq(metrics.lr_trace['semiring'], steps)
    assertion.isclose(metrics.lr_trace['semiring'][0], CONFIG.lr_tropical * 0.1)
    assertion.isclose(max(metrics.lr_trace['linear']), CONFIG.lr_linear)
    assertion.assert_(metrics.finite)
    assertion.eq(metrics.config_hash, CONFIG.content_hash())
    assertion.le(0.0, metrics.test_acc)
    assertion.le(metrics.test_acc, 100.0)
    assertion.eq(metrics.test_acc, evaluate(model, test.astype('float32')))
    for p in model.parameters():
        assertion.eq(p.dtype, np.float32)

    # Training is deterministic per seed
    metrics2 = train_one(CONFIG, train, test)
    assertion.eq(metrics2.train_loss, metrics.train_loss)
    assertion.eq(metrics2.test_acc, metrics.test_acc)


def test_train_zero_epochs() -> None:
    """Test that zero epochs evaluate the freshly initialized model."""
    train, test = _circles()
    metrics = train_one(CONFIG.copy(epochs=0), train, test)
    assertion.eq(metrics.train_loss, [])
    assertion.assert_(math.isfinite, metrics.test_acc)


def test_train_nonfinite() -> None:
    """Test that a non-finite loss names the first module with a non-finite output."""
    train, test = _circles()
    train.features[3, 0] = np.nan
    try:
        train_one(CONFIG, train, test)
    except NonFiniteLossError as ex:
        assertion.contains(str(ex), "'stem' (linear_matmul)")
    else:
        raise AssertionError("Failed to raise a NonFiniteLossError")

    summary = run_experiment(CONFIG, train, test)
    assertion.is_(summary.all_finite, False)
    assertion.eq(summary.n_failed, 2)
    assertion.assert_(math.isnan, summary.mean_acc)
    for run in summary.runs:
        assertion.is_(run.finite, False)
        assertion.contains(run.error, 'non-finite loss')
        assertion.eq(run.params, summary.params)


@delete_finally(join(PATH, 'failed.jsonl'))
def test_run_experiment_nonfinite_gradient(monkeypatch: pytest.MonkeyPatch) -> None:
    """Test that a non-finite gradient aborts only its own run."""
    train, test = _circles()
    reference = run_experiment(CONFIG, train, test)
    adamw_step = optim.adamw_step
    pending = [np.inf]

    def poisoned_step(param, grad, *args, **kwargs):
        if pending and kwargs.get('name') == 'stem.weight':
            grad = np.full_like(grad, pending.pop())
        return adamw_step(param, grad, *args, **kwargs)

    monkeypatch.setattr(optim, 'adamw_step', poisoned_step)
    summary = run_experiment(CONFIG, train, test)
    failed, completed = summary.runs

    assertion.is_(failed.finite, False)
    assertion.contains(failed.error, "non-finite gradient for parameter 'stem.weight'")
    assertion.eq(completed.test_acc, reference.runs[1].test_acc)
    assertion.eq(completed.train_loss, reference.runs[1].train_loss)

    # The summary covers the completed run only
    assertion.is_(summary.all_finite, False)
    assertion.eq(summary.n_failed, 1)
    assertion.eq(summary.mean_acc, completed.test_acc)
    assertion.eq(summary.sd_acc, 0.0)

    write_jsonl(summary.runs, join(PATH, 'failed.jsonl'))
    with open(join(PATH, 'failed.jsonl'), encoding='utf-8') as f:
        records = [json.loads(line) for line in f]
    assertion.is_(records[0]['test_acc'], None)
    assertion.eq(records[1]['test_acc'], completed.test_acc)


def test_run_metrics_json() -> None:
    """Test that :meth:`RunMetrics.to_json` writes non-finite values as ``null``."""
    run = RunMetrics('spheres', 'logplus', 1.0, 42, 2336, 'abc', [0.7, math.nan],
                     [50.0, math.inf], error='non-finite loss')
    line = run.to_json()
    for token in ('NaN', 'Infinity'):
        assertion.contains(line, token, invert=True)

    record = json.loads(line)
    assertion.eq(record['train_loss'], [0.7, None])
    assertion.eq(record['train_acc'], [50.0, None])
    assertion.is_(record['test_acc'], None)
    assertion.eq(record['error'], 'non-finite loss')


def test_initial_loss() -> None:
    """Test that the first-batch loss of a freshly built model lies within 30% of log(c)."""
    variants = [('relu', 'none'), ('maxplus', 'none'), ('minplus', 'none'),
                ('logplus', '-1'), ('logplus', '10')]
    for dataset in ('iris', 'circles', 'spheres'):
        train, _ = load_split(dataset)
        ref = math.log(train.n_classes)
        for variant, mu in variants:
            config = load_preset(dataset, [f'variant={variant}', f'mu={mu}'])
            rng = np.random.default_rng(config.seed)
            model = build_fc_model(config.model_config(train.n_features, train.n_classes),
                                   rng, config.init_spec())
            index = rng.permutation(len(train))[:config.batchsize]
            loss = cross_entropy_loss(model(train.features[index]), train.labels[index]).item()
            assertion.ge(loss, 0.7 * ref)
            assertion.le(loss, 1.3 * ref)


def test_run_experiment() -> None:
    """Tests for :func:`run_experiment`."""
    train, test = _circles()
    summary = run_experiment(CONFIG, train, test)
    assertion.isinstance(summary, ExperimentSummary)
    assertion.eq(summary.variant, 'maxplus')
    assertion.len_eq(summary.runs, 2)
    assertion.eq([r.seed for r in summary.runs], [7, 8])
    assertion.assert_(summary.all_finite)

    acc = [r.test_acc for r in summary.runs]
    assertion.isclose(summary.mean_acc, np.mean(acc))
    assertion.isclose(summary.sd_acc, np.std(acc, ddof=1), abs_tol=1e-12)
    assertion.eq(list(summary.as_row()), ['dataset', 'variant', 'mu', 'mean_acc', 'sd_acc', 'params'])  # noqa: E501

    # The results do not depend on the number of processes
    summary2 = run_experiment(CONFIG, train, test, jobs=2)
    assertion.eq([r.test_acc for r in summary2.runs], acc)
    assertion.eq([r.train_loss for r in summary2.runs], [r.train_loss for r in summary.runs])


@delete_finally(CKPT_DIR)
def test_run_experiment_checkpoints() -> None:
    """Test that :func:`run_experiment` writes one checkpoint per run."""
    os.mkdir(CKPT_DIR)
    train, test = _circles()
    run_experiment(CONFIG, train, test, checkpoint_dir=CKPT_DIR)
    assertion.eq(sorted(os.listdir(CKPT_DIR)),
                 ['circles-maxplus-seed7.ckpt', 'circles-maxplus-seed8.ckpt'])

    state = load_checkpoint(join(CKPT_DIR, 'circles-maxplus-seed7.ckpt'))
    model, _ = train_model(CONFIG, train, test)
    model2 = build_fc_model(model.config, rng=0, dtype=np.float32)
    model2.load_state_dict(state)
    assertion.eq(evaluate(model2, test.astype('float32')), evaluate(model, test.astype('float32')))


@delete_finally(join(PATH, 'metrics.jsonl'), join(PATH, 'summary.csv'))
def test_outputs() -> None:
    """Tests for :func:`write_jsonl` and :func:`write_summary_csv`."""
    runs = [
        RunMetrics('iris', 'logplus', -10.0, 42, 60, 'abc', [1.0], [50.0], 90.0),
        RunMetrics('iris', 'logplus', -10.0, 43, 60, 'abc', [1.0], [50.0], 100.0),
    ]
    summary = ExperimentSummary('iris', 'logplus', -10.0, 95.0, 7.0710678, 60, runs)

    write_jsonl(runs, join(PATH, 'metrics.jsonl'))
    with open(join(PATH, 'metrics.jsonl'), encoding='utf-8') as f:
        records = [json.loads(line) for line in f]
    assertion.eq([r['seed'] for r in records], [42, 43])
    assertion.eq(records[0]['mu'], -10.0)
    assertion.is_(records[0]['error'], None)

    df = write_summary_csv([summary], join(PATH, 'summary.csv'))
    df2 = pd.read_csv(join(PATH, 'summary.csv'))
    assertion.eq(df2.columns.tolist(), ['dataset', 'variant', 'mu', 'mean_acc', 'sd_acc', 'params'])  # noqa: E501
    assertion.eq(df2['params'].tolist(), [60])
    assertion.eq(df.shape, (1, 6))


@pytest.mark.slow
@pytest.mark.skipif(not SLOW, reason="requires SEMIRINGLIB_SLOW=1")
def test_iris_reproduction() -> None:
    """Train every iris variant of the comparison table for all ten seeds."""
    train, test = load_split('iris')
    for variant, mu in TABLE1_VARIANTS:
        config = load_preset('iris', [f'variant={variant}', f'mu={"none" if mu is None else mu}'])
        summary = run_experiment(config, train, test, jobs=os.cpu_count() or 1)
        assertion.assert_(summary.all_finite)
        assertion.len_eq(summary.runs, 10)
        assertion.eq(summary.params, 60)
        assertion.ge(summary.mean_acc, 94.5, message=f'{variant} mu={mu}')


@pytest.mark.slow
@pytest.mark.skipif(not SLOW, reason="requires SEMIRINGLIB_SLOW=1")
def test_spheres_reproduction() -> None:
    """Test that logplus with a small |mu| falls behind on the spheres presets."""
    train, test = load_split('spheres')
    jobs = os.cpu_count() or 1
    acc = {}
    for variant, mu in [('maxplus', 'none'), ('logplus', '10'), ('logplus', '1'), ('logplus', '-1')]:
        config = load_preset('spheres', [f'variant={variant}', f'mu={mu}'])
        summary = run_experiment(config, train, test, jobs=jobs)
        assertion.eq(summary.params, 2336)
        assertion.assert_(summary.all_finite, message=f'{variant} mu={mu}')
        acc[variant, mu] = summary.mean_acc

    assertion.ge(acc['maxplus', 'none'], 78.0)
    assertion.ge(acc['logplus', '10'], 78.0)
    for mu in ('1', '-1'):
        assertion.le(acc['logplus', mu], acc['logplus', '10'] - 5.0, message=f'mu={mu}')
