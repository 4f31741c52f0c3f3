"""The ``semiringlib`` command-line interface.

.. code:: bash

    semiringlib train --config semiringlib/presets/iris.cfg --set variant=maxplus --out runs/
    semiringlib eval --config runs/manifest.cfg --checkpoint runs/iris-maxplus-seed42.ckpt
    semiringlib reproduce-table1 --out table1/ --heart heart.csv --fashion ~/fashion --jobs 4
    semiringlib reproduce-table1 --dry-run
    semiringlib gradcheck --variant logplus --mu 10
    semiringlib propcheck
    semiringlib gen-data spheres --out spheres.csv

Every command returns 0 on success and 1 if any run produced a non-finite loss or
any check failed; invalid configurations and unreadable data files return 2.
A command that completes writes a manifest, by default next to its output;
``--manifest PATH`` overrides the location.

Index
-----
.. currentmodule:: semiringlib.cli
.. autosummary::
    main
    build_parser
    write_run_manifest
    table1_configs
    cmd_train
    cmd_eval
    cmd_reproduce_table1
    cmd_gradcheck
    cmd_propcheck
    cmd_gen_data

API
---
.. autofunction:: main
.. autofunction:: build_parser
.. autofunction:: write_run_manifest
.. autofunction:: table1_configs
.. autofunction:: cmd_train
.. autofunction:: cmd_eval
.. autofunction:: cmd_reproduce_table1
.. autofunction:: cmd_gradcheck
.. autofunction:: cmd_propcheck
.. autofunction:: cmd_gen_data

"""

import os
import sys
import shlex
import logging
import argparse
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .__version__ import __version__
from .config import TrainConfig, parse_config, load_preset, write_manifest
from .data import (
    DATASETS, SHELL_NOISE_SD, SHELL_RADII, Dataset, gen_circles, gen_spheres, load_split, to_csv
)
from .exceptions import ConfigError, DataFormatError
from .layers import build_fc_model, load_checkpoint
from .semiring import SemiringSpec
from .train import (
    ExperimentSummary, evaluate, run_experiment, run_stem, write_jsonl, write_summary_csv
)
from .verification import DEFAULT_SEMIRINGS, run_gradcheck, run_propcheck

__all__ = [
    'main', 'build_parser', 'write_run_manifest', 'table1_configs', 'cmd_train', 'cmd_eval',
    'cmd_reproduce_table1', 'cmd_gradcheck', 'cmd_propcheck', 'cmd_gen_data'
]

logger = logging.getLogger(__name__)

#: The rows of the comparison table: ``(variant, mu)``.
TABLE1_VARIANTS: Tuple[Tuple[str, Optional[float]], ...] = (
    ('relu', None),
    ('maxplus', None),
    ('minplus', None),
    ('logplus', -10.0),
    ('logplus', -1.0),
    ('logplus', 1.0),
    ('logplus', 10.0),
)


def _load_config(args: argparse.Namespace) -> TrainConfig:
    """Resolve ``--config``/``--preset``, ``--set`` and ``--runs`` into a :class:`TrainConfig`."""
    overrides = list(args.set)
    if args.runs is not None:
        overrides.append(f'runs={args.runs}')
    if args.config is not None:
        return parse_config(args.config, overrides)
    return load_preset(args.preset, overrides)


def _semirings(variant: str, mu: Optional[float]) -> Tuple[SemiringSpec, ...]:
    if variant == 'all':
        return DEFAULT_SEMIRINGS
    elif variant == 'logplus' and mu is None:
        return tuple(s for s in DEFAULT_SEMIRINGS if s.is_logarithmic)
    return (SemiringSpec.from_name(variant, mu),)


def table1_configs(overrides: Sequence[str] = (), only: Optional[Sequence[str]] = None,
                   data_paths: Optional[Dict[str, str]] = None) -> List[TrainConfig]:
    """Return the configurations of the comparison table: every variant for every dataset.

    Configurations start from the bundled presets; **overrides** apply last.
    **only** restricts the datasets and **data_paths** supplies ``data_path`` per dataset.

    """
    data_paths = data_paths or {}
    ret = []
    for dataset in (only or DATASETS):
        extra = [f'data_path={data_paths[dataset]}'] if dataset in data_paths else []
        for variant, mu in TABLE1_VARIANTS:
            sets = [f'variant={variant}', f'mu={"none" if mu is None else mu}']
            ret.append(load_preset(dataset, sets + extra + list(overrides)))
    return ret


def _write_outputs(out: str, summaries: List[ExperimentSummary]) -> None:
    write_jsonl([run for s in summaries for run in s.runs], os.path.join(out, 'metrics.jsonl'))
    write_summary_csv(summaries, os.path.join(out, 'summary.csv'))


def cmd_train(args: argparse.Namespace) -> int:
    """Train the configured model ``runs`` times and write the metrics, summary and checkpoints."""
    config = _load_config(args)
    os.makedirs(args.out, exist_ok=True)

    summary = run_experiment(config, jobs=args.jobs, checkpoint_dir=args.out)
    _write_outputs(args.out, [summary])
    print(f'{config.dataset} {config.label}: {summary.mean_acc:.2f} ± {summary.sd_acc:.2f} % '
          f'({summary.params} parameters, {len(summary.runs)} run(s))')
    return 0 if summary.all_finite else 1


def cmd_eval(args: argparse.Namespace) -> int:
    """Evaluate a checkpoint on the test split of the configured dataset."""
    config = _load_config(args)
    train, test = load_split(config.dataset, config.data_path, config.test_fraction, config.seed)
    model = build_fc_model(config.model_config(train.n_features, train.n_classes),
                           0, config.init_spec(), config.dtype)
    model.load_state_dict(load_checkpoint(args.checkpoint))

    acc = evaluate(model, test.astype(config.dtype))
    print(f'{config.dataset} {config.label}: {acc:.2f} % test accuracy on {len(test)} samples')
    return 0 if np.isfinite(acc) else 1


def cmd_reproduce_table1(args: argparse.Namespace) -> int:
    """Run all 35 dataset/variant combinations and write one merged summary CSV.

    The data split of every dataset is loaded once and shared by its variants.
    Datasets whose data cannot be loaded are logged and count as failed.

    """
    data_paths = {k: v for k, v in (('heart', args.heart), ('fashion', args.fashion)) if v}
    extra = [f'runs={args.runs}'] if args.runs is not None else []
    configs = table1_configs(list(args.set) + extra, args.only, data_paths)

    if args.dry_run:
        for config in configs:
            print(f'{config.dataset:8} {config.label:16} runs={config.runs} '
                  f'epochs={config.epochs} width={config.width}')
        print(f'{len(configs)} planned configuration(s), '
              f'{sum(c.runs for c in configs)} run(s) in total')
        return 0

    manifest_dir = os.path.join(args.out, 'manifests')
    os.makedirs(manifest_dir, exist_ok=True)

    ok = True
    summaries: List[ExperimentSummary] = []
    splits: Dict[str, Optional[Tuple[Dataset, Dataset]]] = {}
    for config in configs:
        if config.dataset not in splits:
            try:
                splits[config.dataset] = load_split(config.dataset, config.data_path,
                                                    config.test_fraction, config.seed)
            except (ConfigError, DataFormatError, OSError) as ex:
                logger.error("Skipping dataset %r: %s", config.dataset, ex)
                splits[config.dataset] = None
        split = splits[config.dataset]
        if split is None:
            ok = False
            continue

        write_manifest(config, os.path.join(manifest_dir, f'{run_stem(config)}.cfg'))
        summary = run_experiment(config, *split, jobs=args.jobs)
        ok &= summary.all_finite
        summaries.append(summary)

    _write_outputs(args.out, summaries)
    for s in summaries:
        mu = '' if s.mu is None else f' mu={s.mu:g}'
        print(f'{s.dataset:8} {s.variant}{mu:8} {s.mean_acc:6.2f} ± {s.sd_acc:5.2f}  '
              f'({s.params} parameters)')
    return 0 if ok else 1


def cmd_gradcheck(args: argparse.Namespace) -> int:
    """Compare the tape gradients with finite differences for the requested semirings."""
    sizes = []
    for item in args.sizes.split(','):
        try:
            n, m = (int(i) for i in item.lower().split('x'))
        except ValueError as ex:
            raise ConfigError(f"'--sizes' expected entries such as '4x3'; observed {item!r}") from ex
        sizes.append((n, m))

    include_baseline = args.variant in ('all', 'relu')
    semirings = () if args.variant == 'relu' else _semirings(args.variant, args.mu)
    reports = run_gradcheck(semirings, sizes, args.seed, include_baseline)
    for report in reports:
        print(report.to_json() if args.json else report)
    failed = [r.name for r in reports if not r.passed]
    if failed:
        logger.error("%d gradient check(s) failed: %r", len(failed), failed)
    return 0 if not failed else 1


def cmd_propcheck(args: argparse.Namespace) -> int:
    """Run the semiring axiom, quasilinearity and oracle suites."""
    results = run_propcheck(_semirings(args.variant, args.mu), args.seed)
    for result in results:
        print(result.to_json() if args.json else result)
    failed = [f'{r.name} [{r.semiring}]' for r in results if not r.passed]
    if failed:
        logger.error("%d property check(s) failed: %r", len(failed), failed)
    return 0 if not failed else 1


def cmd_gen_data(args: argparse.Namespace) -> int:
    """Write a generated dataset to a CSV file."""
    func = gen_circles if args.dataset == 'circles' else gen_spheres
    ds = func(args.n_samples, radii=args.radii, noise_sd=args.noise, seed=args.seed)
    to_csv(ds, args.out)
    return 0


def _manifest_path(args: argparse.Namespace) -> str:
    if args.manifest is not None:
        return args.manifest
    elif args.command in ('train', 'reproduce-table1'):
        return os.path.join(args.out, 'manifest.cfg')
    elif args.command == 'eval':
        return f'{os.path.splitext(args.checkpoint)[0]}.eval.cfg'
    elif args.command == 'gen-data':
        return f'{os.path.splitext(args.out)[0]}.manifest.cfg'
    return f'{args.command}.manifest.cfg'


def write_run_manifest(args: argparse.Namespace, argv: Sequence[str]) -> Optional[str]:
    """Write the manifest of a finished command and return its path.

    ``train`` and ``eval`` record their resolved configuration; the other commands
    record their arguments and seed, and ``gen-data`` also its shell radii and noise.
    The manifest is written to ``--manifest`` or, by default, next to the output of
    the command. Dry runs write nothing.

    """
    if getattr(args, 'dry_run', False):
        return None
    path = _manifest_path(args)
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)

    extra: Dict[str, Any] = {
        'command': args.command,
        'argv': ' '.join(shlex.quote(i) for i in argv),
    }
    if args.command in ('train', 'eval'):
        write_manifest(_load_config(args), path, **extra)
    else:
        if getattr(args, 'seed', None) is not None:
            extra['seed'] = args.seed
        if args.command == 'gen-data':
            extra['radii'] = ' '.join(str(r) for r in args.radii)
            extra['noise'] = args.noise
        write_manifest(None, path, **extra)
    return path


def build_parser() -> argparse.ArgumentParser:
    """Construct the :class:`argparse.ArgumentParser` of :func:`main`."""
    parser = argparse.ArgumentParser(
        prog='semiringlib',
        description='Train and verify neural networks with trainable semiring operators.'
    )
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument('-v', '--verbose', action='store_true', help='log at DEBUG level')
    verbosity.add_argument('-q', '--quiet', action='store_true', help='log warnings only')
    sub = parser.add_subparsers(dest='command', metavar='COMMAND')
    sub.required = True

    def add_manifest_option(p: argparse.ArgumentParser) -> None:
        p.add_argument('--manifest', default=None, metavar='PATH',
                       help='where to write the run manifest; defaults to the output location')

    def add_run_options(p: argparse.ArgumentParser) -> None:
        p.add_argument('--set', action='append', default=[], metavar='KEY=VALUE',
                       help='override a configuration key; may be repeated')
        p.add_argument('--runs', type=int, default=None, metavar='N',
                       help='override the number of runs')

    def add_check_options(p: argparse.ArgumentParser, *extra_variants: str) -> None:
        choices = ('all', *extra_variants, 'linear', 'maxplus', 'minplus', 'logplus')
        p.add_argument('--variant', default='all', choices=choices)
        p.add_argument('--mu', type=float, default=None,
                       help='the logplus parameter; all of -10, -1, 1 and 10 if omitted')
        p.add_argument('--seed', type=int, default=0)
        p.add_argument('--json', action='store_true', help='print one JSON object per line')

    train = sub.add_parser('train', help='train a model')
    source = train.add_mutually_exclusive_group(required=True)
    source.add_argument('--config', metavar='PATH', help='a configuration file or manifest')
    source.add_argument('--preset', choices=DATASETS, help='a bundled dataset preset')
    train.add_argument('--out', default='.', metavar='DIR', help='the output directory')
    train.add_argument('--jobs', type=int, default=1, help='the number of worker processes')
    add_run_options(train)
    add_manifest_option(train)
    train.set_defaults(func=cmd_train)

    eval_ = sub.add_parser('eval', help='evaluate a checkpoint')
    source = eval_.add_mutually_exclusive_group(required=True)
    source.add_argument('--config', metavar='PATH', help='the manifest of the training run')
    source.add_argument('--preset', choices=DATASETS, help='a bundled dataset preset')
    eval_.add_argument('--checkpoint', required=True, metavar='PATH')
    add_run_options(eval_)
    add_manifest_option(eval_)
    eval_.set_defaults(func=cmd_eval)

    table = sub.add_parser('reproduce-table1', help='run every variant on every dataset')
    table.add_argument('--out', default='.', metavar='DIR', help='the output directory')
    table.add_argument('--dry-run', action='store_true', help='list the planned runs and exit')
    table.add_argument('--only', action='append', choices=DATASETS, default=None,
                       metavar='DATASET', help='restrict to a dataset; may be repeated')
    table.add_argument('--heart', metavar='PATH', help='the heart disease CSV file')
    table.add_argument('--fashion', metavar='DIR', help='the FashionMNIST IDX directory')
    table.add_argument('--jobs', type=int, default=1, help='the number of worker processes')
    add_run_options(table)
    add_manifest_option(table)
    table.set_defaults(func=cmd_reproduce_table1)

    gradcheck = sub.add_parser('gradcheck', help='check gradients with finite differences')
    add_check_options(gradcheck, 'relu')
    gradcheck.add_argument('--sizes', default='4x3,8x8', metavar='NxM[,NxM...]')
    add_manifest_option(gradcheck)
    gradcheck.set_defaults(func=cmd_gradcheck)

    propcheck = sub.add_parser('propcheck', help='check the semiring properties')
    add_check_options(propcheck)
    add_manifest_option(propcheck)
    propcheck.set_defaults(func=cmd_propcheck)

    gen_data = sub.add_parser('gen-data', help='write a generated dataset to CSV')
    gen_data.add_argument('dataset', choices=('circles', 'spheres'))
    gen_data.add_argument('--out', required=True, metavar='PATH')
    gen_data.add_argument('--n-samples', type=int, default=2000)
    gen_data.add_argument('--radii', type=float, nargs='+', default=SHELL_RADII, metavar='R',
                          help='the shell radii; shell k carries label k %% 2')
    gen_data.add_argument('--noise', type=float, default=SHELL_NOISE_SD)
    gen_data.add_argument('--seed', type=int, default=42)
    add_manifest_option(gen_data)
    gen_data.set_defaults(func=cmd_gen_data)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run the command-line interface and return its exit code.

    Every command that completes writes a manifest with :func:`write_run_manifest`.

    """
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    if args.verbose:
        level = logging.DEBUG
    elif args.quiet:
        level = logging.WARNING
    else:
        level = logging.INFO
    logging.basicConfig(level=level, format='%(asctime)s %(levelname)s %(name)s: %(message)s')

    try:
        ret = args.func(args)
        write_run_manifest(args, argv)
    except (ConfigError, DataFormatError, OSError) as ex:
        logger.error("%s: %s", ex.__class__.__name__, ex)
        return 2
    return ret


if __name__ == '__main__':
    sys.exit(main())
