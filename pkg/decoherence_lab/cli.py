'''Command-line entry point: `decoherence-lab run|list-presets|validate`.'''
import argparse
import hashlib
import json
import logging
import os
import sys
from logging import getLogger
from pathlib import Path

import joblib
import mpmath
import numba
import numpy as np
import pandas as pd
import scipy
import sklearn
import sympy
import xarray as xr

from .core import ConfigurationError, NumericalValidationError
from .experiments import run_experiment, write_json
from .presets import list_presets, load_config

logger = getLogger(__name__)

OUTPUT_ROOT_VARIABLE = 'DECOHERENCE_LAB_OUTPUT_ROOT'

EXIT_SUCCESS = 0
EXIT_CONFIGURATION = 2
EXIT_NUMERICAL = 3


def library_versions():
    return {module.__name__: module.__version__
            for module in (joblib, mpmath, numba, np, pd, scipy, sklearn,
                           sympy, xr)}


def sha256(path, chunk_bytes=1 << 20):
    digest = hashlib.sha256()
    with open(path, 'rb') as f:
        for chunk in iter(lambda: f.read(chunk_bytes), b''):
            digest.update(chunk)
    return digest.hexdigest()


def output_directory(config, root=None):
    '''`output_dir` of the config, relative to the output root unless
    absolute.'''
    if root is None:
        root = os.environ.get(OUTPUT_ROOT_VARIABLE, '.')
    return Path(root) / config['output_dir']


def write_manifest(config, output_dir, paths):
    files = [dict(path=path.relative_to(output_dir).as_posix(),
                  sha256=sha256(path), bytes=path.stat().st_size)
             for path in sorted(paths)]
    return write_json(dict(config=config, versions=library_versions(),
                           files=files),
                      output_dir / 'manifest.json')


def run(name_or_path, root=None):
    '''Runs one experiment and writes its manifest.

    Returns
    -------
    manifest_path : pathlib.Path

    '''
    config = load_config(name_or_path)
    output_dir = output_directory(config, root)
    paths = run_experiment(config, output_dir)
    manifest_path = write_manifest(config, output_dir, paths)
    logger.info(f'Wrote {len(paths)} files and {manifest_path}')
    return manifest_path


def _print_presets():
    table = pd.DataFrame(list_presets()).set_index('name')
    with pd.option_context('display.max_colwidth', 80, 'display.width', 200):
        print(table.to_string())


def _parser():
    parser = argparse.ArgumentParser(
        prog='decoherence-lab',
        description='Open quantum system experiments and figure recipes.')
    parser.add_argument('--log-level', default='INFO',
                        choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'])
    commands = parser.add_subparsers(dest='command', required=True)

    run_parser = commands.add_parser('run', help='run a config or preset')
    run_parser.add_argument('config', help='JSON config path or preset name')
    run_parser.add_argument('--output-root', default=None,
                            help=f'overrides ${OUTPUT_ROOT_VARIABLE}')

    commands.add_parser('list-presets', help='print the figure recipes')

    validate_parser = commands.add_parser(
        'validate', help='print the resolved config without running it')
    validate_parser.add_argument('config')
    return parser


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(
        level=args.log_level,
        format='%(asctime)s %(levelname)s %(name)s: %(message)s')
    try:
        if args.command == 'run':
            print(run(args.config, args.output_root))
        elif args.command == 'list-presets':
            _print_presets()
        elif args.command == 'validate':
            print(json.dumps(load_config(args.config), indent=2,
                             sort_keys=True))
    except ConfigurationError as error:
        logger.error(f'Invalid configuration: {error}')
        return EXIT_CONFIGURATION
    except NumericalValidationError as error:
        logger.error(f'Numerical validation failed: {error}')
        return EXIT_NUMERICAL
    return EXIT_SUCCESS


if __name__ == '__main__':
    sys.exit(main())
