#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
Copyright 2021 The pnptomo developers

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.

This file contains the ``pnptomo`` command line interface.

Exit codes: 0 on success, 2 for invalid configuration files or arguments, 3 when a run aborts.
"""
from __future__ import absolute_import, division, print_function

import argparse
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from typing import List, Optional, Tuple

from pnptomo.config.config import ExperimentConfig, InvalidConfigFileError, \
    apply_thread_override
from pnptomo.core.cnn import InvalidWeightFileError, synthetic_weights, save_cnn_weights
from pnptomo.core.denoise import DENOISERS, Attenuated, Combined
from pnptomo.core.experiment import ExperimentRunner, denoise_bench
from pnptomo.core.solvers import NonFiniteIterateError
from pnptomo.core.tomo_model import shepp_logan
from pnptomo.utils.general_utils import print_optional, parse_float_list, xml_file_args, \
    ensure_dir
from pnptomo.utils.io_utils import write_pgm, write_image_raw

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ABORT = 3


def run_experiment(config_path):
    # type: (str) -> Tuple[str, int, str]
    """Run the experiment of one configuration file; returns (path, exit code, message)."""
    try:
        record = ExperimentRunner(config_path).run()
    except NonFiniteIterateError as e:
        return config_path, EXIT_ABORT, '{} (partial artifacts written)'.format(e)
    except ValueError as e:
        return config_path, EXIT_CONFIG, str(e)
    summary = record.summary()
    return config_path, EXIT_OK, 'k_sel={} mse={:.6g} min_mse={:.6g} (k={}), stop: {}'.format(
        summary[0], summary[1], summary[6], summary[7], summary[8])


def cmd_run(args):
    # type: (argparse.Namespace) -> int
    if args.jobs > 1 and len(args.configs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as executor:
            results = list(executor.map(run_experiment, args.configs))
    else:
        results = [run_experiment(path) for path in args.configs]

    for path, code, message in results:
        print_optional('{}: {}'.format(path, message), not args.quiet or code != EXIT_OK)
    return max(code for _, code, _ in results)


def cmd_validate(args):
    # type: (argparse.Namespace) -> int
    code = EXIT_OK
    for path in args.configs:
        try:
            report = ExperimentConfig(path).validate()
        except InvalidConfigFileError as e:
            print_optional('{}: {}'.format(path, e), True)
            code = EXIT_CONFIG
            continue
        print_optional('{}: ok'.format(path), True)
        for line in report:
            print_optional('    {}'.format(line), not args.quiet)
    return code


def cmd_denoise_bench(args):
    # type: (argparse.Namespace) -> int
    denoisers = []
    for name in args.denoisers.split(','):
        name = name.strip()
        if name not in DENOISERS or DENOISERS[name] in (Attenuated, Combined):
            raise InvalidConfigFileError('"{}" is not a plain denoiser, expected one of {}'.format(
                name, ', '.join(sorted(n for n, c in DENOISERS.items()
                                       if c not in (Attenuated, Combined)))))
        denoisers.append(DENOISERS[name]())
    results = denoise_bench(args.sigmas, denoisers, args.size, args.seed, args.output_dir)
    for row in results:
        print_optional('sigma={sigma:<8g} {denoiser:<40} noisy PSNR {noisy_psnr:8.4f} '
                       'SSIM {noisy_ssim:.4f} | denoised PSNR {denoised_psnr:8.4f} '
                       'SSIM {denoised_ssim:.4f}'.format(**row), not args.quiet)
    return EXIT_OK


def cmd_phantom(args):
    # type: (argparse.Namespace) -> int
    image = shepp_logan(args.size)
    base = os.path.splitext(args.output)[0]
    ensure_dir(os.path.dirname(os.path.abspath(base)))
    write_pgm(base + '.pgm', image)
    write_image_raw(base + '.raw', image)
    print_optional('Wrote {0}.pgm and {0}.raw ({1}x{1}).'.format(base, args.size), not args.quiet)
    return EXIT_OK


def cmd_export_weights(args):
    # type: (argparse.Namespace) -> int
    ensure_dir(os.path.dirname(os.path.abspath(args.output)))
    weights = synthetic_weights(args.depth, args.channels)
    save_cnn_weights(weights, args.output)
    print_optional('Wrote {}-layer CNN weights to {}.'.format(weights.depth, args.output),
                   not args.quiet)
    return EXIT_OK


def build_parser():
    # type: () -> argparse.ArgumentParser
    parser = argparse.ArgumentParser(
        prog='pnptomo', description='Plug-and-play regularized fan-beam CT reconstruction.')
    parser.add_argument('-v', '--verbose', action='count', default=0,
                        help='Log progress (-v) or every iteration (-vv).')
    parser.add_argument('-q', '--quiet', action='store_true', help='Only print errors.')
    subparsers = parser.add_subparsers(dest='command')
    subparsers.required = True

    run = subparsers.add_parser('run', help='Run reconstruction experiments.')
    run.add_argument('configs', nargs='+', type=xml_file_args, help='Experiment XML files.')
    run.add_argument('-j', '--jobs', type=int, default=1,
                     help='Number of experiments run in parallel (default: 1).')
    run.set_defaults(func=cmd_run)

    validate = subparsers.add_parser('validate', help='Check experiment files.')
    validate.add_argument('configs', nargs='+', type=xml_file_args, help='Experiment XML files.')
    validate.set_defaults(func=cmd_validate)

    bench = subparsers.add_parser('denoise-bench', help='Compare denoisers over noise levels.')
    bench.add_argument('--sigmas', type=parse_float_list, default=[.01, .05, .1],
                       help='Comma separated pixel noise levels (default: 0.01,0.05,0.1).')
    bench.add_argument('--denoisers', default='identity,patch,cnn',
                       help='Comma separated denoiser names (default: identity,patch,cnn).')
    bench.add_argument('--size', type=int, default=256, help='Phantom size (default: 256).')
    bench.add_argument('--seed', type=int, default=0, help='Noise seed (default: 0).')
    bench.add_argument('--output-dir', default=None,
                       help='Directory for the CSV table and images (default: none).')
    bench.set_defaults(func=cmd_denoise_bench)

    phantom = subparsers.add_parser('phantom', help='Write the ground-truth phantom.')
    phantom.add_argument('--size', type=int, default=256, help='Phantom size (default: 256).')
    phantom.add_argument('-o', '--output', default='phantom.pgm',
                         help='Output PGM path; a RAW copy is written beside it '
                              '(default: phantom.pgm).')
    phantom.set_defaults(func=cmd_phantom)

    export = subparsers.add_parser('export-weights', help='Write the shipped CNN weights.')
    export.add_argument('-o', '--output', default='cnn_weights.bin',
                        help='Output weight file (default: cnn_weights.bin).')
    export.add_argument('--depth', type=int, default=7, help='Number of layers (default: 7).')
    export.add_argument('--channels', type=int, default=16,
                        help='Hidden channels (default: 16).')
    export.set_defaults(func=cmd_export_weights)
    return parser


def main(argv=None):
    # type: (Optional[List[str]]) -> int
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_CONFIG

    level = {0: logging.WARNING, 1: logging.INFO}.get(args.verbose, logging.DEBUG)
    logging.basicConfig(format='%(levelname)s: %(message)s', level=level)
    try:
        apply_thread_override()
        return args.func(args)
    except (InvalidConfigFileError, InvalidWeightFileError) as e:
        print_optional(str(e), True)
        return EXIT_CONFIG
    except ValueError as e:
        print_optional('Invalid argument: {}'.format(e), True)
        return EXIT_CONFIG


if __name__ == '__main__':
    sys.exit(main())
