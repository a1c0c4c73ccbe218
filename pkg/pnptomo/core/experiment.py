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

This file contains the definition of the `ExperimentRunner` class, which runs one reconstruction
experiment end to end, and of the denoiser benchmark.
"""
from __future__ import absolute_import, division, print_function

import logging
import os

import numpy as np
from cached_property import cached_property
from typing import Optional, Sequence, List, Dict

from pnptomo.config.config import ExperimentConfig
from pnptomo.core.denoise import Denoiser, Combined
from pnptomo.core.diagnostics import psnr, ssim
from pnptomo.core.run_record import RunRecord
from pnptomo.core.solvers import SelectionHooks, NonFiniteIterateError, cgls_run, fbs_pnp, \
    admm_pnp
from pnptomo.core.tomo_model import FanBeamGeometry, ForwardOperator, DataSplit, shepp_logan, \
    build_operator, add_noise, split_validation
from pnptomo.utils.general_utils import ensure_dir
from pnptomo.utils.io_utils import write_csv, write_pgm, write_image_raw, write_sinogram_raw

logger = logging.getLogger(__name__)

ITERATIONS_FILE = 'iterations.csv'
SUMMARY_FILE = 'summary.csv'
DC_CURVE_FILE = 'dc_curve.csv'
ALPHA_CURVE_FILE = 'alpha_curve.csv'
SINOGRAM_FILE = 'sinogram.raw'
PARTIAL_PREFIX = 'partial_'

BENCH_COLUMNS = ('sigma', 'denoiser', 'noisy_psnr', 'noisy_ssim', 'denoised_psnr',
                 'denoised_ssim')


class ExperimentRunner(object):
    """One reconstruction experiment: phantom, data, split, solver run and artifacts.

    All intermediate objects are cached properties, so they are built on first use only; call
    `invalidate` after changing the configuration.

    Parameters
    ----------
        config : ExperimentConfig or str
            The experiment configuration, or the path of its XML file.
    """

    def __init__(self, config):
        # type: (ExperimentConfig) -> None
        super(ExperimentRunner, self).__init__()
        self.config = config if isinstance(config, ExperimentConfig) else ExperimentConfig(config)

    def invalidate(self):
        # type: () -> None
        """Invalidate the instance.

        All computed (cached) properties will be recomputed upon being read once the instance has
        been invalidated."""
        __dict__ = self.__class__.__dict__.copy()
        __dict__.update(ExperimentRunner.__dict__)
        for name, value in __dict__.items():
            if isinstance(value, cached_property):
                if name in self.__dict__:
                    del self.__dict__[name]

    @cached_property
    def geometry(self):
        # type: () -> FanBeamGeometry
        return self.config.geometry

    @cached_property
    def phantom(self):
        # type: () -> np.ndarray
        return shepp_logan(self.geometry.image_size)

    @cached_property
    def operator(self):
        # type: () -> ForwardOperator
        return build_operator(self.geometry)

    @cached_property
    def clean_data(self):
        # type: () -> np.ndarray
        return self.operator.apply(self.phantom)

    @cached_property
    def noisy_data(self):
        # type: () -> np.ndarray
        return add_noise(self.clean_data, self.config.noise_level, self.config.noise_seed)

    @cached_property
    def split(self):
        # type: () -> DataSplit
        return split_validation(self.operator.shape[0], self.config.cv_fraction,
                                self.config.cv_seed)

    @cached_property
    def fit_operator(self):
        return self.operator.restrict(self.split.fit_indices)

    @cached_property
    def fit_data(self):
        # type: () -> np.ndarray
        return self.noisy_data[self.split.fit_indices]

    @cached_property
    def fit_noise_norm2(self):
        # type: () -> float
        """||e_D||^2, the squared noise norm on the fitting data."""
        e = (self.noisy_data - self.clean_data)[self.split.fit_indices]
        return float(np.dot(e, e))

    @cached_property
    def denoiser(self):
        # type: () -> Denoiser
        return self.config.build_denoiser()

    @cached_property
    def hooks(self):
        # type: () -> SelectionHooks
        alpha_search = self.config.alpha_search
        if alpha_search and not isinstance(self.denoiser, Combined):
            logger.warning('Alpha search requested for denoiser {}, which is not combined; '
                           'ignored.'.format(self.denoiser.describe()))
            alpha_search = False
        return SelectionHooks.from_split(self.operator, self.noisy_data, self.split,
                                         reference=self.phantom,
                                         patience=self.config.patience,
                                         early_stopping=self.config.early_stopping,
                                         descent=self.config.descent_config(self.fit_noise_norm2),
                                         alpha_search=alpha_search,
                                         alpha_grid=self.config.alpha_grid)

    def solve(self):
        # type: () -> RunRecord
        """Run the configured algorithm on the fitting data."""
        algorithm = self.config.algorithm
        A, b = self.fit_operator, self.fit_data
        if algorithm == 'cgls':
            return cgls_run(A, b, self.config.max_iter, self.hooks)
        elif algorithm in ('fbs', 'fbs_fast'):
            return fbs_pnp(A, b, self.denoiser, self.config.fbs_config, self.hooks)
        elif algorithm == 'admm':
            return admm_pnp(A, b, self.denoiser, self.config.oa_config, self.hooks,
                            self.config.max_iter)
        raise ValueError('Unknown algorithm "{}".'.format(algorithm))

    def run(self, output_dir=None):
        # type: (Optional[str]) -> RunRecord
        """Run the experiment and write its artifacts.

        Writes the per-iteration table, the summary row, the DC and alpha curves, the noisy
        sinogram and, if enabled, the selected and final iterates as PGM and RAW images. If the
        run aborts on a non-finite iterate, the artifacts of the completed iterations are written
        with the prefix 'partial_' before the error is raised again.

        Raises
        ------
            NonFiniteIterateError
                If an iterate became non-finite.
        """
        output_dir = ensure_dir(output_dir or self.config.output_dir)
        logger.info('Running experiment "{}" ({}), writing to {}.'
                    .format(self.config.name, self.config.algorithm, output_dir))
        logger.debug('Settings: {}'.format(self.config.settings()))
        try:
            record = self.solve()
        except NonFiniteIterateError as e:
            self.write_artifacts(e.record, output_dir, prefix=PARTIAL_PREFIX)
            raise
        self.write_artifacts(record, output_dir)
        logger.info('Experiment "{}" done: {!r}.'.format(self.config.name, record))
        return record

    def write_artifacts(self, record, output_dir, prefix=''):
        # type: (RunRecord, str, str) -> List[str]
        """Write all artifacts of a record; returns the written file paths."""
        def path(name):
            return os.path.join(output_dir, prefix + name)

        written = [path(ITERATIONS_FILE), path(SUMMARY_FILE), path(DC_CURVE_FILE),
                   path(ALPHA_CURVE_FILE), path(SINOGRAM_FILE)]
        record.to_csv(written[0])
        record.summary_to_csv(written[1])
        record.curve_to_csv(written[2], 'dc')
        record.curve_to_csv(written[3], 'alpha')
        write_sinogram_raw(written[4], self.noisy_data, self.geometry.rays_per_angle,
                           self.geometry.num_angles)

        if self.config.write_images:
            for label, x in (('selected', record.selected_x), ('final', record.final_x)):
                if x is None:
                    continue
                write_pgm(path(label + '.pgm'), x)
                write_image_raw(path(label + '.raw'), x)
                written += [path(label + '.pgm'), path(label + '.raw')]
        return written


def add_image_noise(x, sigma, seed):
    # type: (np.ndarray, float, int) -> np.ndarray
    """Add white Gaussian noise of standard deviation sigma to every pixel."""
    x = np.asarray(x, dtype=float)
    if sigma < 0.:
        raise ValueError('sigma must be non-negative, got {}.'.format(sigma))
    if sigma == 0.:
        return x.copy()
    return x + sigma * np.random.RandomState(seed).standard_normal(x.shape)


def denoise_bench(sigmas, denoisers, size=256, seed=0, output_dir=None):
    # type: (Sequence[float], Sequence[Denoiser], int, int, Optional[str]) -> List[Dict[str, object]]
    """Compare denoisers on the phantom over a sweep of pixel noise levels.

    For every sigma, the phantom is corrupted by Gaussian noise and every denoiser is applied to
    the same noisy image; PSNR and SSIM against the phantom are recorded for the noisy and the
    denoised image. With an output directory the table is written to ``denoise_bench.csv``
    together with the noisy and denoised images.

    Returns
    -------
        list of dict
            One entry per (sigma, denoiser) pair, keyed by `BENCH_COLUMNS`.
    """
    truth = shepp_logan(size)
    if output_dir is not None:
        ensure_dir(output_dir)

    results = []
    for i, sigma in enumerate(sigmas):
        noisy = add_image_noise(truth, sigma, seed)
        noisy_psnr, noisy_ssim = psnr(noisy, truth), ssim(noisy, truth)
        if output_dir is not None:
            write_pgm(os.path.join(output_dir, 'noisy_{}.pgm'.format(i)), noisy)
        for j, denoiser in enumerate(denoisers):
            denoised = denoiser(noisy)
            results.append(dict(sigma=float(sigma), denoiser=denoiser.describe(),
                                noisy_psnr=noisy_psnr, noisy_ssim=noisy_ssim,
                                denoised_psnr=psnr(denoised, truth),
                                denoised_ssim=ssim(denoised, truth)))
            logger.info('sigma={} {}: PSNR {:.4g} -> {:.4g}'.format(
                sigma, denoiser.describe(), noisy_psnr, results[-1]['denoised_psnr']))
            if output_dir is not None:
                write_pgm(os.path.join(output_dir, 'denoised_{}_{}_{}.pgm'
                                       .format(i, j, denoiser.name)), denoised)

    if output_dir is not None:
        write_csv(os.path.join(output_dir, 'denoise_bench.csv'), BENCH_COLUMNS,
                  [[row[c] for c in BENCH_COLUMNS] for row in results])
    return results
