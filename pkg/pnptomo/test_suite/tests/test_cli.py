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

This file contains the test cases of the command line interface and the experiment runner.
"""
from __future__ import absolute_import, division, print_function

import os
import shutil
import tempfile
import unittest
import warnings

import numpy as np

from pnptomo.cli import main, EXIT_OK, EXIT_CONFIG, EXIT_ABORT
from pnptomo.core.cnn import load_cnn_weights, synthetic_weights
from pnptomo.core.experiment import ExperimentRunner, denoise_bench, add_image_noise, \
    BENCH_COLUMNS
from pnptomo.core.denoise import Identity, GaussianBlur
from pnptomo.core.tomo_model import shepp_logan
from pnptomo.utils.io_utils import read_pgm, read_image_raw, read_csv, PGM_MAXVAL

TINY = """<experiment name="{name}">
  <phantom><size>16</size></phantom>
  <geometry><numAngles>8</numAngles><raysPerAngle>23</raysPerAngle></geometry>
  <noise><level>{noise}</level></noise>
  <crossValidation>
    <fraction>0.1</fraction>
    <patience>3</patience>
    <earlyStopping>{early}</earlyStopping>
  </crossValidation>
  <algorithm><type>fbs</type><maxIter>{max_iter}</maxIter><tau>{tau}</tau></algorithm>
  <denoiser><{denoiser}/></denoiser>
  <output><directory>out_{name}</directory></output>
</experiment>
"""


class TestCli(unittest.TestCase):

    def setUp(self):
        self.dir = tempfile.mkdtemp()
        self._env = os.environ.pop('PNPTOMO_OUTPUT_DIR', None)

    def tearDown(self):
        shutil.rmtree(self.dir)
        if self._env is not None:
            os.environ['PNPTOMO_OUTPUT_DIR'] = self._env

    def _config(self, name='tiny', noise=.01, early='true', max_iter=6, tau=1e-4,
                denoiser='gaussian sigma="0.5"'):
        path = os.path.join(self.dir, name + '.xml')
        with open(path, 'w') as f:
            f.write(TINY.format(name=name, noise=noise, early=early, max_iter=max_iter, tau=tau,
                                denoiser=denoiser))
        return path

    def test_phantom(self):
        base = os.path.join(self.dir, 'img', 'phantom.pgm')
        self.assertEqual(main(['-q', 'phantom', '--size', '32', '-o', base]), EXIT_OK)
        np.testing.assert_allclose(read_pgm(base), shepp_logan(32), atol=.5 / PGM_MAXVAL)
        np.testing.assert_array_equal(read_image_raw(os.path.join(self.dir, 'img', 'phantom.raw')),
                                      shepp_logan(32))

    def test_phantom_too_small(self):
        self.assertEqual(main(['-q', 'phantom', '--size', '4', '-o',
                               os.path.join(self.dir, 'p.pgm')]), EXIT_CONFIG)

    def test_export_weights(self):
        path = os.path.join(self.dir, 'w.bin')
        self.assertEqual(main(['-q', 'export-weights', '-o', path, '--depth', '3',
                               '--channels', '4']), EXIT_OK)
        loaded = load_cnn_weights(path)
        expected = synthetic_weights(3, 4)
        self.assertEqual(loaded.depth, 3)
        for a, b in zip(loaded.layers, expected.layers):
            np.testing.assert_array_equal(a.kernels, b.kernels)

    def test_validate(self):
        good = self._config()
        bad = self._config('bad', denoiser='attenuated alpha="2"')
        with warnings.catch_warnings():
            warnings.simplefilter('ignore')
            self.assertEqual(main(['-q', 'validate', good]), EXIT_OK)
            self.assertEqual(main(['-q', 'validate', good, bad]), EXIT_CONFIG)

    def test_arguments(self):
        self.assertEqual(main(['run', os.path.join(self.dir, 'tiny.txt')]), EXIT_CONFIG)
        self.assertEqual(main(['unknown']), EXIT_CONFIG)
        self.assertEqual(main([]), EXIT_CONFIG)
        self.assertEqual(main(['--help']), EXIT_OK)

    def test_run(self):
        path = self._config()
        self.assertEqual(main(['-q', 'run', path]), EXIT_OK)
        out = os.path.join(self.dir, 'out_tiny')
        for name in ('iterations.csv', 'summary.csv', 'dc_curve.csv', 'alpha_curve.csv',
                     'sinogram.raw', 'selected.pgm', 'selected.raw', 'final.pgm', 'final.raw'):
            self.assertTrue(os.path.isfile(os.path.join(out, name)), name)
        header, rows = read_csv(os.path.join(out, 'iterations.csv'))
        self.assertEqual(header[0], 'k')
        self.assertLessEqual(len(rows), 6)

    def test_run_parallel(self):
        paths = [self._config('a'), self._config('b', noise=.02)]
        self.assertEqual(main(['-q', 'run', '-j', '2'] + paths), EXIT_OK)
        for name in ('a', 'b'):
            self.assertTrue(os.path.isfile(os.path.join(self.dir, 'out_' + name, 'summary.csv')))

    def test_run_abort(self):
        path = self._config('blowup', early='false', max_iter=200, tau=1e6, denoiser='identity')
        with warnings.catch_warnings():
            warnings.simplefilter('ignore')
            with np.errstate(all='ignore'):
                self.assertEqual(main(['-q', 'run', path]), EXIT_ABORT)
        out = os.path.join(self.dir, 'out_blowup')
        self.assertTrue(os.path.isfile(os.path.join(out, 'partial_iterations.csv')))
        self.assertFalse(os.path.isfile(os.path.join(out, 'iterations.csv')))

    def test_run_invalid_config(self):
        path = self._config('bad', denoiser='unknown')
        self.assertEqual(main(['-q', 'run', path]), EXIT_CONFIG)

    def test_denoise_bench(self):
        out = os.path.join(self.dir, 'bench')
        self.assertEqual(main(['-q', 'denoise-bench', '--sigmas', '0.05,0.1', '--denoisers',
                               'identity,gaussian', '--size', '32', '--output-dir', out]),
                         EXIT_OK)
        header, rows = read_csv(os.path.join(out, 'denoise_bench.csv'))
        self.assertEqual(tuple(header), BENCH_COLUMNS)
        self.assertEqual(len(rows), 4)
        for name in ('noisy_0.pgm', 'noisy_1.pgm', 'denoised_1_1_gaussian.pgm'):
            self.assertTrue(os.path.isfile(os.path.join(out, name)), name)

    def test_denoise_bench_names(self):
        for names in ('identity,bm4d', 'attenuated'):
            self.assertEqual(main(['-q', 'denoise-bench', '--denoisers', names, '--size', '16']),
                             EXIT_CONFIG)


class TestExperimentRunner(unittest.TestCase):

    def test_bench_values(self):
        results = denoise_bench([0., .1], [Identity(), GaussianBlur(sigma=1.)], size=32)
        self.assertEqual(len(results), 4)
        self.assertEqual(results[0]['noisy_psnr'], float('inf'))
        identity = results[2]
        self.assertEqual(identity['denoised_psnr'], identity['noisy_psnr'])
        self.assertGreater(results[3]['denoised_psnr'], results[3]['noisy_psnr'])

    def test_image_noise(self):
        x = np.zeros((64, 64))
        noisy = add_image_noise(x, .1, 0)
        self.assertAlmostEqual(noisy.std(), .1, delta=.01)
        np.testing.assert_array_equal(add_image_noise(x, .1, 0), noisy)
        with self.assertRaises(ValueError):
            add_image_noise(x, -1., 0)

    def test_zero_attenuation_is_identity(self):
        dr = tempfile.mkdtemp()
        try:
            summaries = []
            for name, denoiser in (('plain', '<identity/>'),
                                   ('zero', '<attenuated alpha="0"><cnn/></attenuated>')):
                path = os.path.join(dr, name + '.xml')
                with open(path, 'w') as f:
                    f.write(TINY.format(name=name, noise=.01, early='true', max_iter=8, tau=1e-4,
                                        denoiser='identity').replace('<identity/>', denoiser))
                ExperimentRunner(path).run(os.path.join(dr, name))
                with open(os.path.join(dr, name, 'summary.csv')) as f:
                    summaries.append(f.read())
            self.assertEqual(summaries[0], summaries[1])
        finally:
            shutil.rmtree(dr)

    def test_runner_cache(self):
        dr = tempfile.mkdtemp()
        try:
            path = os.path.join(dr, 'cache.xml')
            with open(path, 'w') as f:
                f.write(TINY.format(name='cache', noise=.01, early='true', max_iter=3, tau=1e-4,
                                    denoiser='identity'))
            runner = ExperimentRunner(path)
            self.assertEqual(runner.noisy_data.size, 8 * 23)
            self.assertEqual(len(runner.split.validation_indices), 18)
            self.assertEqual(runner.fit_data.size, 8 * 23 - 18)
            e = (runner.noisy_data - runner.clean_data)[runner.split.fit_indices]
            self.assertAlmostEqual(runner.fit_noise_norm2, float(np.dot(e, e)), places=12)
            self.assertIn('operator', runner.__dict__)
            runner.invalidate()
            self.assertNotIn('operator', runner.__dict__)
            record = runner.run(os.path.join(dr, 'out'))
            self.assertLessEqual(len(record), 3)
        finally:
            shutil.rmtree(dr)


if __name__ == '__main__':
    unittest.main()
