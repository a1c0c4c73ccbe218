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

This file contains the test cases of the denoisers, the block-matching filter and the CNN
inference engine.
"""
from __future__ import absolute_import, division, print_function

import os
import shutil
import struct
import tempfile
import unittest

import numpy as np
from scipy import signal

from pnptomo.core.cnn import CnnWeights, CnnLayer, InvalidWeightFileError, conv3x3, cnn_forward, \
    save_cnn_weights, load_cnn_weights, synthetic_weights, BINOMIAL_3X3, MAGIC
from pnptomo.core.denoise import Identity, GaussianBlur, Median, SoftThreshold, \
    PatchCollaborative, CnnResidual, Attenuated, Combined, DENOISERS, denoise, attenuated, \
    combined, quadratic_shrink, soft_threshold, classical_denoiser, learned_denoiser
from pnptomo.core.diagnostics import psnr
from pnptomo.core.patch_filter import PatchParams, reference_positions, match_block, \
    filter_group, patch_collaborative
from pnptomo.core.tomo_model import shepp_logan


def noisy_phantom(n=32, sigma=.05, seed=0):
    truth = shepp_logan(n)
    return truth, truth + sigma * np.random.RandomState(seed).standard_normal(truth.shape)


class TestLeafDenoisers(unittest.TestCase):

    def test_identity(self):
        x = np.random.RandomState(0).rand(6, 5)
        y = Identity()(x)
        np.testing.assert_array_equal(y, x)
        self.assertIsNot(y, x)

    def test_quadratic_shrink(self):
        x = np.array([[2., -4.]])
        np.testing.assert_allclose(quadratic_shrink(1.)(x), [[1., -2.]])
        np.testing.assert_array_equal(quadratic_shrink(0.)(x), x)

    def test_soft_threshold(self):
        x = np.array([[1.5, -.2, .5, -3.]])
        np.testing.assert_allclose(soft_threshold(.5)(x), [[1., 0., 0., -2.5]])

    def test_gaussian_constant(self):
        x = np.full((10, 10), .3)
        np.testing.assert_allclose(GaussianBlur(sigma=2.)(x), x, rtol=1e-12)

    def test_median_removes_impulse(self):
        x = np.zeros((9, 9))
        x[4, 4] = 1.
        np.testing.assert_array_equal(Median(window=3)(x), np.zeros((9, 9)))

    def test_non_finite_input(self):
        for den in (Identity(), GaussianBlur(), SoftThreshold(threshold=.1)):
            with self.assertRaises(ValueError):
                den(np.array([[0., np.inf]]))

    def test_option_ranges(self):
        with self.assertRaises(ValueError):
            GaussianBlur(sigma=-1.)
        with self.assertRaises(ValueError):
            Attenuated(Identity(), alpha=1.5)
        with self.assertRaises(ValueError):
            Combined(Identity(), Identity(), alpha=-.1)
        with self.assertRaises(KeyError):
            Median(size=3)

    def test_registry(self):
        self.assertEqual(set(DENOISERS), {'identity', 'gaussian', 'median', 'soft_threshold',
                                          'quadratic_shrink', 'patch', 'cnn', 'attenuated',
                                          'combined'})
        for name, cls in DENOISERS.items():
            self.assertEqual(cls.name, name)

    def test_describe(self):
        den = attenuated(learned_denoiser(), .1)
        self.assertEqual(den.describe(), 'attenuated(alpha=0.1, cnn)')
        self.assertEqual(repr(Identity()), 'identity')
        self.assertEqual(denoise(Identity(), np.ones((2, 2))).shape, (2, 2))


class TestAttenuatedCombined(unittest.TestCase):

    def setUp(self):
        _, self.x = noisy_phantom(24)
        self.h = GaussianBlur(sigma=1.5)

    def test_attenuation_identity(self):
        hx = self.h(self.x)
        for alpha in (1., .1, .01):
            y = attenuated(self.h, alpha)(self.x)
            self.assertAlmostEqual(np.linalg.norm(y - self.x),
                                   alpha * np.linalg.norm(hx - self.x), delta=1e-12)

    def test_attenuation_endpoints(self):
        np.testing.assert_array_equal(attenuated(self.h, 0.)(self.x), self.x)
        np.testing.assert_allclose(attenuated(self.h, 1.)(self.x), self.h(self.x), rtol=1e-15)

    def test_combined_convexity(self):
        a, b = self.h(self.x), Median(window=3)(self.x)
        for alpha in (0., .3, 1.):
            y = combined(self.h, Median(window=3), alpha)(self.x)
            self.assertTrue(np.all(y >= np.minimum(a, b) - 1e-12))
            self.assertTrue(np.all(y <= np.maximum(a, b) + 1e-12))
        np.testing.assert_array_equal(combined(self.h, Identity(), 0.)(self.x), self.x)

    def test_combined_weighted(self):
        den = combined(Identity(), Identity(), .5, beta=2.)
        self.assertFalse(den.normalized)
        np.testing.assert_allclose(den(self.x), 2.5 * self.x, rtol=1e-15)

    def test_combined_outputs_and_mix(self):
        den = combined(self.h, Identity(), .25)
        first, second = den.outputs(self.x)
        np.testing.assert_allclose(den.mix(first, second), den(self.x), rtol=1e-15)
        np.testing.assert_allclose(den.mix(first, second, 1.), first, rtol=1e-15)
        with self.assertRaises(ValueError):
            den.mix(first, second, 2.)

    def test_children(self):
        den = combined(attenuated(self.h, .5), Identity(), .5)
        self.assertEqual(len(den.children), 2)
        self.assertIs(den.children[0].children[0], self.h)
        self.assertEqual(Identity().children, ())


class TestPatchFilter(unittest.TestCase):

    def test_reference_positions(self):
        self.assertEqual(reference_positions(20, 8, 3), [0, 3, 6, 9, 12])
        self.assertEqual(reference_positions(14, 8, 3), [0, 3, 6])
        self.assertEqual(reference_positions(8, 8, 3), [0])

    def test_match_block_order(self):
        x = np.zeros((16, 16))
        x[8:, 8:] = 1.
        params = PatchParams(patch=4, search_window=16, max_group=5, match_threshold=.01)
        positions = match_block(x, 0, 0, params)
        np.testing.assert_array_equal(positions[0], [0, 0])
        self.assertEqual(len(positions), 5)
        # All matches are zero patches, ordered by (row, col) on ties.
        np.testing.assert_array_equal(positions[1:], [[0, 1], [0, 2], [0, 3], [0, 4]])

    def test_filter_group_keeps_constant(self):
        group = np.full((4, 3, 3), .7)
        np.testing.assert_allclose(filter_group(group, 10.), group, rtol=1e-12)

    def test_constant_image_fixed(self):
        x = np.full((20, 20), .4)
        np.testing.assert_allclose(patch_collaborative(x, PatchParams(patch=4, search_window=8)),
                                   x, rtol=1e-12)

    def test_zero_threshold_is_identity(self):
        _, x = noisy_phantom(20)
        params = PatchParams(patch=4, search_window=8, hard_threshold=0.)
        np.testing.assert_allclose(patch_collaborative(x, params), x, atol=1e-12)

    def test_denoises(self):
        truth, x = noisy_phantom(32, sigma=.05)
        y = PatchCollaborative(sigma=.05)(x)
        self.assertEqual(y.shape, x.shape)
        self.assertGreater(psnr(y, truth), psnr(x, truth))

    def test_weak_default(self):
        den = classical_denoiser()
        self.assertAlmostEqual(den.params.hard_threshold, 2.7e-3)
        self.assertEqual(den.params.patch, 8)

    def test_errors(self):
        with self.assertRaises(ValueError):
            patch_collaborative(np.zeros((4, 4)), PatchParams(patch=8))
        with self.assertRaises(ValueError):
            patch_collaborative(np.zeros((20, 20)), PatchParams(patch=8, search_window=4))


class TestCnn(unittest.TestCase):

    def setUp(self):
        self.dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.dir)

    def test_conv3x3_oracle(self):
        rng = np.random.RandomState(0)
        h = rng.standard_normal((2, 7, 6))
        kernels = rng.standard_normal((3, 2, 3, 3))
        bias = rng.standard_normal(3)
        out = conv3x3(h, kernels, bias)
        for o in range(3):
            expected = bias[o] + sum(signal.correlate2d(h[i], kernels[o, i], mode='same')
                                     for i in range(2))
            np.testing.assert_allclose(out[o], expected, rtol=1e-12, atol=1e-12)

    def test_synthetic_weights_blur(self):
        x = np.random.RandomState(1).rand(16, 16)
        expected = x
        for _ in range(7):
            expected = signal.correlate2d(expected, BINOMIAL_3X3, mode='same')
        np.testing.assert_allclose(cnn_forward(synthetic_weights(), x), expected, atol=1e-12)

    def test_shipped_denoiser_linear(self):
        # ReLU pairs cancel, so the shipped network is linear.
        rng = np.random.RandomState(2)
        x, y = rng.standard_normal((2, 12, 12))
        den = learned_denoiser()
        np.testing.assert_allclose(den(2. * x - y), 2. * den(x) - den(y), atol=1e-12)

    def test_denoises(self):
        truth, x = noisy_phantom(64, sigma=.2)
        self.assertGreater(psnr(CnnResidual()(x), truth), psnr(x, truth))

    def test_save_load(self):
        weights = synthetic_weights(depth=3, channels=4)
        path = os.path.join(self.dir, 'w.bin')
        save_cnn_weights(weights, path)
        with open(path, 'rb') as f:
            self.assertEqual(f.read(8), MAGIC)
        loaded = load_cnn_weights(path)
        self.assertEqual(loaded.depth, 3)
        self.assertTrue(loaded.residual)
        for a, b in zip(weights.layers, loaded.layers):
            np.testing.assert_array_equal(a.kernels, b.kernels)
            np.testing.assert_array_equal(a.bias, b.bias)
            self.assertEqual(a.activation, b.activation)
        x = np.random.RandomState(3).rand(8, 8)
        np.testing.assert_array_equal(CnnResidual(weights=path)(x), cnn_forward(weights, x))

    def _write(self, content):
        path = os.path.join(self.dir, 'bad.bin')
        with open(path, 'wb') as f:
            f.write(content)
        return path

    def test_invalid_files(self):
        path = os.path.join(self.dir, 'w.bin')
        save_cnn_weights(synthetic_weights(depth=2, channels=4), path)
        with open(path, 'rb') as f:
            content = f.read()
        for bad in (b'NOTACNN\x00' + content[8:], content[:-5], content + b'\x00',
                    content[:8] + struct.pack('<I', 2) + content[12:], b'PNP'):
            with self.assertRaises(InvalidWeightFileError):
                load_cnn_weights(self._write(bad))

    def test_invalid_weights(self):
        with self.assertRaises(InvalidWeightFileError):
            CnnWeights([])
        with self.assertRaises(InvalidWeightFileError):
            CnnWeights([CnnLayer(np.zeros((2, 1, 3, 3)), np.zeros(2), 'relu')])
        with self.assertRaises(InvalidWeightFileError):
            CnnWeights([CnnLayer(np.zeros((1, 1, 5, 5)), np.zeros(1), 'none')])
        with self.assertRaises(InvalidWeightFileError):
            CnnWeights([CnnLayer(np.zeros((1, 1, 3, 3)), np.zeros(1), 'tanh')])


if __name__ == '__main__':
    unittest.main()
