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

This file contains the test cases of the per-iteration diagnostics and image metrics.
"""
from __future__ import absolute_import, division, print_function

import logging
import math
import unittest

import numpy as np

from pnptomo.core.diagnostics import DescentConfig, DescentRegime, StalledConsistencyError, \
    PERFECT_PSNR, data_misfit, gradient, dc_ratio, safe_dc_ratio, descent_inner, \
    sufficient_check, generalized_descent_ok, mse_rel, psnr, ssim, ssim_window, residual_err
from pnptomo.core.tomo_model import MatrixOperator, shepp_logan


class TestDataTerm(unittest.TestCase):

    def setUp(self):
        rng = np.random.RandomState(0)
        self.A = MatrixOperator(rng.standard_normal((7, 3)))
        self.b = rng.standard_normal(7)
        self.x = rng.standard_normal(3)

    def test_misfit(self):
        r = self.A.matrix.dot(self.x) - self.b
        self.assertAlmostEqual(data_misfit(self.x, self.A, self.b), r.dot(r), places=12)

    def test_gradient_finite_difference(self):
        g = gradient(self.x, self.A, self.b)
        h = 1e-6
        for i in range(3):
            e = np.zeros(3)
            e[i] = h
            fd = (data_misfit(self.x + e, self.A, self.b) -
                  data_misfit(self.x - e, self.A, self.b)) / (2. * h)
            self.assertAlmostEqual(g[i], fd, delta=1e-6 * max(1., abs(fd)))

    def test_descent_inner(self):
        g = gradient(self.x, self.A, self.b)
        self.assertGreater(descent_inner(-g, self.x, self.A, self.b), 0.)
        self.assertLess(descent_inner(g, self.x, self.A, self.b), 0.)

    def test_generalized_descent_strict(self):
        g = gradient(self.x, self.A, self.b)
        cfg = DescentConfig(0., 0.)
        self.assertEqual(generalized_descent_ok(-.01 * g, self.x, cfg, self.A, self.b, 5),
                         DescentRegime.STRICT)
        self.assertEqual(generalized_descent_ok(.01 * g, self.x, cfg, self.A, self.b, 5),
                         DescentRegime.VIOLATED)
        # eps1 = eps2 = 0 with a finite k_cap still tests strictly while D(x) > 0.
        cfg = DescentConfig(0., 0., k_cap=0)
        self.assertEqual(generalized_descent_ok(.01 * g, self.x, cfg, self.A, self.b, 5),
                         DescentRegime.VIOLATED)

    def test_generalized_descent_floor(self):
        g = gradient(self.x, self.A, self.b)
        cfg = DescentConfig(0., 1e10, k_cap=2)
        # Strict while k <= k_cap.
        self.assertEqual(generalized_descent_ok(.01 * g, self.x, cfg, self.A, self.b, 2),
                         DescentRegime.VIOLATED)
        self.assertEqual(generalized_descent_ok(.01 * g, self.x, cfg, self.A, self.b, 3),
                         DescentRegime.FLOOR)
        cfg = DescentConfig(1e10, 1e10, k_cap=2)
        self.assertEqual(generalized_descent_ok(.01 * g, self.x, cfg, self.A, self.b, 3),
                         DescentRegime.VIOLATED)

    def test_descent_config(self):
        self.assertIsNone(DescentConfig().k_cap)
        with self.assertRaises(ValueError):
            DescentConfig(eps1=1., eps2=.5)
        with self.assertRaises(ValueError):
            DescentConfig(eps1=-1.)
        with self.assertRaises(ValueError):
            DescentConfig(k_cap=-1)

    def test_residual_err(self):
        self.assertAlmostEqual(residual_err(self.x, self.A, self.A.apply(self.x)), 0., places=14)
        self.assertAlmostEqual(residual_err(np.zeros(3), self.A, self.b), 1., places=14)
        with self.assertRaises(ValueError):
            residual_err(self.x, self.A, np.zeros(7))


class TestDcRatio(unittest.TestCase):

    def setUp(self):
        rng = np.random.RandomState(1)
        self.x_prev, self.x_k, self.h = rng.standard_normal((3, 6, 6))

    def test_value(self):
        expected = np.linalg.norm(self.h - self.x_k) / np.linalg.norm(self.x_k - self.x_prev)
        self.assertAlmostEqual(dc_ratio(self.x_k, self.x_prev, self.h), expected, places=12)

    def test_attenuation_homogeneity(self):
        base = dc_ratio(self.x_k, self.x_prev, self.h)
        for alpha in (1., .1, .01):
            z = (1. - alpha) * self.x_k + alpha * self.h
            self.assertAlmostEqual(dc_ratio(self.x_k, self.x_prev, z), alpha * base,
                                   delta=1e-12 * base)

    def test_denoiser_input(self):
        v = self.x_k + 1.
        expected = np.linalg.norm(self.h - v) / np.linalg.norm(self.x_k - self.x_prev)
        self.assertAlmostEqual(dc_ratio(self.x_k, self.x_prev, self.h, v), expected, places=12)

    def test_stalled(self):
        with self.assertRaises(StalledConsistencyError):
            dc_ratio(self.x_k, self.x_k.copy(), self.h)
        logger = logging.getLogger(__name__)
        self.assertTrue(math.isnan(safe_dc_ratio(self.x_k, self.x_k, self.h, logger=logger)))

    def test_sufficient_check(self):
        x = np.zeros(4)
        self.assertTrue(sufficient_check(x, np.full(4, .1), np.ones(4)))
        self.assertFalse(sufficient_check(x, np.ones(4), np.full(4, .1)))


class TestImageMetrics(unittest.TestCase):

    def setUp(self):
        self.ref = shepp_logan(32)

    def test_mse(self):
        self.assertEqual(mse_rel(self.ref, self.ref), 0.)
        self.assertAlmostEqual(mse_rel(2. * self.ref, self.ref), 1., places=14)
        self.assertAlmostEqual(mse_rel(np.zeros_like(self.ref), self.ref), 1., places=14)
        with self.assertRaises(ValueError):
            mse_rel(self.ref, np.zeros_like(self.ref))

    def test_psnr(self):
        self.assertEqual(psnr(self.ref, self.ref), PERFECT_PSNR)
        self.assertAlmostEqual(psnr(self.ref + .1, self.ref), 20., delta=1e-9)
        self.assertAlmostEqual(psnr(self.ref + .01, self.ref), 40., delta=1e-9)

    def test_ssim_identity(self):
        self.assertAlmostEqual(ssim(self.ref, self.ref), 1., places=12)
        noisy = self.ref + .1 * np.random.RandomState(0).standard_normal(self.ref.shape)
        value = ssim(noisy, self.ref)
        self.assertLess(value, 1.)
        self.assertAlmostEqual(value, ssim(self.ref, noisy), places=12)

    def test_ssim_constant_offset(self):
        # A pure luminance shift only affects the mean term.
        x = np.full((16, 16), .5)
        y = np.full((16, 16), .6)
        c1 = (.01 * 1.) ** 2
        expected = (2. * .5 * .6 + c1) / (.5 ** 2 + .6 ** 2 + c1)
        self.assertAlmostEqual(ssim(x, y), expected, places=10)

    def test_ssim_small_image(self):
        x = np.random.RandomState(1).rand(5, 8)
        self.assertAlmostEqual(ssim(x, x), 1., places=12)

    def test_ssim_shape_mismatch(self):
        with self.assertRaises(ValueError):
            ssim(np.zeros((4, 4)), np.zeros((4, 5)))

    def test_ssim_window_size(self):
        self.assertEqual(ssim_window((64, 64)), 11)
        self.assertEqual(ssim_window((8, 8)), 7)
        self.assertEqual(ssim_window((5, 12)), 5)

    def test_ssim_windowed_statistics(self):
        rs = np.random.RandomState(2)
        x, y = rs.rand(8, 8), rs.rand(8, 8)
        size, sigma = 7, 1.5
        g = np.exp(-(np.arange(size) - 3.) ** 2 / (2. * sigma ** 2))
        w = np.outer(g, g) / np.outer(g, g).sum()
        c1, c2 = .01 ** 2, .03 ** 2
        values = []
        for i in range(8 - size + 1):
            for j in range(8 - size + 1):
                a, b = x[i:i + size, j:j + size], y[i:i + size, j:j + size]
                mu_a, mu_b = (w * a).sum(), (w * b).sum()
                var_a = (w * (a - mu_a) ** 2).sum()
                var_b = (w * (b - mu_b) ** 2).sum()
                cov = (w * (a - mu_a) * (b - mu_b)).sum()
                values.append((2. * mu_a * mu_b + c1) * (2. * cov + c2) /
                              ((mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2)))
        self.assertAlmostEqual(ssim(x, y), np.mean(values), delta=1e-10)

    def test_psnr_monotone(self):
        noise = np.random.RandomState(3).standard_normal(self.ref.shape)
        values = [psnr(self.ref + c * noise, self.ref) for c in (.001, .01, .05, .1, .5, 1.)]
        self.assertTrue(np.all(np.diff(values) < 0.))

    def test_psnr_overflow(self):
        with np.errstate(all='ignore'):
            self.assertEqual(psnr(np.full(self.ref.shape, 1e200), self.ref), -PERFECT_PSNR)


if __name__ == '__main__':
    unittest.main()
