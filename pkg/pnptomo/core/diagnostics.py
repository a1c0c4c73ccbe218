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

This file contains the per-iteration diagnostics: the denoising-to-consistency ratio, the descent
conditions of the data term D(x) = ||Ax - b||^2 and the image quality metrics.
"""
from __future__ import absolute_import, division, print_function

import math
from collections import namedtuple

import numpy as np
from skimage import metrics
from typing import Optional, Tuple

PERFECT_PSNR = float('inf')

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


class StalledConsistencyError(ArithmeticError):

    def __init__(self, reason=None):
        msg = 'Stalled data-consistency step'
        if reason is not None:
            msg += ': {}'.format(reason)
        super(StalledConsistencyError, self).__init__(msg)


class DescentRegime(object):
    STRICT = 'StrictDescent'
    FLOOR = 'FloorRegime'
    VIOLATED = 'Violated'


class DescentConfig(namedtuple('DescentConfig', ['eps1', 'eps2', 'k_cap'])):
    """Thresholds of the generalized descent condition.

    While D(x) > eps2, or for iterations k <= k_cap, a step must be a strict descent direction;
    afterwards it only has to keep D above the floor eps1. Without k_cap the strict test applies
    in every iteration.
    """

    def __new__(cls, eps1=0., eps2=0., k_cap=None):
        if eps1 < 0. or eps2 < eps1:
            raise ValueError('Need 0 <= eps1 <= eps2, got eps1={} and eps2={}.'.format(eps1, eps2))
        if k_cap is not None and k_cap < 0:
            raise ValueError('k_cap must be non-negative, got {}.'.format(k_cap))
        return super(DescentConfig, cls).__new__(cls, float(eps1), float(eps2), k_cap)


def data_misfit(x, A, b):
    # type: (np.ndarray, object, np.ndarray) -> float
    """D(x) = ||Ax - b||^2."""
    r = A.apply(x) - b
    return float(np.dot(r, r))


def gradient(x, A, b):
    # type: (np.ndarray, object, np.ndarray) -> np.ndarray
    """Gradient 2 A^T(Ax - b) of D."""
    return 2. * A.apply_adjoint(A.apply(x) - b)


def dc_ratio(x_k, x_prev, z_k, denoiser_input=None):
    # type: (np.ndarray, np.ndarray, np.ndarray, Optional[np.ndarray]) -> float
    """Denoising-to-consistency ratio ||z_k - x_k|| / ||x_k - x_prev||.

    Parameters
    ----------
        x_k : np.ndarray
            Result of the data-consistency step.

        x_prev : np.ndarray
            Point the data-consistency step started from.

        z_k : np.ndarray
            Denoised image.

        denoiser_input : np.ndarray, optional
            Image that was denoised if it differs from x_k (x_k + u_k in ADMM).

    Raises
    ------
        StalledConsistencyError
            If the consistency step did not move, x_k == x_prev.
    """
    step = np.linalg.norm(np.asarray(x_k) - np.asarray(x_prev))
    if step == 0.:
        raise StalledConsistencyError('x_k equals its predecessor')
    v = x_k if denoiser_input is None else denoiser_input
    return float(np.linalg.norm(np.asarray(z_k) - np.asarray(v)) / step)


def descent_inner(d, x, A, b):
    # type: (np.ndarray, np.ndarray, object, np.ndarray) -> float
    """Inner product <d, -grad D(x)>; d is a descent direction of D at x if it is positive."""
    return float(np.vdot(np.asarray(d).ravel(), -gradient(x, A, b).ravel()))


def sufficient_check(x_k, z_k, grad_step):
    # type: (np.ndarray, np.ndarray, np.ndarray) -> bool
    return bool(np.linalg.norm(np.asarray(z_k) - np.asarray(x_k)) < np.linalg.norm(grad_step))


def generalized_descent_ok(d, x, cfg, A, b, k):
    # type: (np.ndarray, np.ndarray, DescentConfig, object, np.ndarray, int) -> str
    """Classify step d at x in iteration k as one of the `DescentRegime` values."""
    strict = cfg.k_cap is None or k <= cfg.k_cap or data_misfit(x, A, b) > cfg.eps2
    if strict:
        return DescentRegime.STRICT if descent_inner(d, x, A, b) > 0. else DescentRegime.VIOLATED
    x_next = np.asarray(x) + np.asarray(d)
    return DescentRegime.FLOOR if data_misfit(x_next, A, b) >= cfg.eps1 else DescentRegime.VIOLATED


def mse_rel(x, ref):
    # type: (np.ndarray, np.ndarray) -> float
    """Relative l2 error ||x - ref|| / ||ref||, reported as MSE."""
    ref = np.asarray(ref, dtype=float)
    norm_ref = np.linalg.norm(ref)
    if norm_ref == 0.:
        raise ValueError('Reference image is zero.')
    return float(np.linalg.norm(np.asarray(x, dtype=float) - ref) / norm_ref)


def psnr(x, ref, peak=1.):
    # type: (np.ndarray, np.ndarray, float) -> float
    """Peak signal-to-noise ratio in dB; identical images give `PERFECT_PSNR` (infinity).

    An overflowing error gives minus infinity.
    """
    x = np.asarray(x, dtype=float)
    ref = np.asarray(ref, dtype=float)
    mse = float(metrics.mean_squared_error(ref, x))
    if mse == 0.:
        return PERFECT_PSNR
    if not math.isfinite(mse):
        return -PERFECT_PSNR
    return float(metrics.peak_signal_noise_ratio(ref, x, data_range=peak))


def ssim_window(shape):
    # type: (Tuple[int, ...]) -> int
    """Side of the Gaussian SSIM window for an image of the given shape: 11, or the largest odd
    size that fits."""
    size = min(SSIM_WINDOW, min(shape))
    if size % 2 == 0:
        size -= 1
    return size


def ssim(x, ref, data_range=1.):
    # type: (np.ndarray, np.ndarray, float) -> float
    """Single-scale structural similarity, averaged over all valid window positions.

    The Gaussian window (11x11, sigma 1.5) shrinks to the largest odd size that fits images
    smaller than 11 pixels; statistics are population (biased) moments.
    """
    x = np.asarray(x, dtype=float)
    ref = np.asarray(ref, dtype=float)
    if x.shape != ref.shape or x.ndim != 2:
        raise ValueError('SSIM needs two 2-D images of equal shape, got {} and {}.'
                         .format(x.shape, ref.shape))
    radius = (ssim_window(x.shape) - 1) // 2
    return float(metrics.structural_similarity(x, ref, data_range=data_range,
                                               gaussian_weights=True, sigma=SSIM_SIGMA,
                                               truncate=radius / SSIM_SIGMA,
                                               use_sample_covariance=False,
                                               K1=SSIM_K1, K2=SSIM_K2))


def residual_err(x, A_rows, b_part):
    # type: (np.ndarray, object, np.ndarray) -> float
    """Relative residual ||A_I x - b_I|| / ||b_I|| of the rows I held by `A_rows`."""
    b_part = np.asarray(b_part, dtype=float)
    norm_b = np.linalg.norm(b_part)
    if norm_b == 0.:
        raise ValueError('Data part is zero, relative residual undefined.')
    return float(np.linalg.norm(A_rows.apply(x) - b_part) / norm_b)


def safe_dc_ratio(x_k, x_prev, z_k, denoiser_input=None, logger=None):
    # type: (np.ndarray, np.ndarray, np.ndarray, Optional[np.ndarray], Optional[object]) -> float
    """`dc_ratio`, with a stalled consistency step reported as NaN and logged as a warning."""
    try:
        return dc_ratio(x_k, x_prev, z_k, denoiser_input)
    except StalledConsistencyError as e:
        if logger is not None:
            logger.warning('{}; DC ratio recorded as NaN.'.format(e))
        return float('nan')
