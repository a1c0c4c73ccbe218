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

This file contains the single-stage block-matching collaborative filter.

For every reference patch (scanned on a regular grid, last row and column included) similar
patches are collected from a search window around it, the group is transformed with an
orthonormal 2-D DCT per patch followed by a 1-D DCT across the group, small coefficients are
hard-thresholded and the filtered patches are averaged back into the image with uniform weights.
"""
from __future__ import absolute_import, division, print_function

from collections import namedtuple

import numpy as np
from numpy.lib.stride_tricks import as_strided
from scipy.fft import dct, idct, dctn, idctn
from typing import List

PatchParams = namedtuple('PatchParams', ['patch', 'search_window', 'max_group', 'hard_threshold',
                                         'match_threshold', 'stride'])
PatchParams.__new__.__defaults__ = (8, 16, 16, 2.7e-3, 0.05, 3)

WEAK_SIGMA = 1e-3
THRESHOLD_FACTOR = 2.7


def validate_params(params):
    # type: (PatchParams) -> None
    if params.patch < 1 or params.patch > params.search_window:
        raise ValueError('Patch size {} must lie in [1, search_window={}].'
                         .format(params.patch, params.search_window))
    if params.max_group < 1 or params.stride < 1:
        raise ValueError('max_group and stride must be at least 1, got {} and {}.'
                         .format(params.max_group, params.stride))
    if params.hard_threshold < 0. or params.match_threshold < 0.:
        raise ValueError('Thresholds must be non-negative.')


def reference_positions(length, patch, stride):
    # type: (int, int, int) -> List[int]
    """Start indices of reference patches along one axis; the last valid start is always kept."""
    positions = list(range(0, length - patch + 1, stride))
    if positions[-1] != length - patch:
        positions.append(length - patch)
    return positions


def _patches(window, patch):
    # type: (np.ndarray, int) -> np.ndarray
    """All patches of a 2-D array, as a read-only view of shape (rows, cols, patch, patch)."""
    rows = window.shape[0] - patch + 1
    cols = window.shape[1] - patch + 1
    s0, s1 = window.strides
    return as_strided(window, shape=(rows, cols, patch, patch), strides=(s0, s1, s0, s1),
                      writeable=False)


def _window_start(ref, length, patch, window):
    # type: (int, int, int, int) -> int
    start = ref + patch // 2 - window // 2
    return int(min(max(start, 0), max(length - window, 0)))


def match_block(x, row, col, params):
    # type: (np.ndarray, int, int, PatchParams) -> np.ndarray
    """Positions (as rows of [row, col]) of the patches grouped with the reference at (row, col).

    The reference comes first; the others follow by increasing mean squared distance, with ties
    going to the lowest (row, col).
    """
    height, width = x.shape
    p = params.patch
    r0 = _window_start(row, height, p, params.search_window)
    c0 = _window_start(col, width, p, params.search_window)
    window = x[r0:min(r0 + params.search_window, height), c0:min(c0 + params.search_window, width)]

    reference = x[row:row + p, col:col + p]
    distances = np.mean((_patches(window, p) - reference) ** 2, axis=(2, 3))
    cand_r, cand_c = np.nonzero(distances <= params.match_threshold)
    cand_d = distances[cand_r, cand_c]
    cand_r = cand_r + r0
    cand_c = cand_c + c0

    keep = ~((cand_r == row) & (cand_c == col))
    cand_r, cand_c, cand_d = cand_r[keep], cand_c[keep], cand_d[keep]
    order = np.lexsort((cand_c, cand_r, cand_d))[:params.max_group - 1]

    positions = np.empty((order.size + 1, 2), dtype=int)
    positions[0] = row, col
    positions[1:, 0] = cand_r[order]
    positions[1:, 1] = cand_c[order]
    return positions


def filter_group(group, hard_threshold):
    # type: (np.ndarray, float) -> np.ndarray
    """Collaborative hard-thresholding of a (size, patch, patch) stack; the DC term is kept."""
    spectrum = dct(dctn(group, axes=(1, 2), norm='ortho'), axis=0, norm='ortho')
    dc = spectrum[0, 0, 0]
    spectrum[np.abs(spectrum) < hard_threshold] = 0.
    spectrum[0, 0, 0] = dc
    return idctn(idct(spectrum, axis=0, norm='ortho'), axes=(1, 2), norm='ortho')


def patch_collaborative(x, params=PatchParams()):
    # type: (np.ndarray, PatchParams) -> np.ndarray
    """Denoise an image with the block-matching collaborative filter.

    Parameters
    ----------
        x : np.ndarray
            Image to denoise, at least `params.patch` pixels along both axes.

        params : PatchParams
            Filter parameters.

    Returns
    -------
        np.ndarray
            Denoised image of the same shape.
    """
    validate_params(params)
    x = np.asarray(x, dtype=float)
    height, width = x.shape
    p = params.patch
    if height < p or width < p:
        raise ValueError('Image of shape {} is smaller than the patch size {}.'.format(x.shape, p))

    numerator = np.zeros_like(x)
    weights = np.zeros_like(x)
    for row in reference_positions(height, p, params.stride):
        for col in reference_positions(width, p, params.stride):
            positions = match_block(x, row, col, params)
            group = np.stack([x[r:r + p, c:c + p] for r, c in positions])
            filtered = filter_group(group, params.hard_threshold)
            for (r, c), block in zip(positions, filtered):
                numerator[r:r + p, c:c + p] += block
                weights[r:r + p, c:c + p] += 1.
    return numerator / weights
