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

This file contains the Siddon ray tracer used to assemble the fan-beam system matrix.

The image occupies the square [-N/2, N/2]² with unit pixels; pixel (row, col) covers
x ∈ [col - N/2, col + 1 - N/2] and y ∈ [N/2 - row - 1, N/2 - row], so row 0 is the top of
the image. Each ray is traced independently, which makes the assembly deterministic
regardless of the number of threads.
"""
from __future__ import absolute_import, division, print_function

import logging
import math

import numpy as np
import scipy.sparse as sp

try:
    from numba import njit, prange
    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False
    prange = range

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f

logger = logging.getLogger(__name__)

MIN_SEGMENT = 1e-12
_EPS_DIRECTION = 1e-14


@njit(cache=True)
def _trace_ray(sx, sy, dx, dy, n, alphas, idx_out, len_out):
    half = n / 2.0
    amin = -np.inf
    amax = np.inf

    if abs(dx) > _EPS_DIRECTION:
        a0 = (-half - sx) / dx
        a1 = (half - sx) / dx
        amin = max(amin, min(a0, a1))
        amax = min(amax, max(a0, a1))
    elif sx <= -half or sx >= half:
        return 0

    if abs(dy) > _EPS_DIRECTION:
        a0 = (-half - sy) / dy
        a1 = (half - sy) / dy
        amin = max(amin, min(a0, a1))
        amax = min(amax, max(a0, a1))
    elif sy <= -half or sy >= half:
        return 0

    if amax - amin <= MIN_SEGMENT:
        return 0

    count = 0
    alphas[count] = amin
    count += 1
    alphas[count] = amax
    count += 1
    if abs(dx) > _EPS_DIRECTION:
        for i in range(n + 1):
            a = (i - half - sx) / dx
            if amin < a < amax:
                alphas[count] = a
                count += 1
    if abs(dy) > _EPS_DIRECTION:
        for i in range(n + 1):
            a = (i - half - sy) / dy
            if amin < a < amax:
                alphas[count] = a
                count += 1

    ordered = np.sort(alphas[:count])
    hits = 0
    for q in range(count - 1):
        seg = ordered[q + 1] - ordered[q]
        if seg <= MIN_SEGMENT:
            continue
        am = 0.5 * (ordered[q + 1] + ordered[q])
        col = int(math.floor(sx + am * dx + half))
        row = int(math.floor(half - (sy + am * dy)))
        col = min(max(col, 0), n - 1)
        row = min(max(row, 0), n - 1)
        idx_out[hits] = row * n + col
        len_out[hits] = seg
        hits += 1
    return hits


@njit(parallel=True, cache=True)
def _trace_rays(sources, directions, n, indices, lengths, counts):
    for r in prange(sources.shape[0]):
        alphas = np.empty(2 * n + 4)
        counts[r] = _trace_ray(sources[r, 0], sources[r, 1], directions[r, 0], directions[r, 1],
                               n, alphas, indices[r], lengths[r])


def ray_endpoints(geometry, angle_index):
    # type: (...) -> (np.ndarray, np.ndarray)
    """Source positions and unit directions of all rays of one projection angle.

    The source sits at distance D from the origin; the rays fan out equiangularly around the
    central ray pointing at the origin.
    """
    theta = geometry.angles[angle_index]
    gamma = geometry.fan_angles
    src = geometry.source_distance * np.array([math.cos(theta), math.sin(theta)])
    sources = np.tile(src, (gamma.size, 1))
    directions = -np.column_stack((np.cos(theta + gamma), np.sin(theta + gamma)))
    return sources, directions


def system_matrix(geometry):
    # type: (...) -> sp.csr_matrix
    """Assemble the sparse matrix of ray-pixel intersection lengths of a fan-beam geometry.

    Rows are ordered angle-major (row = angle * rays_per_angle + ray); columns index the
    image pixels in row-major order. Rays missing the image give empty rows.

    Parameters
    ----------
        geometry : FanBeamGeometry
            The scanner geometry.

    Returns
    -------
        :obj:`scipy.sparse.csr_matrix`
            Matrix of shape (num_angles * rays_per_angle, N * N).
    """
    n = geometry.image_size
    m1 = geometry.rays_per_angle
    width = 2 * n + 2

    data, cols, rows = [], [], []
    for j in range(geometry.num_angles):
        sources, directions = ray_endpoints(geometry, j)
        indices = np.zeros((m1, width), dtype=np.int64)
        lengths = np.zeros((m1, width), dtype=np.float64)
        counts = np.zeros(m1, dtype=np.int64)
        _trace_rays(sources, directions, n, indices, lengths, counts)

        mask = np.arange(width)[None, :] < counts[:, None]
        rows.append(np.repeat(np.arange(j * m1, (j + 1) * m1), counts))
        cols.append(indices[mask])
        data.append(lengths[mask])

    matrix = sp.csr_matrix((np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
                           shape=(geometry.num_rays, n * n))
    matrix.sum_duplicates()
    matrix.sort_indices()
    logger.debug('Assembled fan-beam matrix {} with {} nonzeros (numba: {}).'
                 .format(matrix.shape, matrix.nnz, HAS_NUMBA))
    return matrix
