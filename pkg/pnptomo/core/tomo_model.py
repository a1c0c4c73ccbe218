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

This file contains the model problem: the phantom, the fan-beam geometry and projection operator,
noisy data generation and the split of the data into a fitting and a validation part.
"""
from __future__ import absolute_import, division, print_function

import logging
import math
from collections import namedtuple

import numpy as np
import scipy.sparse as sp
from cached_property import cached_property
from typing import Optional, Tuple, Union, Sequence

from pnptomo.core import siddon

logger = logging.getLogger(__name__)

# Modified Shepp-Logan ellipses: (x0, y0, a, b, phi [deg], intensity)
SHEPP_LOGAN_ELLIPSES = (
    (0., 0., .69, .92, 0., 1.),
    (0., -.0184, .6624, .874, 0., -.8),
    (.22, 0., .11, .31, -18., -.2),
    (-.22, 0., .16, .41, 18., -.2),
    (0., .35, .21, .25, 0., .1),
    (0., .1, .046, .046, 0., .1),
    (0., -.1, .046, .046, 0., .1),
    (-.08, -.605, .046, .023, 0., .1),
    (0., -.605, .023, .023, 0., .1),
    (.06, -.605, .023, .046, 0., .1),
)

MIN_PHANTOM_SIZE = 16

DataSplit = namedtuple('DataSplit', ['fit_indices', 'validation_indices', 'fraction'])


def as_image(x):
    # type: (np.ndarray) -> np.ndarray
    """Return `x` as a finite 2-D float64 array, raising ValueError otherwise."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise ValueError('An image must be 2-D, got shape {}.'.format(x.shape))
    if not np.all(np.isfinite(x)):
        raise ValueError('Image contains non-finite values.')
    return x


def as_sinogram(data, rays_per_angle, num_angles):
    # type: (np.ndarray, int, int) -> np.ndarray
    """Return `data` as a finite flat sinogram of length rays_per_angle * num_angles."""
    data = np.asarray(data, dtype=float).ravel()
    if data.size != rays_per_angle * num_angles:
        raise ValueError('Sinogram length {} does not match {} rays x {} angles.'
                         .format(data.size, rays_per_angle, num_angles))
    if not np.all(np.isfinite(data)):
        raise ValueError('Sinogram contains non-finite values.')
    return data


def shepp_logan(n):
    # type: (int) -> np.ndarray
    """Create the n x n modified Shepp-Logan phantom, with intensities in [0,1].

    The ellipses are evaluated at pixel centers x = (2j+1)/n - 1 and y = 1 - (2i+1)/n for
    row i and column j.

    Parameters
    ----------
        n : int
            Side length of the phantom in pixels, at least 16.

    Returns
    -------
        np.ndarray
            The phantom image of shape (n, n).
    """
    if int(n) != n or n < MIN_PHANTOM_SIZE:
        raise ValueError('Phantom size must be an integer of at least {}, got {}.'
                         .format(MIN_PHANTOM_SIZE, n))
    n = int(n)
    centers = (2. * np.arange(n) + 1.) / n - 1.
    x = np.tile(centers, (n, 1))
    y = -x.T

    image = np.zeros((n, n))
    for x0, y0, a, b, phi, intensity in SHEPP_LOGAN_ELLIPSES:
        cos_p, sin_p = math.cos(math.radians(phi)), math.sin(math.radians(phi))
        xr = (x - x0) * cos_p + (y - y0) * sin_p
        yr = -(x - x0) * sin_p + (y - y0) * cos_p
        image[(xr / a) ** 2 + (yr / b) ** 2 <= 1.] += intensity
    return np.clip(image, 0., 1.)


class FanBeamGeometry(object):
    """Fan-beam scanner over a full 360 degree rotation with an equiangular (curved) detector.

    Parameters
    ----------
        image_size : int
            Side length N of the reconstructed image in pixels.

        num_angles : int
            Number of projection angles, uniformly spaced over 360 degrees.

        rays_per_angle : int, optional
            Number of detector elements; defaults to round(sqrt(2) * N).

        source_distance : float, optional
            Distance of the source to the rotation center in pixels; defaults to 2N. Must exceed
            half the image diagonal.

        detector_width : float, optional
            Arc length of the detector at the source distance; defaults to the arc that just
            covers the circle circumscribing the image.
    """

    def __init__(self, image_size, num_angles, rays_per_angle=None, source_distance=None,
                 detector_width=None):
        # type: (int, int, Optional[int], Optional[float], Optional[float]) -> None
        super(FanBeamGeometry, self).__init__()
        if image_size < 1 or num_angles < 1:
            raise ValueError('image_size and num_angles must be positive, got {} and {}.'
                             .format(image_size, num_angles))
        self.image_size = int(image_size)
        self.num_angles = int(num_angles)
        self.rays_per_angle = int(rays_per_angle) if rays_per_angle is not None \
            else int(round(math.sqrt(2.) * image_size))
        self.source_distance = float(source_distance) if source_distance is not None \
            else 2. * image_size

        half_diagonal = image_size / math.sqrt(2.)
        if self.rays_per_angle < 1:
            raise ValueError('rays_per_angle must be positive, got {}.'.format(rays_per_angle))
        if self.source_distance <= half_diagonal:
            raise ValueError('source_distance {} must exceed half the image diagonal {}.'
                             .format(self.source_distance, half_diagonal))
        self.detector_width = float(detector_width) if detector_width is not None \
            else 2. * self.source_distance * math.asin(half_diagonal / self.source_distance)
        if self.detector_width <= 0.:
            raise ValueError('detector_width must be positive, got {}.'.format(detector_width))

    def __repr__(self):
        return 'FanBeamGeometry(image_size={}, num_angles={}, rays_per_angle={}, ' \
               'source_distance={!r}, detector_width={!r})'.format(
                   self.image_size, self.num_angles, self.rays_per_angle, self.source_distance,
                   self.detector_width)

    @property
    def num_rays(self):
        # type: () -> int
        return self.num_angles * self.rays_per_angle

    @property
    def num_pixels(self):
        # type: () -> int
        return self.image_size ** 2

    @cached_property
    def angles(self):
        # type: () -> np.ndarray
        """Source angles in radians."""
        return 2. * np.pi * np.arange(self.num_angles) / self.num_angles

    @cached_property
    def fan_angles(self):
        # type: () -> np.ndarray
        """Ray angles relative to the central ray, at the centers of the detector elements."""
        gamma_max = self.detector_width / (2. * self.source_distance)
        step = 2. * gamma_max / self.rays_per_angle
        return -gamma_max + (np.arange(self.rays_per_angle) + .5) * step


class MatrixOperator(object):
    """Linear operator backed by an explicit dense or sparse matrix.

    Inputs are arrays of `domain_shape` (images for the CT operator, vectors for small dense
    problems); outputs are flat vectors.
    """

    def __init__(self, matrix, domain_shape=None):
        # type: (Union[np.ndarray, sp.spmatrix], Optional[Tuple[int, ...]]) -> None
        super(MatrixOperator, self).__init__()
        if sp.issparse(matrix):
            self._matrix = sp.csr_matrix(matrix)
        else:
            self._matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        if domain_shape is None:
            domain_shape = (self._matrix.shape[1],)
        if int(np.prod(domain_shape)) != self._matrix.shape[1]:
            raise ValueError('Domain shape {} does not match the {} matrix columns.'
                             .format(domain_shape, self._matrix.shape[1]))
        self.domain_shape = tuple(domain_shape)

    @property
    def matrix(self):
        # type: () -> Union[np.ndarray, sp.csr_matrix]
        return self._matrix

    @property
    def shape(self):
        # type: () -> Tuple[int, int]
        return self._matrix.shape

    @cached_property
    def _adjoint_matrix(self):
        if sp.issparse(self._matrix):
            return self._matrix.T.tocsr()
        return np.ascontiguousarray(self._matrix.T)

    @cached_property
    def lipschitz(self):
        # type: () -> float
        """Estimate of ||A||_2^2, see `estimate_lipschitz`."""
        return estimate_lipschitz(self)

    def apply(self, x):
        # type: (np.ndarray) -> np.ndarray
        x = np.asarray(x, dtype=float)
        if x.shape != self.domain_shape and x.size != self.shape[1]:
            raise ValueError('Input of shape {} does not match operator domain {}.'
                             .format(x.shape, self.domain_shape))
        return np.asarray(self._matrix.dot(x.ravel())).ravel()

    def apply_adjoint(self, y):
        # type: (np.ndarray) -> np.ndarray
        y = np.asarray(y, dtype=float).ravel()
        if y.size != self.shape[0]:
            raise ValueError('Input of length {} does not match operator range {}.'
                             .format(y.size, self.shape[0]))
        return np.asarray(self._adjoint_matrix.dot(y)).reshape(self.domain_shape)

    def restrict(self, rows):
        # type: (Sequence[int]) -> MatrixOperator
        """Operator made of the given rows only, acting on the same domain."""
        return MatrixOperator(self._matrix[np.asarray(rows, dtype=int)], self.domain_shape)

    def toarray(self):
        # type: () -> np.ndarray
        return self._matrix.toarray() if sp.issparse(self._matrix) else self._matrix.copy()

    def invalidate(self):
        # type: () -> None
        """Drop the cached adjoint and norm estimate."""
        for name in ('_adjoint_matrix', 'lipschitz'):
            self.__dict__.pop(name, None)


class ForwardOperator(MatrixOperator):
    """Fan-beam projection operator: Siddon intersection lengths of every ray with the pixels."""

    def __init__(self, geometry):
        # type: (FanBeamGeometry) -> None
        self.geometry = geometry
        super(ForwardOperator, self).__init__(siddon.system_matrix(geometry),
                                              (geometry.image_size, geometry.image_size))

    def sinogram_view(self, s):
        # type: (np.ndarray) -> np.ndarray
        """Reshape a flat sinogram into a (num_angles, rays_per_angle) array."""
        s = as_sinogram(s, self.geometry.rays_per_angle, self.geometry.num_angles)
        return s.reshape(self.geometry.num_angles, self.geometry.rays_per_angle)


def build_operator(geometry):
    # type: (FanBeamGeometry) -> ForwardOperator
    op = ForwardOperator(geometry)
    logger.info('Built fan-beam operator of shape {} for {}.'.format(op.shape, geometry))
    return op


def apply(op, x):
    # type: (MatrixOperator, np.ndarray) -> np.ndarray
    return op.apply(x)


def apply_adjoint(op, s):
    # type: (MatrixOperator, np.ndarray) -> np.ndarray
    return op.apply_adjoint(s)


def estimate_lipschitz(op, iters=50):
    # type: (MatrixOperator, int) -> float
    """Power iteration estimate of ||A||_2^2, the Lipschitz constant of the gradient of
    ||Ax - b||^2 divided by two. The start vector is all ones, so the estimate is deterministic.
    """
    v = np.ones(op.domain_shape) / math.sqrt(op.shape[1])
    lam = 0.
    for _ in range(iters):
        w = op.apply_adjoint(op.apply(v))
        lam = float(np.linalg.norm(w))
        if lam == 0.:
            return 0.
        v = w / lam
    return lam


def add_noise(b, relative_level, seed):
    # type: (np.ndarray, float, int) -> np.ndarray
    """Add white Gaussian noise scaled so that ||e|| / ||b|| equals `relative_level` exactly.

    Parameters
    ----------
        b : np.ndarray
            Clean data.

        relative_level : float
            Requested relative noise level, non-negative.

        seed : int
            Seed of the `numpy.random.RandomState` generating the noise.

    Returns
    -------
        np.ndarray
            The noisy data b + e.
    """
    b = np.asarray(b, dtype=float)
    if relative_level < 0.:
        raise ValueError('relative_level must be non-negative, got {}.'.format(relative_level))
    if relative_level == 0.:
        return b.copy()
    norm_b = np.linalg.norm(b)
    if norm_b == 0.:
        raise ValueError('Cannot scale noise relative to zero data.')
    e = np.random.RandomState(seed).standard_normal(b.shape)
    e *= relative_level * norm_b / np.linalg.norm(e)
    return b + e


def split_validation(m, fraction, seed):
    # type: (int, float, int) -> DataSplit
    """Draw round(fraction * m) validation indices (at least one) uniformly without replacement.

    Both index sets are returned sorted.
    """
    if not 0. < fraction < 1.:
        raise ValueError('fraction must lie in (0,1), got {}.'.format(fraction))
    if m < 2:
        raise ValueError('At least two data entries are needed for a split, got {}.'.format(m))
    count = min(max(1, int(math.floor(fraction * m + .5))), m - 1)
    validation = np.sort(np.random.RandomState(seed).choice(m, count, replace=False))
    fit = np.setdiff1d(np.arange(m), validation)
    return DataSplit(fit_indices=fit, validation_indices=validation, fraction=fraction)
