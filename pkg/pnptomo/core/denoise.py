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

This file contains the denoisers used in the data-denoising step and the wrappers to attenuate
and combine them.
"""
from __future__ import absolute_import, division, print_function

import abc
import logging

import numpy as np
import six
from openmdao.utils.options_dictionary import OptionsDictionary
from scipy import ndimage
from typing import Any, Dict, Tuple, Type, Optional

from pnptomo.core.cnn import CnnWeights, cnn_forward, as_weights
from pnptomo.core.patch_filter import PatchParams, patch_collaborative as _patch_filter, \
    WEAK_SIGMA, THRESHOLD_FACTOR

logger = logging.getLogger(__name__)


@six.add_metaclass(abc.ABCMeta)
class Denoiser(object):
    """Abstract image denoiser.

    Denoisers are immutable after construction: their parameters are declared as options in
    `_declare_options` and set through keyword arguments, which are range checked.

    Attributes
    ----------
        name : str
            Registry name of the denoiser, as used in experiment configuration files.
    """

    name = None  # type: str

    def __init__(self, **kwargs):
        super(Denoiser, self).__init__()
        self.options = OptionsDictionary()
        self._declare_options()
        self.options.update(kwargs)

    def _declare_options(self):
        # type: () -> None
        pass

    @property
    def children(self):
        # type: () -> Tuple[Denoiser, ...]
        return ()

    def __call__(self, x):
        # type: (np.ndarray) -> np.ndarray
        x = np.asarray(x, dtype=float)
        if not np.all(np.isfinite(x)):
            raise ValueError('{} received a non-finite image.'.format(type(self).__name__))
        return self._denoise(x)

    @abc.abstractmethod
    def _denoise(self, x):
        # type: (np.ndarray) -> np.ndarray
        raise NotImplementedError

    def describe(self):
        # type: () -> str
        """Compact one-line description, e.g. 'attenuated(alpha=0.1, cnn)'."""
        params = ['{}={}'.format(k, v) for k, v in sorted(self._option_items())]
        params += [child.describe() for child in self.children]
        return '{}({})'.format(self.name, ', '.join(params)) if params else self.name

    def _option_items(self):
        return [(k, self.options[k]) for k in self.options._dict
                if not isinstance(self.options[k], (Denoiser, CnnWeights))]

    def __repr__(self):
        return self.describe()


class Identity(Denoiser):
    name = 'identity'

    def _denoise(self, x):
        return x.copy()


class GaussianBlur(Denoiser):
    name = 'gaussian'

    def _declare_options(self):
        self.options.declare('sigma', default=1., types=(int, float), lower=0.,
                             desc='Standard deviation of the Gaussian kernel in pixels.')

    def _denoise(self, x):
        return ndimage.gaussian_filter(x, self.options['sigma'], mode='reflect')


class Median(Denoiser):
    name = 'median'

    def _declare_options(self):
        self.options.declare('window', default=3, types=int, lower=1,
                             desc='Side length of the square median window in pixels.')

    def _denoise(self, x):
        return ndimage.median_filter(x, size=self.options['window'], mode='reflect')


class SoftThreshold(Denoiser):
    """Proximal map of t * ||x||_1."""

    name = 'soft_threshold'

    def _declare_options(self):
        self.options.declare('threshold', default=0., types=(int, float), lower=0.,
                             desc='Shrinkage threshold t.')

    def _denoise(self, x):
        return np.sign(x) * np.maximum(np.abs(x) - self.options['threshold'], 0.)


class QuadraticShrink(Denoiser):
    """Proximal map of gamma * ||x||^2 / 2, i.e. v / (1 + gamma)."""

    name = 'quadratic_shrink'

    def _declare_options(self):
        self.options.declare('gamma', default=0., types=(int, float), lower=0.,
                             desc='Weight of the quadratic penalty.')

    def _denoise(self, x):
        return x / (1. + self.options['gamma'])


class PatchCollaborative(Denoiser):
    """Block-matching collaborative filter, see `pnptomo.core.patch_filter`.

    Without an explicit hard threshold the threshold is 2.7 * sigma; the default sigma of 0.001
    gives the weak classical denoiser.
    """

    name = 'patch'

    def _declare_options(self):
        defaults = PatchParams()
        self.options.declare('patch', default=defaults.patch, types=int, lower=1,
                             desc='Patch side length in pixels.')
        self.options.declare('search_window', default=defaults.search_window, types=int, lower=1,
                             desc='Side length of the block-matching search window.')
        self.options.declare('max_group', default=defaults.max_group, types=int, lower=1,
                             desc='Maximum number of patches per group.')
        self.options.declare('stride', default=defaults.stride, types=int, lower=1,
                             desc='Step between reference patches.')
        self.options.declare('sigma', default=WEAK_SIGMA, types=(int, float), lower=0.,
                             desc='Assumed noise level, sets the default hard threshold.')
        self.options.declare('hard_threshold', default=None, types=(int, float), lower=0.,
                             allow_none=True,
                             desc='Hard threshold on group coefficients; 2.7 * sigma if None.')
        self.options.declare('match_threshold', default=defaults.match_threshold,
                             types=(int, float), lower=0.,
                             desc='Maximum mean squared patch distance for grouping.')

    @property
    def params(self):
        # type: () -> PatchParams
        threshold = self.options['hard_threshold']
        if threshold is None:
            threshold = THRESHOLD_FACTOR * self.options['sigma']
        return PatchParams(patch=self.options['patch'],
                           search_window=self.options['search_window'],
                           max_group=self.options['max_group'],
                           hard_threshold=float(threshold),
                           match_threshold=float(self.options['match_threshold']),
                           stride=self.options['stride'])

    def _denoise(self, x):
        return _patch_filter(x, self.params)


class CnnResidual(Denoiser):
    """Residual convolutional denoiser; uses the shipped synthetic weights unless given others."""

    name = 'cnn'

    def _declare_options(self):
        self.options.declare('weights', default=None, allow_none=True,
                             desc='CnnWeights object or path of a weight file.')

    def __init__(self, **kwargs):
        super(CnnResidual, self).__init__(**kwargs)
        self.weights = as_weights(self.options['weights'])

    def _option_items(self):
        weights = self.options['weights']
        return [('weights', weights)] if isinstance(weights, six.string_types) else []

    def _denoise(self, x):
        return cnn_forward(self.weights, x)


class Attenuated(Denoiser):
    """Attenuated denoiser (1 - alpha) x + alpha H(x)."""

    name = 'attenuated'

    def __init__(self, inner, alpha=1., **kwargs):
        # type: (Denoiser, float, **Any) -> None
        super(Attenuated, self).__init__(inner=inner, alpha=alpha, **kwargs)

    def _declare_options(self):
        self.options.declare('inner', types=Denoiser, desc='Denoiser to attenuate.')
        self.options.declare('alpha', default=1., types=(int, float), lower=0., upper=1.,
                             desc='Attenuation factor; 0 gives the identity, 1 the inner denoiser.')

    @property
    def children(self):
        return self.options['inner'],

    def _denoise(self, x):
        alpha = self.options['alpha']
        return (1. - alpha) * x + alpha * self.options['inner'](x)


class Combined(Denoiser):
    """Weighted denoiser alpha A(x) + beta B(x), with beta = 1 - alpha unless given.

    In the normalized form (beta unset) the output is a pixelwise convex combination of the two
    denoised images.
    """

    name = 'combined'

    def __init__(self, first, second, alpha=.5, beta=None, **kwargs):
        # type: (Denoiser, Denoiser, float, Optional[float], **Any) -> None
        super(Combined, self).__init__(first=first, second=second, alpha=alpha, beta=beta,
                                       **kwargs)

    def _declare_options(self):
        self.options.declare('first', types=Denoiser, desc='Denoiser weighted by alpha.')
        self.options.declare('second', types=Denoiser, desc='Denoiser weighted by beta.')
        self.options.declare('alpha', default=.5, types=(int, float), lower=0., upper=1.,
                             desc='Weight of the first denoiser.')
        self.options.declare('beta', default=None, types=(int, float), allow_none=True,
                             desc='Weight of the second denoiser; 1 - alpha if None.')

    @property
    def children(self):
        return self.options['first'], self.options['second']

    @property
    def normalized(self):
        # type: () -> bool
        return self.options['beta'] is None

    def outputs(self, x):
        # type: (np.ndarray) -> Tuple[np.ndarray, np.ndarray]
        """Outputs of both denoisers, each evaluated once."""
        x = np.asarray(x, dtype=float)
        return self.options['first'](x), self.options['second'](x)

    def mix(self, first_output, second_output, alpha=None):
        # type: (np.ndarray, np.ndarray, Optional[float]) -> np.ndarray
        """Combine precomputed denoiser outputs, optionally with another weight alpha."""
        if alpha is None:
            alpha = self.options['alpha']
        elif not 0. <= alpha <= 1.:
            raise ValueError('alpha must lie in [0,1], got {}.'.format(alpha))
        beta = 1. - alpha if self.normalized else self.options['beta']
        return alpha * first_output + beta * second_output

    def _denoise(self, x):
        return self.mix(*self.outputs(x))


DENOISERS = dict((cls.name, cls) for cls in (Identity, GaussianBlur, Median, SoftThreshold,
                                             QuadraticShrink, PatchCollaborative, CnnResidual,
                                             Attenuated, Combined))  # type: Dict[str, Type[Denoiser]]


def denoise(denoiser, x):
    # type: (Denoiser, np.ndarray) -> np.ndarray
    return denoiser(x)


def attenuated(inner, alpha):
    # type: (Denoiser, float) -> Attenuated
    return Attenuated(inner, alpha=alpha)


def combined(first, second, alpha, beta=None):
    # type: (Denoiser, Denoiser, float, Optional[float]) -> Combined
    return Combined(first, second, alpha=alpha, beta=beta)


def quadratic_shrink(gamma):
    # type: (float) -> QuadraticShrink
    return QuadraticShrink(gamma=gamma)


def soft_threshold(threshold):
    # type: (float) -> SoftThreshold
    return SoftThreshold(threshold=threshold)


def patch_collaborative(params=PatchParams()):
    # type: (PatchParams) -> PatchCollaborative
    return PatchCollaborative(patch=params.patch, search_window=params.search_window,
                              max_group=params.max_group, stride=params.stride,
                              hard_threshold=params.hard_threshold,
                              match_threshold=params.match_threshold)


def classical_denoiser(sigma=WEAK_SIGMA):
    # type: (float) -> PatchCollaborative
    """The weak classical denoiser: the patch filter with hard threshold 2.7 * sigma."""
    return PatchCollaborative(sigma=sigma)


def learned_denoiser(weights=None):
    # type: (Optional[CnnWeights]) -> CnnResidual
    return CnnResidual(weights=weights)
