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

This file contains the cross-validation criterion, the early stopping rule and the search for the
weight of a combined denoiser.
"""
from __future__ import absolute_import, division, print_function

import logging
import math
from collections import namedtuple

import numpy as np
from scipy.optimize import minimize_scalar
from typing import Callable, Sequence

from pnptomo.core.diagnostics import residual_err

logger = logging.getLogger(__name__)

DEFAULT_PATIENCE = 10
DEFAULT_ALPHA_GRID = 21

StopDecision = namedtuple('StopDecision', ['stop', 'k', 'reason'])
StopDecision.__doc__ = """Outcome of `should_stop`: whether to stop, the selected (1-based)
iteration and the stop reason ('cross_validation' or 'max_iter', None while continuing)."""


def cv_error(x, op, split, b_delta):
    # type: (np.ndarray, object, object, np.ndarray) -> float
    """Relative residual of x on the validation part of the data (S-err)."""
    rows = split.validation_indices
    return residual_err(x, op.restrict(rows), np.asarray(b_delta)[rows])


def should_stop(history, patience=DEFAULT_PATIENCE, max_iter=None):
    # type: (Sequence[float], int, int) -> StopDecision
    """Decide whether to stop based on the history of S-err values, history[k-1] being iteration k.

    The run stops once the last `patience` values all lie strictly above the running minimum, or
    when `max_iter` iterations are done. The selected iteration is the first minimizer of the
    history.

    Parameters
    ----------
        history : list of float
            Cross-validation errors of iterations 1, 2, ...

        patience : int
            Number of consecutive increases tolerated.

        max_iter : int, optional
            Maximum number of iterations.

    Returns
    -------
        StopDecision
    """
    if len(history) == 0:
        raise ValueError('Cannot decide on stopping without any cross-validation errors.')
    if patience < 1:
        raise ValueError('patience must be at least 1, got {}.'.format(patience))

    best, best_k, above = math.inf, 0, 0
    for k, value in enumerate(history, start=1):
        if value < best:
            best, best_k = value, k
        if value > best:
            above += 1
        else:
            above = 0

    if above >= patience:
        return StopDecision(True, best_k, 'cross_validation')
    if max_iter is not None and len(history) >= max_iter:
        return StopDecision(True, best_k, 'max_iter')
    return StopDecision(False, best_k, None)


def mix_outputs(hx_learned, hx_classical, alpha):
    # type: (np.ndarray, np.ndarray, float) -> np.ndarray
    return alpha * hx_learned + (1. - alpha) * hx_classical


def select_alpha(hx_learned, hx_classical, evaluate, grid=DEFAULT_ALPHA_GRID, refine=True):
    # type: (np.ndarray, np.ndarray, Callable[[np.ndarray], float], int, bool) -> float
    """Weight alpha in [0,1] of the learned output minimizing evaluate(alpha*hl + (1-alpha)*hc).

    The criterion is scanned on a uniform grid over [0,1]; the best grid point is then refined by
    a bounded scalar minimization on its neighbouring bracket, kept only if strictly better.
    Ties go to the smaller alpha. Both denoiser outputs are computed by the caller, so no
    denoiser is evaluated here.

    Raises
    ------
        ValueError
            If fewer than two grid points are requested or the criterion is non-finite
            everywhere on the grid.
    """
    if grid < 2:
        raise ValueError('The alpha grid needs at least 2 points, got {}.'.format(grid))
    alphas = np.linspace(0., 1., grid)

    def criterion(alpha):
        value = float(evaluate(mix_outputs(hx_learned, hx_classical, alpha)))
        return value if math.isfinite(value) else math.inf

    values = [criterion(a) for a in alphas]
    best_i = None
    for i, value in enumerate(values):
        if math.isfinite(value) and (best_i is None or value < values[best_i]):
            best_i = i
    if best_i is None:
        raise ValueError('Selection criterion is non-finite for every alpha on the grid.')
    best_alpha, best_value = float(alphas[best_i]), values[best_i]

    if refine:
        lower = float(alphas[max(best_i - 1, 0)])
        upper = float(alphas[min(best_i + 1, grid - 1)])
        result = minimize_scalar(criterion, bounds=(lower, upper), method='bounded',
                                 options={'xatol': 1e-6})
        if result.success and result.fun < best_value:
            best_alpha = float(min(max(result.x, 0.), 1.))
    logger.debug('Selected alpha {:.6g} (grid value {:.6g}).'.format(best_alpha, best_value))
    return best_alpha
