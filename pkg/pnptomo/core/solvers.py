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

This file contains the iterative solvers: CGLS (plain and shifted), the gradient-descent inner
solver, and the plug-and-play FBS and ADMM iterations.

All solvers minimize the data term D(x) = ||Ax - b||^2, whose gradient is 2 A^T(Ax - b). The
factor 2 is part of the gradient, so a step size tau acts as tau * 2 A^T(Ax - b).
"""
from __future__ import absolute_import, division, print_function

import abc
import logging
import math
from collections import namedtuple

import numpy as np
import six
from openmdao.core.analysis_error import AnalysisError
from openmdao.utils.options_dictionary import OptionsDictionary
from typing import Optional, Tuple

from pnptomo.core.denoise import Denoiser, Identity, Attenuated, Combined
from pnptomo.core.diagnostics import DescentConfig, gradient, residual_err, mse_rel, psnr, \
    ssim, safe_dc_ratio, descent_inner, sufficient_check, generalized_descent_ok
from pnptomo.core.run_record import RunRecord, RunRow, STOP_MAX_ITER, STOP_NON_FINITE
from pnptomo.core.selection import should_stop, select_alpha, StopDecision, DEFAULT_PATIENCE, \
    DEFAULT_ALPHA_GRID

logger = logging.getLogger(__name__)

DEFAULT_MAXITER = 250
CGLS_RTOL = 1e-14


class NonFiniteIterateError(AnalysisError):
    """Raised when an iterate becomes non-finite; `record` holds the iterations done so far."""

    def __init__(self, record, reason=None):
        # type: (RunRecord, Optional[str]) -> None
        msg = 'Non-finite iterate'
        if reason is not None:
            msg += ': {}'.format(reason)
        super(NonFiniteIterateError, self).__init__(msg)
        self.record = record


CglsResult = namedtuple('CglsResult', ['x', 'iterations', 'breakdown'])


def cgls(A, b, N, x0=None, shift=None):
    # type: (object, np.ndarray, int, Optional[np.ndarray], Optional[Tuple[float, np.ndarray]]) -> CglsResult
    """Run N iterations of CGLS on min ||Ax - b||^2 (+ rho ||x - c||^2 when shifted).

    Parameters
    ----------
        A : MatrixOperator
            The system operator.

        b : np.ndarray
            Right-hand side.

        N : int
            Number of iterations, at least 1.

        x0 : np.ndarray, optional
            Warm start, zero if not given.

        shift : tuple, optional
            (rho, c) of the shift term rho ||x - c||^2.

    Returns
    -------
        CglsResult
            Final iterate, iterations done and whether the iteration broke down. The iteration
            also ends early once the normal-equation residual drops to round-off level.
    """
    if N < 1:
        raise ValueError('CGLS needs at least one iteration, got {}.'.format(N))
    b = np.asarray(b, dtype=float).ravel()
    x = np.zeros(A.domain_shape) if x0 is None else np.array(x0, dtype=float)
    if x.shape != A.domain_shape:
        x = x.reshape(A.domain_shape)
    rho, c = (0., None) if shift is None else (float(shift[0]), np.asarray(shift[1], dtype=float))
    if rho < 0.:
        raise ValueError('CGLS shift must be non-negative, got {}.'.format(rho))

    def normal_residual(r, x):
        s = A.apply_adjoint(r)
        if rho > 0.:
            s = s + rho * (c - x)
        return s

    r = b - A.apply(x)
    s = normal_residual(r, x)
    p = s.copy()
    gamma = float(np.vdot(s, s))
    gamma0 = gamma

    for it in range(N):
        if gamma == 0.:
            return CglsResult(x, it, True)
        if gamma <= CGLS_RTOL ** 2 * gamma0:
            return CglsResult(x, it, False)
        q = A.apply(p)
        delta = float(np.vdot(q, q)) + rho * float(np.vdot(p, p))
        if delta == 0.:
            logger.warning('CGLS breakdown after {} iterations: zero direction norm.'.format(it))
            return CglsResult(x, it, True)
        alpha = gamma / delta
        x = x + alpha * p
        r = r - alpha * q
        s = normal_residual(r, x)
        gamma_new = float(np.vdot(s, s))
        p = s + (gamma_new / gamma) * p
        gamma = gamma_new
    return CglsResult(x, N, False)


def gd_inner(A, b, N, step, anchor, y0):
    # type: (object, np.ndarray, int, float, np.ndarray, np.ndarray) -> np.ndarray
    """N anchored gradient steps x_{j+1} = c - step * 2 A^T(A x_j - b), starting from x_0 = y0."""
    if N < 1:
        raise ValueError('The gradient inner solver needs at least one step, got {}.'.format(N))
    x = np.asarray(y0, dtype=float)
    for _ in range(N):
        x = anchor - step * gradient(x, A, b)
    return x


def momentum_point(y, y_prev, t_prev):
    # type: (np.ndarray, np.ndarray, float) -> Tuple[np.ndarray, float]
    """Momentum extrapolation y + a (y - y_prev) with a = (t_prev - 1) / t and
    t = (1 + sqrt(1 + 4 t_prev^2)) / 2; returns the point and t."""
    t = (1. + math.sqrt(1. + 4. * t_prev ** 2)) / 2.
    a = (t_prev - 1.) / t
    if a == 0.:
        return np.array(y, dtype=float, copy=True), t
    return y + a * (y - y_prev), t


class CglsInner(namedtuple('CglsInner', ['iterations', 'rho'])):
    """Inner CGLS solve of min D(x) + rho ||x - (z - u)||^2 with a fixed number of iterations."""

    name = 'cgls'

    def __new__(cls, iterations=10, rho=1.):
        if iterations < 1 or rho <= 0.:
            raise ValueError('CglsInner needs iterations >= 1 and rho > 0, got {} and {}.'
                             .format(iterations, rho))
        return super(CglsInner, cls).__new__(cls, int(iterations), float(rho))


class GdInner(namedtuple('GdInner', ['iterations', 'step'])):
    """Inner anchored gradient steps with step size tau', see `gd_inner`."""

    name = 'gd'

    def __new__(cls, iterations=1, step=1e-5):
        if iterations < 1 or step <= 0.:
            raise ValueError('GdInner needs iterations >= 1 and step > 0, got {} and {}.'
                             .format(iterations, step))
        return super(GdInner, cls).__new__(cls, int(iterations), float(step))


class WarmStart(object):
    FROM_X = 'x'
    FROM_Z = 'z'
    FROM_MOMENTUM = 'momentum'
    VALUES = (FROM_X, FROM_Z, FROM_MOMENTUM)


class OAConfig(namedtuple('OAConfig', ['inner', 'warm_start', 'phi'])):
    """Optimization architecture of the ADMM data-consistency step and the noise update weight."""

    def __new__(cls, inner=CglsInner(), warm_start=WarmStart.FROM_X, phi=1.):
        if not isinstance(inner, (CglsInner, GdInner)):
            raise TypeError('inner must be a CglsInner or GdInner, got {!r}.'.format(inner))
        if warm_start not in WarmStart.VALUES:
            raise ValueError('warm_start must be one of {}, got "{}".'
                             .format(WarmStart.VALUES, warm_start))
        if not 0. <= phi <= 1.:
            raise ValueError('phi must lie in [0,1], got {}.'.format(phi))
        return super(OAConfig, cls).__new__(cls, inner, warm_start, float(phi))


class FbsConfig(namedtuple('FbsConfig', ['tau', 'fast', 'max_iter'])):

    def __new__(cls, tau=1e-5, fast=False, max_iter=DEFAULT_MAXITER):
        if tau <= 0.:
            raise ValueError('tau must be positive, got {}.'.format(tau))
        if max_iter < 1:
            raise ValueError('max_iter must be at least 1, got {}.'.format(max_iter))
        return super(FbsConfig, cls).__new__(cls, float(tau), bool(fast), int(max_iter))


class SelectionHooks(object):
    """What a solver run monitors and how it stops.

    Parameters
    ----------
        validation_op : MatrixOperator, optional
            Rows of the operator belonging to the validation (left-out) data.

        validation_data : np.ndarray, optional
            The left-out data.

        reference : np.ndarray, optional
            Ground truth for MSE, PSNR and SSIM; NaN is recorded without it.

        patience : int
            Number of consecutive S-err increases that end the run.

        early_stopping : bool
            Set to False to run to the iteration limit while still selecting the best iterate.

        descent : DescentConfig, optional
            Thresholds of the generalized descent classification.

        alpha_search : bool
            Select the weight of a `Combined` denoiser in every iteration by cross validation.

        alpha_grid : int
            Number of grid points of the alpha search.
    """

    def __init__(self, validation_op=None, validation_data=None, reference=None,
                 patience=DEFAULT_PATIENCE, early_stopping=True, descent=None, alpha_search=False,
                 alpha_grid=DEFAULT_ALPHA_GRID):
        super(SelectionHooks, self).__init__()
        if (validation_op is None) != (validation_data is None):
            raise ValueError('validation_op and validation_data must be given together.')
        if alpha_search and validation_op is None:
            raise ValueError('The alpha search needs validation data.')
        if patience < 1:
            raise ValueError('patience must be at least 1, got {}.'.format(patience))
        self.validation_op = validation_op
        self.validation_data = None if validation_data is None else \
            np.asarray(validation_data, dtype=float).ravel()
        self.reference = None if reference is None else np.asarray(reference, dtype=float)
        self.patience = int(patience)
        self.early_stopping = bool(early_stopping)
        self.descent = descent if descent is not None else DescentConfig()
        self.alpha_search = bool(alpha_search)
        self.alpha_grid = int(alpha_grid)

    @classmethod
    def from_split(cls, op, b_delta, split, **kwargs):
        """Hooks validating on the left-out rows of a `DataSplit`."""
        rows = split.validation_indices
        return cls(validation_op=op.restrict(rows), validation_data=np.asarray(b_delta)[rows],
                   **kwargs)

    @property
    def has_validation(self):
        # type: () -> bool
        return self.validation_op is not None

    def s_err(self, x):
        # type: (np.ndarray) -> float
        return residual_err(x, self.validation_op, self.validation_data)


Step = namedtuple('Step', ['iterate', 'x', 'start', 'denoiser_input', 'grad_step', 'alpha'])


@six.add_metaclass(abc.ABCMeta)
class PnPSolver(object):
    """Base class of the iterative solvers.

    Subclasses declare their options in `_declare_options`, set up their state in
    `_iter_initialize` and perform one iteration in `_iter_execute`; `solve` runs the loop,
    records the diagnostics of every iteration and applies the stopping rule.

    Parameters
    ----------
        A : MatrixOperator
            Operator of the fitting data.

        b : np.ndarray
            Fitting data.

        denoiser : Denoiser, optional
            Denoiser of the data-denoising step; identity if not given.

        hooks : SelectionHooks, optional
            Monitoring and stopping configuration.

        maxiter : int, optional
            Maximum number of iterations.
    """

    SOLVER = 'PnP'

    def __init__(self, A, b, denoiser=None, hooks=None, **kwargs):
        super(PnPSolver, self).__init__()
        self.A = A
        self.b = np.asarray(b, dtype=float).ravel()
        if self.b.size != A.shape[0]:
            raise ValueError('Data of length {} does not match operator of shape {}.'
                             .format(self.b.size, A.shape))
        self.denoiser = denoiser if denoiser is not None else Identity()
        if not isinstance(self.denoiser, Denoiser):
            raise TypeError('denoiser must be a Denoiser, got {!r}.'.format(denoiser))
        self.hooks = hooks if hooks is not None else SelectionHooks()
        self.options = OptionsDictionary()
        self._declare_options()
        self.options.update(kwargs)
        self._iter_count = 0
        self._record = None  # type: Optional[RunRecord]

    def _declare_options(self):
        # type: () -> None
        self.options.declare('maxiter', default=DEFAULT_MAXITER, types=int, lower=1,
                             desc='Maximum number of iterations.')

    @property
    def iterate(self):
        # type: () -> np.ndarray
        """The current recorded iterate."""
        return self.z

    @abc.abstractmethod
    def _iter_initialize(self, x0):
        # type: (np.ndarray) -> None
        raise NotImplementedError

    @abc.abstractmethod
    def _iter_execute(self):
        # type: () -> Step
        raise NotImplementedError

    def _check_finite(self, name, value):
        # type: (str, np.ndarray) -> None
        if not np.all(np.isfinite(value)):
            self._record.finalize(self.iterate, STOP_NON_FINITE)
            logger.error('{}: non-finite {} in iteration {}, aborting.'
                         .format(self.SOLVER, name, self._iter_count))
            raise NonFiniteIterateError(self._record, '{} in iteration {} of {}'
                                        .format(name, self._iter_count, self.SOLVER))

    def _denoiser_alpha(self):
        # type: () -> float
        if isinstance(self.denoiser, (Attenuated, Combined)):
            return float(self.denoiser.options['alpha'])
        return float('nan')

    def _denoise(self, v):
        # type: (np.ndarray) -> Tuple[np.ndarray, float]
        """Data-denoising step; returns the denoised image and the denoiser weight used."""
        if self.hooks.alpha_search and isinstance(self.denoiser, Combined):
            first, second = self.denoiser.outputs(v)
            alpha = select_alpha(first, second, self.hooks.s_err, grid=self.hooks.alpha_grid)
            return self.denoiser.mix(first, second, alpha), alpha
        return self.denoiser(v), self._denoiser_alpha()

    def _diagnose(self, step):
        # type: (Step) -> RunRow
        k = self._iter_count
        z = step.iterate
        ref = self.hooks.reference
        nan = float('nan')
        if ref is not None:
            mse, p = mse_rel(z, ref), psnr(z, ref)
            s = ssim(z, ref) if np.ndim(z) == 2 else nan
        else:
            mse, p, s = nan, nan, nan
        d_err = residual_err(z, self.A, self.b)
        s_err = self.hooks.s_err(z) if self.hooks.has_validation else nan
        denoiser_input = None if step.denoiser_input is step.x else step.denoiser_input
        dc = safe_dc_ratio(step.x, step.start, z, denoiser_input, logger=logger)

        direction = z - step.start
        inner = descent_inner(direction, step.start, self.A, self.b)
        sufficient = None if step.grad_step is None else \
            sufficient_check(step.x, z, step.grad_step)
        regime = generalized_descent_ok(direction, step.start, self.hooks.descent, self.A, self.b,
                                        k)
        return RunRow(k=k, mse=mse, psnr=p, ssim=s, d_err=d_err, s_err=s_err, dc=dc,
                      alpha=step.alpha, descent_ok=inner > 0., descent_inner=inner,
                      sufficient_ok=sufficient, descent_regime=regime)

    def solve(self, x0=None):
        # type: (Optional[np.ndarray]) -> RunRecord
        """Run the solver until the stopping rule or the iteration limit ends it.

        Raises
        ------
            NonFiniteIterateError
                If an iterate becomes non-finite; the partial record is attached.
        """
        maxiter = self.options['maxiter']
        x0 = np.zeros(self.A.domain_shape) if x0 is None else \
            np.array(x0, dtype=float).reshape(self.A.domain_shape)
        self._record = record = RunRecord(self.SOLVER)
        self._iter_count = 0
        self._iter_initialize(x0)
        logger.info('{}: starting with denoiser {} for at most {} iterations.'
                    .format(self.SOLVER, self.denoiser.describe(), maxiter))

        history = []
        best = float('inf')
        while True:
            self._iter_count += 1
            step = self._iter_execute()
            row = self._diagnose(step)
            record.append(row)

            if self.hooks.has_validation:
                history.append(row.s_err)
                if row.s_err < best:
                    best = row.s_err
                    record.select(row.k, step.iterate)
                decision = should_stop(history, self.hooks.patience, maxiter)
                if not self.hooks.early_stopping:
                    done = self._iter_count >= maxiter
                    decision = StopDecision(done, decision.k, STOP_MAX_ITER if done else None)
            else:
                done = self._iter_count >= maxiter
                decision = StopDecision(done, self._iter_count, STOP_MAX_ITER if done else None)

            logger.debug('{} k={}: mse={:.6g} d_err={:.6g} s_err={:.6g} dc={:.4g} alpha={:.4g}'
                         .format(self.SOLVER, row.k, row.mse, row.d_err, row.s_err, row.dc,
                                 row.alpha))
            if decision.stop:
                break

        record.finalize(self.iterate, decision.reason)
        logger.info('{}: stopped after {} iterations ({}), selected k={}.'
                    .format(self.SOLVER, self._iter_count, decision.reason, record.selected_k))
        return record


class CglsSolver(PnPSolver):
    """CGLS on the fitting data, one CGLS iteration per solver iteration and no denoiser."""

    SOLVER = 'CGLS'

    @property
    def iterate(self):
        return self.x

    def _iter_initialize(self, x0):
        self.x = x0
        self._r = self.b - self.A.apply(x0)
        self._s = self.A.apply_adjoint(self._r)
        self._p = self._s.copy()
        self._gamma = float(np.vdot(self._s, self._s))
        self._breakdown = False

    def _iter_execute(self):
        start = self.x
        delta = 0.
        if self._gamma > 0.:
            q = self.A.apply(self._p)
            delta = float(np.vdot(q, q))
        if delta == 0.:
            if not self._breakdown:
                logger.warning('CGLS breakdown in iteration {}: iterate frozen.'
                               .format(self._iter_count))
                self._breakdown = True
            x = start.copy()
        else:
            alpha = self._gamma / delta
            x = start + alpha * self._p
            self._check_finite('x', x)
            self._r = self._r - alpha * q
            self._s = self.A.apply_adjoint(self._r)
            gamma = float(np.vdot(self._s, self._s))
            self._p = self._s + (gamma / self._gamma) * self._p
            self._gamma = gamma
        self.x = x
        return Step(iterate=x, x=x, start=start, denoiser_input=x, grad_step=None,
                    alpha=float('nan'))


class FbsPnPSolver(PnPSolver):
    """Forward-backward splitting with a plug-and-play denoiser.

    Each iteration takes a gradient step on D from z_{k-1} (or, with `fast`, from the momentum
    point of the z sequence) followed by the denoiser.
    """

    SOLVER = 'PnP: FBS'

    def _declare_options(self):
        super(FbsPnPSolver, self)._declare_options()
        self.options.declare('tau', default=1e-5, types=(int, float), lower=0.,
                             desc='Constant step size of the data-consistency step.')
        self.options.declare('fast', default=False, types=bool,
                             desc='Set to True to add momentum to the data-consistency step.')

    def _iter_initialize(self, x0):
        if self.options['tau'] <= 0.:
            raise ValueError('tau must be positive, got {}.'.format(self.options['tau']))
        self.x = x0.copy()
        self.z = x0.copy()
        self.z_prev = x0.copy()
        self.t = 1.

    def _iter_execute(self):
        if self.options['fast']:
            p, t = momentum_point(self.z, self.z_prev, self.t)
        else:
            p, t = self.z, self.t
        grad_step = self.options['tau'] * gradient(p, self.A, self.b)
        x = p - grad_step
        self._check_finite('x', x)
        z, alpha = self._denoise(x)
        self._check_finite('z', z)

        self.z_prev, self.z, self.x, self.t = self.z, z, x, t
        return Step(iterate=z, x=x, start=p, denoiser_input=x, grad_step=grad_step, alpha=alpha)


class AdmmPnPSolver(PnPSolver):
    """ADMM with a plug-and-play denoiser and a scaled noise update.

    The data-consistency step solves min D(x) + rho ||x - (z - u)||^2 with CGLS, or takes anchored
    gradient steps, warm-started at x, z or the momentum point of the z sequence. Then
    z = H(x + u) and u <- u + phi (x - z).
    """

    SOLVER = 'PnP: ADMM'

    def _declare_options(self):
        super(AdmmPnPSolver, self)._declare_options()
        self.options.declare('inner', default=CglsInner.name, values=(CglsInner.name, GdInner.name),
                             desc='Inner solver of the data-consistency step.')
        self.options.declare('inner_iterations', default=10, types=int, lower=1,
                             desc='Number of inner iterations N.')
        self.options.declare('rho', default=1., types=(int, float), lower=0.,
                             desc='Penalty parameter of the CGLS inner solver.')
        self.options.declare('step', default=1e-5, types=(int, float), lower=0.,
                             desc="Step size tau' of the gradient inner solver.")
        self.options.declare('warm_start', default=WarmStart.FROM_X, values=WarmStart.VALUES,
                             desc='Starting point of the inner solver.')
        self.options.declare('phi', default=1., types=(int, float), lower=0., upper=1.,
                             desc='Weight of the noise update.')

    @classmethod
    def from_config(cls, A, b, denoiser, oa, hooks=None, maxiter=DEFAULT_MAXITER):
        # type: (object, np.ndarray, Denoiser, OAConfig, Optional[SelectionHooks], int) -> AdmmPnPSolver
        if isinstance(oa.inner, CglsInner):
            inner = dict(inner=CglsInner.name, rho=oa.inner.rho)
        else:
            inner = dict(inner=GdInner.name, step=oa.inner.step)
        return cls(A, b, denoiser, hooks, maxiter=maxiter, inner_iterations=oa.inner.iterations,
                   warm_start=oa.warm_start, phi=oa.phi, **inner)

    def _iter_initialize(self, x0):
        key = 'rho' if self.options['inner'] == CglsInner.name else 'step'
        if self.options[key] <= 0.:
            raise ValueError('{} must be positive, got {}.'.format(key, self.options[key]))
        self.x = x0.copy()
        self.z = x0.copy()
        self.z_prev = x0.copy()
        self.u = np.zeros_like(x0)
        self.t = 1.

    def _iter_execute(self):
        warm_start = self.options['warm_start']
        t = self.t
        if warm_start == WarmStart.FROM_X:
            y0 = self.x
        elif warm_start == WarmStart.FROM_Z:
            y0 = self.z
        else:
            y0, t = momentum_point(self.z, self.z_prev, self.t)

        anchor = self.z - self.u
        n_inner = self.options['inner_iterations']
        if self.options['inner'] == CglsInner.name:
            result = cgls(self.A, self.b, n_inner, y0, shift=(self.options['rho'], anchor))
            if result.breakdown:
                logger.warning('Inner CGLS broke down in iteration {}.'.format(self._iter_count))
            x = result.x
        else:
            x = gd_inner(self.A, self.b, n_inner, self.options['step'], anchor, y0)
        self._check_finite('x', x)

        v = x + self.u
        z, alpha = self._denoise(v)
        self._check_finite('z', z)
        u = self.u + self.options['phi'] * (x - z)
        self._check_finite('u', u)

        self.z_prev, self.z, self.x, self.u, self.t = self.z, z, x, u, t
        return Step(iterate=z, x=x, start=y0, denoiser_input=v, grad_step=None, alpha=alpha)


def cgls_run(A, b, max_iter=DEFAULT_MAXITER, hooks=None, x0=None):
    # type: (object, np.ndarray, int, Optional[SelectionHooks], Optional[np.ndarray]) -> RunRecord
    return CglsSolver(A, b, hooks=hooks, maxiter=max_iter).solve(x0)


def fbs_pnp(A, b, denoiser, cfg=FbsConfig(), hooks=None, x0=None):
    # type: (object, np.ndarray, Denoiser, FbsConfig, Optional[SelectionHooks], Optional[np.ndarray]) -> RunRecord
    solver = FbsPnPSolver(A, b, denoiser, hooks, tau=cfg.tau, fast=cfg.fast, maxiter=cfg.max_iter)
    return solver.solve(x0)


def admm_pnp(A, b, denoiser, oa=OAConfig(), hooks=None, max_iter=DEFAULT_MAXITER, x0=None):
    # type: (object, np.ndarray, Denoiser, OAConfig, Optional[SelectionHooks], int, Optional[np.ndarray]) -> RunRecord
    return AdmmPnPSolver.from_config(A, b, denoiser, oa, hooks, max_iter).solve(x0)
