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

This file contains the definition of the `ExperimentConfig` object, the reader of experiment XML
files.
"""
from __future__ import absolute_import, division, print_function

import os
import re
import warnings

from lxml import etree
from six import string_types
from typing import Optional, List, Any, Dict

from pnptomo.config import parser
from pnptomo.core.denoise import DENOISERS, Denoiser, Attenuated, Combined
from pnptomo.core.diagnostics import DescentConfig
from pnptomo.core.selection import DEFAULT_PATIENCE, DEFAULT_ALPHA_GRID
from pnptomo.core.solvers import OAConfig, CglsInner, GdInner, FbsConfig, WarmStart, \
    DEFAULT_MAXITER
from pnptomo.core.tomo_model import FanBeamGeometry
from pnptomo.utils.general_utils import change_object_type, str2bool
from pnptomo.utils.xml_utils import get_setting_safe, children_of

ALGORITHMS = ('cgls', 'fbs', 'fbs_fast', 'admm')

ENV_OUTPUT_DIR = 'PNPTOMO_OUTPUT_DIR'
ENV_NUM_THREADS = 'PNPTOMO_NUM_THREADS'

re_int = re.compile(r'^[+-]?\d+$')


class InvalidConfigFileError(ValueError):

    def __init__(self, reason=None):
        msg = 'Invalid experiment configuration file'
        if reason is not None:
            msg += ': {}'.format(reason)
        super(InvalidConfigFileError, self).__init__(msg)


def parse_attribute(value):
    # type: (str) -> Any
    """Convert an attribute string to an int, float or bool where possible."""
    value = value.strip()
    if re_int.match(value):
        return int(value)
    try:
        return float(value)
    except ValueError:
        pass
    try:
        return str2bool(value)
    except Exception:
        return value


class ExperimentConfig(object):
    """Experiment settings read from an XML file validated against ``experiment.xsd``.

    Settings that are not given fall back to the defaults of the reference protocol (256 x 256
    phantom, 120 angles, 1% noise, 1% validation data, FBS with tau = 1e-5, 250 iterations),
    each with a warning.

    Parameters
    ----------
        file : str, optional
            Path of the experiment XML file. Without a file all defaults are used.
    """

    def __init__(self, file=None):
        # type: (Optional[str]) -> None
        super(ExperimentConfig, self).__init__()
        self.file = file
        if file is None:
            self._tree = etree.ElementTree(etree.Element('experiment'))
        else:
            try:
                self._tree = etree.parse(file, parser)
            except etree.XMLSyntaxError as e:
                raise InvalidConfigFileError('{}: {}'.format(file, e))
            except (IOError, OSError) as e:
                raise InvalidConfigFileError('cannot read {}: {}'.format(file, e))

    @property
    def _elem_root(self):
        # type: () -> etree._Element
        return self._tree.getroot()

    def _section(self, tag):
        # type: (str) -> etree._Element
        elem = self._elem_root.find(tag)
        return elem if elem is not None else etree.Element(tag)

    def _get(self, section, setting, default, expected_type='str', warn=True):
        # type: (str, str, Any, str, bool) -> Any
        return get_setting_safe(self._section(section), setting, default, expected_type, warn)

    @property
    def base_dir(self):
        # type: () -> str
        return os.path.dirname(os.path.abspath(self.file)) if self.file else os.getcwd()

    @property
    def name(self):
        # type: () -> str
        if self._elem_root.get('name'):
            return self._elem_root.get('name')
        if self.file:
            return os.path.splitext(os.path.basename(self.file))[0]
        return 'experiment'

    @property
    def phantom_size(self):
        # type: () -> int
        return self._get('phantom', 'size', 256, 'int')

    @property
    def geometry(self):
        # type: () -> FanBeamGeometry
        return FanBeamGeometry(self.phantom_size,
                               self._get('geometry', 'numAngles', 120, 'int'),
                               self._get('geometry', 'raysPerAngle', None, 'int'),
                               self._get('geometry', 'sourceDistance', None, 'float'),
                               self._get('geometry', 'detectorWidth', None, 'float'))

    @property
    def noise_level(self):
        # type: () -> float
        return self._get('noise', 'level', .01, 'float')

    @property
    def noise_seed(self):
        # type: () -> int
        return self._get('noise', 'seed', 0, 'int')

    @property
    def cv_fraction(self):
        # type: () -> float
        return self._get('crossValidation', 'fraction', .01, 'float')

    @property
    def cv_seed(self):
        # type: () -> int
        return self._get('crossValidation', 'seed', 1, 'int')

    @property
    def patience(self):
        # type: () -> int
        return self._get('crossValidation', 'patience', DEFAULT_PATIENCE, 'int')

    @property
    def early_stopping(self):
        # type: () -> bool
        return self._get('crossValidation', 'earlyStopping', True, 'bool')

    @property
    def algorithm(self):
        # type: () -> str
        return self._get('algorithm', 'type', 'fbs')

    @property
    def max_iter(self):
        # type: () -> int
        return self._get('algorithm', 'maxIter', DEFAULT_MAXITER, 'int')

    @property
    def tau(self):
        # type: () -> float
        return self._get('algorithm', 'tau', 1e-5, 'float',
                         warn=self.algorithm in ('fbs', 'fbs_fast'))

    @property
    def fbs_config(self):
        # type: () -> FbsConfig
        return FbsConfig(tau=self.tau, fast=self.algorithm == 'fbs_fast', max_iter=self.max_iter)

    @property
    def oa_config(self):
        # type: () -> OAConfig
        admm = self._section('algorithm').find('admm')
        admm = admm if admm is not None else etree.Element('admm')
        inner = get_setting_safe(admm, 'inner', 'cgls')
        iterations = get_setting_safe(admm, 'innerIterations', 10, 'int')
        if inner == 'cgls':
            inner_config = CglsInner(iterations, get_setting_safe(admm, 'rho', 1., 'float'))
        else:
            inner_config = GdInner(iterations, get_setting_safe(admm, 'step', 1e-5, 'float'))
        return OAConfig(inner=inner_config,
                        warm_start=get_setting_safe(admm, 'warmStart', WarmStart.FROM_X),
                        phi=get_setting_safe(admm, 'phi', 1., 'float'))

    def descent_config(self, default_eps2=0.):
        # type: (float) -> DescentConfig
        """Descent thresholds; eps2 defaults to the given value (the squared noise norm)."""
        return DescentConfig(eps1=self._get('descent', 'eps1', 0., 'float', warn=False),
                             eps2=self._get('descent', 'eps2', default_eps2, 'float', warn=False),
                             k_cap=self._get('descent', 'kCap', None, 'int', warn=False))

    @property
    def alpha_search(self):
        # type: () -> bool
        return self._get('alphaSearch', 'enabled', False, 'bool', warn=False)

    @property
    def alpha_grid(self):
        # type: () -> int
        return self._get('alphaSearch', 'grid', DEFAULT_ALPHA_GRID, 'int', warn=False)

    @property
    def output_dir(self):
        # type: () -> str
        """Output directory; the PNPTOMO_OUTPUT_DIR environment variable takes precedence."""
        directory = os.environ.get(ENV_OUTPUT_DIR)
        if not directory:
            directory = self._get('output', 'directory', os.path.join('output', self.name))
        if not os.path.isabs(directory):
            directory = os.path.join(self.base_dir, directory)
        return directory

    @property
    def write_images(self):
        # type: () -> bool
        return self._get('output', 'images', True, 'bool', warn=False)

    def build_denoiser(self):
        # type: () -> Denoiser
        """Instantiate the denoiser tree; the identity is used if none is configured."""
        elem = self._elem_root.find('denoiser')
        if elem is None:
            if self.algorithm != 'cgls':
                warnings.warn('Setting "denoiser" unspecified for element "experiment", setting to '
                              'default "identity".')
            return DENOISERS['identity']()
        return self._build_denoiser(children_of(elem)[0])

    def _build_denoiser(self, elem):
        # type: (etree._Element) -> Denoiser
        tag = elem.tag
        if not isinstance(tag, string_types) or tag not in DENOISERS:
            raise InvalidConfigFileError('unknown denoiser "{}" (line {}), expected one of {}'
                                         .format(tag, elem.sourceline, ', '.join(sorted(DENOISERS))))
        cls = DENOISERS[tag]
        kwargs = dict((key, parse_attribute(value)) for key, value in elem.attrib.items())
        if 'weights' in kwargs:
            kwargs['weights'] = os.path.join(self.base_dir, str(kwargs['weights']))
        children = [self._build_denoiser(child) for child in children_of(elem)]

        expected = {Attenuated: 1, Combined: 2}.get(cls, 0)
        if len(children) != expected:
            raise InvalidConfigFileError('denoiser "{}" (line {}) needs {} nested denoiser(s), got {}'
                                         .format(tag, elem.sourceline, expected, len(children)))
        try:
            return cls(*children, **kwargs)
        except (ValueError, TypeError, KeyError, IOError, OSError) as e:
            raise InvalidConfigFileError('denoiser "{}" (line {}): {}'
                                         .format(tag, elem.sourceline, e))

    def validate(self):
        # type: () -> List[str]
        """Check every setting; returns a report of the resolved settings.

        Raises
        ------
            InvalidConfigFileError
                Naming the first invalid setting.
        """
        report = []
        checks = [('phantom size', lambda: self.phantom_size),
                  ('geometry', lambda: self.geometry),
                  ('noise level', lambda: self._nonnegative('noise level', self.noise_level)),
                  ('cross-validation fraction', lambda: self._fraction(self.cv_fraction)),
                  ('patience', lambda: self.patience),
                  ('algorithm', lambda: self.algorithm),
                  ('iteration limit', lambda: self.max_iter),
                  ('denoiser', lambda: self.build_denoiser().describe()),
                  ('descent thresholds', lambda: self.descent_config()),
                  ('output directory', lambda: self.output_dir)]
        if self.algorithm in ('fbs', 'fbs_fast'):
            checks.append(('FBS settings', lambda: self.fbs_config))
        if self.algorithm == 'admm':
            checks.append(('ADMM settings', lambda: self.oa_config))
        if self.alpha_search:
            checks.append(('alpha search', lambda: self._alpha_search_target()))

        for label, check in checks:
            try:
                value = check()
            except InvalidConfigFileError:
                raise
            except (ValueError, TypeError) as e:
                raise InvalidConfigFileError('{}: {}'.format(label, e))
            report.append('{}: {}'.format(label, value))
        return report

    @staticmethod
    def _nonnegative(label, value):
        if value < 0.:
            raise ValueError('{} must be non-negative, got {}'.format(label, value))
        return value

    @staticmethod
    def _fraction(value):
        if not 0. < value < 1.:
            raise ValueError('must lie in (0,1), got {}'.format(value))
        return value

    def _alpha_search_target(self):
        if not isinstance(self.build_denoiser(), Combined):
            raise ValueError('the alpha search needs a "combined" denoiser')
        return 'grid of {} points'.format(self.alpha_grid)

    def settings(self):
        # type: () -> Dict[str, Any]
        """Flat dictionary of the main settings, e.g. for logging."""
        return dict(name=self.name, phantom_size=self.phantom_size, geometry=repr(self.geometry),
                    noise_level=self.noise_level, cv_fraction=self.cv_fraction,
                    algorithm=self.algorithm, max_iter=self.max_iter,
                    denoiser=self.build_denoiser().describe())


def apply_thread_override():
    # type: () -> Optional[int]
    """Set the numba thread count from PNPTOMO_NUM_THREADS, if set; returns the count."""
    value = os.environ.get(ENV_NUM_THREADS)
    if not value:
        return None
    try:
        threads = change_object_type(value, 'int')
    except ValueError:
        raise InvalidConfigFileError('{} must be an integer, got "{}"'.format(ENV_NUM_THREADS, value))
    try:
        import numba
        numba.set_num_threads(threads)
    except ImportError:
        warnings.warn('numba is not installed, ignoring {}.'.format(ENV_NUM_THREADS))
    except ValueError as e:
        raise InvalidConfigFileError('{}: {}'.format(ENV_NUM_THREADS, e))
    return threads


def validate_config(file):
    # type: (str) -> List[str]
    return ExperimentConfig(file).validate()
