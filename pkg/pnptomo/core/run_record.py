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

This file contains the definition of the `RunRecord` class, the iteration history of a solver run.
"""
from __future__ import absolute_import, division, print_function

from collections import namedtuple

import numpy as np
from typing import Optional, List

from pnptomo.utils.io_utils import write_csv

RUN_COLUMNS = ('k', 'mse', 'psnr', 'ssim', 'd_err', 's_err', 'dc', 'alpha', 'descent_ok')
SUMMARY_COLUMNS = ('k_sel', 'mse', 'd_err', 's_err', 'psnr', 'ssim', 'min_mse', 'min_mse_k',
                   'stop_reason')

STOP_MAX_ITER = 'max_iter'
STOP_CROSS_VALIDATION = 'cross_validation'
STOP_NON_FINITE = 'non_finite'

RunRow = namedtuple('RunRow', RUN_COLUMNS + ('descent_inner', 'sufficient_ok', 'descent_regime'))


class RunRecord(object):
    """Per-iteration history of a solver run together with the selected and final iterates.

    Parameters
    ----------
        algorithm : str
            Label of the solver that produced the record.
    """

    def __init__(self, algorithm=''):
        # type: (str) -> None
        super(RunRecord, self).__init__()
        self.algorithm = algorithm
        self.rows = []  # type: List[RunRow]
        self.selected_k = None  # type: Optional[int]
        self.selected_x = None  # type: Optional[np.ndarray]
        self.final_x = None  # type: Optional[np.ndarray]
        self.stop_reason = None  # type: Optional[str]

    def __len__(self):
        return len(self.rows)

    @property
    def last_k(self):
        # type: () -> int
        return self.rows[-1].k if self.rows else 0

    def append(self, row):
        # type: (RunRow) -> None
        if row.k != self.last_k + 1:
            raise ValueError('Run rows must be contiguous: expected k={}, got k={}.'
                             .format(self.last_k + 1, row.k))
        self.rows.append(row)

    def column(self, name):
        # type: (str) -> np.ndarray
        return np.array([getattr(row, name) for row in self.rows], dtype=float)

    def select(self, k, x):
        # type: (int, np.ndarray) -> None
        """Store a snapshot of iterate k as the selected iterate."""
        self.selected_k = k
        self.selected_x = np.array(x, copy=True)

    def finalize(self, x, stop_reason):
        # type: (np.ndarray, str) -> None
        """Store the final iterate; without a selection so far the final iterate is selected."""
        self.final_x = np.array(x, copy=True)
        self.stop_reason = stop_reason
        if self.selected_k is None and self.rows:
            self.select(self.last_k, x)

    @property
    def selected_row(self):
        # type: () -> RunRow
        return self.rows[self.selected_k - 1]

    @property
    def min_mse(self):
        # type: () -> (float, int)
        """Smallest MSE over the run and the (first) iteration attaining it."""
        mse = self.column('mse')
        if mse.size == 0 or np.all(np.isnan(mse)):
            return float('nan'), 0
        i = int(np.nanargmin(mse))
        return float(mse[i]), i + 1

    def summary(self):
        # type: () -> tuple
        """Summary row in `SUMMARY_COLUMNS` order; metrics are NaN if no iteration completed."""
        min_mse, min_k = self.min_mse
        if self.selected_k is None:
            nan = float('nan')
            return None, nan, nan, nan, nan, nan, min_mse, min_k, self.stop_reason
        row = self.selected_row
        return (self.selected_k, row.mse, row.d_err, row.s_err, row.psnr, row.ssim, min_mse, min_k,
                self.stop_reason)

    def to_csv(self, file_path):
        # type: (str) -> None
        write_csv(file_path, RUN_COLUMNS, [row[:len(RUN_COLUMNS)] for row in self.rows])

    def summary_to_csv(self, file_path):
        # type: (str) -> None
        write_csv(file_path, SUMMARY_COLUMNS, [self.summary()])

    def curve_to_csv(self, file_path, name):
        # type: (str, str) -> None
        """Write the (k, value) curve of one column, e.g. 'dc' or 'alpha'."""
        write_csv(file_path, ('k', name), [(row.k, getattr(row, name)) for row in self.rows])

    def __repr__(self):
        min_mse, min_k = self.min_mse
        return 'RunRecord({}: {} iterations, k_sel={}, min_mse={:.4g} at k={}, stop={})'.format(
            self.algorithm, len(self.rows), self.selected_k, min_mse, min_k, self.stop_reason)
