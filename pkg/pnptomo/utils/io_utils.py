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

This file contains the readers and writers for images, sinograms and CSV tables.

Images are exchanged as 16-bit binary PGM (P5, big-endian samples, [0,1] mapped onto
[0,65535]) and as flat little-endian float64 RAW files with an XML header sidecar
(``<file>.xml``). Sinograms use the RAW format only.
"""
from __future__ import absolute_import, division, print_function

import csv
import io
import math
import re

import numpy as np
from lxml import etree
from typing import Sequence, Any, Tuple, Dict

from pnptomo.utils.xml_utils import xml_safe_create_element, write_xml, parse_xml, \
    get_setting_safe

PGM_MAXVAL = 65535
re_pgm_header = re.compile(br'^P5\s+(\d+)\s+(\d+)\s+(\d+)\s')


def write_pgm(file_path, image):
    # type: (str, np.ndarray) -> None
    """Write an image with values in [0,1] as a 16-bit binary PGM file; values are clipped."""
    image = np.asarray(image, dtype=float)
    if image.ndim != 2:
        raise ValueError('PGM export expects a 2-D image, got shape {}.'.format(image.shape))
    height, width = image.shape
    samples = np.rint(np.clip(image, 0., 1.) * PGM_MAXVAL).astype('>u2')
    with open(file_path, 'wb') as f:
        f.write('P5\n{} {}\n{}\n'.format(width, height, PGM_MAXVAL).encode('ascii'))
        f.write(samples.tobytes())


def read_pgm(file_path):
    # type: (str) -> np.ndarray
    """Read a 16-bit binary PGM written by `write_pgm` back into a [0,1] float image."""
    with open(file_path, 'rb') as f:
        content = f.read()
    match = re_pgm_header.match(content)
    if match is None:
        raise IOError('File "{}" is not a binary (P5) PGM file.'.format(file_path))
    width, height, maxval = (int(g) for g in match.groups())
    if maxval != PGM_MAXVAL:
        raise IOError('Only 16-bit PGM files are supported, got maxval {}.'.format(maxval))
    samples = np.frombuffer(content[match.end():], dtype='>u2', count=width * height)
    return samples.reshape(height, width).astype(float) / PGM_MAXVAL


def write_raw(file_path, array, kind, dims):
    # type: (str, np.ndarray, str, Dict[str, int]) -> None
    """Write a flat little-endian float64 RAW file plus its XML header sidecar.

    Parameters
    ----------
        file_path : str
            Path of the RAW file; the header is written to ``file_path + '.xml'``.

        array : np.ndarray
            Data to store, flattened in row-major order.

        kind : str
            Either 'image' or 'sinogram'.

        dims : dict
            Named dimensions stored in the header, e.g. ``{'width': 64, 'height': 64}`` or
            ``{'raysPerAngle': 90, 'numAngles': 60}``.
    """
    data = np.ascontiguousarray(array, dtype='<f8').ravel()
    if data.size != int(np.prod(list(dims.values()))):
        raise ValueError('RAW dimensions {} do not match the data length {}.'
                         .format(dims, data.size))
    with open(file_path, 'wb') as f:
        f.write(data.tobytes())

    doc = etree.ElementTree(etree.Element('rawArray'))
    xml_safe_create_element(doc, '/rawArray/kind', kind)
    xml_safe_create_element(doc, '/rawArray/dtype', 'float64')
    xml_safe_create_element(doc, '/rawArray/byteOrder', 'little')
    for name, value in dims.items():
        xml_safe_create_element(doc, '/rawArray/dimensions/{}'.format(name), int(value))
    write_xml(doc, file_path + '.xml')


def read_raw(file_path):
    # type: (str) -> Tuple[np.ndarray, str, Dict[str, int]]
    """Read a RAW file and its sidecar; returns the flat data, the kind and the dimensions."""
    doc = parse_xml(file_path + '.xml')
    root = doc.getroot()
    kind = get_setting_safe(root, 'kind', None)
    if get_setting_safe(root, 'dtype', 'float64', warn=False) != 'float64' or \
            get_setting_safe(root, 'byteOrder', 'little', warn=False) != 'little':
        raise IOError('Unsupported RAW encoding in "{}".'.format(file_path + '.xml'))
    dims = dict((elem.tag, int(elem.text)) for elem in root.find('dimensions'))

    data = np.fromfile(file_path, dtype='<f8')
    if data.size != int(np.prod(list(dims.values()))):
        raise IOError('RAW file "{}" holds {} values, header announces {}.'
                      .format(file_path, data.size, dims))
    return data.astype(float), kind, dims


def write_image_raw(file_path, image):
    # type: (str, np.ndarray) -> None
    height, width = np.shape(image)
    write_raw(file_path, image, 'image', {'width': width, 'height': height})


def read_image_raw(file_path):
    # type: (str) -> np.ndarray
    data, kind, dims = read_raw(file_path)
    if kind != 'image':
        raise IOError('RAW file "{}" holds a {}, not an image.'.format(file_path, kind))
    return data.reshape(dims['height'], dims['width'])


def write_sinogram_raw(file_path, sinogram, rays_per_angle, num_angles):
    # type: (str, np.ndarray, int, int) -> None
    write_raw(file_path, sinogram, 'sinogram',
              {'raysPerAngle': rays_per_angle, 'numAngles': num_angles})


def read_sinogram_raw(file_path):
    # type: (str) -> Tuple[np.ndarray, int, int]
    data, kind, dims = read_raw(file_path)
    if kind != 'sinogram':
        raise IOError('RAW file "{}" holds a {}, not a sinogram.'.format(file_path, kind))
    return data, dims['raysPerAngle'], dims['numAngles']


def format_value(value):
    # type: (Any) -> str
    """Format a CSV cell: integers as-is, floats with round-trip precision, None as empty."""
    if value is None:
        return ''
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return 'nan'
        if math.isinf(value):
            return 'inf' if value > 0 else '-inf'
        return '{:.17g}'.format(value)
    return str(value)


def write_csv(file_path, header, rows):
    # type: (str, Sequence[str], Sequence[Sequence[Any]]) -> None
    """Write a comma-separated table with a header row and LF line endings."""
    with io.open(file_path, 'w', newline='') as f:
        writer = csv.writer(f, delimiter=',', lineterminator='\n')
        writer.writerow(list(header))
        for row in rows:
            writer.writerow([format_value(v) for v in row])


def read_csv(file_path):
    # type: (str) -> Tuple[list, list]
    """Read a table written by `write_csv`; returns the header and the rows as strings."""
    with io.open(file_path, 'r', newline='') as f:
        reader = csv.reader(f, delimiter=',')
        rows = list(reader)
    return rows[0], rows[1:]
