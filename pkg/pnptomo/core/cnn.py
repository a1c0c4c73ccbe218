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

This file contains the inference engine of the residual convolutional denoiser, its portable
weight file format and the analytically constructed weights shipped with the package.

Weight file layout (all integers and floats little-endian):

    8 bytes   magic b'PNPCNN\\x00\\x00'
    uint32    format version (1)
    uint32    number of layers L
    uint8     residual flag (1: output = x - net(x))
    L times:
        uint32 out_channels, uint32 in_channels, uint32 kernel_height, uint32 kernel_width
        uint8  activation (0: none, 1: relu)
        float64[out * in * kh * kw] kernels, row-major [out, in, kh, kw]
        float64[out] bias
"""
from __future__ import absolute_import, division, print_function

import struct
from collections import namedtuple

import numpy as np
from typing import List, Sequence, Union

MAGIC = b'PNPCNN\x00\x00'
FORMAT_VERSION = 1
ACTIVATIONS = ('none', 'relu')

_HEADER = struct.Struct('<8sIIB')
_LAYER_HEADER = struct.Struct('<IIIIB')

CnnLayer = namedtuple('CnnLayer', ['kernels', 'bias', 'activation'])


class InvalidWeightFileError(ValueError):

    def __init__(self, reason=None):
        msg = 'Invalid CNN weight file'
        if reason is not None:
            msg += ': {}'.format(reason)
        super(InvalidWeightFileError, self).__init__(msg)


class CnnWeights(object):
    """Weights of a plain stack of zero-padded 3x3 convolution layers.

    Parameters
    ----------
        layers : list of CnnLayer
            Layers in evaluation order. Kernels have shape (out_channels, in_channels, 3, 3).

        residual : bool
            Set to True if the network predicts the noise, i.e. the denoiser returns x - net(x).
    """

    def __init__(self, layers, residual=True):
        # type: (Sequence[CnnLayer], bool) -> None
        super(CnnWeights, self).__init__()
        self.layers = [CnnLayer(np.asarray(l.kernels, dtype=float), np.asarray(l.bias, dtype=float),
                                l.activation) for l in layers]
        self.residual = bool(residual)
        self.validate()

    def validate(self):
        # type: () -> None
        if not self.layers:
            raise InvalidWeightFileError('network has no layers')
        in_channels = 1
        for i, layer in enumerate(self.layers):
            if layer.kernels.ndim != 4 or layer.kernels.shape[2:] != (3, 3):
                raise InvalidWeightFileError('layer {} kernels have shape {}, expected (out, in, 3, 3)'
                                             .format(i, layer.kernels.shape))
            if layer.kernels.shape[1] != in_channels:
                raise InvalidWeightFileError('layer {} expects {} input channels, got {}'
                                             .format(i, layer.kernels.shape[1], in_channels))
            if layer.bias.shape != (layer.kernels.shape[0],):
                raise InvalidWeightFileError('layer {} bias has shape {}'.format(i, layer.bias.shape))
            if layer.activation not in ACTIVATIONS:
                raise InvalidWeightFileError('layer {} has unknown activation "{}"'
                                             .format(i, layer.activation))
            if not (np.all(np.isfinite(layer.kernels)) and np.all(np.isfinite(layer.bias))):
                raise InvalidWeightFileError('layer {} holds non-finite weights'.format(i))
            in_channels = layer.kernels.shape[0]
        if in_channels != 1:
            raise InvalidWeightFileError('last layer has {} output channels, expected 1'
                                         .format(in_channels))

    @property
    def depth(self):
        # type: () -> int
        return len(self.layers)


def conv3x3(h, kernels, bias):
    # type: (np.ndarray, np.ndarray, np.ndarray) -> np.ndarray
    """Zero-padded 3x3 cross-correlation of a (in, H, W) stack, as convolution layers compute it."""
    _, height, width = h.shape
    padded = np.pad(h, ((0, 0), (1, 1), (1, 1)), mode='constant')
    out = np.empty((kernels.shape[0], height, width))
    out[:] = bias[:, None, None]
    for di in range(3):
        for dj in range(3):
            out += np.einsum('oi,ihw->ohw', kernels[:, :, di, dj],
                             padded[:, di:di + height, dj:dj + width])
    return out


def cnn_forward(weights, x):
    # type: (CnnWeights, np.ndarray) -> np.ndarray
    """Run the network on a single-channel image; returns x - net(x) for residual networks."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise ValueError('CNN input must be a 2-D image, got shape {}.'.format(x.shape))
    h = x[None, :, :]
    for layer in weights.layers:
        h = conv3x3(h, layer.kernels, layer.bias)
        if layer.activation == 'relu':
            h = np.maximum(h, 0.)
    return x - h[0] if weights.residual else h[0]


def save_cnn_weights(weights, file_path):
    # type: (CnnWeights, str) -> None
    chunks = [_HEADER.pack(MAGIC, FORMAT_VERSION, weights.depth, int(weights.residual))]
    for layer in weights.layers:
        out_ch, in_ch, kh, kw = layer.kernels.shape
        chunks.append(_LAYER_HEADER.pack(out_ch, in_ch, kh, kw, ACTIVATIONS.index(layer.activation)))
        chunks.append(np.ascontiguousarray(layer.kernels, dtype='<f8').tobytes())
        chunks.append(np.ascontiguousarray(layer.bias, dtype='<f8').tobytes())
    with open(file_path, 'wb') as f:
        f.write(b''.join(chunks))


def _take(content, offset, size, what):
    # type: (bytes, int, int, str) -> bytes
    if offset + size > len(content):
        raise InvalidWeightFileError('file truncated while reading {}'.format(what))
    return content[offset:offset + size]


def load_cnn_weights(file_path):
    # type: (str) -> CnnWeights
    """Read a weight file written by `save_cnn_weights` (or any tool following the same layout).

    Raises
    ------
        InvalidWeightFileError
            If the magic string, the version or the layer data are invalid, or the file is
            truncated.
    """
    with open(file_path, 'rb') as f:
        content = f.read()

    magic, version, depth, residual = _HEADER.unpack(_take(content, 0, _HEADER.size, 'header'))
    if magic != MAGIC:
        raise InvalidWeightFileError('bad magic string {!r}'.format(magic))
    if version != FORMAT_VERSION:
        raise InvalidWeightFileError('unsupported format version {} (expected {})'
                                     .format(version, FORMAT_VERSION))
    offset = _HEADER.size

    layers = []  # type: List[CnnLayer]
    for i in range(depth):
        what = 'layer {}'.format(i)
        out_ch, in_ch, kh, kw, act = _LAYER_HEADER.unpack(
            _take(content, offset, _LAYER_HEADER.size, what))
        offset += _LAYER_HEADER.size
        if act >= len(ACTIVATIONS):
            raise InvalidWeightFileError('layer {} has unknown activation code {}'.format(i, act))
        n_kernel = out_ch * in_ch * kh * kw
        kernels = np.frombuffer(_take(content, offset, 8 * n_kernel, what), dtype='<f8')
        offset += 8 * n_kernel
        bias = np.frombuffer(_take(content, offset, 8 * out_ch, what), dtype='<f8')
        offset += 8 * out_ch
        layers.append(CnnLayer(kernels.reshape(out_ch, in_ch, kh, kw).astype(float),
                               bias.astype(float), ACTIVATIONS[act]))

    if offset != len(content):
        raise InvalidWeightFileError('{} trailing bytes after the last layer'
                                     .format(len(content) - offset))
    return CnnWeights(layers, residual=bool(residual))


BINOMIAL_3X3 = np.outer([1., 2., 1.], [1., 2., 1.]) / 16.
DELTA_3X3 = np.array([[0., 0., 0.], [0., 1., 0.], [0., 0., 0.]])


def synthetic_weights(depth=7, channels=16):
    # type: (int, int) -> CnnWeights
    """Residual network whose noise estimate is x - B^depth x, B being the 3x3 binomial blur.

    The denoised output is therefore a depth-fold binomial smoothing, a strong low-pass
    denoiser. Channels 0/1 carry the positive/negative part of the smoothed image and channels
    2/3 those of the input; the remaining channels are zero.
    """
    if depth < 2 or channels < 4:
        raise ValueError('Synthetic weights need at least 2 layers and 4 channels.')
    b, d = BINOMIAL_3X3, DELTA_3X3

    first = np.zeros((channels, 1, 3, 3))
    first[0, 0], first[1, 0], first[2, 0], first[3, 0] = b, -b, d, -d
    layers = [CnnLayer(first, np.zeros(channels), 'relu')]

    hidden = np.zeros((channels, channels, 3, 3))
    hidden[0, 0], hidden[0, 1] = b, -b
    hidden[1, 0], hidden[1, 1] = -b, b
    hidden[2, 2], hidden[2, 3] = d, -d
    hidden[3, 2], hidden[3, 3] = -d, d
    for _ in range(depth - 2):
        layers.append(CnnLayer(hidden.copy(), np.zeros(channels), 'relu'))

    last = np.zeros((1, channels, 3, 3))
    last[0, 0], last[0, 1], last[0, 2], last[0, 3] = -b, b, d, -d
    layers.append(CnnLayer(last, np.zeros(1), 'none'))
    return CnnWeights(layers, residual=True)


def as_weights(weights):
    # type: (Union[CnnWeights, str, None]) -> CnnWeights
    """Weights from an object, a file path, or the shipped synthetic weights when None."""
    if weights is None:
        return synthetic_weights()
    if isinstance(weights, CnnWeights):
        return weights
    return load_cnn_weights(weights)
