# Copyright (c) 2024 The koopman-uq Authors
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#    http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""
Band plots of an ensemble forecast: one panel per channel holding the
mean +/- spread polygon, one polyline per member, the mean and the truth.
"""
import logging
import xml.etree.ElementTree as ET

import numpy as np

logger = logging.getLogger('svg')

SVG_NS = 'http://www.w3.org/2000/svg'
PANEL_WIDTH = 640
PANEL_HEIGHT = 240
MARGIN = 30


def _points(xs, ys):
    return ' '.join('%.3f,%.3f' % (x, y) for x, y in zip(xs, ys))


def _scaler(low, high, top):
    span = high - low if high > low else 1.0

    def scale(values):
        frac = (np.asarray(values) - low) / span
        return top + MARGIN + (1.0 - frac) * (PANEL_HEIGHT - 2 * MARGIN)
    return scale


def band_plot(times, truth, mean, spread, members, channels):
    """
    :param times: (H,) forecast times
    :param truth: (H, n)
    :param mean: (H, n)
    :param spread: (H, n)
    :param members: (M, H, n)
    :param channels: n names
    :return: the svg root Element
    """
    times = np.asarray(times, dtype=np.float64)
    count = len(channels)
    root = ET.Element('svg', xmlns=SVG_NS, width=str(PANEL_WIDTH),
                      height=str(PANEL_HEIGHT * count))
    t_low, t_high = times.min(), times.max()
    t_span = t_high - t_low if t_high > t_low else 1.0
    xs = MARGIN + (times - t_low) / t_span * (PANEL_WIDTH - 2 * MARGIN)

    for c, name in enumerate(channels):
        top = c * PANEL_HEIGHT
        lower, upper = mean[:, c] - spread[:, c], mean[:, c] + spread[:, c]
        values = np.concatenate([lower, upper, truth[:, c],
                                 members[:, :, c].reshape(-1)])
        scale = _scaler(values.min(), values.max(), top)
        panel = ET.SubElement(root, 'g', {'class': 'channel', 'id': name})
        title = ET.SubElement(panel, 'text', x=str(MARGIN),
                              y=str(top + MARGIN - 10))
        title.text = name
        ET.SubElement(panel, 'polygon', {
            'class': 'band', 'fill': 'lightsteelblue', 'stroke': 'none',
            'points': _points(np.concatenate([xs, xs[::-1]]),
                              np.concatenate([scale(upper),
                                              scale(lower[::-1])]))})
        for j in range(members.shape[0]):
            ET.SubElement(panel, 'polyline', {
                'class': 'member', 'fill': 'none', 'stroke': 'gray',
                'stroke-width': '0.5', 'data-member': str(j),
                'points': _points(xs, scale(members[j, :, c]))})
        for css, color, series in (('mean', 'steelblue', mean[:, c]),
                                   ('truth', 'black', truth[:, c])):
            ET.SubElement(panel, 'path', {
                'class': css, 'fill': 'none', 'stroke': color,
                'd': 'M ' + ' L '.join(
                    '%.3f %.3f' % (x, y) for x, y in zip(xs, scale(series)))})
    return root


def write_band_plot(path, times, truth, mean, spread, members, channels):
    root = band_plot(times, truth, mean, spread, members, channels)
    ET.ElementTree(root).write(path, encoding='utf-8', xml_declaration=True)
    logger.info('Wrote band plot of [%d] members and [%d] channels to [%s]',
                members.shape[0], len(channels), path)
