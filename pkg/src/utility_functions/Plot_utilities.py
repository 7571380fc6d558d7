"""
=========================================================================
Tool for video frame interpolation

Created by Bartlomiej Jargut
https://github.com/dee7ine
-------------------------------------------------------------------------
This program is free software: you can redistribute it and/or modify
it under the terms of the GNU General Public License as published by
the Free Software Foundation, either version 3 of the License, or
(at your option) any later version.
This program is distributed in the hope that it will be useful,
but WITHOUT ANY WARRANTY; without even the implied warranty of
MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE. See the
GNU General Public License for more details.

You should have received a copy of the GNU General Public License
along with this program. If not, see <https://www.gnu.org/licenses/>.

=========================================================================
"""


import matplotlib

matplotlib.use('Agg')

import matplotlib.pyplot as plt
import numpy as np
import numpy.typing as npt
import pandas as pd

# hue segments of the Middlebury colour wheel: red-yellow, yellow-green,
# green-cyan, cyan-blue, blue-magenta, magenta-red
WHEEL_SEGMENTS = (15, 6, 4, 11, 13, 6)


def color_wheel() -> npt.NDArray:
    """
    Middlebury flow colour wheel

    :return: [55, 3] array of RGB values in [0, 255]
    """

    ry, yg, gc, cb, bm, mr = WHEEL_SEGMENTS
    wheel = np.zeros((sum(WHEEL_SEGMENTS), 3))
    col = 0

    wheel[col:col + ry, 0] = 255
    wheel[col:col + ry, 1] = np.floor(255 * np.arange(ry) / ry)
    col += ry

    wheel[col:col + yg, 0] = 255 - np.floor(255 * np.arange(yg) / yg)
    wheel[col:col + yg, 1] = 255
    col += yg

    wheel[col:col + gc, 1] = 255
    wheel[col:col + gc, 2] = np.floor(255 * np.arange(gc) / gc)
    col += gc

    wheel[col:col + cb, 1] = 255 - np.floor(255 * np.arange(cb) / cb)
    wheel[col:col + cb, 2] = 255
    col += cb

    wheel[col:col + bm, 2] = 255
    wheel[col:col + bm, 0] = np.floor(255 * np.arange(bm) / bm)
    col += bm

    wheel[col:col + mr, 2] = 255 - np.floor(255 * np.arange(mr) / mr)
    wheel[col:col + mr, 0] = 255
    return wheel


def flow_to_color(flow: npt.NDArray) -> npt.NDArray:
    """
    Colour coding of a flow field: hue encodes direction, saturation the
    magnitude normalised by the largest magnitude in the image. Zero flow
    maps to white.

    :param flow: [H, W, 2]

    :return: [H, W, 3] uint8 image
    """

    u, v = flow[..., 0].astype(np.float64), flow[..., 1].astype(np.float64)
    radius = np.sqrt(u ** 2 + v ** 2)
    largest = radius.max()
    if largest > 0:
        u, v, radius = u / largest, v / largest, radius / largest

    wheel = color_wheel()
    n_colors = wheel.shape[0]
    angle = np.arctan2(-v, -u) / np.pi
    position = (angle + 1) / 2 * (n_colors - 1)
    k0 = np.floor(position).astype(np.int64)
    k1 = (k0 + 1) % n_colors
    frac = (position - k0)[..., None]

    colour = ((1 - frac) * wheel[k0] + frac * wheel[k1]) / 255
    saturated = 1 - radius[..., None] * (1 - colour)
    return np.floor(255 * saturated).astype(np.uint8)


def plot_loss_log(log: pd.DataFrame, path: str, **plt_kwargs) -> None:
    """
    Plots the total loss and its weighted parts against the training step

    :param log: training log with a step column and loss columns
    :param path: PNG destination
    :param plt_kwargs: matplotlib kwargs for the total loss curve (color, linewidth, ...)

    :return:
    """

    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(log['step'], log['total'], label='total', **plt_kwargs)
    for column in ('reconstruction', 'perceptual', 'warping', 'smoothness'):
        if column in log and log[column].abs().sum() > 0:
            ax.plot(log['step'], log[column], lw=0.8, ls='--', label=column)
    ax.set_xlabel('step')
    ax.set_ylabel('loss')
    ax.set_yscale('log' if (log['total'] > 0).all() else 'linear')
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
