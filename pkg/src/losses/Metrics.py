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


from __future__ import annotations

from typing import Optional, Union

import numpy as np
import numpy.typing as npt
import scipy.signal

from Exceptions import DimensionError
from tensor import Tensor

PSNR_CAP = 99.0
WINDOW_SIZE = 11
WINDOW_SIGMA = 1.5

ImageLike = Union[Tensor, npt.NDArray]


def _array(image: ImageLike) -> np.ndarray:
    return np.asarray(image.data if isinstance(image, Tensor) else image)


def default_peak(image: np.ndarray) -> float:
    """255 for 8-bit images, 1.0 for float images in [0, 1]"""

    return 255.0 if image.dtype == np.uint8 else 1.0


def psnr(pred: ImageLike, gt: ImageLike, peak: Optional[float] = None) -> float:
    """
    Peak signal-to-noise ratio in dB, capped at 99 dB (zero error)

    :param pred: image of any shape
    :param gt: image of the same shape
    :param peak: maximum signal value, inferred from the dtype when omitted

    :return:
    """

    pred, gt = _array(pred), _array(gt)
    if pred.shape != gt.shape:
        raise DimensionError(f"psnr: shapes {pred.shape} and {gt.shape} differ")
    peak = default_peak(gt) if peak is None else peak
    mse = float(np.mean(np.square(pred.astype(np.float64) - gt.astype(np.float64))))
    if mse == 0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * np.log10(peak * peak / mse))


def gaussian_window(size: int = WINDOW_SIZE, sigma: float = WINDOW_SIGMA) -> np.ndarray:
    offsets = np.arange(size) - (size - 1) / 2
    profile = np.exp(-(offsets ** 2) / (2 * sigma ** 2))
    profile /= profile.sum()
    return np.outer(profile, profile)


def _ssim_channel(x: np.ndarray, y: np.ndarray, window: np.ndarray, c1: float, c2: float) -> float:
    def filt(image):
        return scipy.signal.correlate2d(image, window, mode='valid')

    mu_x, mu_y = filt(x), filt(y)
    sigma_xx = filt(x * x) - mu_x * mu_x
    sigma_yy = filt(y * y) - mu_y * mu_y
    sigma_xy = filt(x * y) - mu_x * mu_y
    numerator = (2 * mu_x * mu_y + c1) * (2 * sigma_xy + c2)
    denominator = (mu_x * mu_x + mu_y * mu_y + c1) * (sigma_xx + sigma_yy + c2)
    return float(np.mean(numerator / denominator))


def ssim(pred: ImageLike, gt: ImageLike, data_range: Optional[float] = None) -> float:
    """
    Single-scale structural similarity with an 11x11 Gaussian window
    (sigma 1.5), averaged over valid windows and then over channels

    :param pred: [H, W] or [C, H, W]
    :param gt: same shape
    :param data_range: dynamic range L, inferred from the dtype when omitted

    :return: value in [-1, 1]
    """

    pred, gt = _array(pred), _array(gt)
    if pred.shape != gt.shape:
        raise DimensionError(f"ssim: shapes {pred.shape} and {gt.shape} differ")
    if pred.ndim == 2:
        pred, gt = pred[None], gt[None]
    if pred.ndim != 3 or min(pred.shape[-2:]) < WINDOW_SIZE:
        raise DimensionError(f"ssim needs [C, H, W] images of at least {WINDOW_SIZE} px, got {pred.shape}")

    level = default_peak(gt) if data_range is None else data_range
    c1, c2 = (0.01 * level) ** 2, (0.03 * level) ** 2
    window = gaussian_window()
    values = [_ssim_channel(p.astype(np.float64), g.astype(np.float64), window, c1, c2) for p, g in zip(pred, gt)]
    return float(np.mean(values))
