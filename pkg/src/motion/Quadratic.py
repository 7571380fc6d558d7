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

from typing import Mapping

from Exceptions import ContractError, DimensionError
from motion.Flow import FlowLike, MotionCoeffs, flow_tensor
from tensor import Tensor


def check_time(t: float) -> float:
    if not 0 < t < 1:
        raise ContractError(f"t must lie strictly between 0 and 1, got {t}")
    return float(t)


def quadratic_flow(alpha: Tensor, beta: Tensor, tau: float) -> Tensor:
    """
    alpha * tau + beta * tau^2 for any real tau. Shared by the oracle and
    the checked evaluation below so both follow one arithmetic path.
    """

    return alpha * tau + beta * (tau * tau)


def eval_quadratic_flow(coeffs: MotionCoeffs, t: float, anchor: int) -> Tensor:
    """
    Forward intermediate flow from an anchor frame to time t.
    Anchor 0: alpha0 * t + beta0 * t^2.
    Anchor 1: alpha1 * (1 - t) + beta1 * (1 - t)^2.

    :param coeffs: coefficient maps
    :param t: target time in (0, 1)
    :param anchor: 0 or 1

    :return: [..., H, W, 2] flow tensor
    """

    t = check_time(t)
    alpha, beta = coeffs.anchor(anchor)
    return quadratic_flow(alpha, beta, t if anchor == 0 else 1 - t)


def analytic_coeffs(f_fwd: FlowLike, f_bwd_time: FlowLike) -> tuple[Tensor, Tensor]:
    """
    Closed-form coefficients from the flows towards the next and the
    previous frame of an anchor: alpha = (F+ - F-) / 2, beta = (F+ + F-) / 2

    :param f_fwd: flow to the frame one interval ahead (F_{0->1} for anchor 0, F_{1->0} for anchor 1)
    :param f_bwd_time: flow to the frame one interval behind (F_{0->-1}, F_{1->2})

    :return: (alpha, beta)
    """

    forward, backward = flow_tensor(f_fwd), flow_tensor(f_bwd_time)
    if forward.shape != backward.shape:
        raise DimensionError(f"analytic_coeffs: flow shapes {forward.shape} and {backward.shape} differ")
    return (forward - backward) * 0.5, (forward + backward) * 0.5


def analytic_motion(flows: Mapping[tuple[int, int], FlowLike]) -> MotionCoeffs:
    """
    Coefficients for both anchors from the six observed flows of a quad,
    keyed by (from_frame, to_frame)

    :param flows: needs (0, 1), (0, -1), (1, 0) and (1, 2)

    :return:
    """

    alpha0, beta0 = analytic_coeffs(flows[(0, 1)], flows[(0, -1)])
    alpha1, beta1 = analytic_coeffs(flows[(1, 0)], flows[(1, 2)])
    return MotionCoeffs(alpha0, beta0, alpha1, beta1)
