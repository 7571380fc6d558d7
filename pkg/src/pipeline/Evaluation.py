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

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import numpy.typing as npt
import pandas as pd

from Exceptions import ContractError
from Logger import get_logger
from losses.Metrics import psnr, ssim
from pipeline.Config import PipelineConfig
from pipeline.Pipeline import Pipeline, interpolate
from synth.Dataset import Quad
from utility_functions.Utilities import atomic_open, thread_count

REPORT_COLUMNS = ('index', 'source', 't', 'mode', 'psnr', 'ssim')

logger = get_logger('eval')


@dataclass
class EvaluationReport:
    mean_psnr: float
    mean_ssim: float
    rows: pd.DataFrame

    def __len__(self) -> int:
        return len(self.rows)


def score_frames(pairs: Sequence[tuple[npt.NDArray, npt.NDArray]]) -> pd.DataFrame:
    """PSNR and SSIM of (prediction, ground truth) frame pairs"""

    return pd.DataFrame([{'psnr': psnr(p, g), 'ssim': ssim(p, g)} for p, g in pairs], columns=['psnr', 'ssim'])


def evaluate(quads: Sequence[Quad], config: PipelineConfig, pipeline: Optional[Pipeline] = None,
             threads: Optional[int] = None) -> EvaluationReport:
    """
    Interpolates every quad at its target time and scores the result
    against the ground-truth frame. Quads are processed in parallel; rows
    keep dataset order.

    :param quads: dataset
    :param config: settings (mode)
    :param pipeline: shared networks for the learned mode
    :param threads: worker count, VFIKIT_THREADS or the CPU count when omitted

    :return:
    """

    missing = [q.source for q in quads if q.gt_frame is None]
    if missing:
        raise ContractError(f"cannot evaluate quads without a ground-truth frame: {missing[:3]}")
    pipeline = pipeline or Pipeline(config)

    def score(item: tuple[int, Quad]) -> dict[str, object]:
        index, quad = item
        frame, _ = interpolate(quad, config, pipeline=pipeline)
        gt = quad.gt_frame.astype(np.float64)
        row = {'index': index, 'source': quad.source, 't': quad.t, 'mode': config.mode,
               'psnr': psnr(frame.astype(np.float64), gt), 'ssim': ssim(frame.astype(np.float64), gt)}
        logger.debug(f"{quad.source}: PSNR {row['psnr']:.3f} dB, SSIM {row['ssim']:.4f}")
        return row

    with ThreadPoolExecutor(max_workers=threads or thread_count()) as executor:
        rows = list(executor.map(score, enumerate(quads)))

    frame = pd.DataFrame(rows, columns=REPORT_COLUMNS)
    report = EvaluationReport(mean_psnr=float(frame['psnr'].mean()) if len(frame) else float('nan'),
                              mean_ssim=float(frame['ssim'].mean()) if len(frame) else float('nan'),
                              rows=frame)
    logger.info(f"{config.mode}: mean PSNR {report.mean_psnr:.3f} dB, mean SSIM {report.mean_ssim:.4f} "
                f"over {len(frame)} quads")
    return report


def write_report(report: EvaluationReport, path: str) -> tuple[str, str]:
    """
    Tab-separated table at path and JSON lines next to it (.jsonl)

    :param report: evaluation report
    :param path: table destination

    :return: (table path, records path)
    """

    records_path = os.path.splitext(path)[0] + '.jsonl'
    with atomic_open(path, 'w', encoding='utf-8', newline='') as file:
        report.rows.to_csv(file, sep='\t', index=False, lineterminator='\n', float_format='%.6f')
    with atomic_open(records_path, 'w', encoding='utf-8', newline='') as file:
        file.write(report.rows.to_json(orient='records', lines=True))
        file.write('\n')
    return path, records_path
