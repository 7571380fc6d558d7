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

import math
import os
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from Exceptions import ContractError, TrainingDiverged
from Logger import get_logger
from losses.Losses import FeatureExtractor, compute_losses, total_loss
from pipeline.Config import PipelineConfig
from pipeline.Pipeline import Pipeline, QuadBatch
from pipeline.Serialization import Checkpoint, load_dataset, save_checkpoint
from synth.Dataset import Quad, make_dataset
from tensor import Tape, Tensor, backward
from tensor.Optim import AdamState, adam_step
from utility_functions.Plot_utilities import plot_loss_log
from utility_functions.Utilities import atomic_open

LOG_COLUMNS = ('step', 'lr', 'phase', 'lambda_w', 'lambda_s', 'total', 'reconstruction', 'perceptual', 'warping',
               'smoothness')
SMOOTHING = 0.9

logger = get_logger('train')


@dataclass
class TrainingResult:
    pipeline: Pipeline
    adam: AdamState
    log: pd.DataFrame
    steps: int = 0
    lr_drops: list[int] = field(default_factory=list)

    def checkpoint(self) -> Checkpoint:
        return Checkpoint(config_text=self.pipeline.config.to_text(),
                          params={k: v.data for k, v in self.pipeline.parameters().items()},
                          adam=self.adam, step=self.steps)


def training_quads(config: PipelineConfig) -> list[Quad]:
    """The manifest named by config.dataset, or synthetic quads from the synth_* keys"""

    if config.dataset:
        quads = load_dataset(config.dataset)
    else:
        quads = make_dataset(config.synth_n, config.synth_seed, config.synth_size, config.synth_difficulty,
                             t=config.ts[0], flow_model=config.synth_flow_model)
    if config.two_frame_input:
        quads = [q.as_two_frame() for q in quads]
    return quads


def batch_schedule(n: int, batch_size: int, steps: int, seed: int) -> list[list[int]]:
    """
    Quad indices of every step: seeded shuffles of the dataset cut into
    batches, batches never straddle two epochs

    :param n: dataset size
    :param batch_size: quads per step (capped at n)
    :param steps: number of steps
    :param seed: shuffle seed

    :return:
    """

    rng = np.random.default_rng(seed)
    size = min(batch_size, n)
    schedule: list[list[int]] = []
    while len(schedule) < steps:
        order = rng.permutation(n)
        for start in range(0, n - size + 1, size):
            schedule.append([int(i) for i in order[start:start + size]])
    return schedule[:steps]


class PlateauSchedule:
    """
    Divides the learning rate by factor when the exponentially smoothed
    loss has not improved for patience steps; never below min_lr
    """

    def __init__(self, lr: float, patience: int, factor: float, min_lr: float) -> None:
        self.lr = lr
        self.patience = patience
        self.factor = factor
        self.min_lr = min_lr
        self.smoothed: Optional[float] = None
        self.best = math.inf
        self.waiting = 0

    def update(self, loss: float) -> bool:
        self.smoothed = loss if self.smoothed is None else SMOOTHING * self.smoothed + (1 - SMOOTHING) * loss
        if self.patience <= 0:
            return False
        if self.smoothed < self.best:
            self.best, self.waiting = self.smoothed, 0
            return False
        self.waiting += 1
        if self.waiting < self.patience or self.lr <= self.min_lr:
            return False
        self.lr = max(self.lr / self.factor, self.min_lr)
        self.waiting = 0
        return True


def train(config: PipelineConfig, quads: Optional[Sequence[Quad]] = None,
          pipeline: Optional[Pipeline] = None) -> TrainingResult:
    """
    Adam on the weighted loss over mini-batches of quads. Deterministic
    for a given config. From late_phase_step on the warping and smoothness
    weights are zero.

    :param config: settings
    :param quads: training quads, drawn from the config when omitted
    :param pipeline: networks to train, built from the config when omitted

    :return: trained pipeline, optimizer state and the per-step loss log
    """

    quads = list(quads) if quads is not None else training_quads(config)
    if not quads or any(q.gt_frame is None for q in quads):
        raise ContractError("training needs quads with ground-truth intermediate frames")
    pipeline = pipeline or Pipeline(config.with_overrides(mode='learned'))
    phi = FeatureExtractor(config.perceptual_seed, config.dtype)
    base_weights = config.loss_weights()
    schedule = PlateauSchedule(config.lr, config.plateau_patience, config.plateau_factor, config.min_lr)
    params = pipeline.parameters()
    adam = AdamState()
    rows, drops = [], []
    phase = base_weights.phase

    logger.info(f"training on {len(quads)} quads for {config.steps} steps (batch {min(config.batch_size, len(quads))})")
    for step, indices in enumerate(batch_schedule(len(quads), config.batch_size, config.steps, config.seed), start=1):
        weights = base_weights.at_step(step, config.late_phase_step)
        if weights.phase != phase:
            phase = weights.phase
            logger.info(f"step {step}: late phase, lambda_w = {weights.lambda_w} and lambda_s = {weights.lambda_s}")

        batch = QuadBatch.from_quads([quads[i] for i in indices], config.dtype)
        with Tape() as tape:
            frame, diagnostics = pipeline.forward(batch, mode='learned')
            parts = compute_losses(frame, Tensor(batch.gt_frame), Tensor(batch.frame0), Tensor(batch.frame1),
                                   diagnostics.refined_t0, diagnostics.refined_t1, phi, weights)
            loss = total_loss(parts, weights)

        values = parts.as_floats()
        total = loss.item()
        if not np.isfinite(total):
            raise TrainingDiverged(f"non-finite loss at step {step}: total {total}, parts {values}")

        backward(tape, loss)
        adam_step(params, adam, schedule.lr, config.beta1, config.beta2, config.adam_eps)
        pipeline.zero_grad()

        rows.append({'step': step, 'lr': schedule.lr, 'phase': weights.phase, 'lambda_w': weights.lambda_w,
                     'lambda_s': weights.lambda_s, 'total': total, **values})
        if step % config.log_every == 0 or step == 1:
            logger.info(f"step {step}: loss {total:.6g} (lr {schedule.lr:.3g})")
        if schedule.update(total):
            drops.append(step)
            logger.info(f"step {step}: loss plateau, learning rate lowered to {schedule.lr:.3g}")

    log = pd.DataFrame(rows, columns=LOG_COLUMNS)
    return TrainingResult(pipeline=pipeline, adam=adam, log=log, steps=config.steps, lr_drops=drops)


def write_training_outputs(result: TrainingResult, directory: str) -> dict[str, str]:
    """
    Checkpoint, tab-separated loss log and loss curve plot

    :param result: training result
    :param directory: output directory

    :return: written paths keyed checkpoint, log, plot
    """

    os.makedirs(directory, exist_ok=True)
    paths = {'checkpoint': os.path.join(directory, 'checkpoint.bin'),
             'log': os.path.join(directory, 'loss_log.tsv'),
             'plot': os.path.join(directory, 'loss_curve.png')}
    save_checkpoint(result.checkpoint(), paths['checkpoint'])
    with atomic_open(paths['log'], 'w', encoding='utf-8', newline='') as file:
        result.log.to_csv(file, sep='\t', index=False, lineterminator='\n')
    if len(result.log):
        with atomic_open(paths['plot'], 'wb') as file:
            plot_loss_log(result.log, file)
    return paths
