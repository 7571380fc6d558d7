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
from dataclasses import dataclass, fields, replace
from typing import Any

import numpy as np

from Exceptions import ConfigError
from losses.Losses import LossWeights
from losses.Metrics import WINDOW_SIZE as SSIM_WINDOW

MODES = ('learned', 'analytic-baseline', 'gt-coeffs')
PRECISIONS = {'float32': np.float32, 'float64': np.float64}
DIFFICULTIES = ('linear', 'moderate', 'hard')
FLOW_MODELS = ('exact', 'estimator')
TRUE_WORDS = ('1', 'true', 'yes', 'on')
FALSE_WORDS = ('0', 'false', 'no', 'off')


@dataclass
class PipelineConfig:
    """
    Every setting of the interpolation pipeline, training and evaluation.

    Desk-scale defaults: batch 4 on 64x64 crops (instead of 64 on 256x256),
    learning rate 2e-4 and the loss weights 204 / 0.005 / 102 / 1 kept.
    late_phase_step 0 never switches off the warping and smoothness terms;
    plateau_patience 0 disables the learning rate schedule; an empty
    dataset means synthetic quads drawn from the synth_* settings.
    """

    mode: str = 'learned'
    seed: int = 0
    precision: str = 'float32'
    nme_widths: tuple[int, ...] = (16, 32, 64)
    mr_widths: tuple[int, ...] = (32, 64, 96)
    bme_widths: tuple[int, ...] = (32, 16)
    lr: float = 2e-4
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 4
    steps: int = 200
    late_phase_step: int = 0
    lambda_r: float = 204.0
    lambda_p: float = 0.005
    lambda_w: float = 102.0
    lambda_s: float = 1.0
    plateau_patience: int = 0
    plateau_factor: float = 10.0
    min_lr: float = 2e-6
    log_every: int = 10
    dataset: str = ''
    synth_n: int = 16
    synth_seed: int = 0
    synth_size: int = 64
    synth_difficulty: str = 'linear'
    synth_flow_model: str = 'exact'
    ts: tuple[float, ...] = (0.5,)
    two_frame_input: bool = False
    perceptual_seed: int = 7

    def __post_init__(self) -> None:
        self._check(self.mode in MODES, 'mode', f"one of {MODES}")
        self._check(self.precision in PRECISIONS, 'precision', f"one of {tuple(PRECISIONS)}")
        self._check(len(self.nme_widths) == 3 and min(self.nme_widths) > 0, 'nme_widths', "three positive widths")
        self._check(len(self.mr_widths) == 3 and min(self.mr_widths) > 0, 'mr_widths', "three positive widths")
        self._check(len(self.bme_widths) == 2 and min(self.bme_widths) > 0, 'bme_widths', "two positive widths")
        self._check(self.lr >= 0, 'lr', "nonnegative")
        self._check(0 <= self.beta1 < 1 and 0 <= self.beta2 < 1, 'beta1/beta2', "in [0, 1)")
        self._check(self.adam_eps > 0, 'adam_eps', "positive")
        self._check(self.batch_size > 0, 'batch_size', "positive")
        self._check(self.steps >= 0 and self.late_phase_step >= 0, 'steps/late_phase_step', "nonnegative")
        for name in ('lambda_r', 'lambda_p', 'lambda_w', 'lambda_s'):
            self._check(getattr(self, name) >= 0, name, "nonnegative")
        weights = (self.lambda_r, self.lambda_p, self.lambda_w, self.lambda_s)
        self._check(max(weights) > 0, 'lambda_r/lambda_p/lambda_w/lambda_s', "at least one positive loss weight")
        self._check(self.late_phase_step == 0 or max(self.lambda_r, self.lambda_p) > 0, 'lambda_r/lambda_p',
                    "a positive reconstruction or perceptual weight when late_phase_step is set")
        self._check(self.plateau_patience >= 0 and self.plateau_factor >= 1, 'plateau_patience/plateau_factor',
                    "patience >= 0 and factor >= 1")
        self._check(self.min_lr >= 0, 'min_lr', "nonnegative")
        self._check(self.log_every > 0, 'log_every', "positive")
        self._check(self.synth_n > 0 and self.synth_size >= SSIM_WINDOW, 'synth_n/synth_size',
                    f"n > 0 and size >= {SSIM_WINDOW} (the SSIM window)")
        self._check(self.synth_difficulty in DIFFICULTIES, 'synth_difficulty', f"one of {DIFFICULTIES}")
        self._check(self.synth_flow_model in FLOW_MODELS, 'synth_flow_model', f"one of {FLOW_MODELS}")
        self._check(len(self.ts) > 0 and all(0 < t < 1 for t in self.ts), 'ts', "values strictly inside (0, 1)")

    def _check(self, condition: bool, key: str, expected: str) -> None:
        if not condition:
            raise ConfigError(f"invalid {key}: expected {expected}")

    @property
    def dtype(self):
        return PRECISIONS[self.precision]

    def loss_weights(self) -> LossWeights:
        return LossWeights(self.lambda_r, self.lambda_p, self.lambda_w, self.lambda_s)

    def with_overrides(self, **overrides: Any) -> PipelineConfig:
        unknown = set(overrides) - {f.name for f in fields(self)}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return replace(self, **overrides)

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                text = ','.join(repr(v) for v in value)
            elif isinstance(value, bool):
                text = 'true' if value else 'false'
            elif isinstance(value, float):
                text = repr(value)
            else:
                text = str(value)
            lines.append(f'{f.name} {text}' if text != '' else f.name)
        return '\n'.join(lines) + '\n'

    @classmethod
    def from_text(cls, text: str) -> PipelineConfig:
        """
        Parses 'key value' lines; '#' starts a comment, list values are
        comma separated and a key without value means an empty string

        :param text: configuration text

        :return:
        """

        defaults = cls()
        known = {f.name: getattr(defaults, f.name) for f in fields(cls)}
        values = {}
        for number, raw in enumerate(text.splitlines(), start=1):
            line = raw.split('#', 1)[0].strip()
            if not line:
                continue
            key, _, value = line.partition(' ')
            if key not in known:
                raise ConfigError(f"line {number}: unknown key {key!r}")
            values[key] = _convert(key, value.strip(), known[key])
        return cls(**values)

    @classmethod
    def load(cls, path: str) -> PipelineConfig:
        if not os.path.isfile(path):
            raise ConfigError(f"config file {path} does not exist")
        with open(path, encoding='utf-8') as file:
            return cls.from_text(file.read())


def _convert(key: str, value: str, default: Any) -> Any:
    try:
        if isinstance(default, bool):
            word = value.lower()
            if word not in TRUE_WORDS + FALSE_WORDS:
                raise ValueError(f"{value!r} is not a boolean")
            return word in TRUE_WORDS
        if isinstance(default, tuple):
            element = type(default[0])
            return tuple(element(v) for v in value.split(',') if v.strip())
        return type(default)(value)
    except ValueError as e:
        raise ConfigError(f"invalid value for {key}: {e}") from e
