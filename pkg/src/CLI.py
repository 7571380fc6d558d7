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

import argparse
import os
import sys
from typing import Optional, Sequence

import numpy as np

from Exceptions import ConfigError, InterpolationError, LoadError
from Logger import get_logger, set_verbosity
from motion.Flow import FlowField
from motion.Reversal import reverse_flow
from pipeline.Config import MODES, PipelineConfig
from pipeline.Evaluation import evaluate, write_report
from pipeline.Pipeline import Pipeline, component_table, interpolate, interpolate_multi
from pipeline.Serialization import (Checkpoint, load_checkpoint, load_dataset, read_flo, write_dataset, write_flo,
                                    write_image, write_png, write_pnm)
from pipeline.Training import train, training_quads, write_training_outputs
from synth.Dataset import DIFFICULTIES, make_dataset, quad_from_scene, read_scene_file
from synth.Oracles import brute_force_reverse
from utility_functions.Plot_utilities import flow_to_color
from utility_functions.Utilities import atomic_write_text

logger = get_logger('cli')


class _Parser(argparse.ArgumentParser):

    def error(self, message: str) -> None:
        raise ConfigError(message)


class CLI:
    """
    Command line surface. Every command returns exit code 0 on success;
    library errors end with code 2 and internal failures with code 1, each
    reported as a single 'ErrorClass: message' line on stderr.
    """

    def __init__(self) -> None:
        self.parser = self.__parser()
        self._handlers = {
            'synth': self.__synth,
            'interpolate': self.__interpolate,
            'train': self.__train,
            'eval': self.__eval,
            'reverse-flow': self.__reverse_flow,
            'viz': self.__viz,
            'params': self.__params,
        }

    @staticmethod
    def __parser() -> argparse.ArgumentParser:
        parser = _Parser(prog='vfikit', description='Quadratic-motion video frame interpolation')
        parser.add_argument('-v', '--verbose', action='store_true', help='debug logging')
        commands = parser.add_subparsers(dest='command', required=True, parser_class=_Parser)

        synth = commands.add_parser('synth', help='generate a synthetic dataset')
        synth.add_argument('--spec', help='scene description file (single quad)')
        synth.add_argument('--n', type=int, default=8)
        synth.add_argument('--seed', type=int, default=0)
        synth.add_argument('--size', type=int, default=64)
        synth.add_argument('--difficulty', choices=sorted(DIFFICULTIES), default='moderate')
        synth.add_argument('--flow-model', choices=('exact', 'estimator'), default='exact')
        synth.add_argument('--t', type=float, default=0.5)
        synth.add_argument('--format', choices=('ppm', 'png'), default='ppm')
        synth.add_argument('--out', required=True, help='dataset directory')

        interp = commands.add_parser('interpolate', help='interpolate one quad')
        interp.add_argument('--quad', required=True, help='manifest, dataset directory or scene description')
        interp.add_argument('--row', type=int, default=0, help='manifest row')
        interp.add_argument('--mode', choices=MODES)
        interp.add_argument('--t', type=float, nargs='+', help='one or more target times')
        interp.add_argument('--config')
        interp.add_argument('--checkpoint')
        interp.add_argument('--out', required=True, help='output image (.ppm or .png)')
        interp.add_argument('--diagnostics', help='directory for flow, mask and hole images')

        training = commands.add_parser('train', help='train the learned pipeline')
        training.add_argument('--config', help='configuration file')
        training.add_argument('--steps', type=int)
        training.add_argument('--out', required=True, help='output directory')

        evaluation = commands.add_parser('eval', help='evaluate on a dataset')
        evaluation.add_argument('--dataset', help='manifest or directory (synthetic quads from the config when omitted)')
        evaluation.add_argument('--config')
        evaluation.add_argument('--mode', choices=MODES)
        evaluation.add_argument('--checkpoint')
        evaluation.add_argument('--threads', type=int)
        evaluation.add_argument('--report', required=True, help='tab-separated report (.jsonl records written next to it)')

        reverse = commands.add_parser('reverse-flow', help='reverse a forward flow')
        reverse.add_argument('--in', dest='source', required=True)
        reverse.add_argument('--out', required=True)
        reverse.add_argument('--oracle', action='store_true', help='use the brute-force reference')

        viz = commands.add_parser('viz', help='colour-code a flow file')
        viz.add_argument('--in', dest='source', required=True)
        viz.add_argument('--out', required=True)

        params = commands.add_parser('params', help='component parameter and runtime table')
        params.add_argument('--config')
        params.add_argument('--out', help='optional tab-separated copy of the table')
        return parser

    def run(self, argv: Optional[Sequence[str]] = None) -> int:
        try:
            args = self.parser.parse_args(argv)
            set_verbosity('DEBUG' if args.verbose else 'INFO')
            self._handlers[args.command](args)
            return 0
        except InterpolationError as e:
            self.__report(type(e).__name__, e)
            return 2
        except Exception as e:
            self.__report('InternalError', e)
            return 1

    @staticmethod
    def __report(name: str, error: BaseException) -> None:
        message = ' '.join(str(error).split())
        print(f"{name}: {message}", file=sys.stderr)

    @staticmethod
    def __checkpoint(args: argparse.Namespace) -> Optional[Checkpoint]:
        return load_checkpoint(args.checkpoint) if getattr(args, 'checkpoint', None) else None

    @staticmethod
    def __config(args: argparse.Namespace, checkpoint: Optional[Checkpoint] = None) -> PipelineConfig:
        """--config wins, then the checkpoint's snapshot, then the defaults; --mode overrides all three"""

        if getattr(args, 'config', None):
            config = PipelineConfig.load(args.config)
        elif checkpoint is not None:
            config = PipelineConfig.from_text(checkpoint.config_text)
        else:
            config = PipelineConfig()
        if getattr(args, 'mode', None):
            config = config.with_overrides(mode=args.mode)
        return config

    @staticmethod
    def __pipeline(config: PipelineConfig, checkpoint: Optional[Checkpoint]) -> Pipeline:
        if checkpoint is not None:
            return Pipeline.from_checkpoint(checkpoint, mode=config.mode)
        if config.mode == 'learned':
            logger.warning("learned mode without --checkpoint uses freshly initialised networks")
        return Pipeline(config)

    def __synth(self, args: argparse.Namespace) -> None:
        image_ext = f'.{args.format}'
        if args.spec:
            quads = [quad_from_scene(read_scene_file(args.spec), args.t, args.flow_model, source=args.spec)]
        else:
            quads = make_dataset(args.n, args.seed, args.size, args.difficulty, args.t, args.flow_model)
        path = write_dataset(quads, args.out, image_ext)
        print(path)

    @staticmethod
    def __load_quad(path: str, row: int):
        if path.endswith('.txt') and os.path.isfile(path):
            return quad_from_scene(read_scene_file(path), source=path)
        return load_dataset(path, row)[0]

    def __interpolate(self, args: argparse.Namespace) -> None:
        checkpoint = self.__checkpoint(args)
        config = self.__config(args, checkpoint)
        quad = self.__load_quad(args.quad, args.row)
        pipeline = self.__pipeline(config, checkpoint)
        ts = args.t or [quad.t]

        if len(ts) == 1:
            frame, diagnostics = interpolate(quad, config, ts[0], pipeline)
            write_image(frame, args.out)
            if args.diagnostics:
                self.__write_diagnostics(diagnostics, args.diagnostics)
            print(args.out)
            return

        stem, ext = os.path.splitext(args.out)
        for t, frame in interpolate_multi(quad, config, ts, pipeline):
            path = f'{stem}_t{t:.3f}{ext}'
            write_image(frame, path)
            print(path)

    @staticmethod
    def __write_diagnostics(diagnostics, directory: str) -> None:
        os.makedirs(directory, exist_ok=True)
        flows = {'flow_0t': diagnostics.flow_0t, 'flow_1t': diagnostics.flow_1t,
                 'flow_t0': diagnostics.flow_t0, 'flow_t1': diagnostics.flow_t1,
                 'refined_t0': diagnostics.refined_t0, 'refined_t1': diagnostics.refined_t1}
        for name, flow in flows.items():
            data = np.asarray(flow.data)
            write_flo(FlowField(data), os.path.join(directory, f'{name}.flo'))
            write_png(flow_to_color(data), os.path.join(directory, f'{name}.png'))
        write_pnm(diagnostics.mask.data[0], os.path.join(directory, 'mask.pgm'))
        for i, holes in enumerate(diagnostics.holes):
            write_pnm(holes.data.astype(np.float64), os.path.join(directory, f'holes_t{i}.pgm'))

    def __train(self, args: argparse.Namespace) -> None:
        config = self.__config(args)
        if args.steps is not None:
            config = config.with_overrides(steps=args.steps)
        result = train(config)
        paths = write_training_outputs(result, args.out)
        for path in paths.values():
            print(path)

    def __eval(self, args: argparse.Namespace) -> None:
        checkpoint = self.__checkpoint(args)
        config = self.__config(args, checkpoint)
        quads = load_dataset(args.dataset) if args.dataset else training_quads(config)
        pipeline = self.__pipeline(config, checkpoint)
        report = evaluate(quads, config, pipeline, args.threads)
        for path in write_report(report, args.report):
            print(path)
        print(f"mean PSNR {report.mean_psnr:.3f} dB, mean SSIM {report.mean_ssim:.4f}")

    @staticmethod
    def __reverse_flow(args: argparse.Namespace) -> None:
        if not os.path.isfile(args.source):
            raise LoadError(f"missing flow file {args.source}")
        flow = read_flo(args.source)
        if args.oracle:
            reversed_flow = brute_force_reverse(flow)
        else:
            reversed_flow = FlowField(reverse_flow(flow.as_tensor(dtype=np.float64))[0].data)
        write_flo(reversed_flow, args.out)
        print(args.out)

    @staticmethod
    def __viz(args: argparse.Namespace) -> None:
        if not os.path.isfile(args.source):
            raise LoadError(f"missing flow file {args.source}")
        write_png(flow_to_color(read_flo(args.source).data), args.out)
        print(args.out)

    def __params(self, args: argparse.Namespace) -> None:
        table = component_table(Pipeline(self.__config(args)))
        print(table.to_string(float_format=lambda v: f'{v:.4g}'))
        if args.out:
            atomic_write_text(args.out, table.to_csv(sep='\t'))
