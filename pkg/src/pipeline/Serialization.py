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
import struct
from dataclasses import dataclass, field
from typing import Optional

import matplotlib.image
import numpy as np
import numpy.typing as npt
import pandas as pd

from Exceptions import FormatError, LoadError
from Logger import get_logger
from motion.Flow import FlowField, OcclusionMap
from synth.Dataset import FLOW_PAIRS, FRAME_TIMES, Quad, scene_to_text
from tensor.Optim import AdamState
from utility_functions.Utilities import atomic_open, atomic_write_bytes, atomic_write_text, relative_path

FLO_MAGIC = 202021.25
FLO_HEADER = struct.Struct('<fii')

CHECKPOINT_MAGIC = b'VFIKCKPT'
CHECKPOINT_VERSION = 1
CHECKPOINT_HEADER = struct.Struct('<8sIQQI')
DTYPE_CODES = {np.dtype('<f4'): 0, np.dtype('<f8'): 1}
DTYPES = {code: dtype for dtype, code in DTYPE_CODES.items()}

MANIFEST_NAME = 'manifest.tsv'

logger = get_logger('io')


def read_flo(path: str) -> FlowField:
    """
    Middlebury .flo: float32 magic 202021.25, int32 width, int32 height,
    then row-major interleaved (u, v) float32 pairs, all little-endian

    :param path: file path

    :return:
    """

    with open(path, 'rb') as file:
        payload = file.read()
    if len(payload) < FLO_HEADER.size:
        raise FormatError(f"{path}: truncated .flo header ({len(payload)} bytes)")
    magic, width, height = FLO_HEADER.unpack_from(payload)
    if magic != np.float32(FLO_MAGIC):
        raise FormatError(f"{path}: wrong .flo magic {magic!r}")
    if width <= 0 or height <= 0:
        raise FormatError(f"{path}: invalid .flo size {width}x{height}")
    expected = FLO_HEADER.size + 8 * width * height
    if len(payload) != expected:
        raise FormatError(f"{path}: .flo payload has {len(payload)} bytes, expected {expected}")
    data = np.frombuffer(payload, dtype='<f4', offset=FLO_HEADER.size).reshape(height, width, 2)
    return FlowField(data.astype(np.float32))


def write_flo(flow: FlowField, path: str) -> None:
    data = np.ascontiguousarray(np.asarray(flow.data), dtype='<f4')
    atomic_write_bytes(path, FLO_HEADER.pack(FLO_MAGIC, flow.width, flow.height) + data.tobytes())


def to_uint8(image: npt.NDArray) -> npt.NDArray:
    """[C, H, W] floats in [0, 1] or uint8 -> uint8"""

    if image.dtype == np.uint8:
        return image
    return np.round(np.clip(image, 0, 1) * 255).astype(np.uint8)


def _read_token(payload: bytes, position: int) -> tuple[bytes, int]:
    while position < len(payload):
        if payload[position:position + 1] == b'#':
            while position < len(payload) and payload[position:position + 1] != b'\n':
                position += 1
        elif payload[position:position + 1].isspace():
            position += 1
        else:
            break
    start = position
    while position < len(payload) and not payload[position:position + 1].isspace():
        position += 1
    return payload[start:position], position


def read_pnm(path: str) -> npt.NDArray:
    """
    Binary PPM (P6) or PGM (P5) with maxval 255

    :param path: file path

    :return: uint8 array [3, H, W] for P6, [H, W] for P5
    """

    with open(path, 'rb') as file:
        payload = file.read()
    position = 0
    tokens = []
    for _ in range(4):
        token, position = _read_token(payload, position)
        tokens.append(token)
    kind = tokens[0]
    if kind not in (b'P6', b'P5'):
        raise FormatError(f"{path}: unsupported image type {kind!r}")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as e:
        raise FormatError(f"{path}: malformed header") from e
    if maxval != 255:
        raise FormatError(f"{path}: only 8-bit images are supported (maxval {maxval})")
    channels = 3 if kind == b'P6' else 1
    start = position + 1
    size = width * height * channels
    if len(payload) < start + size:
        raise FormatError(f"{path}: truncated image data")
    pixels = np.frombuffer(payload, dtype=np.uint8, count=size, offset=start)
    if channels == 1:
        return pixels.reshape(height, width).copy()
    return np.moveaxis(pixels.reshape(height, width, 3), -1, 0).copy()


def write_pnm(image: npt.NDArray, path: str) -> None:
    """Writes [3, H, W] as P6 or [H, W] as P5 (floats are quantised to 8 bit)"""

    pixels = to_uint8(np.asarray(image))
    if pixels.ndim == 3:
        header = f'P6\n{pixels.shape[2]} {pixels.shape[1]}\n255\n'.encode('ascii')
        body = np.ascontiguousarray(np.moveaxis(pixels, 0, -1)).tobytes()
    else:
        header = f'P5\n{pixels.shape[1]} {pixels.shape[0]}\n255\n'.encode('ascii')
        body = np.ascontiguousarray(pixels).tobytes()
    atomic_write_bytes(path, header + body)


def write_png(image: npt.NDArray, path: str) -> None:
    """Writes [3, H, W] or [H, W, 3] (uint8 or floats in [0, 1]) as 8-bit PNG"""

    pixels = np.asarray(image)
    if pixels.ndim == 3 and pixels.shape[0] == 3 and pixels.shape[-1] != 3:
        pixels = np.moveaxis(pixels, 0, -1)
    pixels = to_uint8(pixels)
    with atomic_open(path, 'wb') as file:
        matplotlib.image.imsave(file, pixels, format='png')


def read_png(path: str) -> npt.NDArray:
    """8-bit PNG -> uint8 [3, H, W] (alpha dropped)"""

    pixels = matplotlib.image.imread(path)
    if pixels.dtype != np.uint8:
        pixels = np.round(pixels * 255).astype(np.uint8)
    if pixels.ndim == 2:
        pixels = np.repeat(pixels[..., None], 3, axis=-1)
    return np.moveaxis(pixels[..., :3], -1, 0).copy()


def read_image(path: str) -> npt.NDArray:
    """Image as float64 [3, H, W] in [0, 1], format chosen by extension"""

    if not os.path.isfile(path):
        raise LoadError(f"missing file {path}")
    pixels = read_png(path) if path.lower().endswith('.png') else read_pnm(path)
    if pixels.ndim == 2:
        pixels = np.repeat(pixels[None], 3, axis=0)
    return pixels.astype(np.float64) / 255


def write_image(image: npt.NDArray, path: str) -> None:
    if path.lower().endswith('.png'):
        write_png(image, path)
    else:
        write_pnm(image, path)


@dataclass
class Checkpoint:
    """
    Format version, configuration snapshot, named parameters, optimizer
    moments and the number of training steps taken
    """

    config_text: str
    params: dict[str, np.ndarray]
    adam: AdamState = field(default_factory=AdamState)
    step: int = 0
    version: int = CHECKPOINT_VERSION


def _pack_array(name: str, array: np.ndarray) -> bytes:
    dtype = np.dtype(array.dtype).newbyteorder('<')
    if dtype not in DTYPE_CODES:
        raise FormatError(f"cannot store {name} with dtype {array.dtype}")
    encoded = name.encode('utf-8')
    header = struct.pack('<H', len(encoded)) + encoded + struct.pack('<BB', DTYPE_CODES[dtype], array.ndim)
    dims = struct.pack(f'<{array.ndim}I', *array.shape)
    return header + dims + np.ascontiguousarray(array, dtype=dtype).tobytes()


class _Reader:

    def __init__(self, payload: bytes, path: str) -> None:
        self.payload = payload
        self.position = 0
        self.path = path

    def take(self, size: int) -> bytes:
        if self.position + size > len(self.payload):
            raise FormatError(f"{self.path}: truncated checkpoint")
        chunk = self.payload[self.position:self.position + size]
        self.position += size
        return chunk

    def unpack(self, fmt: str) -> tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def array(self) -> tuple[str, np.ndarray]:
        (length,) = self.unpack('<H')
        name = self.take(length).decode('utf-8')
        code, ndim = self.unpack('<BB')
        if code not in DTYPES:
            raise FormatError(f"{self.path}: unknown dtype code {code} for {name}")
        shape = self.unpack(f'<{ndim}I')
        dtype = DTYPES[code]
        count = int(np.prod(shape, dtype=np.int64))
        data = np.frombuffer(self.take(count * dtype.itemsize), dtype=dtype).reshape(shape)
        return name, data.astype(dtype.newbyteorder('='))


def save_checkpoint(checkpoint: Checkpoint, path: str) -> None:
    """
    Little-endian binary layout: header (magic, version, step, Adam step,
    tensor count), UTF-8 config snapshot, then named tensors (parameters,
    then 'adam.m.*' and 'adam.v.*' moments)

    :param checkpoint: content
    :param path: destination, written atomically

    :return:
    """

    tensors = list(checkpoint.params.items())
    tensors += [(f'adam.m.{k}', v) for k, v in checkpoint.adam.m.items()]
    tensors += [(f'adam.v.{k}', v) for k, v in checkpoint.adam.v.items()]
    config = checkpoint.config_text.encode('utf-8')
    parts = [CHECKPOINT_HEADER.pack(CHECKPOINT_MAGIC, checkpoint.version, checkpoint.step, checkpoint.adam.step,
                                    len(tensors)),
             struct.pack('<I', len(config)), config]
    parts += [_pack_array(name, np.asarray(array)) for name, array in tensors]
    atomic_write_bytes(path, b''.join(parts))
    logger.info(f"checkpoint with {len(checkpoint.params)} tensors written to {path}")


def load_checkpoint(path: str) -> Checkpoint:
    if not os.path.isfile(path):
        raise LoadError(f"missing checkpoint {path}")
    with open(path, 'rb') as file:
        reader = _Reader(file.read(), path)
    magic, version, step, adam_step, count = reader.unpack(CHECKPOINT_HEADER.format)
    if magic != CHECKPOINT_MAGIC:
        raise FormatError(f"{path}: not a checkpoint (magic {magic!r})")
    if version != CHECKPOINT_VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}")
    (length,) = reader.unpack('<I')
    config_text = reader.take(length).decode('utf-8')

    params, adam = {}, AdamState(step=adam_step)
    for _ in range(count):
        name, array = reader.array()
        if name.startswith('adam.m.'):
            adam.m[name[len('adam.m.'):]] = array
        elif name.startswith('adam.v.'):
            adam.v[name[len('adam.v.'):]] = array
        else:
            params[name] = array
    if reader.position != len(reader.payload):
        raise FormatError(f"{path}: {len(reader.payload) - reader.position} trailing bytes")
    return Checkpoint(config_text=config_text, params=params, adam=adam, step=step, version=version)


def _frame_column(k: int) -> str:
    return f'frame_{k}'.replace('-', 'm')


def _pair_column(prefix: str, pair: tuple[int, int]) -> str:
    return f'{prefix}_{pair[0]}_{pair[1]}'.replace('-', 'm')


MANIFEST_COLUMNS = (['id', 't'] + [_frame_column(k) for k in FRAME_TIMES]
                    + [_pair_column('flow', p) for p in FLOW_PAIRS]
                    + [_pair_column('occ', p) for p in FLOW_PAIRS] + ['gt_frame', 'scene'])


def write_quad(quad: Quad, directory: str, name: str, image_ext: str = '.ppm') -> dict[str, object]:
    """
    Writes the rasters of one quad into directory/name/ and returns its
    manifest record (paths relative to directory)

    :param quad: quad to store
    :param directory: dataset root
    :param name: quad identifier
    :param image_ext: '.ppm' or '.png'

    :return:
    """

    folder = os.path.join(directory, name)
    os.makedirs(folder, exist_ok=True)
    record: dict[str, object] = {'id': name, 't': repr(float(quad.t))}

    def store(column: str, filename: str, writer, value) -> None:
        path = os.path.join(folder, filename)
        writer(value, path)
        record[column] = relative_path(path, directory)

    for k in FRAME_TIMES:
        store(_frame_column(k), f'{_frame_column(k)}{image_ext}', write_image, quad.frames[k])
    for pair in FLOW_PAIRS:
        store(_pair_column('flow', pair), f"{_pair_column('flow', pair)}.flo", write_flo, quad.flows[pair])
        store(_pair_column('occ', pair), f"{_pair_column('occ', pair)}.pgm", write_pnm, quad.occlusions[pair].data)
    record['gt_frame'] = ''
    if quad.gt_frame is not None:
        store('gt_frame', f'gt_frame{image_ext}', write_image, quad.gt_frame)
    record['scene'] = ''
    if quad.scene is not None:
        store('scene', 'scene.txt', lambda text, path: atomic_write_text(path, text), scene_to_text(quad.scene))
    return record


def write_manifest(records: list[dict[str, object]], directory: str) -> str:
    """
    Tab-separated UTF-8 manifest, one quad per line, columns in
    MANIFEST_COLUMNS order

    :param records: manifest records from write_quad
    :param directory: dataset root

    :return: manifest path
    """

    path = os.path.join(directory, MANIFEST_NAME)
    frame = pd.DataFrame(records, columns=MANIFEST_COLUMNS)
    with atomic_open(path, 'w', encoding='utf-8', newline='') as file:
        frame.to_csv(file, sep='\t', index=False, lineterminator='\n')
    return path


def write_dataset(quads: list[Quad], directory: str, image_ext: str = '.ppm') -> str:
    records = [write_quad(q, directory, f'quad_{i:04d}', image_ext) for i, q in enumerate(quads)]
    path = write_manifest(records, directory)
    logger.info(f"wrote {len(quads)} quads to {directory}")
    return path


def read_manifest(path: str) -> pd.DataFrame:
    if os.path.isdir(path):
        path = os.path.join(path, MANIFEST_NAME)
    if not os.path.isfile(path):
        raise LoadError(f"missing manifest {path}")
    frame = pd.read_csv(path, sep='\t', dtype=str, keep_default_na=False)
    missing = [c for c in MANIFEST_COLUMNS if c not in frame.columns]
    if missing:
        raise FormatError(f"{path}: manifest lacks columns {missing}")
    frame.attrs['root'] = os.path.dirname(os.path.abspath(path))
    return frame


def quad_from_record(record: pd.Series, root: str) -> Quad:
    """
    Loads the quad described by one manifest record. File-based quads
    carry no scene, hence no ground-truth coefficients.

    :param record: manifest row
    :param root: directory the manifest paths are relative to

    :return:
    """

    def resolve(column: str) -> str:
        path = os.path.join(root, record[column])
        if not record[column] or not os.path.isfile(path):
            raise LoadError(f"missing file {path} (column {column} of quad {record['id']})")
        return path

    frames = {k: read_image(resolve(_frame_column(k))) for k in FRAME_TIMES}
    flows = {p: read_flo(resolve(_pair_column('flow', p))) for p in FLOW_PAIRS}
    occlusions = {p: OcclusionMap(read_pnm(resolve(_pair_column('occ', p))).astype(np.float64) / 255)
                  for p in FLOW_PAIRS}
    gt_frame = read_image(resolve('gt_frame')) if record['gt_frame'] else None
    return Quad(frames=frames, flows=flows, occlusions=occlusions, t=float(record['t']), gt_frame=gt_frame,
                source=os.path.join(root, str(record['id'])))


def load_dataset(path: str, row: Optional[int] = None) -> list[Quad]:
    """
    Quads of a manifest (file or its directory); row selects a single record

    :param path: manifest path or dataset directory
    :param row: optional 0-based record index

    :return:
    """

    frame = read_manifest(path)
    root = frame.attrs['root']
    if row is not None:
        if not 0 <= row < len(frame):
            raise LoadError(f"manifest {path} has no row {row}")
        frame = frame.iloc[[row]]
    return [quad_from_record(record, root) for _, record in frame.iterrows()]
