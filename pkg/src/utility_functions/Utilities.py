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

import os
import tempfile
from contextlib import contextmanager
from typing import Iterator, Sequence

import numpy as np
import numpy.typing as npt

THREADS_ENV = 'VFIKIT_THREADS'
SLOW_TESTS_ENV = 'VFIKIT_SLOW_TESTS'


def thread_count() -> int:
    """Worker threads for evaluation: VFIKIT_THREADS when set, otherwise the CPU count"""

    value = os.environ.get(THREADS_ENV, '').strip()
    if value.isdigit() and int(value) > 0:
        return int(value)
    return os.cpu_count() or 1


def slow_tests_enabled() -> bool:
    return os.environ.get(SLOW_TESTS_ENV, '') == '1'


@contextmanager
def atomic_open(path: str, mode: str = 'wb', **kwargs) -> Iterator:
    """
    Opens a temporary file next to path and renames it over path when the
    block exits without error. Readers never see a partially written file.

    :param path: destination
    :param mode: 'w' or 'wb' (text or binary)
    :param kwargs: forwarded to open (encoding, newline)

    :return:
    """

    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    handle, temp_path = tempfile.mkstemp(prefix='.tmp-', dir=directory)
    try:
        with os.fdopen(handle, mode, **kwargs) as file:
            yield file
        os.replace(temp_path, path)
    except BaseException:
        if os.path.exists(temp_path):
            os.remove(temp_path)
        raise


def atomic_write_bytes(path: str, payload: bytes) -> None:
    with atomic_open(path, 'wb') as file:
        file.write(payload)


def atomic_write_text(path: str, text: str) -> None:
    with atomic_open(path, 'w', encoding='utf-8', newline='\n') as file:
        file.write(text)


def reflect_pad(array: npt.NDArray, multiple: int, axes: Sequence[int]) -> npt.NDArray:
    """
    Reflective padding at the far end of the given axes up to the next
    multiple; arrays already divisible are returned unchanged

    :param array: input
    :param multiple: required divisor of every padded axis
    :param axes: axes to pad

    :return:
    """

    widths = [(0, 0)] * array.ndim
    for axis in axes:
        size = array.shape[axis]
        widths[axis] = (0, (-size) % multiple)
    if all(w == (0, 0) for w in widths):
        return array
    return np.pad(array, widths, mode='reflect')


def relative_path(path: str, start: str) -> str:
    return os.path.relpath(path, start).replace(os.sep, '/')
