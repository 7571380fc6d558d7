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

import threading
import time
from dataclasses import dataclass
from functools import wraps
from typing import Callable, Optional

import pandas as pd

from Logger import get_logger


@dataclass
class RuntimeSummary:
    calls: int = 0
    total: float = 0.0


# one running summary per component, shared by every worker thread
_RUNTIMES: dict[str, RuntimeSummary] = {}
_RUNTIMES_LOCK = threading.Lock()


def timeit(func: Optional[Callable] = None, *, component: Optional[str] = None) -> Callable:
    """
    Decorator measuring the execution time of a function. The time is
    logged at DEBUG level and recorded under the component name, so that
    per-component runtimes can be tabulated afterwards

    :param func: decorated function when used without arguments
    :param component: registry key, defaults to the function name

    :return:
    """

    def decorator(inner: Callable) -> Callable:
        key = component or inner.__name__
        logger = get_logger('timeit')

        @wraps(inner)
        def timeit_wrapper(*args, **kwargs):
            start_time = time.perf_counter()
            results = inner(*args, **kwargs)
            total_time = time.perf_counter() - start_time
            with _RUNTIMES_LOCK:
                summary = _RUNTIMES.setdefault(key, RuntimeSummary())
                summary.calls += 1
                summary.total += total_time
            logger.debug(f"Function {inner.__name__} [{key}] took {total_time:.4f} seconds to execute")
            return results
        return timeit_wrapper

    if func is None:
        return decorator
    return decorator(func)


def component_runtimes() -> pd.DataFrame:
    """
    Mean and total runtime of every recorded component

    :return: DataFrame indexed by component with columns calls, mean_s, total_s
    """

    with _RUNTIMES_LOCK:
        rows = [{'component': key, 'calls': s.calls, 'mean_s': s.total / s.calls, 'total_s': s.total}
                for key, s in _RUNTIMES.items()]
    frame = pd.DataFrame(rows, columns=['component', 'calls', 'mean_s', 'total_s'])
    return frame.set_index('component')


def reset_runtimes() -> None:
    with _RUNTIMES_LOCK:
        _RUNTIMES.clear()
