"""
Parallel map over independent sweep points with a tqdm progress bar.
"""
import logging
import os
from contextlib import contextmanager, nullcontext
from typing import Any, Callable, Iterable, List, Optional

import joblib
from joblib import Parallel, delayed
from tqdm import tqdm

logger = logging.getLogger("dqpt_lab.parallel")

THREADS_ENV = "DQPT_LAB_THREADS"

_progress_enabled = True


def set_progress(enabled: bool) -> None:
    """Turn sweep progress bars on or off (``--quiet`` turns them off)."""
    global _progress_enabled
    _progress_enabled = enabled


class _TqdmBatchCompletionCallback(joblib.parallel.BatchCompletionCallBack):
    """Advance the bar whenever a joblib batch finishes."""

    def __init__(self, tqdm_object, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.tqdm_object = tqdm_object

    def __call__(self, *args, **kwargs):
        self.tqdm_object.update(n=self.batch_size)
        return super().__call__(*args, **kwargs)


@contextmanager
def tqdm_joblib(tqdm_object):
    """Link joblib's batch callback to a tqdm bar for the duration of the block."""
    original_callback = joblib.parallel.BatchCompletionCallBack
    joblib.parallel.BatchCompletionCallBack = (
        lambda *args, **kwargs: _TqdmBatchCompletionCallback(tqdm_object, *args, **kwargs)
    )
    try:
        with tqdm_object as pbar:
            yield pbar
    finally:
        joblib.parallel.BatchCompletionCallBack = original_callback


def resolve_threads(cli_value: Optional[int], config_value: int = 0) -> int:
    """
    Worker count: ``--threads`` first, then $DQPT_LAB_THREADS, then the config.

    Args:
        cli_value: Value given on the command line, if any
        config_value: Value from the config file

    Returns:
        Worker count, 0 meaning all cores
    """
    if cli_value is not None:
        return cli_value
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(0, int(env))
        except ValueError:
            logger.warning(f"Ignoring non-integer {THREADS_ENV}={env!r}")
    return config_value


def parallel_map(
    func: Callable[..., Any],
    items: Iterable[Any],
    threads: int = 0,
    desc: str = "sweep",
) -> List[Any]:
    """
    Apply ``func`` to every item, preserving input order.

    Args:
        func: Picklable worker
        items: Work items; tuples are unpacked into positional arguments
        threads: Worker count, 0 for all cores
        desc: Progress bar label

    Returns:
        Results in the order of ``items``
    """
    items = list(items)
    n_jobs = -1 if threads == 0 else threads
    calls = (delayed(func)(*item) if isinstance(item, tuple) else delayed(func)(item) for item in items)
    show_bar = _progress_enabled and len(items) > 1
    ctx = tqdm_joblib(tqdm(total=len(items), desc=desc, unit="point")) if show_bar else nullcontext()
    logger.debug(f"Mapping {len(items)} items over n_jobs={n_jobs}")
    with ctx:
        return Parallel(n_jobs=n_jobs)(calls)
