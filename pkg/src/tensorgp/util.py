"""Small shared helpers."""

from __future__ import annotations

import tracemalloc
from contextlib import contextmanager

from .errors import AllocationError


@contextmanager
def allocation_guard(limit_bytes: int):
    """Fail if peak Python-visible allocation inside the block exceeds the limit.

    numpy registers its buffers with tracemalloc, so this catches any attempt
    to materialize large dense intermediates (e.g. an n x n covariance) in a
    code path that promises structured computation.
    """
    started_here = not tracemalloc.is_tracing()
    if started_here:
        tracemalloc.start()
    else:
        tracemalloc.reset_peak()
    base = tracemalloc.get_traced_memory()[0]
    try:
        yield
    finally:
        peak = tracemalloc.get_traced_memory()[1]
        if started_here:
            tracemalloc.stop()
    used = peak - base
    if used > limit_bytes:
        raise AllocationError(
            f"peak allocation {used / 1e6:.1f} MB exceeded the {limit_bytes / 1e6:.1f} MB budget"
        )
