import numpy as np
import pytest


def rel_err(a, b):
    """Worst |a - b| scaled by max(1, |a|, |b|) per entry."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    scale = np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))
    return float(np.max(np.abs(a - b) / scale)) if a.size else 0.0


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)
