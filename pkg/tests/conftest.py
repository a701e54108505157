from __future__ import annotations

import numpy as np
import pytest

from bayesct import _backend
from bayesct.core import CountTree, Series

BACKENDS = ["python"] + (["cython"] if _backend.CKernel is not None else [])


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


@pytest.fixture
def tiny_series() -> Series:
    """m=2, context (0), observations (0, 1, 0)."""
    return Series.from_symbols([0, 0, 1, 0], 2, 1)


@pytest.fixture
def tiny_tree(tiny_series, backend) -> CountTree:
    return CountTree.build(tiny_series, 1, backend=backend)


def random_instance(rng: np.random.Generator, m: int, D: int, n: int) -> np.ndarray:
    """Context + data with some structure so MAP trees are not always trivial."""
    x = rng.integers(0, m, size=n + D)
    if rng.random() < 0.5:
        for i in range(1, len(x)):
            if rng.random() < 0.6:
                x[i] = (x[i - 1] + 1) % m
    return x
