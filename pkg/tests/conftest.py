import numpy as np
import pytest

from layered442.hilbert import DensityOperator


def random_density(dims, rng) -> DensityOperator:
    """Ginibre-random full-rank density operator."""
    n = int(np.prod(dims))
    g = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    mat = g @ g.conj().T
    return DensityOperator(dims, mat / np.trace(mat).real)


def flat_index(ket: str, dims=(4, 4, 2)) -> int:
    idx = 0
    for ch, d in zip(ket, dims):
        idx = idx * d + int(ch)
    return idx


@pytest.fixture
def rng():
    return np.random.default_rng(20250809)
