"""Seeded Haar sampling of states, unitaries, isometries and subspaces.

Every sampler takes an explicit ``numpy.random.Generator`` or integer seed;
there is no module-level generator.
"""
from __future__ import annotations

import numpy as np

from .tensor_core import DensityMatrix, FactoredSpace, PureState, Subspace


def as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def derived_seed(master_seed: int, index: int) -> int:
    """Deterministic 32-bit child seed for ``(master_seed, index)``."""
    return int(np.random.SeedSequence([int(master_seed), int(index)]).generate_state(1)[0])


def ginibre(shape, rng) -> np.ndarray:
    rng = as_rng(rng)
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def haar_isometry(rows: int, cols: int, rng) -> np.ndarray:
    """Haar-random ``rows x cols`` isometry (orthonormal columns).

    QR of a complex Gaussian matrix with the phases of ``diag(R)`` divided out,
    which makes the distribution exactly Haar and the map deterministic.
    """
    if cols > rows:
        raise ValueError(f"isometry needs cols <= rows, got {rows}x{cols}")
    q, r = np.linalg.qr(ginibre((rows, cols), rng))
    d = np.diag(r)
    return q * (d / np.abs(d))


def haar_unitary(n: int, rng) -> np.ndarray:
    return haar_isometry(n, n, rng)


def haar_vector(n: int, rng) -> np.ndarray:
    v = ginibre(n, rng)
    return v / np.linalg.norm(v)


def haar_state(space: FactoredSpace, rng) -> PureState:
    return PureState.normalized(space, haar_vector(space.dim, rng))


def haar_subspace(space: FactoredSpace, k: int, rng) -> Subspace:
    return Subspace(space, haar_isometry(space.dim, k, rng))


def random_density(space: FactoredSpace, rng, rank: int | None = None) -> DensityMatrix:
    """Induced-measure random state: partial trace of a Haar vector on ``dim x rank``.

    ``rank=None`` gives the Hilbert-Schmidt measure (full rank).
    """
    rank = space.dim if rank is None else rank
    g = ginibre((space.dim, rank), rng)
    m = g @ g.conj().T
    return DensityMatrix(space, m / np.trace(m).real)
