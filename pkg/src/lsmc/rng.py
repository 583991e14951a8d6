"""Counter-based random number generation for reproducible Monte Carlo.

All path simulation draws its normals through :func:`path_normals`, which
assigns every path a fixed-width block of a Philox counter stream. A slab of
paths can therefore be regenerated bit-identically without generating its
neighbours, which is what makes path-parallel simulation reproducible for any
worker split. Normals are produced by the inverse CDF so the mapping from raw
counter output to normal deviate is exact and platform independent.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

# Philox-4x64 emits four 64-bit words per counter increment.
_RAWS_PER_COUNTER = 4


def path_normals(seed, n_paths, draws_per_path, first_path=0):
    """Standard normal draws laid out as one substream per path.

    Parameters
    ----------
    seed : int
        Philox key. Derive per-repetition seeds with :func:`repetition_seeds`.
    n_paths : int
        Number of paths in the requested slab.
    draws_per_path : int
        Normals consumed by one path. Path ``m`` always reads the same counter
        range ``[m * stride, m * stride + draws_per_path)`` where ``stride`` is
        ``draws_per_path`` rounded up to a multiple of 4.
    first_path : int, optional
        Index of the first path of the slab. ``path_normals(s, M, D)`` equals
        the vertical stack of any partition ``path_normals(s, m1, D, 0)``,
        ``path_normals(s, m2, D, m1)``, ... bit for bit.

    Returns
    -------
    ndarray, shape (n_paths, draws_per_path)
    """
    if n_paths < 1 or draws_per_path < 1:
        raise ValueError("n_paths and draws_per_path must be >= 1")
    stride = -(-draws_per_path // _RAWS_PER_COUNTER) * _RAWS_PER_COUNTER
    bitgen = np.random.Philox(key=seed)
    if first_path:
        bitgen.advance(first_path * (stride // _RAWS_PER_COUNTER))
    raw = bitgen.random_raw(n_paths * stride).reshape(n_paths, stride)
    return _normals_from_raw(raw[:, :draws_per_path])


def _normals_from_raw(raw):
    # (k >> 11) keeps 53 bits; +0.5 centres the lattice inside (0, 1) so the
    # inverse CDF never sees 0 or 1.
    u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
    return ndtri(u)


def repetition_seeds(base_seed, count):
    """Derive ``count`` independent (path_seed, train_seed) pairs.

    Repetition ``i`` of an experiment uses pair ``i``; the derivation only
    depends on ``(base_seed, i)`` so pre-computing the list makes parallel
    repetition scheduling order-independent.
    """
    pairs = []
    for child in np.random.SeedSequence(base_seed).spawn(count):
        a, b = child.generate_state(2, np.uint64)
        pairs.append((int(a), int(b)))
    return pairs


def derived_seed(seed, *tags):
    """Stable scalar seed derived from ``seed`` and integer tags."""
    return int(np.random.SeedSequence((seed,) + tags).generate_state(1, np.uint64)[0])
