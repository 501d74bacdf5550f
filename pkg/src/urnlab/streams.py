"""Seeded random streams.

Every stochastic routine in the package takes an explicit
``numpy.random.Generator``.  Experiments derive one stream per
(seed, replica, purpose) through :func:`derive_rng`, so adding replicas or
purposes never shifts the draws of existing ones.
"""

import zlib

import numpy as np

__all__ = ["derive_rng", "purpose_key"]


def purpose_key(tag):
    """Stable 32-bit integer for a purpose tag (CRC32 of its UTF-8 bytes)."""
    return zlib.crc32(tag.encode("utf-8")) & 0xFFFFFFFF


def derive_rng(seed, replica=0, purpose="main"):
    """Independent generator for ``(seed, replica, purpose)``.

    The stream is ``PCG64(SeedSequence(seed, spawn_key=(replica, crc32(purpose))))``,
    which is the same derivation numpy uses for ``SeedSequence.spawn`` children.
    """
    if seed < 0 or seed >= 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    if replica < 0:
        raise ValueError("replica index must be nonnegative")
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(replica), purpose_key(purpose)))
    return np.random.Generator(np.random.PCG64(ss))
