"""Portable seeded random numbers.

Everything random in the package is drawn from PCG64 (O'Neill's permuted
congruential generator, 128-bit state) through two primitives whose output
is fully determined by the generator's uint64 stream:

* uniform doubles: ``(next_uint64 >> 11) * 2**-53``
* standard normals: Box-Muller over pairs of uniforms

so any language with a PCG64 implementation reproduces the same draws.
"""

from __future__ import annotations

import numpy as np


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed)))


def uniform(rng: np.random.Generator, low: float, high: float, size=None) -> np.ndarray:
    return low + (high - low) * rng.random(size)


def normal(rng: np.random.Generator, size) -> np.ndarray:
    """Standard normal draws via the Box-Muller transform.

    Consumes exactly two uniforms per pair of outputs; an odd trailing
    output discards its sine partner.
    """
    shape = (size,) if np.isscalar(size) else tuple(size)
    n = int(np.prod(shape))
    m = (n + 1) // 2
    u = rng.random(2 * m).reshape(m, 2)
    r = np.sqrt(-2.0 * np.log1p(-u[:, 0]))  # 1-u keeps the log argument in (0, 1]
    theta = 2.0 * np.pi * u[:, 1]
    z = np.column_stack([r * np.cos(theta), r * np.sin(theta)]).ravel()
    return z[:n].reshape(shape)
