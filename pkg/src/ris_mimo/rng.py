"""Keyed random streams.

Every random draw in the simulator comes from a generator derived from
``(seed, *key)``.  Keys are small integer tuples such as
``(realization, PURPOSE)``, so a draw never depends on how many other
draws happened before it or on execution order.
"""

import numpy as np

# purpose codes used as the last element of stream keys
LARGE_SCALE = 0
SMALL_SCALE = 1
PILOT_NOISE = 2
SYMBOLS = 3
STATISTICS = 4
SHUFFLE = 5
INIT = 6
PHASES = 7
BOOTSTRAP = 8


def stream(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def crandn(rng: np.random.Generator, shape) -> np.ndarray:
    """Standard circularly-symmetric complex Gaussian, E|x|^2 = 1."""
    if isinstance(shape, int):
        shape = (shape,)
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return (re + 1j * im) * np.sqrt(0.5)
