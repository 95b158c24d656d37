"""
Named random streams.

Every consumer of randomness draws from its own generator derived from
``(seed mod 2**64, stream id)``, so adding draws in one place never shifts
the numbers seen by another.
"""
import numpy as np

STREAMS = {
    'init': 1,
    'dropout': 2,
    'split': 3,
    'sampling': 4,
    'toy': 5,
    'gradcheck': 6,
}


def make_rng(seed: int, stream: str) -> np.random.Generator:
    """Return the generator for ``stream`` under ``seed``."""
    try:
        stream_id = STREAMS[stream]
    except KeyError:
        raise ValueError(f"Unknown random stream '{stream}'") from None
    return np.random.default_rng([int(seed) % 2**64, stream_id])


def make_random_state(seed: int, stream: str) -> np.random.RandomState:
    """Legacy ``RandomState`` for scikit-learn helpers, same stream rules."""
    sequence = np.random.SeedSequence([int(seed) % 2**64, STREAMS[stream]])
    return np.random.RandomState(np.random.MT19937(sequence))
