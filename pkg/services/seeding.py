"""Deterministic seed derivation for independent random streams."""

import numpy as np


def derive_seed(seed: int, *keys: int) -> int:
    """
    A 64-bit seed for the stream identified by (seed, *keys).

    Streams with different keys are statistically independent; the same
    keys always give the same seed.
    """
    sequence = np.random.SeedSequence([int(seed) % 2**64, *[int(k) for k in keys]])
    return int(sequence.generate_state(1, dtype=np.uint64)[0])
