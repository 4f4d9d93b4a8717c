"""Seed derivation. All randomness uses numpy's PCG64 bit generator."""
import numpy as np


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed)))


def derive_seed(*keys: int) -> int:
    """Deterministic 63-bit seed from a tuple of non-negative integers.

    Used to give every fold, candidate and iteration its own stream so that
    results do not depend on evaluation order.
    """
    state = np.random.SeedSequence([int(k) for k in keys]).generate_state(2, np.uint64)
    return int(state[0] >> np.uint64(1))
