import numpy as np


def derive_seed(*keys):
    """Stable 63-bit integer seed from a tuple of nonnegative integer keys.

    Streams depend only on the keys, never on execution order, so serial and
    parallel runs draw identical numbers.
    """
    keys = [int(k) for k in keys]
    if any(k < 0 for k in keys):
        raise ValueError("seed keys must be nonnegative")
    state = np.random.SeedSequence(keys).generate_state(2, dtype=np.uint32)
    return (int(state[0]) << 31) ^ int(state[1])
