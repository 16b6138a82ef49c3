import hashlib

import numpy as np


def derive_seed(*parts):
    """Stable 64-bit seed from any mix of ints and strings."""
    h = hashlib.sha256("\x1f".join(str(p) for p in parts).encode("utf-8"))
    return int.from_bytes(h.digest()[:8], "little")


def derive_rng(*parts):
    return np.random.default_rng(derive_seed(*parts))


def as_rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
