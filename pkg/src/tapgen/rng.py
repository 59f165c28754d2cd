"""Named, seedable random generators.

All randomness in the package flows from one top-level seed through
string-named sub-streams (e.g. "data", "shuffle", "sample").  No global
numpy RNG state is touched, so two runs with the same seed are
bit-identical regardless of import order or call interleaving.
"""

import hashlib

import numpy as np


def derive_seed(root: int, *names) -> int:
    """Derive a stable 64-bit sub-seed from a root seed and a name path."""
    h = hashlib.sha256()
    h.update(str(int(root)).encode())
    for name in names:
        h.update(b"/")
        h.update(str(name).encode())
    return int.from_bytes(h.digest()[:8], "little")


def make_rng(root: int, *names) -> np.random.Generator:
    """A fresh Generator for the sub-stream identified by ``names``."""
    return np.random.default_rng(derive_seed(root, *names))
