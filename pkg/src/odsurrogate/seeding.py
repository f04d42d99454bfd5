"""Named sub-streams derived from one master seed."""

import zlib

import numpy as np


def derive_seed(master: int, name: str) -> int:
    """Stable 63-bit seed for stream ``name`` under ``master``."""
    ss = np.random.SeedSequence([int(master) & 0xFFFFFFFFFFFFFFFF, zlib.crc32(name.encode("utf-8"))])
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


def stream(master: int, name: str) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master, name))
