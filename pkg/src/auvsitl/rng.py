"""
Seeded random streams.

Each subsystem draws from its own stream derived from the scenario seed and a
stable tag, so adding draws in one subsystem never shifts another's sequence.
"""

import random
import zlib


def derive_seed(seed, *tags):
    """Combine a base seed with tags into a 64-bit sub-seed (crc32, never hash())."""
    key = "/".join(str(t) for t in tags).encode("utf-8")
    return (int(seed) ^ (zlib.crc32(key) << 16)) & 0xFFFFFFFFFFFFFFFF


def stream(seed, *tags):
    """Independent random.Random for (seed, tags)."""
    return random.Random(derive_seed(seed, *tags))
