"""Named random substreams derived from one master seed."""

from __future__ import annotations

import zlib

import numpy as np

STREAMS = ("data", "init", "negatives", "batches", "forest", "eval", "skipgram", "bench")


def substream(seed: int, name: str, *extra: int) -> np.random.Generator:
    """Independent generator for component ``name``; ``extra`` indexes sub-draws (epoch, tree, ...)."""
    return np.random.default_rng([int(seed), zlib.crc32(name.encode("utf-8")), *map(int, extra)])
