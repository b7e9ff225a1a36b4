"""Seeded random streams.

Philox-4x64 (a counter-based generator) through numpy: the stream for a given
seed is identical on every platform, and its full state is a small dict of
integers that checkpoints can carry.
"""
from __future__ import annotations

import numpy as np


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Generator for ``seed``; distinct ``stream`` values give independent streams."""
    return np.random.Generator(np.random.Philox(key=[int(seed) & (2**64 - 1), int(stream)]))


def rng_state(rng: np.random.Generator) -> dict:
    st = rng.bit_generator.state
    return {
        "counter": [int(c) for c in st["state"]["counter"]],
        "key": [int(k) for k in st["state"]["key"]],
        "buffer": [int(b) for b in st["buffer"]],
        "buffer_pos": int(st["buffer_pos"]),
        "has_uint32": int(st["has_uint32"]),
        "uinteger": int(st["uinteger"]),
    }


def rng_from_state(state: dict) -> np.random.Generator:
    bg = np.random.Philox()
    bg.state = {
        "bit_generator": "Philox",
        "state": {
            "counter": np.array(state["counter"], dtype=np.uint64),
            "key": np.array(state["key"], dtype=np.uint64),
        },
        "buffer": np.array(state["buffer"], dtype=np.uint64),
        "buffer_pos": state["buffer_pos"],
        "has_uint32": state["has_uint32"],
        "uinteger": state["uinteger"],
    }
    return np.random.Generator(bg)
