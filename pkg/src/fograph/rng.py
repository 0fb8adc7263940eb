"""Keyed random substreams.

Every stochastic consumer asks for its own stream by ``(component, key)``,
so adding a sensor or a request never shifts another consumer's draws.
"""

from __future__ import annotations

import hashlib

import numpy as np

MAX_SEED = 2**64 - 1


def _words(text: str) -> list[int]:
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return [int.from_bytes(digest[:4], "little"), int.from_bytes(digest[4:], "little")]


class RngFactory:
    def __init__(self, seed: int) -> None:
        if not 0 <= int(seed) <= MAX_SEED:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = int(seed)

    def stream(self, component: str, key: object = "") -> np.random.Generator:
        spawn_key = (*_words(component), *_words(str(key)))
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence(self.seed, spawn_key=spawn_key)))
