"""Labelled, reproducible random streams."""
from __future__ import annotations

import zlib

import numpy as np


def _label_key(label) -> int:
    if isinstance(label, int):
        return label
    return zlib.crc32(str(label).encode("utf-8"))


class RngStream:
    """A numpy Generator keyed by ``(seed, *labels)``.

    Two streams with the same seed and label path yield the same draws;
    ``child`` derives an independent stream without consuming this one.
    """

    def __init__(self, seed: int, *labels):
        self.seed = int(seed)
        self.labels = tuple(labels)
        ss = np.random.SeedSequence(self.seed, spawn_key=tuple(_label_key(l) for l in labels))
        self._gen = np.random.Generator(np.random.PCG64(ss))
        self.counter = 0

    def child(self, *labels) -> "RngStream":
        return RngStream(self.seed, *self.labels, *labels)

    def normal(self, shape):
        out = self._gen.standard_normal(shape)
        self.counter += out.size
        return out

    def uniform(self, shape):
        out = self._gen.random(shape)
        self.counter += out.size
        return out

    def integers(self, high, shape):
        out = self._gen.integers(0, high, shape)
        self.counter += np.size(out)
        return out

    def __repr__(self):
        return f"RngStream(seed={self.seed}, labels={self.labels}, counter={self.counter})"
