"""Small shared helpers: seed derivation and feature standardization."""

import zlib
from dataclasses import dataclass

import numpy as np


def derive_seed(master, *labels) -> np.random.SeedSequence:
    """Deterministic child seed for a named random stream.

    Labels are hashed with crc32 so the derivation is stable across runs
    and platforms; distinct label tuples give independent streams.
    """
    entropy = [int(master) & 0xFFFFFFFF]
    entropy += [zlib.crc32(str(label).encode()) for label in labels]
    return np.random.SeedSequence(entropy)


@dataclass
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, values, floor=1e-8):
        values = np.asarray(values, dtype=np.float64)
        mean = values.mean(axis=0)
        std = values.std(axis=0)
        std = np.where(std < floor, 1.0, std)
        return cls(mean, std)

    def transform(self, values):
        return (values - self.mean) / self.std

    def inverse(self, values):
        return values * self.std + self.mean

    def to_dict(self):
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, payload):
        return cls(np.asarray(payload["mean"], dtype=np.float64),
                   np.asarray(payload["std"], dtype=np.float64))
