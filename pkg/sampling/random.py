"""
Counter-based random streams.

Every draw in the lab comes from a Philox generator keyed by the run seed and
a tuple of integer keys (sample-size index, replication index, substream), so
replications can run in any order or thread and still reproduce bit for bit.
"""

import numpy as np

# Substreams of one replication. Keeping the manifold draws on their own
# stream is what lets clutter with pi = 1 reproduce the noiseless sample.
MANIFOLD = 0
CLUTTER_FLAGS = 1
CLUTTER_POSITIONS = 2
NOISE = 3
ESTIMATOR = 4


def stream(seed, *keys):
    """Philox generator for ``seed`` and the spawn key ``keys``."""
    sequence = np.random.SeedSequence(
        entropy=int(seed), spawn_key=tuple(int(k) for k in keys)
    )
    return np.random.Generator(np.random.Philox(sequence))


class SeedRecord:
    """
    Seed plus the keys identifying one replication.

    Stored on every Dataset so a sample can be regenerated from its record.
    """

    def __init__(self, seed, *keys):
        self.seed = int(seed)
        self.keys = tuple(int(k) for k in keys)

    @classmethod
    def coerce(cls, seed):
        if isinstance(seed, cls):
            return seed
        return cls(seed)

    def generator(self, substream):
        return stream(self.seed, *self.keys, substream)

    def child(self, *keys):
        return SeedRecord(self.seed, *self.keys, *keys)

    def as_dict(self):
        return {"seed": self.seed, "keys": list(self.keys)}

    def __eq__(self, other):
        return isinstance(other, SeedRecord) and (self.seed, self.keys) == (
            other.seed,
            other.keys,
        )

    def __hash__(self):
        return hash((self.seed, self.keys))

    def __repr__(self):
        return f"SeedRecord({self.seed}, keys={self.keys})"
