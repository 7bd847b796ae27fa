"""Counter-based splittable random streams for reproducible Monte-Carlo runs.

A substream is a pure function of (seed, path), so any worker can draw the
randomness for any (packet, purpose) pair independently of evaluation order.
Streams are backed by the Philox counter-based bit generator keyed through
``numpy.random.SeedSequence`` spawn keys.
"""

from dataclasses import dataclass, field

import numpy as np

# Draw-purpose indices used in substream paths.
PURPOSE_CHANNEL = 0
PURPOSE_BITS = 1
PURPOSE_NOISE = 2

PURPOSES = {"channel": PURPOSE_CHANNEL, "bits": PURPOSE_BITS, "noise": PURPOSE_NOISE}


@dataclass(frozen=True)
class RandomStream:
    """A (seed, path) handle addressing one independent random substream."""

    seed: int
    path: tuple = field(default_factory=tuple)

    def substream(self, *indices):
        """Child stream at ``path + indices``; independent of all siblings."""
        return RandomStream(self.seed, self.path + tuple(int(i) for i in indices))

    def generator(self):
        """A fresh numpy Generator positioned at the start of this substream."""
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=self.path)
        return np.random.Generator(np.random.Philox(ss))

    def standard_complex(self, shape):
        """i.i.d. circularly-symmetric complex normals, unit total variance."""
        g = self.generator()
        re = g.standard_normal(shape)
        im = g.standard_normal(shape)
        return (re + 1j * im) / np.sqrt(2.0)
