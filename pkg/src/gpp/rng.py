"""Counter-based splitmix64 stream.

Every random quantity in the package (measurement matrices, pixel masks,
latent initialisation, weight initialisation) comes from this stream so that
results depend only on integer seeds, never on numpy's global state.

The k-th output (k = 1, 2, ...) of a stream seeded with ``s`` is
``mix(s + k * GAMMA)``, which lets us draw whole blocks with vectorised
uint64 arithmetic instead of looping in Python.
"""

import numpy as np

GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_TWO_POW_M53 = 2.0 ** -53


def _mix(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


class SplitMix64:
    """Sequential view over the splitmix64 stream.

    >>> SplitMix64(0).next_u64(1)[0] == 0xE220A8397B1DCDAF
    True
    """

    def __init__(self, seed):
        self.seed = np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF)
        self.counter = 0

    def next_u64(self, count):
        k = np.arange(self.counter + 1, self.counter + 1 + count, dtype=np.uint64)
        self.counter += count
        with np.errstate(over="ignore"):
            return _mix(self.seed + k * GAMMA)

    def uniform_open(self, count):
        """53-bit doubles strictly inside (0, 1)."""
        bits = self.next_u64(count) >> np.uint64(11)
        return (bits.astype(np.float64) + 0.5) * _TWO_POW_M53

    def uniform(self, count):
        """53-bit doubles in [0, 1)."""
        bits = self.next_u64(count) >> np.uint64(11)
        return bits.astype(np.float64) * _TWO_POW_M53

    def normal(self, count):
        """Standard normals by Box-Muller on consecutive uniform pairs.

        Each pair (u1, u2) yields r*cos(2 pi u2) then r*sin(2 pi u2); an odd
        count discards the final sine.
        """
        pairs = (count + 1) // 2
        u = self.uniform_open(2 * pairs).reshape(pairs, 2)
        r = np.sqrt(-2.0 * np.log(u[:, 0]))
        theta = 2.0 * np.pi * u[:, 1]
        out = np.empty((pairs, 2))
        out[:, 0] = r * np.cos(theta)
        out[:, 1] = r * np.sin(theta)
        return out.reshape(-1)[:count]

    def partial_shuffle(self, n, k):
        """First ``k`` entries of a Fisher-Yates shuffle of ``range(n)``."""
        if not 0 <= k <= n:
            raise ValueError(f"cannot draw {k} of {n} indices")
        idx = np.arange(n, dtype=np.int64)
        u = self.uniform(k)
        for i in range(k):
            j = i + int(u[i] * (n - i))
            idx[i], idx[j] = idx[j], idx[i]
        return idx[:k].copy()
