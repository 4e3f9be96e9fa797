"""Counter-based random streams (Philox4x32-10, vectorised over numpy arrays).

Every draw is a pure function of ``(seed, replication, agent, slot, tag)`` so
replications can be generated in any order or in parallel and still
reproduce bit-for-bit.  Sweeps that reuse the same keys get common random
numbers for free.
"""

import numpy as np

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = 0x9E3779B9
_W1 = 0xBB67AE85
_MASK = np.uint64(0xFFFFFFFF)
_SHIFT = np.uint64(32)

# stream tags (fourth counter word)
TAG_AGENT = 0  # quality + hitting-time uniforms for one entry attempt
TAG_PATH = 1  # Gaussian increments of the path engine


def philox4x32(counter, key):
    """Philox4x32-10 block function.

    ``counter`` is a sequence of four uint32-valued arrays (broadcastable),
    ``key`` a pair of ints.  Returns four uint64 arrays holding 32-bit words.
    """
    c0, c1, c2, c3 = np.broadcast_arrays(*[np.asarray(c, dtype=np.uint64) & _MASK for c in counter])
    c0, c1, c2, c3 = c0.copy(), c1.copy(), c2.copy(), c3.copy()
    k0 = int(key[0]) & 0xFFFFFFFF
    k1 = int(key[1]) & 0xFFFFFFFF
    for _ in range(10):
        p0 = c0 * _M0
        p1 = c2 * _M1
        hi0, lo0 = p0 >> _SHIFT, p0 & _MASK
        hi1, lo1 = p1 >> _SHIFT, p1 & _MASK
        c0 = hi1 ^ c1 ^ np.uint64(k0)
        c1 = lo1
        c2 = hi0 ^ c3 ^ np.uint64(k1)
        c3 = lo0
        k0 = (k0 + _W0) & 0xFFFFFFFF
        k1 = (k1 + _W1) & 0xFFFFFFFF
    return c0, c1, c2, c3


def _key(seed):
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    return seed & 0xFFFFFFFF, seed >> 32


def _to_unit(hi, lo):
    # 53 random bits -> open interval (0, 1)
    bits = ((hi << np.uint64(21)) ^ lo) & np.uint64((1 << 53) - 1)
    return (bits.astype(np.float64) + 0.5) * (1.0 / 9007199254740992.0)


def uniform_pair(seed, replication, agent, slot, tag=TAG_AGENT):
    """Two independent U(0,1) arrays keyed by the counter coordinates."""
    w0, w1, w2, w3 = philox4x32((replication, agent, slot, tag), _key(seed))
    return _to_unit(w0, w1), _to_unit(w2, w3)


def normal_pair(seed, replication, agent, slot, tag=TAG_PATH):
    """Two independent standard normals via Box-Muller on one Philox block."""
    u1, u2 = uniform_pair(seed, replication, agent, slot, tag)
    r = np.sqrt(-2.0 * np.log(u1))
    theta = 2.0 * np.pi * u2
    return r * np.cos(theta), r * np.sin(theta)


class Stream:
    """Scalar view of one ``(seed, replication, agent, attempt)`` coordinate.

    ``uniforms()`` returns the pair used for the quality draw and the
    hitting-time draw of that entry attempt.
    """

    def __init__(self, seed, replication, agent, attempt=0):
        self.seed = seed
        self.replication = replication
        self.agent = agent
        self.attempt = attempt

    def uniforms(self):
        u1, u2 = uniform_pair(self.seed, self.replication, self.agent, self.attempt)
        return float(u1), float(u2)

    def __repr__(self):
        return (f"Stream(seed={self.seed}, replication={self.replication}, "
                f"agent={self.agent}, attempt={self.attempt})")
