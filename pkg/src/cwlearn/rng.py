"""Deterministic 64-bit RNG shared by both simulator kernels.

SplitMix64 is tiny enough to implement identically in pure Python and in C,
which is what guarantees bit-identical simulation output across backends.
"""

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def mix64(z):
    """Finalizer of SplitMix64; also used to spread seeds."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return (z ^ (z >> 31)) & MASK64


def splitmix_next(state):
    """Advance one step. Returns (new_state, output)."""
    state = (state + _GOLDEN) & MASK64
    return state, mix64(state)


def derive_seed(master, *indices):
    """Stable child seed from a master seed and an index path.

    Used to give every sweep cell / replay period its own stream without
    coupling the streams to execution order.
    """
    h = mix64(master)
    for ix in indices:
        h = mix64(h ^ ((ix + 1) * _GOLDEN))
    return h


class SplitMix64:
    """Stateful convenience wrapper (python-side users: learner, traces)."""

    def __init__(self, seed):
        self.state = mix64(seed) & MASK64

    def next_u64(self):
        self.state, out = splitmix_next(self.state)
        return out

    def randint_below(self, bound):
        """Uniform integer in [0, bound), rejection sampled (no modulo bias)."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        # same acceptance rule as the C kernel: reject u < (2^64 - bound) % bound
        threshold = ((1 << 64) - bound) % bound
        while True:
            u = self.next_u64()
            if u >= threshold:
                return u % bound

    def uniform(self):
        """Float in [0, 1)."""
        return self.next_u64() / (1 << 64)

    def choice(self, seq):
        return seq[self.randint_below(len(seq))]
