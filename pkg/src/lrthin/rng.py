"""Deterministic, splittable random streams.

Every randomized routine in this package draws from a :class:`RandomStream`.
A stream is a pure counter-based generator: the value of draw ``k`` is a
64-bit mix of ``(seed, stream_id, k)``, so the full sequence is reproducible
bit-for-bit across runs and platforms, and two algorithm implementations fed
streams with the same ``(seed, stream_id)`` consume identical randomness.
Child streams derived from distinct slots are independent for testing
purposes and enable deterministic divide-and-conquer (each recursive branch
owns its own stream regardless of execution order).

Integer mixing is done with exact Python integers, so no platform-dependent
overflow behavior is involved. Uniform reals use the top 53 bits of the
mixed word, giving identical binary64 values everywhere.
"""

_M64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_STREAM_SALT = 0x6A09E667F3BCC909


def _mix64(x):
    # SplitMix64 finalizer.
    x &= _M64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _M64
    return (x ^ (x >> 31)) & _M64


class RandomStream:
    """Counter-based PRNG stream identified by ``(seed, stream_id)``.

    Draw ``k`` (0-based counter value) is a fixed function of
    ``(seed, stream_id, k)``; drawing advances the counter by one, so a
    stream can be copied and replayed exactly.
    """

    __slots__ = ("seed", "stream_id", "counter", "_base")

    def __init__(self, seed, stream_id=0, counter=0):
        self.seed = int(seed) & _M64
        self.stream_id = int(stream_id) & _M64
        self.counter = int(counter)
        self._base = _mix64(self.seed ^ _mix64(self.stream_id ^ _STREAM_SALT))

    def __repr__(self):
        return (f"RandomStream(seed={self.seed}, stream_id={self.stream_id}, "
                f"counter={self.counter})")

    def copy(self):
        """Snapshot of the current state; the copy replays identically."""
        return RandomStream(self.seed, self.stream_id, self.counter)

    def child(self, slot):
        """Independent stream derived from this stream's identity.

        ``slot`` distinguishes siblings; the child starts at counter 0 and
        does not share state with (or advance) the parent.
        """
        new_id = _mix64(self.stream_id ^ (((int(slot) + 1) * _GAMMA) & _M64))
        return RandomStream(self.seed, new_id, 0)

    def next_u64(self):
        """Next 64-bit word; advances the counter by one."""
        v = _mix64((self._base + (self.counter + 1) * _GAMMA) & _M64)
        self.counter += 1
        return v

    def uniform01(self):
        """Uniform real in [0, 1) built from the top 53 bits of one word."""
        return (self.next_u64() >> 11) * 2.0 ** -53

    def uniform_index(self, m):
        """Unbiased uniform integer in [0, m) via rejection from 64 bits.

        Always consumes at least one word. Raises ValueError for m < 1.
        """
        m = int(m)
        if m < 1:
            raise ValueError(f"uniform_index requires m >= 1, got {m}")
        limit = ((1 << 64) // m) * m
        while True:
            v = self.next_u64()
            if v < limit:
                return v % m

    def bernoulli(self, p):
        """True with probability p; consumes exactly one word."""
        return self.uniform01() < p

    def permutation(self, m):
        """Uniform random permutation of range(m) via Fisher-Yates."""
        return self.sample_without_replacement(m, m)

    def sample_without_replacement(self, m, k):
        """k distinct indices from [0, m), uniform over ordered k-tuples.

        The returned list is in draw order (partial Fisher-Yates).
        """
        if not 0 <= k <= m:
            raise ValueError(f"need 0 <= k <= m, got k={k}, m={m}")
        pool = list(range(m))
        for i in range(k):
            j = i + self.uniform_index(m - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]
