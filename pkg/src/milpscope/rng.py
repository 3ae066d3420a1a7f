"""Deterministic random streams for generators, solver tie-breaking and training.

Every artifact in this toolkit must be reproducible byte-for-byte from a seed,
so randomness never comes from a platform RNG.  The generator is xoshiro256**
with its state seeded from splitmix64, both implemented exactly as specified
in docs/formats.md; any other implementation of that document reproduces the
same streams.
"""

from __future__ import annotations

from collections.abc import MutableSequence, Sequence

_MASK64 = (1 << 64) - 1


def splitmix64(state: int) -> tuple[int, int]:
    """Advance a splitmix64 state once; returns (new_state, output)."""
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return state, z ^ (z >> 31)


def derive_seed(master: int, *words: int) -> int:
    """Derive a sub-stream seed from a master seed and integer context words.

    Used to hand independent, reproducible streams to instances, epochs and
    workers without sharing generator state.
    """
    state = master & _MASK64
    state, out = splitmix64(state)
    for w in words:
        state = (state ^ (w & _MASK64)) & _MASK64
        state, out = splitmix64(state)
    return out


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK64


class Rng:
    """xoshiro256** stream seeded via splitmix64."""

    __slots__ = ("_s0", "_s1", "_s2", "_s3")

    def __init__(self, seed: int) -> None:
        state = seed & _MASK64
        state, self._s0 = splitmix64(state)
        state, self._s1 = splitmix64(state)
        state, self._s2 = splitmix64(state)
        state, self._s3 = splitmix64(state)
        if self._s0 == self._s1 == self._s2 == self._s3 == 0:
            self._s0 = 1  # all-zero state is a fixed point of xoshiro

    def next_u64(self) -> int:
        result = (_rotl((self._s1 * 5) & _MASK64, 7) * 9) & _MASK64
        t = (self._s1 << 17) & _MASK64
        self._s2 ^= self._s0
        self._s3 ^= self._s1
        self._s1 ^= self._s2
        self._s0 ^= self._s3
        self._s2 ^= t
        self._s3 = _rotl(self._s3, 45)
        return result

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) * (2.0 ** -53)

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()

    def randrange(self, n: int) -> int:
        """Unbiased integer in [0, n) via rejection sampling."""
        if n <= 0:
            raise ValueError("randrange bound must be positive")
        limit = (_MASK64 + 1) - ((_MASK64 + 1) % n)
        while True:
            u = self.next_u64()
            if u < limit:
                return u % n

    def randint(self, lo: int, hi: int) -> int:
        """Integer in [lo, hi], both ends inclusive."""
        return lo + self.randrange(hi - lo + 1)

    def shuffle(self, seq: MutableSequence) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(seq) - 1, 0, -1):
            j = self.randrange(i + 1)
            seq[i], seq[j] = seq[j], seq[i]

    def sample_indices(self, n: int, k: int) -> list[int]:
        """k distinct indices from range(n), in draw order."""
        if k > n:
            raise ValueError("cannot sample more indices than available")
        picked: list[int] = []
        seen: set[int] = set()
        while len(picked) < k:
            j = self.randrange(n)
            if j not in seen:
                seen.add(j)
                picked.append(j)
        return picked

    def weighted_index(self, weights: Sequence[float]) -> int:
        """Index drawn proportionally to nonnegative weights."""
        total = float(sum(weights))
        if total <= 0.0:
            raise ValueError("weights must have positive sum")
        r = self.random() * total
        acc = 0.0
        for i, w in enumerate(weights):
            acc += w
            if r < acc:
                return i
        return len(weights) - 1

    def spawn(self) -> "Rng":
        """Independent child stream derived from this one."""
        return Rng(self.next_u64())
