"""Portable pseudo-random generator.

Every random draw in the package goes through :class:`PortableRNG` so results
only depend on the seed, not on numpy or the platform.

Algorithm
---------
* state: four 64-bit words filled by successive ``splitmix64`` outputs of the seed
* step: ``xoshiro256**``
* ``random()``: top 53 bits of a step scaled by 2**-53, giving [0, 1)
* ``randbelow(n)``: rejection sampling on the raw 64-bit output (unbiased)
* ``uniform(lo, hi)``: ``lo + (hi - lo) * random()``

Sub-seeds for named stages come from :func:`derive_seed`, which feeds
``seed XOR fnv1a64(label)`` through one ``splitmix64`` step.
"""

from __future__ import annotations

MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> tuple[int, int]:
    """Return ``(next_state, output)`` for one splitmix64 step."""
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return x, z ^ (z >> 31)


def fnv1a64(data: str | bytes) -> int:
    if isinstance(data, str):
        data = data.encode("utf-8")
    h = 0xCBF29CE484222325
    for b in data:
        h ^= b
        h = (h * 0x100000001B3) & MASK64
    return h


def derive_seed(seed: int, label: str) -> int:
    _, out = splitmix64((seed & MASK64) ^ fnv1a64(label))
    return out


def _rotl(x, k):
    return ((x << k) | (x >> (64 - k))) & MASK64


class PortableRNG:
    def __init__(self, seed: int = 0):
        self.seed = seed
        sm = seed & MASK64
        s = []
        for _ in range(4):
            sm, out = splitmix64(sm)
            s.append(out)
        self._s = s

    def next_u64(self) -> int:
        s = self._s
        result = (_rotl((s[1] * 5) & MASK64, 7) * 9) & MASK64
        t = (s[1] << 17) & MASK64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def random(self) -> float:
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()

    def randbelow(self, n: int) -> int:
        if n <= 0:
            raise ValueError("randbelow needs n > 0")
        # largest multiple of n that fits in 64 bits
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % n

    def choice_weighted(self, weights) -> int:
        """Index drawn with probability proportional to ``weights``.

        Weights are accumulated sequentially in index order. Returns -1 when
        the total weight is not positive.
        """
        total = 0.0
        for w in weights:
            total += float(w)
        if not total > 0.0:
            return -1
        target = self.random() * total
        acc = 0.0
        last_positive = -1
        for i, w in enumerate(weights):
            w = float(w)
            if w <= 0.0:
                continue
            acc += w
            last_positive = i
            if target < acc:
                return i
        return last_positive

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle, walking from the end."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randbelow(i + 1)
            items[i], items[j] = items[j], items[i]
