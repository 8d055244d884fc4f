"""
Portable xoshiro256** generator seeded through splitmix64.

Every draw is integer arithmetic on 64-bit words, so a seed yields the same
stream on every platform.
"""
from typing import List, MutableSequence, Sequence, TypeVar

T = TypeVar("T")

MASK_64 = 0xFFFFFFFFFFFFFFFF
_GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK_64


def splitmix64(state: int) -> tuple:
    """Advance a splitmix64 state; returns (new_state, output)."""
    state = (state + _GOLDEN_GAMMA) & MASK_64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK_64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK_64
    return state, z ^ (z >> 31)


class Xoshiro256StarStar:
    """Seeded pseudo-random stream used by the corpus generator."""

    def __init__(self, seed: int):
        state = seed & MASK_64
        words = []
        for _ in range(4):
            state, value = splitmix64(state)
            words.append(value)
        self._s = words

    def next_u64(self) -> int:
        s = self._s
        result = (_rotl((s[1] * 5) & MASK_64, 7) * 9) & MASK_64
        t = (s[1] << 17) & MASK_64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def below(self, n: int) -> int:
        """Uniform integer in [0, n), unbiased (multiply-shift with rejection)."""
        if n <= 0:
            raise ValueError(f"below() needs n > 0, got {n}")
        threshold = ((1 << 64) - n) % n
        while True:
            product = self.next_u64() * n
            if (product & MASK_64) >= threshold:
                return product >> 64

    def between(self, low: int, high: int) -> int:
        """Uniform integer in [low, high]."""
        return low + self.below(high - low + 1)

    def chance(self, numerator: int, denominator: int) -> bool:
        return self.below(denominator) < numerator

    def chance_ppm(self, parts_per_million: int) -> bool:
        return self.below(1_000_000) < parts_per_million

    def choice(self, items: Sequence[T]) -> T:
        return items[self.below(len(items))]

    def shuffle(self, items: MutableSequence[T]) -> None:
        """In-place Fisher-Yates."""
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]

    def sample(self, items: Sequence[T], k: int) -> List[T]:
        """k distinct items, in draw order."""
        pool = list(items)
        if k > len(pool):
            raise ValueError(f"Cannot sample {k} items from {len(pool)}")
        for i in range(k):
            j = i + self.below(len(pool) - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]

    def hex_id(self, words: int = 1) -> str:
        return "".join(f"{self.next_u64():016x}" for _ in range(words))
