"""Deterministic random number generation.

A single `Rng` instance drives every random decision in the toolkit so that a
seed fully determines generated datasets, weight initialization, shuffles and
embeddings, byte for byte, across platforms. The core generator is
xoshiro256** seeded through splitmix64; both are published, fixed algorithms,
which keeps streams reproducible independently of Python or numpy versions.

Two access modes share one stream:

- scalar draws (`next_u64`, `next_below`, `random`, ...) advance the xoshiro
  state one output at a time;
- block draws (`u64_block`, `uniform_block`, `normal_block`) consume a single
  xoshiro output and expand it with a counter-based splitmix64 pass, computed
  vectorized in numpy. Blocks are used where per-value Python looping would
  dominate runtime (dropout masks, weight init, noise fields).

Both modes are pinned by tests; changing either breaks determinism.
"""

from __future__ import annotations

import numpy as np

MASK64 = 0xFFFFFFFFFFFFFFFF
_GOLDEN = 0x9E3779B97F4A7C15


def mix64(x: int) -> int:
    """splitmix64 output function: one full avalanche pass over a 64-bit int."""
    x &= MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return (x ^ (x >> 31)) & MASK64


def _splitmix64_block(start: int, n: int) -> np.ndarray:
    """splitmix64 outputs for states start+1 .. start+n, vectorized."""
    c = np.arange(1, n + 1, dtype=np.uint64) * np.uint64(_GOLDEN)
    x = np.uint64(start & MASK64) + c
    x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return x ^ (x >> np.uint64(31))


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK64


class Rng:
    """xoshiro256** stream with splitmix64 seeding.

    Args:
        seed: any int; taken modulo 2**64.
    """

    def __init__(self, seed: int):
        self._seed = seed & MASK64
        sm = self._seed
        state = []
        for _ in range(4):
            sm = (sm + _GOLDEN) & MASK64
            state.append(mix64(sm))
        if not any(state):
            state[0] = _GOLDEN
        self._s = state
        self._gauss_spare: float | None = None

    @property
    def seed(self) -> int:
        return self._seed

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

    def next_below(self, n: int) -> int:
        """Uniform int in [0, n), unbiased via rejection sampling."""
        if n <= 0:
            raise ValueError(f"next_below needs n >= 1, got {n}")
        if n == 1:
            return 0
        limit = MASK64 - (MASK64 + 1) % n
        while True:
            u = self.next_u64()
            if u <= limit:
                return u % n

    def randint(self, lo: int, hi: int) -> int:
        """Uniform int in [lo, hi], both ends inclusive."""
        if hi < lo:
            raise ValueError(f"empty range [{lo}, {hi}]")
        return lo + self.next_below(hi - lo + 1)

    def random(self) -> float:
        """Float64 in [0, 1) with 53 uniform bits."""
        return (self.next_u64() >> 11) * 2.0**-53

    def uniform(self, a: float, b: float) -> float:
        return a + (b - a) * self.random()

    def gauss(self) -> float:
        """Standard normal via Box-Muller, one cached spare per pair."""
        if self._gauss_spare is not None:
            z = self._gauss_spare
            self._gauss_spare = None
            return z
        u1 = ((self.next_u64() >> 11) + 0.5) * 2.0**-53
        u2 = self.random()
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        self._gauss_spare = float(r * np.sin(theta))
        return float(r * np.cos(theta))

    def shuffle(self, seq: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(seq) - 1, 0, -1):
            j = self.next_below(i + 1)
            seq[i], seq[j] = seq[j], seq[i]

    def choice(self, seq):
        if len(seq) == 0:
            raise ValueError("choice from empty sequence")
        return seq[self.next_below(len(seq))]

    def sample(self, seq, k: int) -> list:
        """k distinct elements, order randomized."""
        if k < 0 or k > len(seq):
            raise ValueError(f"cannot sample {k} from {len(seq)} elements")
        pool = list(seq)
        self.shuffle(pool)
        return pool[:k]

    # Block mode: one stream draw expands to n values via counter-based
    # splitmix64. Vectorized; used for bulk noise, masks and weight init.

    def u64_block(self, n: int) -> np.ndarray:
        if n < 0:
            raise ValueError(f"block size must be >= 0, got {n}")
        base = self.next_u64()
        return _splitmix64_block(base, n)

    def uniform_block(self, n: int) -> np.ndarray:
        """n float64 values in [0, 1)."""
        return (self.u64_block(n) >> np.uint64(11)) * 2.0**-53

    def normal_block(self, n: int) -> np.ndarray:
        """n float64 standard normals (Box-Muller over one u64 block pair)."""
        m = (n + 1) // 2
        u1 = ((self.u64_block(m) >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
        u2 = (self.u64_block(m) >> np.uint64(11)) * 2.0**-53
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        out = np.concatenate([r * np.cos(theta), r * np.sin(theta)])
        return out[:n]

    def derive(self, index: int) -> "Rng":
        """Child generator for stream index `index`, independent of draws made
        on this instance."""
        if index < 0:
            raise ValueError(f"derive index must be >= 0, got {index}")
        return Rng(mix64((self._seed + (index + 1) * _GOLDEN) & MASK64))
