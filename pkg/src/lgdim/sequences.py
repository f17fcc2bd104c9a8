"""Driving sequences omega = omega_1 omega_2 ... over the symbols 1..m.

Three kinds are supported: periodic repetition of a finite word, an explicit
finite prefix, and an i.i.d. (Bernoulli) sequence with probabilities ``P``.
All indexing in the public functions is 1-based.

Bernoulli symbols are generated counter-style so that ``omega_l`` depends
only on ``(seed, l)``::

    x = seed + l * 0x9E3779B97F4A7C15                 (mod 2**64)
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9          (mod 2**64)
    x = (x ^ (x >> 27)) * 0x94D049BB133111EB          (mod 2**64)
    x = x ^ (x >> 31)
    u = (x >> 11) * 2**-53                            (uniform in [0, 1))
    omega_l = 1 + #{k < m : u >= P_1 + ... + P_k}

which is the ``l``-th output of a SplitMix64 generator seeded with ``seed``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Sequence

import numpy as np

from .variational import FrequencyVector

GAMMA = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB
MASK64 = (1 << 64) - 1


class SequenceError(ValueError):
    pass


def splitmix64(seed: int, index: np.ndarray) -> np.ndarray:
    """SplitMix64 outputs for 1-based counters ``index`` (uint64 array)."""
    x = np.uint64(seed & MASK64) + np.asarray(index, dtype=np.uint64) * np.uint64(GAMMA)
    x = (x ^ (x >> np.uint64(30))) * np.uint64(MIX1)
    x = (x ^ (x >> np.uint64(27))) * np.uint64(MIX2)
    return x ^ (x >> np.uint64(31))


@dataclass(frozen=True)
class SymbolSequence:
    kind: str  # "periodic" | "explicit" | "bernoulli"
    m: int
    word: tuple[int, ...] = ()
    p: tuple[float, ...] = ()
    seed: int = 0

    def __post_init__(self):
        if self.kind in ("periodic", "explicit"):
            if not self.word:
                raise SequenceError(f"{self.kind} word must be nonempty")
            if any(not 1 <= s <= self.m for s in self.word):
                raise SequenceError(f"symbols must lie in 1..{self.m}")
        elif self.kind == "bernoulli":
            if len(self.p) != self.m or any(x <= 0 for x in self.p) or abs(sum(self.p) - 1) > 1e-12:
                raise SequenceError(f"bernoulli P must be positive and sum to 1 (got {self.p})")
        else:
            raise SequenceError(f"unknown sequence kind {self.kind!r}")

    @classmethod
    def periodic(cls, word: Sequence[int], m: int | None = None) -> "SymbolSequence":
        word = tuple(int(s) for s in word)
        return cls("periodic", m or max(word, default=1), word=word)

    @classmethod
    def explicit(cls, prefix: Sequence[int], m: int | None = None) -> "SymbolSequence":
        prefix = tuple(int(s) for s in prefix)
        return cls("explicit", m or max(prefix, default=1), word=prefix)

    @classmethod
    def bernoulli(cls, p: Sequence[float], seed: int = 0) -> "SymbolSequence":
        return cls("bernoulli", len(p), p=tuple(float(x) for x in p), seed=int(seed))

    @property
    def length(self) -> float:
        """Number of available symbols (``inf`` except for explicit prefixes)."""
        return len(self.word) if self.kind == "explicit" else math.inf

    def frequencies(self) -> FrequencyVector:
        """The limit frequency vector, exact for periodic words."""
        if self.kind == "bernoulli":
            return FrequencyVector(self.p)
        counts = [self.word.count(k) for k in range(1, self.m + 1)]
        return FrequencyVector.from_fractions([Fraction(c, len(self.word)) for c in counts])

    def to_dict(self) -> dict[str, Any]:
        if self.kind == "bernoulli":
            return {"bernoulli": {"p": list(self.p), "seed": self.seed}}
        return {self.kind: list(self.word)}


def sequence_from_dict(raw: Any, m: int | None = None) -> SymbolSequence:
    if not isinstance(raw, dict) or len(raw) != 1:
        raise SequenceError("sequence spec must have exactly one of periodic/explicit/bernoulli")
    ((kind, body),) = raw.items()
    if kind == "periodic":
        return SymbolSequence.periodic(body, m)
    if kind == "explicit":
        return SymbolSequence.explicit(body, m)
    if kind == "bernoulli":
        return SymbolSequence.bernoulli(body["p"], body.get("seed", 0))
    raise SequenceError(f"unknown sequence kind {kind!r}")


def symbols(seq: SymbolSequence, n: int, start: int = 1) -> np.ndarray:
    """``omega_start .. omega_{start+n-1}`` as an int64 array."""
    if n < 0 or start < 1:
        raise SequenceError("need n >= 0 and start >= 1")
    idx = np.arange(start, start + n, dtype=np.int64)
    if seq.kind == "periodic":
        return np.asarray(seq.word, dtype=np.int64)[(idx - 1) % len(seq.word)]
    if seq.kind == "explicit":
        if start + n - 1 > len(seq.word):
            raise SequenceError(
                f"index {start + n - 1} beyond explicit prefix of length {len(seq.word)}"
            )
        return np.asarray(seq.word[start - 1 : start - 1 + n], dtype=np.int64)
    u = (splitmix64(seq.seed, idx) >> np.uint64(11)).astype(np.float64) * 2.0**-53
    cum = np.cumsum(seq.p)[:-1]
    return 1 + np.searchsorted(cum, u, side="right").astype(np.int64)


def symbol_at(seq: SymbolSequence, l: int) -> int:
    if l < 1:
        raise SequenceError("positions are 1-based")
    return int(symbols(seq, 1, start=l)[0])


def empirical_frequencies(seq: SymbolSequence, n: int) -> FrequencyVector:
    """Fraction of each symbol among ``omega_1 .. omega_n``."""
    if n < 1:
        raise SequenceError("horizon must be >= 1")
    counts = np.bincount(symbols(seq, n), minlength=seq.m + 1)[1:]
    return FrequencyVector.from_fractions([Fraction(int(c), n) for c in counts])


def appearance_positions(seq: SymbolSequence, k: int, count: int) -> np.ndarray:
    """Positions of the first ``count`` appearances of symbol ``k``."""
    if not 1 <= k <= seq.m:
        raise SequenceError(f"symbol {k} outside 1..{seq.m}")
    if count <= 0:
        return np.zeros(0, dtype=np.int64)
    if seq.kind == "periodic":
        base = np.flatnonzero(np.asarray(seq.word) == k) + 1
        if base.size == 0:
            raise SequenceError(f"symbol {k} never appears in periodic word")
        n = np.arange(count)
        return (n // base.size) * len(seq.word) + base[n % base.size]
    found: list[np.ndarray] = []
    have = 0
    start = 1
    chunk = max(1024, 2 * count)
    if seq.kind == "bernoulli":
        chunk = max(chunk, int(2 * count / seq.p[k - 1]))
    while have < count:
        if seq.kind == "explicit":
            n = len(seq.word) - start + 1
            if n <= 0:
                raise SequenceError(
                    f"explicit prefix exhausted: only {have} appearances of symbol {k}"
                )
            chunk = n
        block = symbols(seq, chunk, start)
        hits = np.flatnonzero(block == k) + start
        found.append(hits)
        have += hits.size
        start += chunk
    return np.concatenate(found)[:count]


def appearance_position(seq: SymbolSequence, k: int, n: int) -> int:
    """Position of the ``n``-th appearance of symbol ``k`` in ``seq``."""
    if n < 1:
        raise SequenceError("appearance ordinal must be >= 1")
    return int(appearance_positions(seq, k, n)[-1])


@dataclass
class EpsilonProfile:
    """Relative deviations ``eps_n = |pos_n P_k / n - 1|`` for ``n = 1..n_max``.

    ``envelope[n-1]`` is ``max(eps_n, ..., eps_{n_max})``, the monotone tail
    bound over the computed range.
    """

    symbol: int
    eps: np.ndarray
    envelope: np.ndarray

    def at(self, n: int) -> float:
        return float(self.eps[n - 1])


def epsilon_profile(
    seq: SymbolSequence, P: FrequencyVector, k: int, n_max: int
) -> EpsilonProfile:
    pk = P.entries[k - 1]
    if pk <= 0:
        raise SequenceError(f"P_{k} must be positive")
    pos = appearance_positions(seq, k, n_max).astype(float)
    n = np.arange(1, n_max + 1, dtype=float)
    eps = np.abs(pos * pk / n - 1.0)
    envelope = np.maximum.accumulate(eps[::-1])[::-1]
    return EpsilonProfile(k, eps, envelope)


def epsilon_envelope(seq: SymbolSequence, P: FrequencyVector, n: int, n_max: int | None = None) -> float:
    """Tail envelope at ordinal ``n``, maximized over all symbols."""
    n_max = max(n_max or 2 * n, n)
    return max(
        float(epsilon_profile(seq, P, k, n_max).envelope[n - 1])
        for k in range(1, seq.m + 1)
        if P.entries[k - 1] > 0
    )
