"""Running-key generation: LFSR and TinyMT32 bit sources, key expansion into
per-slot symbols, period bookkeeping, and Berlekamp-Massey recovery.

Bit conventions
---------------
An LFSR of length ``L`` with tap set ``taps`` obeys the recurrence
``b[n] = XOR(b[n - i] for i in taps)``, i.e. connection polynomial
``1 + sum(x**i for i in taps)``.  ``taps={4, 1}`` is x^4 + x + 1.
The register state is an integer whose bit ``j`` (LSB = bit 0) is the
``j``-th upcoming output bit, so the first ``L`` output bits of a register
spell out its state.

TinyMT32 words are turned into bits MSB first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, NamedTuple, Sequence

import numpy as np

from y00lab.errors import ConfigError, DegenerateStateError

__all__ = [
    "LfsrSpec",
    "TinyMT32",
    "KeyPair",
    "SymbolStream",
    "LfsrRecovery",
    "PRIMITIVE_TAPS",
    "lfsr_generate",
    "tinymt32_generate",
    "expand_keys",
    "lcm_period",
    "block_count",
    "bm_recover_lfsr",
    "bits_to_int",
    "int_to_bits",
]

# Connection polynomials known to be primitive over GF(2).
PRIMITIVE_TAPS = {
    2: frozenset({2, 1}),
    3: frozenset({3, 2}),
    4: frozenset({4, 1}),
    5: frozenset({5, 3}),
    6: frozenset({6, 5}),
    7: frozenset({7, 6}),
    8: frozenset({8, 6, 5, 4}),
    12: frozenset({12, 6, 4, 1}),
    16: frozenset({16, 14, 13, 11}),
    20: frozenset({20, 17}),
    24: frozenset({24, 23, 22, 17}),
    32: frozenset({32, 22, 2, 1}),
}

PRNG_KINDS = ("lfsr", "tinymt32")


def bits_to_int(bits: Sequence[int]) -> int:
    """Pack bits into an int, ``bits[0]`` landing in the least significant bit."""
    value = 0
    for j, b in enumerate(bits):
        if b:
            value |= 1 << j
    return value


def int_to_bits(value: int, width: int) -> list[int]:
    return [(value >> j) & 1 for j in range(width)]


@dataclass
class LfsrSpec:
    length: int
    taps: frozenset[int]
    state: int

    def __post_init__(self):
        self.taps = frozenset(int(t) for t in self.taps)
        if self.length < 1:
            raise ConfigError(f"LFSR length must be positive, got {self.length}")
        if not self.taps:
            raise ConfigError("LFSR needs at least one tap")
        if min(self.taps) < 1 or max(self.taps) > self.length:
            raise ConfigError(f"tap positions must lie in 1..{self.length}, got {sorted(self.taps)}")
        if not 0 <= self.state < (1 << self.length):
            raise ConfigError(f"state does not fit in {self.length} bits")

    @classmethod
    def primitive(cls, length: int, state: int) -> "LfsrSpec":
        try:
            taps = PRIMITIVE_TAPS[length]
        except KeyError:
            raise ConfigError(
                f"no built-in primitive polynomial for length {length}; "
                f"choose one of {sorted(PRIMITIVE_TAPS)} or give taps explicitly"
            ) from None
        return cls(length, taps, state)

    def copy(self) -> "LfsrSpec":
        return LfsrSpec(self.length, self.taps, self.state)


def lfsr_generate(spec: LfsrSpec, n: int) -> list[int]:
    """Clock ``spec`` ``n`` times and return the output bits.

    The register is advanced in place.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    if spec.state == 0:
        raise DegenerateStateError("all-zero LFSR state is a fixed point")
    L = spec.length
    feedback_bits = [L - i for i in spec.taps]
    state = spec.state
    out = []
    for _ in range(n):
        out.append(state & 1)
        fb = 0
        for j in feedback_bits:
            fb ^= (state >> j) & 1
        state = (state >> 1) | (fb << (L - 1))
    spec.state = state
    return out


# --- TinyMT32 ---------------------------------------------------------------

_MASK32 = 0xFFFFFFFF
_SH0, _SH1, _SH8 = 1, 10, 8
_MIN_LOOP = 8
_PRE_LOOP = 8

# Parameter set shipped with the reference distribution's check program.
TINYMT32_CHECK_PARAMS = (0x8F7011EE, 0xFC78FF1F, 0x3793FDFF)


class TinyMT32:
    """TinyMT32 generator, 127-bit state, bit-exact with the reference C code."""

    def __init__(self, seed: int, mat1: int = TINYMT32_CHECK_PARAMS[0],
                 mat2: int = TINYMT32_CHECK_PARAMS[1], tmat: int = TINYMT32_CHECK_PARAMS[2]):
        for name, word in (("seed", seed), ("mat1", mat1), ("mat2", mat2), ("tmat", tmat)):
            if not 0 <= word <= _MASK32:
                raise ConfigError(f"{name} must be a 32-bit unsigned word, got {word!r}")
        self.seed = seed
        self.mat1, self.mat2, self.tmat = mat1, mat2, tmat
        st = [seed, mat1, mat2, tmat]
        for i in range(1, _MIN_LOOP):
            prev = st[(i - 1) & 3]
            st[i & 3] ^= (i + 1812433253 * (prev ^ (prev >> 30))) & _MASK32
        # period certification: the 127 significant bits must not all vanish
        if (st[0] & 0x7FFFFFFF) == 0 and st[1] == st[2] == st[3] == 0:
            st = [ord("T"), ord("I"), ord("N"), ord("Y")]
        self.state = st
        for _ in range(_PRE_LOOP):
            self._next_state()

    def _next_state(self):
        s0, s1, s2, s3 = self.state
        y = s3
        x = (s0 & 0x7FFFFFFF) ^ s1 ^ s2
        x ^= (x << _SH0) & _MASK32
        y ^= (y >> _SH0) ^ x
        s0, s1 = s1, s2
        s2 = (x ^ (y << _SH1)) & _MASK32
        s3 = y
        if y & 1:
            s1 ^= self.mat1
            s2 ^= self.mat2
        self.state = [s0, s1, s2, s3]

    def _temper(self) -> int:
        s0, _, s2, s3 = self.state
        t1 = (s0 + (s2 >> _SH8)) & _MASK32
        t0 = s3 ^ t1
        if t1 & 1:
            t0 ^= self.tmat
        return t0

    def next_uint32(self) -> int:
        self._next_state()
        return self._temper()

    def words(self, n: int) -> list[int]:
        return [self.next_uint32() for _ in range(n)]

    def bits(self) -> Iterator[int]:
        while True:
            w = self.next_uint32()
            for j in range(31, -1, -1):
                yield (w >> j) & 1

    # Cardinality of the state space with the all-zero state removed.
    PERIOD = (1 << 127) - 1


def tinymt32_generate(prng: TinyMT32, n: int) -> list[int]:
    if n < 0:
        raise ValueError("n must be non-negative")
    return prng.words(n)


# --- key expansion ------------------------------------------------------------

@dataclass(frozen=True)
class KeyPair:
    """Seed keys: ``k`` drives the running key s, ``dk`` drives Δx."""

    k: tuple[int, ...]
    dk: tuple[int, ...]

    @classmethod
    def from_ints(cls, k: int, dk: int, k_bits: int, dk_bits: int | None = None) -> "KeyPair":
        dk_bits = k_bits if dk_bits is None else dk_bits
        return cls(tuple(int_to_bits(k, k_bits)), tuple(int_to_bits(dk, dk_bits)))


@dataclass(frozen=True)
class SymbolStream:
    M: int
    s: np.ndarray
    dx: np.ndarray

    def __post_init__(self):
        if len(self.s) != len(self.dx):
            raise ValueError("s and dx must have equal length")
        if len(self.s) and (int(np.max(self.s)) >= self.M or int(np.min(self.s)) < 0):
            raise ValueError("symbol out of range")

    @property
    def slots(self) -> int:
        return len(self.s)


def symbol_width(M: int) -> int:
    """log2 M for a power-of-two ``M``; raises ConfigError otherwise."""
    if not isinstance(M, (int, np.integer)) or M < 1 or M & (M - 1):
        raise ConfigError(f"M must be a power of two, got {M!r}")
    return int(M).bit_length() - 1


def _bit_source(seed_bits: Sequence[int], kind: str, taps: Iterable[int] | None,
                tinymt_params: Sequence[int] | None) -> Iterator[int]:
    if kind == "lfsr":
        L = len(seed_bits)
        spec = (LfsrSpec(L, frozenset(taps), bits_to_int(seed_bits)) if taps is not None
                else LfsrSpec.primitive(L, bits_to_int(seed_bits)))
        if spec.state == 0:
            raise DegenerateStateError("LFSR seed key must be nonzero")

        def gen():
            while True:
                yield from lfsr_generate(spec, 64)
        return gen()
    if kind == "tinymt32":
        if len(seed_bits) > 32:
            raise ConfigError("tinymt32 seeds are 32-bit words")
        params = tinymt_params or TINYMT32_CHECK_PARAMS
        return TinyMT32(bits_to_int(seed_bits), *params).bits()
    raise ConfigError(f"unknown PRNG kind {kind!r}; expected one of {PRNG_KINDS}")


def expand_keys(pair: KeyPair, M: int, T: int, kind: str = "lfsr", *,
                taps: Iterable[int] | None = None, dk_taps: Iterable[int] | None = None,
                tinymt_params: Sequence[int] | None = None) -> SymbolStream:
    """Expand ``pair`` into ``T`` slots of running-key symbols and Δx bits.

    ``s(t)`` takes the next ``log2 M`` bits of the k-seeded stream, most
    significant first; ``Δx(t)`` takes one bit of the dk-seeded stream.
    """
    width = symbol_width(M)
    if T < 0:
        raise ConfigError("T must be non-negative")
    k_src = _bit_source(pair.k, kind, taps, tinymt_params)
    dk_src = _bit_source(pair.dk, kind, dk_taps, tinymt_params)
    s = np.zeros(T, dtype=np.int64)
    dx = np.zeros(T, dtype=np.int64)
    for t in range(T):
        sym = 0
        for _ in range(width):
            sym = (sym << 1) | next(k_src)
        s[t] = sym
        dx[t] = next(dk_src)
    return SymbolStream(M, s, dx)


def lcm_period(periods: Sequence[int]) -> int:
    if not periods:
        raise ValueError("need at least one period")
    if any(int(p) < 1 for p in periods):
        raise ValueError("periods must be positive")
    return math.lcm(*(int(p) for p in periods))


def block_count(t_lcm: int, M: int) -> int:
    """N = floor(T_LCM / log2(2M)), exact integer arithmetic."""
    return int(t_lcm) // (symbol_width(M) + 1)


# --- Berlekamp-Massey ----------------------------------------------------------

class LfsrRecovery(NamedTuple):
    length: int
    taps: frozenset
    state: int
    ambiguous: bool
    # True when at least 2L bits were seen, so the synthesis is unique
    determined: bool

    def spec(self) -> LfsrSpec:
        if self.ambiguous:
            raise DegenerateStateError("recovery is ambiguous; no register to rebuild")
        return LfsrSpec(self.length, self.taps, self.state)


def bm_recover_lfsr(keystream: Sequence[int]) -> LfsrRecovery:
    """Shortest LFSR generating ``keystream`` (Berlekamp-Massey over GF(2))."""
    bits = [int(b) & 1 for b in keystream]
    n = len(bits)
    # polynomials as int bitmasks, bit i <-> x^i
    c, b = 1, 1
    L, m = 0, 1
    for i in range(n):
        d = bits[i]
        for j in range(1, L + 1):
            d ^= ((c >> j) & 1) & bits[i - j]
        if d == 0:
            m += 1
        elif 2 * L <= i:
            t = c
            c ^= b << m
            L, b, m = i + 1 - L, t, 1
        else:
            c ^= b << m
            m += 1
    if L == 0:
        return LfsrRecovery(0, frozenset(), 0, True, False)
    taps = frozenset(j for j in range(1, L + 1) if (c >> j) & 1)
    state = bits_to_int(bits[:L] + [0] * max(0, L - n))
    # an empty tap set (e.g. 0001) means "zeros forever", which no register
    # with a nonzero state and a feedback tap can express
    ambiguous = state == 0 or not taps
    return LfsrRecovery(L, taps, state, ambiguous, n >= 2 * L)
