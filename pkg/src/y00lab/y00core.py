"""Y00 signal mapping, its known-plaintext inverse, and Bob's keyed decoder.

Basis index for one slot::

    m = Map[s] + M * ((Map[s] + x + dx) mod 2)

so a message bit always selects one of the two states
``{Map[s], Map[s] + M}`` of the keyed basis.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from y00lab.errors import ConfigError, DomainError
from y00lab.keystream import SymbolStream, symbol_width

__all__ = [
    "MappingTable",
    "Constellation",
    "Y00Frame",
    "encode_slot",
    "invert_slot",
    "encode_frame",
    "encode_indices",
    "invert_indices",
    "bob_decode_slot",
    "bob_decode",
]

# distances closer than this (relative) count as a tie, resolved to bit 0
_TIE_RTOL = 1e-12


@dataclass(frozen=True)
class MappingTable:
    M: int
    perm: tuple[int, ...]
    inverse: tuple[int, ...] = field(init=False, repr=False)

    def __post_init__(self):
        perm = tuple(int(p) for p in self.perm)
        if len(perm) != self.M or sorted(perm) != list(range(self.M)):
            raise ConfigError(f"mapping is not a permutation of 0..{self.M - 1}")
        inv = [0] * self.M
        for s, p in enumerate(perm):
            inv[p] = s
        object.__setattr__(self, "perm", perm)
        object.__setattr__(self, "inverse", tuple(inv))

    @classmethod
    def identity(cls, M: int) -> "MappingTable":
        symbol_width(M)
        return cls(M, tuple(range(M)))

    @classmethod
    def random(cls, M: int, seed: int) -> "MappingTable":
        symbol_width(M)
        return cls(M, tuple(int(v) for v in np.random.default_rng(seed).permutation(M)))

    @classmethod
    def from_spec(cls, spec: str, M: int) -> "MappingTable":
        """Build from a config string: ``identity``, ``random:<seed>`` or a file path."""
        if spec == "identity":
            return cls.identity(M)
        if spec.startswith("random:"):
            return cls.random(M, int(spec.split(":", 1)[1]))
        table = cls.load(spec)
        if table.M != M:
            raise ConfigError(f"mapping file {spec} has M={table.M}, config says M={M}")
        return table

    @classmethod
    def load(cls, path: str | os.PathLike) -> "MappingTable":
        with open(path) as fh:
            lines = [ln.strip() for ln in fh if ln.strip()]
        if len(lines) < 2 or not lines[0].startswith("M="):
            raise ConfigError(f"{path}: expected 'M=<int>' then the permutation")
        try:
            M = int(lines[0][2:])
            perm = tuple(int(v) for v in lines[1].split())
        except ValueError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        return cls(M, perm)

    def dump(self) -> str:
        return f"M={self.M}\n{' '.join(map(str, self.perm))}\n"

    def save(self, path: str | os.PathLike):
        with open(path, "w") as fh:
            fh.write(self.dump())


@dataclass(frozen=True)
class Constellation:
    """2M coherent amplitudes (|alpha|^2 is the mean photon number)."""

    M: int
    amplitudes: np.ndarray
    scheme: str = "phase"

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (2 * self.M,):
            raise ConfigError(f"need exactly {2 * self.M} amplitudes, got {amps.shape}")
        if len(np.unique(np.round(amps, 12))) != len(amps):
            raise ConfigError("constellation amplitudes must be distinct")
        if self.scheme not in ("phase", "intensity"):
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def phase(cls, M: int, alpha0: complex) -> "Constellation":
        if alpha0 == 0:
            raise ConfigError("alpha0 must be nonzero")
        m = np.arange(2 * M)
        return cls(M, alpha0 * np.exp(1j * np.pi * m / M), "phase")

    @classmethod
    def intensity(cls, M: int, alpha0: float) -> "Constellation":
        """Real, equally spaced field amplitudes from alpha0/(2M) up to alpha0."""
        if alpha0 <= 0:
            raise ConfigError("alpha0 must be positive")
        m = np.arange(2 * M)
        return cls(M, alpha0 * (m + 1) / (2 * M) + 0j, "intensity")

    @classmethod
    def build(cls, scheme: str, M: int, alpha0: float) -> "Constellation":
        if scheme == "phase":
            return cls.phase(M, alpha0)
        if scheme == "intensity":
            return cls.intensity(M, alpha0)
        raise ConfigError(f"unknown scheme {scheme!r}")

    @property
    def size(self) -> int:
        return 2 * self.M


@dataclass(frozen=True)
class Y00Frame:
    x: np.ndarray
    m: np.ndarray
    stream: SymbolStream

    @property
    def slots(self) -> int:
        return len(self.m)


def encode_slot(s: int, x: int, dx: int, mapping: MappingTable) -> int:
    M = mapping.M
    if not 0 <= s < M:
        raise DomainError(f"symbol {s} outside 0..{M - 1}")
    ms = mapping.perm[s]
    return ms + M * ((ms + x + dx) % 2)


def invert_slot(m: int, x: int, mapping: MappingTable) -> tuple[int, int]:
    """Recover ``(s, dx)`` from a basis index when the plaintext bit is known."""
    M = mapping.M
    if not 0 <= m < 2 * M:
        raise DomainError(f"index {m} outside 0..{2 * M - 1}")
    low, high = m % M, m // M
    return mapping.inverse[low], (high + low + x) % 2


def encode_indices(s, x, dx, mapping: MappingTable) -> np.ndarray:
    """Vectorised :func:`encode_slot`."""
    s = np.asarray(s, dtype=np.int64)
    if s.size and (s.min() < 0 or s.max() >= mapping.M):
        raise DomainError("symbol outside 0..M-1")
    ms = np.asarray(mapping.perm, dtype=np.int64)[s]
    return ms + mapping.M * ((ms + np.asarray(x) + np.asarray(dx)) % 2)


def invert_indices(m, x, mapping: MappingTable) -> tuple[np.ndarray, np.ndarray]:
    m = np.asarray(m, dtype=np.int64)
    M = mapping.M
    if m.size and (m.min() < 0 or m.max() >= 2 * M):
        raise DomainError("index outside 0..2M-1")
    low, high = m % M, m // M
    return np.asarray(mapping.inverse, dtype=np.int64)[low], (high + low + np.asarray(x)) % 2


def encode_frame(x, stream: SymbolStream, mapping: MappingTable) -> Y00Frame:
    x = np.asarray(x, dtype=np.int64)
    if len(x) != stream.slots:
        raise ValueError(f"plaintext has {len(x)} bits but stream has {stream.slots} slots")
    if stream.M != mapping.M:
        raise ConfigError("stream and mapping disagree on M")
    return Y00Frame(x, encode_indices(stream.s, x, stream.dx, mapping), stream)


def bob_decode_slot(y: complex, s: int, dx: int, mapping: MappingTable,
                    constellation: Constellation, eta: float) -> int:
    """Pick the bit whose keyed state is nearer to ``y``; ties go to 0."""
    a0 = eta * constellation.amplitudes[encode_slot(s, 0, dx, mapping)]
    a1 = eta * constellation.amplitudes[encode_slot(s, 1, dx, mapping)]
    d0, d1 = abs(y - a0), abs(y - a1)
    return int(d1 < d0 - _TIE_RTOL * max(d0, d1, 1.0))


def bob_decode(y, s, dx, mapping: MappingTable, constellation: Constellation, eta: float) -> np.ndarray:
    y = np.asarray(y, dtype=complex)
    amps = eta * constellation.amplitudes
    a0 = amps[encode_indices(s, 0, dx, mapping)]
    a1 = amps[encode_indices(s, 1, dx, mapping)]
    d0, d1 = np.abs(y - a0), np.abs(y - a1)
    return (d1 < d0 - _TIE_RTOL * np.maximum(np.maximum(d0, d1), 1.0)).astype(np.int64)
