"""Tapped coherent-state channel and Eve's heterodyne + ML symbol decision.

Eve receives ``|eta * alpha_m>`` and measures both quadratures; the outcome
density is ``exp(-|y - eta*alpha_m|**2) / pi``.  Decisions are maximum
likelihood over all 2M states: angular sectors for the phase scheme, real
intervals for the intensity scheme.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy import integrate, special

from y00lab.errors import ConfigError, IntegrationError
from y00lab.keystream import symbol_width
from y00lab.y00core import Constellation, MappingTable, invert_indices

__all__ = [
    "NoiseModel",
    "ConfusionMatrix",
    "ErrorPatternDist",
    "AggregateDist",
    "overlap",
    "heterodyne_sample",
    "ml_decide",
    "confusion_matrix",
    "monte_carlo_confusion",
    "error_pattern_dist",
    "aggregate_error_dist",
    "slot_error_dists",
]

INTEGRATION_TOL = 1e-10


@dataclass(frozen=True)
class NoiseModel:
    eta: float
    measurement: str = "heterodyne"

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ConfigError(f"eta must lie in [0, 1], got {self.eta}")
        if self.measurement != "heterodyne":
            raise ConfigError(f"unsupported measurement {self.measurement!r}")


@dataclass(frozen=True)
class ConfusionMatrix:
    """``P[i, j]`` = Pr(decide j | sent i) over the 2M states."""

    M: int
    P: np.ndarray
    max_abs_error: float = 0.0

    def __post_init__(self):
        P = np.asarray(self.P, dtype=float)
        if P.shape != (2 * self.M, 2 * self.M):
            raise ValueError(f"confusion matrix must be {2 * self.M}x{2 * self.M}")
        P.setflags(write=False)
        object.__setattr__(self, "P", P)

    def symbol_error(self) -> float:
        """Average probability of a wrong 2M-ary decision under uniform symbols."""
        return float(1.0 - np.mean(np.diag(self.P)))


@dataclass(frozen=True)
class ErrorPatternDist:
    """Per-slot distribution of error patterns ``e`` of width ``1 + log2 M``.

    Pattern ``e`` is an int: the Δx error bit is the MSB, followed by the
    ``log2 M`` running-key error bits, MSB first.
    """

    width: int
    p: np.ndarray
    tag: str = ""

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        if p.shape != (1 << self.width,):
            raise ValueError(f"need {1 << self.width} pattern probabilities, got {p.shape}")
        if np.any(p < 0):
            raise ValueError("pattern probabilities must be non-negative")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    @property
    def total(self) -> float:
        return math.fsum(self.p)

    @classmethod
    def from_mapping(cls, probs: dict[int, float], width: int, tag: str = "") -> "ErrorPatternDist":
        p = np.zeros(1 << width)
        for e, v in probs.items():
            p[e] = v
        return cls(width, p, tag)

    def pattern_bits(self, e: int) -> str:
        return format(e, f"0{self.width}b")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["pattern_bits", "probability"])
        for e, v in enumerate(self.p):
            w.writerow([self.pattern_bits(e), repr(float(v))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, tag: str = "") -> "ErrorPatternDist":
        rows = list(csv.DictReader(io.StringIO(text)))
        if not rows:
            raise ValueError("empty error-pattern CSV")
        width = len(rows[0]["pattern_bits"])
        return cls.from_mapping({int(r["pattern_bits"], 2): float(r["probability"]) for r in rows},
                                width, tag)


class AggregateDist(NamedTuple):
    dist: ErrorPatternDist
    p_min: np.ndarray
    p_max: np.ndarray


def overlap(a: complex, b: complex) -> complex:
    """Inner product <a|b> of two coherent states.

    Equal to ``exp(-(|a|^2 + |b|^2)/2 + conj(a) b)``; the real part of the
    exponent is rewritten as ``-|a - b|^2 / 2`` so the modulus never exceeds 1.
    """
    a, b = complex(a), complex(b)
    return complex(np.exp(-abs(a - b) ** 2 / 2 + 1j * (a.conjugate() * b).imag))


def heterodyne_sample(alpha: complex, rng: np.random.Generator, size=None):
    """Heterodyne outcome(s): alpha plus complex Gaussian noise, variance 1/2 per quadrature."""
    scale = math.sqrt(0.5)
    if size is None:
        re, im = rng.normal(0.0, scale, 2)
        return complex(alpha + re + 1j * im)
    shape = (int(size),) if np.ndim(size) == 0 else tuple(size)
    noise = rng.normal(0.0, scale, (2,) + shape)
    return np.asarray(alpha) + noise[0] + 1j * noise[1]


def _phase_origin(constellation: Constellation) -> float:
    return float(np.angle(constellation.amplitudes[0]))


def _intensity_boundaries(constellation: Constellation, eta: float) -> np.ndarray:
    levels = eta * constellation.amplitudes.real
    return (levels[1:] + levels[:-1]) / 2


def ml_decide(y, constellation: Constellation, eta: float) -> np.ndarray:
    """Maximum-likelihood state index for heterodyne outcome(s) ``y``."""
    y = np.asarray(y, dtype=complex)
    K = constellation.size
    if constellation.scheme == "phase":
        rel = np.angle(y) - _phase_origin(constellation)
        return np.mod(np.rint(rel * constellation.M / np.pi).astype(np.int64), K)
    order = np.argsort(constellation.amplitudes.real)
    if np.any(order != np.arange(K)):
        raise ConfigError("intensity levels must be increasing in the basis index")
    return np.searchsorted(_intensity_boundaries(constellation, eta), y.real, side="left").astype(np.int64)


def _phase_density(psi: float, r: float) -> float:
    # phase density of r*exp(i*0) + complex Gaussian noise with E|n|^2 = 1
    c = math.cos(psi)
    return (math.exp(-r * r) / (2 * math.pi)
            + r * c / (2 * math.sqrt(math.pi)) * math.exp(-(r * math.sin(psi)) ** 2)
            * math.erfc(-r * c))


def _wrap(angle: float) -> float:
    return (angle + math.pi) % (2 * math.pi) - math.pi


def _phase_entry(r: float, offset: float, half_width: float) -> tuple[float, float]:
    lo, hi = offset - half_width, offset + half_width
    points = [0.0] if lo < 0.0 < hi else None
    val, err = integrate.quad(_phase_density, lo, hi, args=(r,), points=points,
                              epsabs=INTEGRATION_TOL / 100, epsrel=1e-13, limit=200)
    return val, err


def confusion_matrix(constellation: Constellation, noise: NoiseModel, *,
                     use_symmetry: bool = True) -> ConfusionMatrix:
    """Integrated ML confusion matrix for Eve's heterodyne receiver.

    Phase scheme: each entry is the phase density integrated over the
    decision sector by adaptive quadrature.  With ``use_symmetry`` only row 0
    is integrated and the rest follow by circulant rotation.
    Intensity scheme: Gaussian interval probabilities in closed form.
    """
    M, K, eta = constellation.M, constellation.size, noise.eta
    P = np.zeros((K, K))
    worst = 0.0
    if constellation.scheme == "phase":
        angles = np.angle(constellation.amplitudes)
        half = math.pi / (2 * M)
        rows = [0] if use_symmetry else range(K)
        for i in rows:
            r = eta * abs(constellation.amplitudes[i])
            for j in range(K):
                val, err = _phase_entry(r, _wrap(angles[j] - angles[i]), half)
                if err > INTEGRATION_TOL:
                    raise IntegrationError(f"quadrature for P[{i}][{j}] missed tolerance", err)
                P[i, j] = val
                worst = max(worst, err)
        if use_symmetry:
            for i in range(1, K):
                P[i] = np.roll(P[0], i)
    else:
        levels = eta * constellation.amplitudes.real
        edges = np.concatenate(([-np.inf], _intensity_boundaries(constellation, eta), [np.inf]))
        for i in range(K):
            # P(lo < Re y <= hi) with Re y ~ N(level, 1/2)
            upper = special.ndtr(np.sqrt(2) * (edges[1:] - levels[i]))
            lower = special.ndtr(np.sqrt(2) * (edges[:-1] - levels[i]))
            P[i] = upper - lower
    return ConfusionMatrix(M, P, worst)


class MonteCarloConfusion(NamedTuple):
    estimate: np.ndarray
    counts: np.ndarray
    samples_per_row: int


def monte_carlo_confusion(constellation: Constellation, noise: NoiseModel,
                          samples_per_row: int, rng: np.random.Generator,
                          batch: int = 250_000) -> MonteCarloConfusion:
    K = constellation.size
    counts = np.zeros((K, K), dtype=np.int64)
    for i in range(K):
        centre = noise.eta * constellation.amplitudes[i]
        done = 0
        while done < samples_per_row:
            n = min(batch, samples_per_row - done)
            y = heterodyne_sample(centre, rng, n)
            counts[i] += np.bincount(ml_decide(y, constellation, noise.eta), minlength=K)
            done += n
    return MonteCarloConfusion(counts / samples_per_row, counts, samples_per_row)


def error_pattern_dist(conf: ConfusionMatrix | np.ndarray, mapping: MappingTable,
                       x: int, m_sent: int) -> ErrorPatternDist:
    """Distribution of Eve's keystream error pattern given the sent index.

    Every decision ``m'`` is inverted with the known plaintext bit into
    ``(s', dx')`` and XORed against the true ``(s, dx)``.
    """
    P = conf.P if isinstance(conf, ConfusionMatrix) else np.asarray(conf, dtype=float)
    M = mapping.M
    k = symbol_width(M)
    if not 0 <= m_sent < 2 * M:
        raise ValueError(f"m_sent {m_sent} outside 0..{2 * M - 1}")
    s_true, dx_true = invert_indices(m_sent, x, mapping)
    s_dec, dx_dec = invert_indices(np.arange(2 * M), x, mapping)
    patterns = ((dx_dec ^ int(dx_true)) << k) | (s_dec ^ int(s_true))
    p = np.bincount(patterns, weights=P[m_sent], minlength=1 << (k + 1))
    return ErrorPatternDist(k + 1, p, f"x={x},m={m_sent}")


def slot_error_dists(conf: ConfusionMatrix, mapping: MappingTable, x: int | None = None):
    """Per-index distributions for one plaintext bit, or for both when ``x`` is None."""
    xs = (0, 1) if x is None else (x,)
    return [error_pattern_dist(conf, mapping, xb, m) for xb in xs for m in range(2 * mapping.M)]


def aggregate_error_dist(dists: Sequence[ErrorPatternDist],
                         weights: Sequence[float] | None = None) -> AggregateDist:
    """Convex combination of per-slot distributions plus the min/max envelope."""
    if not dists:
        raise ValueError("no distributions to aggregate")
    if weights is None:
        weights = np.full(len(dists), 1.0 / len(dists))
    weights = np.asarray(weights, dtype=float)
    if len(weights) != len(dists):
        raise ValueError(f"{len(weights)} weights for {len(dists)} distributions")
    if abs(math.fsum(weights) - 1.0) > 1e-12 or np.any(weights < 0):
        raise ValueError("weights must be non-negative and sum to 1")
    widths = {d.width for d in dists}
    if len(widths) != 1:
        raise ValueError("distributions have different pattern widths")
    stack = np.stack([d.p for d in dists])
    p = np.array([math.fsum(col) for col in (weights[:, None] * stack).T])
    return AggregateDist(ErrorPatternDist(widths.pop(), p, "aggregate"),
                         stack.min(axis=0), stack.max(axis=0))
