"""Small-instance quantum hypothesis testing over coherent-state frames.

Each hypothesis is a key pair, hence a sequence of basis indices; the
tapped state is a product of coherent states and the ensemble is fully
described by its Gram matrix.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Sequence

import mpmath
import numpy as np

from y00lab.errors import DomainError
from y00lab.y00core import Constellation

__all__ = [
    "GramEnsemble",
    "DetectionReport",
    "gram_from_frames",
    "srm_success",
    "helstrom_binary",
    "strictness_margin",
]

PSD_TOL = 1e-9
# below this the double-precision margin is recomputed in extended precision
_MARGIN_REFINE = 1e-8


@dataclass(frozen=True)
class GramEnsemble:
    priors: np.ndarray
    G: np.ndarray
    # elementwise log of G, kept so tiny overlaps survive in the refine path
    log_G: np.ndarray | None = None

    def __post_init__(self):
        G = np.asarray(self.G, dtype=complex)
        priors = np.asarray(self.priors, dtype=float)
        K = len(priors)
        if G.shape != (K, K):
            raise ValueError(f"Gram matrix shape {G.shape} does not match {K} priors")
        if abs(math.fsum(priors) - 1.0) > 1e-12 or np.any(priors < 0):
            raise ValueError("priors must be non-negative and sum to 1")
        if not np.allclose(G, G.conj().T, atol=1e-12):
            raise ValueError("Gram matrix is not Hermitian")
        if not np.allclose(np.diag(G), 1.0, atol=1e-12):
            raise ValueError("Gram matrix must have unit diagonal")
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "priors", priors)

    @property
    def K(self) -> int:
        return len(self.priors)

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.G).min())


@dataclass(frozen=True)
class DetectionReport:
    success: float
    p_correct: np.ndarray
    priors: np.ndarray
    method: str
    margin: float

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["hypothesis_index", "prior", "p_correct"])
        for i, (pr, pc) in enumerate(zip(self.priors, self.p_correct)):
            w.writerow([i, repr(float(pr)), repr(float(pc))])
        w.writerow(["success_total", "margin"])
        w.writerow([repr(float(self.success)), repr(float(self.margin))])
        return buf.getvalue()


def gram_from_frames(frames: Sequence[Sequence[int]], constellation: Constellation,
                     eta: float, priors: Sequence[float] | None = None) -> GramEnsemble:
    """Gram matrix ``G[i, j] = prod_t <eta*alpha[m_i(t)] | eta*alpha[m_j(t)]>``."""
    frames = [np.asarray(f, dtype=np.int64) for f in frames]
    K = len(frames)
    if K < 2:
        raise ValueError("need at least two hypotheses")
    T = len(frames[0])
    if any(len(f) != T for f in frames):
        raise ValueError("all frames must have the same length")
    amps = eta * constellation.amplitudes[np.stack(frames)]  # K x T
    # log <a|b> = -(|a|^2 + |b|^2)/2 + conj(a) b, summed over slots
    norms = np.sum(np.abs(amps) ** 2, axis=1)
    cross = amps.conj() @ amps.T
    # real part is exactly -sum_t |a_i(t) - a_j(t)|^2 / 2
    dist2 = np.sum(np.abs(amps[:, None, :] - amps[None, :, :]) ** 2, axis=2)
    log_G = -dist2 / 2 + 1j * cross.imag
    np.fill_diagonal(log_G, 0.0)
    G = np.exp(log_G)
    if priors is None:
        priors = np.full(K, 1.0 / K)
    return GramEnsemble(np.asarray(priors, dtype=float), G, log_G)


def _check_psd(evals, where="Gram matrix"):
    if evals.min() < -PSD_TOL:
        raise DomainError(f"{where} is not positive semidefinite (min eigenvalue {evals.min():.3g})")


def srm_success(ens: GramEnsemble) -> DetectionReport:
    """Square-root measurement on the prior-weighted ensemble.

    With weighted Gram matrix ``Gw[i, j] = sqrt(p_i p_j) G[i, j]`` the SRM
    succeeds on hypothesis ``i`` with probability ``(sqrt(Gw)[i, i])**2 / p_i``.
    """
    w = np.sqrt(ens.priors)
    Gw = w[:, None] * ens.G * w[None, :]
    evals, vecs = np.linalg.eigh(Gw)
    _check_psd(evals / max(ens.priors.max(), 1e-300))
    # eigenvalues at roundoff level are zero; their square roots would not be
    evals = np.where(evals > ens.K * np.finfo(float).eps * evals.max(), evals, 0.0)
    root = (vecs * np.sqrt(evals)) @ vecs.conj().T
    diag = np.real(np.diag(root)) ** 2
    success = float(math.fsum(diag))
    with np.errstate(divide="ignore", invalid="ignore"):
        p_correct = np.where(ens.priors > 0, diag / ens.priors, 0.0)
    margin = 1.0 - success
    if margin < _MARGIN_REFINE:
        margin = _srm_margin_mp(ens)
    return DetectionReport(success, p_correct, ens.priors, "SRM", margin)


def _srm_margin_mp(ens: GramEnsemble) -> float:
    # Off-diagonal overlaps below 1e-16 are invisible in doubles; rebuild the
    # weighted Gram matrix from log G in extended precision.
    depth = 0.0 if ens.log_G is None else float(-ens.log_G.real.min())
    prec = 160 + int(math.ceil(2 * depth / math.log(2)))
    with mpmath.workprec(prec):
        K = ens.K
        Gw = mpmath.matrix(K, K)
        for i in range(K):
            for j in range(K):
                if i == j:
                    val = mpmath.mpf(1)
                elif ens.log_G is not None:
                    val = mpmath.exp(mpmath.mpc(ens.log_G[i, j]))
                else:
                    val = mpmath.mpc(ens.G[i, j])
                Gw[i, j] = mpmath.sqrt(ens.priors[i] * ens.priors[j]) * val
        evals, vecs = mpmath.eighe(Gw)
        total = mpmath.mpf(0)
        for i in range(K):
            d = mpmath.mpf(0)
            for k in range(K):
                ev = evals[k] if evals[k] > 0 else 0
                d += abs(vecs[i, k]) ** 2 * mpmath.sqrt(ev)
            total += d ** 2
        return float(1 - total)


def helstrom_binary(p0: float, p1: float, overlap_mag_sq: float) -> float:
    """Optimal success probability for two pure states with the given |<a|b>|^2."""
    if p0 < 0 or p1 < 0 or abs(p0 + p1 - 1.0) > 1e-12:
        raise ValueError(f"invalid priors ({p0}, {p1})")
    if not 0.0 <= overlap_mag_sq <= 1.0:
        raise DomainError("overlap magnitude squared must lie in [0, 1]")
    return (1.0 + math.sqrt(1.0 - 4.0 * p0 * p1 * overlap_mag_sq)) / 2.0


def helstrom_binary_margin(p0: float, p1: float, overlap_mag_sq: float) -> float:
    """1 - helstrom_binary(...), without cancellation for tiny overlaps."""
    helstrom_binary(p0, p1, overlap_mag_sq)
    x = 4.0 * p0 * p1 * overlap_mag_sq
    return x / (2.0 * (1.0 + math.sqrt(1.0 - x)))


def strictness_margin(ens: GramEnsemble) -> float:
    """Gap ``1 - success``; strictly positive whenever two states overlap."""
    margin = srm_success(ens).margin
    off = ens.G - np.diag(np.diag(ens.G))
    # coherent states are never orthogonal, even when G underflows to 0
    overlapping = ens.log_G is not None or bool(np.any(np.abs(off) > 0))
    if overlapping and not margin > 0:
        raise AssertionError(f"success reached 1 for non-orthogonal states (margin {margin})")
    return margin
