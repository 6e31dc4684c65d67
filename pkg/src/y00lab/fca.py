"""Generalized fast-correlation-attack analysis.

Eve collects ``N`` blocks; in each block her keystream error pattern ``e``
(width ``1 + log2 M``) occurs with probability ``p(e)``.  She accepts a key
hypothesis while every nonzero pattern occurs at most ``N(e)`` times.  This
module computes

* Bayes thresholds ``N(e)`` and the derived floor ``N(0) = N - sum N(e)``,
* the exact success probability (binomial per pattern, multinomial jointly),
* the entropy bound ``N (H2[N(e)/N] - H2[p(e)])`` with per-regime validity
  flags for its two ingredients, and an always-valid KL-Chernoff cross-check,
* the probability excess ``delta`` that keeps success below ``eps`` and the
  resulting ceiling on ``p(0)`` that a secure mapping must respect.

Cryptographic-scale quantities (``N ~ 1e37``, ``delta ~ 1e-37``) are handled
in mpmath at ``Y00LAB_PRECISION_BITS`` bits (default 192).
"""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, NamedTuple, Sequence

import mpmath
from mpmath import mpf

from y00lab.channel import ErrorPatternDist
from y00lab.errors import ConfigError, DegeneratePairError, DomainError, InfeasibleError

__all__ = [
    "precision_bits",
    "binary_entropy",
    "bayes_threshold",
    "bayes_crossing",
    "bayes_prefers_alternative",
    "BayesThresholds",
    "bayes_thresholds",
    "threshold_floor_n0",
    "exact_success_binomial",
    "log2_success_binomial",
    "exact_success_multinomial",
    "EntropyBound",
    "entropy_bound",
    "kl_chernoff_bound",
    "RecoveryVerdict",
    "check_recovery_condition",
    "DeltaSolution",
    "solve_delta",
    "SecurityBudget",
    "security_budget",
    "SecurityVerdict",
    "security_condition",
    "AnalysisConfig",
    "AnalysisReport",
    "analyze",
    "PaperExample",
    "paper_example",
    "infer_half_size",
]

DEFAULT_PRECISION = 192
MIN_SOLVER_PRECISION = 160
EXACT_BINOMIAL_MAX_N = 10_000
EXACT_RATIONAL_MAX_N = 64
MULTINOMIAL_MAX_N = 30


def precision_bits() -> int:
    raw = os.environ.get("Y00LAB_PRECISION_BITS")
    if raw is None:
        return DEFAULT_PRECISION
    try:
        bits = int(raw)
    except ValueError:
        raise ConfigError(f"Y00LAB_PRECISION_BITS must be an integer, got {raw!r}") from None
    if bits < 53:
        raise ConfigError("Y00LAB_PRECISION_BITS must be at least 53")
    return bits


def _mp(x) -> mpf:
    if isinstance(x, Fraction):
        return mpf(x.numerator) / x.denominator
    if isinstance(x, float):
        # 0.1 means one tenth, not the nearest double
        return mpf(float.__repr__(x))
    return mpf(x)


def binary_entropy(p) -> mpf:
    """Shannon binary entropy in bits, evaluated at the current mpmath precision."""
    if isinstance(p, Fraction) and p > Fraction(1, 2):
        p = 1 - p  # exact, so nothing is lost near 1
    p = _mp(p)
    if p < 0 or p > 1:
        raise DomainError(f"probability {p} outside [0, 1]")
    if p == 0 or p == 1:
        return mpf(0)
    return -(p * mpmath.log(p, 2) + (1 - p) * mpmath.log1p(-p) / mpmath.log(2))


# --- Bayes thresholds ------------------------------------------------------------

class Crossing(NamedTuple):
    value: mpf
    # slope of log[Pr(r') Bin(k; p_r')] - log[Pr(r) Bin(k; p_r)] in k
    slope_sign: int
    integral: bool


def bayes_crossing(p_r, p_rp, prior_r, prior_rp, N) -> Crossing:
    """Real-valued count at which the two binomial posteriors are equal."""
    for name, v in (("p_r", p_r), ("p_rp", p_rp)):
        if not 0 < v < 1:
            raise DomainError(f"{name}={v} must lie strictly between 0 and 1")
    if prior_r <= 0 or prior_rp <= 0:
        raise DomainError("priors must be positive")
    with mpmath.workprec(max(precision_bits(), 128)):
        pr, prp = _mp(p_r), _mp(p_rp)
        denom = mpmath.log(1 / pr - 1, 2) - mpmath.log(1 / prp - 1, 2)
        if denom == 0 or pr == prp:
            raise DegeneratePairError(f"p_r == p_rp == {p_r}: the pair gives no leverage")
        n = _mp(N)
        value = n + (n * mpmath.log(pr / prp, 2) + mpmath.log(_mp(prior_r) / _mp(prior_rp), 2)) / denom
        nearest = mpmath.nint(value)
        integral = abs(value - nearest) <= mpf(2) ** (-(mpmath.mp.prec // 2)) * max(1, abs(value))
        if integral:
            value = nearest
        return Crossing(value, 1 if denom > 0 else -1, bool(integral))


def bayes_threshold(p_r, p_rp, prior_r, prior_rp, N) -> int:
    """Ceil of the posterior crossing count.

    ``N + ceil(x) == ceil(N + x)`` for integer ``N``, so it does not matter
    whether the ceiling is read as enclosing ``N`` or not.  The result may
    fall outside ``[0, N]``; clipping is the caller's business.
    """
    c = bayes_crossing(p_r, p_rp, prior_r, prior_rp, N)
    return int(mpmath.ceil(c.value))


def bayes_prefers_alternative(k: int, p_r, p_rp, prior_r, prior_rp, N) -> bool:
    """Decision at count ``k`` derived from the threshold alone.

    True means the alternative ``r'`` is at least as probable as ``r``.
    """
    c = bayes_crossing(p_r, p_rp, prior_r, prior_rp, N)
    thr = int(mpmath.ceil(c.value))
    if c.slope_sign > 0:
        return k >= thr
    return k < thr or (k == thr and c.integral)


@dataclass
class BayesThresholds:
    N: int
    thresholds: dict[int, int]
    n0_floor: int
    consistent: bool
    clipped: list[int] = field(default_factory=list)
    degenerate: list[int] = field(default_factory=list)

    def acceptance(self) -> dict[int, mpf]:
        return {e: mpf(v) / self.N for e, v in self.thresholds.items()}


def threshold_floor_n0(thresholds: Mapping[int, int] | BayesThresholds, N: int | None = None) -> int:
    """N(0) = N - sum of the nonzero-pattern thresholds (may be negative)."""
    if isinstance(thresholds, BayesThresholds):
        N, thresholds = thresholds.N, thresholds.thresholds
    if N is None:
        raise ValueError("N is required with a plain threshold mapping")
    return int(N) - sum(int(v) for e, v in thresholds.items() if e != 0)


def bayes_thresholds(pairs: Mapping[int, Iterable[Sequence[float]]], N: int) -> BayesThresholds:
    """Minimum threshold over the supplied hypothesis pairs, per pattern.

    ``pairs[e]`` lists ``(p_r, p_rp, prior_r, prior_rp)`` tuples.  Results are
    clipped to ``[0, N]``; degenerate pairs are skipped and patterns with only
    degenerate pairs are listed in ``degenerate``.
    """
    out, clipped, degenerate = {}, [], []
    for e, plist in pairs.items():
        if e == 0:
            continue
        best = None
        for p_r, p_rp, prior_r, prior_rp in plist:
            try:
                t = bayes_threshold(p_r, p_rp, prior_r, prior_rp, N)
            except DegeneratePairError:
                continue
            best = t if best is None else min(best, t)
        if best is None:
            degenerate.append(e)
            continue
        if not 0 <= best <= N:
            clipped.append(e)
            best = min(max(best, 0), N)
        out[e] = best
    n0 = threshold_floor_n0(out, N)
    return BayesThresholds(int(N), out, n0, n0 >= 0, clipped, degenerate)


# --- exact success probabilities ------------------------------------------------

def _log_binom(n: int, k: int) -> float:
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def _logsumexp(logs: Sequence[float]) -> float:
    if not logs:
        return -math.inf
    top = max(logs)
    if top == -math.inf:
        return -math.inf
    return top + math.log(math.fsum(math.exp(v - top) for v in logs))


def log2_success_binomial(p, Ne: int, N: int) -> float:
    """log2 of ``sum_{n<=Ne} C(N,n) p^n (1-p)^(N-n)`` in the log domain."""
    p = float(p)
    if not 0 <= p <= 1:
        raise DomainError(f"p={p} outside [0, 1]")
    if N < 0:
        raise ValueError("N must be non-negative")
    if N > EXACT_BINOMIAL_MAX_N:
        raise ConfigError(f"N={N} exceeds the exact-evaluation limit {EXACT_BINOMIAL_MAX_N}")
    Ne = min(int(Ne), N)
    if Ne < 0:
        return -math.inf
    if Ne == N or p == 0:
        return 0.0
    if p == 1:
        return -math.inf
    lp, lq = math.log(p), math.log1p(-p)
    logs = [_log_binom(N, n) + n * lp + (N - n) * lq for n in range(Ne + 1)]
    return min(_logsumexp(logs) / math.log(2), 0.0)


def exact_success_binomial(p, Ne: int, N: int, *, exact: bool = False):
    """Probability that a Binomial(N, p) count stays at or below ``Ne``.

    With ``exact=True`` (N <= 64) the sum is done over rationals and a
    Fraction is returned; ``p`` is taken as the exact value of its float.
    """
    if exact:
        if N > EXACT_RATIONAL_MAX_N:
            raise ConfigError(f"exact rational mode is limited to N <= {EXACT_RATIONAL_MAX_N}")
        q = Fraction(p)
        if not 0 <= q <= 1:
            raise DomainError(f"p={p} outside [0, 1]")
        Ne = min(int(Ne), N)
        return sum((Fraction(math.comb(N, n)) * q ** n * (1 - q) ** (N - n)
                    for n in range(max(Ne + 1, 0))), Fraction(0))
    return 2.0 ** log2_success_binomial(p, Ne, N)


def _compositions(limits: Sequence[int], total: int):
    # all (n_1..n_k) with 0 <= n_i <= limits[i] and sum <= total
    if not limits:
        yield ()
        return
    head, rest = limits[0], limits[1:]
    for n in range(min(head, total) + 1):
        for tail in _compositions(rest, total - n):
            yield (n,) + tail


def exact_success_multinomial(dist: ErrorPatternDist, thresholds: Mapping[int, int] | BayesThresholds,
                              N: int) -> float:
    """Probability that every nonzero pattern occurs at most ``N(e)`` times.

    Patterns missing from ``thresholds`` are not tolerated (``N(e) = 0``).
    The count of ``e = 0`` takes the remainder, which automatically respects
    ``n(0) >= N(0)``.
    """
    if isinstance(thresholds, BayesThresholds):
        thresholds = thresholds.thresholds
    if N > MULTINOMIAL_MAX_N:
        raise ConfigError(f"N={N} too large for exhaustive enumeration (limit {MULTINOMIAL_MAX_N}); "
                          "use entropy_bound / kl_chernoff_bound instead")
    p = [float(v) for v in dist.p]
    active = [e for e in range(1, len(p)) if p[e] > 0]
    limits = [min(int(thresholds.get(e, 0)), N) for e in active]
    log_p = {e: math.log(p[e]) for e in active}
    log_p0 = math.log(p[0]) if p[0] > 0 else None
    lgN = math.lgamma(N + 1)
    logs = []
    for counts in _compositions(limits, N):
        n0 = N - sum(counts)
        if n0 > 0 and log_p0 is None:
            continue
        term = lgN - math.lgamma(n0 + 1) + (n0 * log_p0 if n0 else 0.0)
        for e, n in zip(active, counts):
            if n:
                term += n * log_p[e] - math.lgamma(n + 1)
        logs.append(term)
    return min(math.exp(_logsumexp(logs)), 1.0) if logs else 0.0


# --- bounds ----------------------------------------------------------------------

class EntropyBound(NamedTuple):
    log2_bound: mpf
    # log2 p^n (1-p)^(N-n) <= -N H2(p) for every accepted count n <= aN
    term_bound_valid: bool
    # the same inequality at the largest accepted count only
    term_bound_valid_at_threshold: bool
    # log2 sum_{n <= aN} C(N, n) <= N H2(a)
    count_bound_valid: bool
    count_bound_exact: bool


def _binomial_sum_exact(N: int, K: int) -> bool:
    # sum_{n<=K} C(N,n) <= 2^(N H2(K/N))  <=>  S * K^K * (N-K)^(N-K) <= N^N
    s = sum(math.comb(N, n) for n in range(K + 1))
    return s * K ** K * (N - K) ** (N - K) <= N ** N


def binomial_sum_bound_holds(a, N: int) -> bool:
    """Exact big-integer check of the binomial-sum entropy inequality at ``K = floor(aN)``.

    H2 is increasing on [0, 1/2], so for ``a <= 1/2`` checking at ``K/N`` is
    the tightest case.  For ``a > 1/2`` the inequality is evaluated
    numerically at ``a`` itself.
    """
    K = int(mpmath.floor(_mp(a) * N))
    if N == 0:
        return True
    if _mp(a) <= mpf(1) / 2:
        return _binomial_sum_exact(N, K)
    s = sum(math.comb(N, n) for n in range(K + 1))
    with mpmath.workprec(max(precision_bits(), 2 * N.bit_length() + 64)):
        return mpmath.log(s, 2) <= N * binary_entropy(a)


def entropy_bound(a, p, N: int, *, exact_limit: int = 100_000) -> EntropyBound:
    """``N (H2[a] - H2[p])`` together with validity flags of its ingredients."""
    for name, v in (("a", a), ("p", p)):
        if not 0 <= _mp(v) <= 1:
            raise DomainError(f"{name}={v} outside [0, 1]")
    with mpmath.workprec(precision_bits()):
        a_m, p_m, n_m = _mp(a), _mp(p), _mp(N)
        bound = n_m * (binary_entropy(a_m) - binary_entropy(p_m))
        K = int(mpmath.floor(a_m * n_m))
        # the term inequality is linear in n: (n - N p)(log2 p - log2(1-p)) <= 0
        if p_m in (0, 1):
            term_all = term_thr = True
        else:
            slope = mpmath.log(p_m, 2) - mpmath.log1p(-p_m) / mpmath.log(2)

            def ok(n):
                return (mpf(n) - n_m * p_m) * slope <= 0
            term_all = ok(0) and ok(K)
            term_thr = ok(K)
        if N <= exact_limit:
            count_ok, count_exact = binomial_sum_bound_holds(a_m, int(N)), True
        else:
            count_ok, count_exact = a_m <= mpf(1) / 2, False
        return EntropyBound(bound, bool(term_all), bool(term_thr), bool(count_ok), count_exact)


def kl_chernoff_bound(a, p, N) -> mpf:
    """log2 of the Chernoff bound ``2^(-N D(a||p))`` on the lower binomial tail."""
    a_m, p_m = _mp(a), _mp(p)
    if not (0 <= a_m < p_m < 1):
        raise DomainError(f"KL-Chernoff bound needs 0 <= a < p < 1 (got a={a}, p={p})")
    with mpmath.workprec(precision_bits()):
        l2 = mpmath.log(2)
        d = (1 - a_m) * (mpmath.log1p(-a_m) - mpmath.log1p(-p_m)) / l2
        if a_m > 0:
            d += a_m * mpmath.log(a_m / p_m, 2)
        return -_mp(N) * d


# --- recovery condition -------------------------------------------------------------

@dataclass
class RecoveryVerdict:
    total_break: bool
    deterministic_pattern: int | None
    # smallest acceptance fraction meeting H2[a] >= H2[p(e)], per pattern
    min_acceptance: dict[int, float]

    @property
    def reason(self) -> str:
        if not self.total_break:
            return "no error pattern is deterministic"
        if self.deterministic_pattern == 0:
            return "noiseless: Eve reads the keystream directly"
        return "a nonzero error pattern is certain, so Eve corrects it exactly"


def check_recovery_condition(dist: ErrorPatternDist, tol: float = 1e-12) -> RecoveryVerdict:
    det = None
    for e, v in enumerate(dist.p):
        if v >= 1.0 - tol:
            det = e
            break
    mins = {e: float(min(v, 1.0 - v)) for e, v in enumerate(dist.p)}
    return RecoveryVerdict(det is not None, det, mins)


# --- security budget -----------------------------------------------------------------

class DeltaSolution(NamedTuple):
    delta: mpf
    residual: mpf
    target_entropy: mpf


def solve_delta(eps, N, a, *, rtol: float = 1e-6, prec: int | None = None) -> DeltaSolution:
    """Smallest ``delta`` with ``H2[a] - log2(eps)/N <= H2[a + delta]``.

    Bisection on ``[0, 1/2 - a]`` where H2 is increasing.  The returned
    ``delta`` sits on the feasible side; ``residual = H2(a+delta) - target``
    is at most ``rtol * |log2 eps| / N``.
    """
    prec = max(prec or precision_bits(), MIN_SOLVER_PRECISION)
    with mpmath.workprec(prec):
        eps_m, a_m, n_m = _mp(eps), _mp(a), _mp(N)
        if not 0 < eps_m <= 1:
            raise DomainError(f"eps={eps} must lie in (0, 1]")
        if n_m <= 0:
            raise DomainError("N must be positive")
        if not 0 <= a_m < mpf(1) / 2:
            raise DomainError(f"acceptance fraction a={a} must lie in [0, 1/2)")
        gap = -mpmath.log(eps_m, 2) / n_m
        base = binary_entropy(a_m)
        target = base + gap
        if gap == 0:
            return DeltaSolution(mpf(0), mpf(0), target)
        if target > 1:
            raise InfeasibleError(f"required entropy {mpmath.nstr(target, 8)} exceeds 1 bit; no delta exists")
        lo, hi = mpf(0), mpf(1) / 2 - a_m
        tol_res = _mp(rtol) * gap / 10
        for _ in range(4 * prec):
            mid = (lo + hi) / 2
            if binary_entropy(a_m + mid) >= target:
                hi = mid
            else:
                lo = mid
            if hi - lo <= hi * _mp(rtol) / 10 and binary_entropy(a_m + hi) - target <= tol_res:
                break
        return DeltaSolution(+hi, binary_entropy(a_m + hi) - target, target)


@dataclass
class SecurityBudget:
    eps: mpf
    N: int
    acceptance: dict[int, mpf]
    delta: dict[int, mpf | None]
    n0_fraction: mpf
    reduction: mpf | None
    margin: mpf | None
    infeasible: dict[int, str] = field(default_factory=dict)


def security_budget(eps, N: int, acceptance: Mapping[int, object], *, prec: int | None = None) -> SecurityBudget:
    """Per-pattern ``delta`` and the resulting ceiling ``N(0)/N - sum delta``.

    ``acceptance`` maps each nonzero pattern to ``a(e) = N(e)/N``.
    """
    prec = max(prec or precision_bits(), MIN_SOLVER_PRECISION)
    with mpmath.workprec(prec):
        cache: dict = {}
        deltas, infeasible = {}, {}
        acc = {e: _mp(v) for e, v in acceptance.items() if e != 0}
        for e, a in acc.items():
            key = a
            if key not in cache:
                try:
                    cache[key] = solve_delta(eps, N, a, prec=prec).delta
                except (InfeasibleError, DomainError) as exc:
                    cache[key] = exc
            got = cache[key]
            if isinstance(got, Exception):
                deltas[e] = None
                infeasible[e] = str(got)
            else:
                deltas[e] = got
        n0_fraction = 1 - mpmath.fsum(acc.values())
        if infeasible:
            reduction = margin = None
        else:
            reduction = mpmath.fsum(deltas.values())
            margin = n0_fraction - reduction
        return SecurityBudget(_mp(eps), int(N), acc, deltas, n0_fraction, reduction, margin, infeasible)


@dataclass
class SecurityVerdict:
    margin: mpf | None
    feasible: bool
    satisfied: bool | None
    message: str


def security_condition(budget: SecurityBudget, p0=None) -> SecurityVerdict:
    """Compare ``Pr(0)`` with the ceiling a secure mapping must stay under."""
    if budget.margin is None:
        bad = ", ".join(format(e, "b") for e in sorted(budget.infeasible)[:4])
        return SecurityVerdict(None, False, False,
                               f"no IT-secure mapping exists for this configuration (no delta for patterns {bad})")
    if budget.margin < 0:
        return SecurityVerdict(budget.margin, False, False,
                               "no IT-secure mapping exists for this configuration (negative margin)")
    if p0 is None:
        return SecurityVerdict(budget.margin, True, None, "margin available; supply Pr(0) to decide")
    ok = _mp(p0) <= budget.margin
    return SecurityVerdict(budget.margin, True, bool(ok),
                           "security condition satisfied" if ok else "security condition violated: Pr(0) exceeds margin")


# --- orchestration -------------------------------------------------------------------

@dataclass
class AnalysisConfig:
    N: int
    eps: object = mpf(2) ** -64
    # "uniform" (a = 2^-w), "bayes" (from the envelope), or {pattern: a}
    acceptance: object = "uniform"
    envelope: tuple | None = None
    label: str = ""


@dataclass
class AnalysisReport:
    config: dict
    thresholds: BayesThresholds
    rows: list[dict]
    log2_exact_multinomial: float | None
    recovery: RecoveryVerdict
    budget: SecurityBudget
    security: SecurityVerdict
    verdict: str
    notes: list[str]

    @property
    def secure(self) -> bool:
        return self.verdict == "secure"

    def to_json(self) -> dict:
        def col(key):
            return {r["pattern"]: r[key] for r in self.rows}
        return {
            "config": self.config,
            "thresholds": {
                "N": str(self.thresholds.N),
                "per_pattern": {format(e, f"0{self.config['width']}b"): str(v)
                                for e, v in sorted(self.thresholds.thresholds.items())},
                "n0_floor": str(self.thresholds.n0_floor),
                "consistent": self.thresholds.consistent,
                "clipped": len(self.thresholds.clipped),
                "degenerate": len(self.thresholds.degenerate),
            },
            "log2_exact": {"per_pattern": col("log2_exact"),
                           "multinomial": self.log2_exact_multinomial},
            "log2_entropy_bound": col("log2_entropy_bound"),
            "log2_kl_bound": col("log2_kl_bound"),
            "regime_flags": {r["pattern"]: r["flags"] for r in self.rows},
            "delta_per_pattern": col("delta"),
            "margin": {
                "n0_fraction": _fmt(self.budget.n0_fraction),
                "reduction": _fmt(self.budget.reduction),
                "margin": _fmt(self.budget.margin, 40),
                "p0": self.rows[0]["p"] if self.rows else None,
                "feasible": self.security.feasible,
            },
            "recovery": {"total_break": self.recovery.total_break,
                         "deterministic_pattern": self.recovery.deterministic_pattern,
                         "reason": self.recovery.reason},
            "verdict": self.verdict,
            "message": self.security.message if not self.recovery.total_break else self.recovery.reason,
            "notes": self.notes,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        cols = ["pattern", "p", "a", "threshold", "log2_exact", "log2_entropy_bound",
                "log2_kl_bound", "delta", "excess_satisfied", "term_bound_valid", "count_bound_valid", "entropy_bound_holds"]
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in self.rows:
            f = r["flags"]
            w.writerow([r["pattern"], r["p"], r["a"], r["threshold"], r["log2_exact"],
                        r["log2_entropy_bound"], r["log2_kl_bound"], r["delta"], r["excess_satisfied"],
                        f["term_bound_valid"], f["count_bound_valid"], f["entropy_bound_holds"]])
        return buf.getvalue()


def _fmt(x, digits: int = 20):
    if x is None:
        return None
    return mpmath.nstr(x, digits, min_fixed=-3, max_fixed=3) if isinstance(x, mpf) else x


def _num(x):
    if x is None:
        return None
    f = float(x)
    return f if math.isfinite(f) else str(f)


def _acceptance_for(dist: ErrorPatternDist, config: AnalysisConfig, N: int, notes: list[str]):
    n_patterns = len(dist.p)
    if config.acceptance == "uniform":
        a = {e: mpf(1) / n_patterns for e in range(1, n_patterns)}
        th = {e: int(mpmath.floor(v * N)) for e, v in a.items()}
        return a, BayesThresholds(N, th, threshold_floor_n0(th, N), threshold_floor_n0(th, N) >= 0)
    if config.acceptance == "bayes":
        if config.envelope is None:
            raise ConfigError("acceptance='bayes' needs the per-slot min/max envelope")
        p_min, p_max = config.envelope
        pairs = {}
        for e in range(1, n_patterns):
            pe = float(dist.p[e])
            pairs[e] = [(pe, float(alt), 1.0, 1.0) for alt in (p_min[e], p_max[e])
                        if 0 < pe < 1 and 0 < alt < 1]
        th = bayes_thresholds(pairs, N)
        a = {e: mpf(v) / N for e, v in th.thresholds.items()}
        for e in th.degenerate + [e for e in range(1, n_patterns) if e not in th.thresholds and e not in th.degenerate]:
            a[e] = mpf(1) / n_patterns
            th.thresholds[e] = int(mpmath.floor(a[e] * N))
        if th.degenerate:
            notes.append(f"{len(th.degenerate)} patterns have no distinguishing hypothesis pair; "
                         "uniform acceptance used for them")
        th.n0_floor = threshold_floor_n0(th.thresholds, N)
        th.consistent = th.n0_floor >= 0
        return a, th
    a = {int(e): _mp(v) for e, v in dict(config.acceptance).items() if int(e) != 0}
    th = {e: int(mpmath.floor(v * N)) for e, v in a.items()}
    return a, BayesThresholds(N, th, threshold_floor_n0(th, N), threshold_floor_n0(th, N) >= 0)


def analyze(dist: ErrorPatternDist, config: AnalysisConfig) -> AnalysisReport:
    """Thresholds, exact values where feasible, all bounds, and the security verdict."""
    N = int(config.N)
    if N < 1:
        raise ConfigError("N must be at least 1")
    notes: list[str] = []
    with mpmath.workprec(max(precision_bits(), MIN_SOLVER_PRECISION)):
        acceptance, thresholds = _acceptance_for(dist, config, N, notes)
        budget = security_budget(config.eps, N, acceptance)
        rows = []
        width = dist.width
        for e in range(len(dist.p)):
            p = float(dist.p[e])
            a = acceptance.get(e, budget.n0_fraction if e == 0 else mpf(0))
            Ne = thresholds.thresholds.get(e, thresholds.n0_floor if e == 0 else 0)
            if e == 0:
                # n(0) is bounded from below; its tail is the pooled "nonzero" row
                rows.append({"pattern": format(0, f"0{width}b"), "p": p, "a": _num(a),
                             "threshold": str(Ne), "log2_exact": None, "log2_entropy_bound": None,
                             "log2_kl_bound": None, "delta": None, "excess_satisfied": None,
                             "flags": {"term_bound_valid": None, "term_bound_valid_at_threshold": None,
                                       "count_bound_valid": None, "count_bound_exact": None,
                                       "entropy_bound_holds": None, "kl_applicable": False}})
                continue
            rows.append(_pattern_row(format(e, f"0{width}b"), p, a, Ne, N, budget.delta.get(e)))
        # nonzero patterns pooled, as in the aggregate form of the bound
        p_nz = math.fsum(float(v) for v in dist.p[1:])
        a_nz = 1 - budget.n0_fraction
        rows.append(_pattern_row("nonzero", p_nz, a_nz, N - max(thresholds.n0_floor, 0), N, None))
        exact_multi = None
        if N <= MULTINOMIAL_MAX_N:
            try:
                v = exact_success_multinomial(dist, thresholds, N)
                exact_multi = math.log2(v) if v > 0 else "-inf"
            except ConfigError as exc:
                notes.append(str(exc))
        else:
            notes.append("exact multinomial skipped: N beyond exhaustive-enumeration range")
        recovery = check_recovery_condition(dist)
        security = security_condition(budget, dist.p[0])
        if recovery.total_break:
            verdict = "broken"
        elif security.satisfied:
            verdict = "secure"
        else:
            verdict = "violated"
        if not thresholds.consistent:
            notes.append(f"inconsistent thresholds: N(0) = {thresholds.n0_floor} < 0")
        cfg = {"N": str(N), "eps": _fmt(_mp(config.eps)), "width": width,
               "acceptance": config.acceptance if isinstance(config.acceptance, str) else "explicit",
               "label": config.label}
        return AnalysisReport(cfg, thresholds, rows, exact_multi, recovery, budget, security, verdict, notes)


def _pattern_row(label: str, p: float, a, Ne: int, N: int, delta) -> dict:
    a_m = _mp(a)
    eb = entropy_bound(a_m, p, N)
    log2_exact = None
    if N <= EXACT_BINOMIAL_MAX_N:
        log2_exact = log2_success_binomial(p, Ne, N)
    kl = None
    if a_m < _mp(p) < 1:
        kl = kl_chernoff_bound(a_m, p, N)
    holds = None
    if log2_exact is not None:
        holds = bool(log2_exact <= float(eb.log2_bound) + 1e-9)
    excess = None if delta is None else bool(_mp(p) >= a_m + delta)
    return {
        "pattern": label,
        "p": p,
        "a": _num(a_m),
        "threshold": str(Ne),
        "log2_exact": _num(log2_exact),
        "log2_entropy_bound": _num(eb.log2_bound),
        "log2_kl_bound": _num(kl),
        "delta": _fmt(delta, 12),
        "excess_satisfied": excess,
        "flags": {"term_bound_valid": eb.term_bound_valid, "term_bound_valid_at_threshold": eb.term_bound_valid_at_threshold,
                  "count_bound_valid": eb.count_bound_valid, "count_bound_exact": eb.count_bound_exact,
                  "entropy_bound_holds": holds,
                  "kl_applicable": kl is not None},
    }


# --- the numerical example at full scale ------------------------------------------------

PAPER_T_LCM = (1 << 127) - 1
PAPER_EPS_LOG2 = -64
PAPER_DELTA = 3.762e-37
PAPER_REDUCTION = 1.540e-33


@dataclass
class PaperExample:
    M: int
    N: int
    eps: mpf
    a: mpf
    delta: mpf
    residual: mpf
    reduction: mpf
    margin: mpf
    p0_ceiling: mpf
    inferred_M: int
    inference_error: float

    def to_json(self) -> dict:
        return {
            "M": self.M,
            "N": str(self.N),
            "T_LCM": str(PAPER_T_LCM),
            "eps_log2": PAPER_EPS_LOG2,
            "acceptance_fraction": _fmt(self.a),
            "delta": _fmt(self.delta),
            "delta_float": float(self.delta),
            "delta_residual": _fmt(self.residual, 6),
            "nonzero_patterns": 2 * self.M - 1,
            "margin_reduction": _fmt(self.reduction),
            "margin_reduction_float": float(self.reduction),
            "p0_ceiling": _fmt(self.p0_ceiling, 40),
            "margin": _fmt(self.margin, 40),
            "inferred_M": self.inferred_M,
            "inferred_M_relative_error": self.inference_error,
            "pattern_probability_floor": f"1/(2M) + {mpmath.nstr(self.delta, 6)}",
            "p0_ceiling_expr": f"1/(2M) - {mpmath.nstr(self.reduction, 6)}",
        }


def infer_half_size(target_reduction: float = PAPER_REDUCTION, eps=None, t_lcm: int = PAPER_T_LCM,
                    candidates: Iterable[int] = tuple(1 << k for k in range(1, 17))) -> tuple[int, float]:
    """Pick the M whose solved ``(2M-1) * delta`` lands closest to ``target_reduction``.

    Returns ``(M, relative error)``.  Each candidate is solved from scratch,
    so the choice is an independent consistency check on the reported
    pattern-probability shift.
    """
    eps = mpf(2) ** PAPER_EPS_LOG2 if eps is None else eps
    best = None
    for M in candidates:
        width = M.bit_length()  # log2(2M)
        N = t_lcm // width
        a = mpf(1) / (2 * M)
        d = solve_delta(eps, N, a).delta
        err = abs(float((2 * M - 1) * d) / target_reduction - 1)
        if best is None or err < best[1]:
            best = (M, err)
    return best


def paper_example(M: int = 2048) -> PaperExample:
    """Full-precision reproduction of the TinyMT numerical example."""
    with mpmath.workprec(max(precision_bits(), MIN_SOLVER_PRECISION)):
        eps = mpf(2) ** PAPER_EPS_LOG2
        width = M.bit_length()
        N = PAPER_T_LCM // width
        a = mpf(1) / (2 * M)
        sol = solve_delta(eps, N, a)
        reduction = (2 * M - 1) * sol.delta
        n0_fraction = 1 - (2 * M - 1) * a
        inferred, err = infer_half_size(eps=eps)
        return PaperExample(M, N, eps, a, sol.delta, sol.residual, reduction,
                            n0_fraction - reduction, n0_fraction - reduction, inferred, err)
