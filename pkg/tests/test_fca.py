import itertools
import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from scipy import stats

from oracles import (binomial_prefix_sums, binomial_tail_by_enumeration, brute_threshold, grid_fraction,
                     h2, likelihood_ratio, multinomial_by_sequences)
from y00lab import fca
from y00lab.channel import ErrorPatternDist
from y00lab.errors import ConfigError, DegeneratePairError, DomainError, InfeasibleError

GRID = [i / 20 for i in range(1, 20)]


def test_binary_entropy_values():
    assert fca.binary_entropy(0.5) == 1
    assert fca.binary_entropy(0) == 0 and fca.binary_entropy(1) == 0
    assert float(fca.binary_entropy(Fraction(1, 4096))) == pytest.approx(h2(1 / 4096), rel=1e-14)
    # 12/4096 from the first term plus about p/ln 2 from the second
    assert float(fca.binary_entropy(Fraction(1, 4096))) == pytest.approx(0.0032819, abs=5e-8)
    with pytest.raises(DomainError):
        fca.binary_entropy(1.2)


@given(st.floats(0, 1))
def test_binary_entropy_symmetric(p):
    with mpmath.workprec(200):
        q = Fraction(p)
        assert float(fca.binary_entropy(q)) == pytest.approx(float(fca.binary_entropy(1 - q)),
                                                             rel=1e-14, abs=1e-300)


def test_degenerate_pair():
    with pytest.raises(DegeneratePairError):
        fca.bayes_threshold(0.3, 0.3, 1, 1, 20)


def test_threshold_example_scan():
    thr = fca.bayes_threshold(0.3, 0.1, 1, 1, 20)
    assert thr == brute_threshold(20, Fraction(3, 10), Fraction(1, 10), 1, 1)
    # the posterior ratio (r' over r) falls with k, so r' stops winning at the threshold
    assert likelihood_ratio(thr, 20, Fraction(3, 10), Fraction(1, 10), 1, 1) <= 1
    assert likelihood_ratio(thr - 1, 20, Fraction(3, 10), Fraction(1, 10), 1, 1) > 1


@pytest.mark.parametrize("N", [1, 2, 3, 7, 12, 20, 30])
@pytest.mark.parametrize("ratio", [1, 4])
def test_threshold_matches_brute_force(N, ratio):
    for p_r, p_rp in itertools.permutations(GRID, 2):
        got = fca.bayes_threshold(p_r, p_rp, ratio, 1, N)
        want = brute_threshold(N, grid_fraction(p_r), grid_fraction(p_rp), ratio, 1)
        assert min(max(got, 0), N + 1) == want, (p_r, p_rp)


@pytest.mark.parametrize("N", [1, 4, 9, 16, 30])
def test_argmax_decision_matches_threshold(N):
    for p_r, p_rp in itertools.permutations([0.1, 0.25, 0.5, 0.75, 0.9], 2):
        for ratio in (1, 4):
            pr, prp = grid_fraction(p_r), grid_fraction(p_rp)
            for k in range(N + 1):
                direct = likelihood_ratio(k, N, pr, prp, ratio, 1) >= 1
                assert fca.bayes_prefers_alternative(k, p_r, p_rp, ratio, 1, N) == direct


@pytest.mark.parametrize("p_r,p_rp", [(0.3, 0.1), (0.05, 0.4), (0.7, 0.2)])
def test_threshold_fraction_converges(p_r, p_rp):
    frac = math.log((1 - p_rp) / (1 - p_r)) / math.log(p_r * (1 - p_rp) / (p_rp * (1 - p_r)))
    for N in (100, 1000, 10_000):
        thr = fca.bayes_threshold(p_r, p_rp, 1, 1, N)
        assert abs(thr / N - frac) <= 1 / N


def test_threshold_floor():
    assert fca.threshold_floor_n0({}, 100) == 100
    assert fca.threshold_floor_n0({1: 10, 2: 20}, 100) == 70
    assert fca.threshold_floor_n0({1: 60, 2: 60}, 100) == -20
    th = fca.bayes_thresholds({1: [(0.3, 0.1, 1, 1)], 2: [(0.2, 0.2, 1, 1)]}, 20)
    assert th.degenerate == [2] and 1 in th.thresholds
    assert th.n0_floor == 20 - th.thresholds[1]


@pytest.mark.parametrize("N", range(1, 13))
def test_n0_floor_forced_by_counts(N):
    limits = {1: N // 3, 2: N // 4, 3: 1}
    floor = fca.threshold_floor_n0(limits, N)
    for counts in itertools.product(*(range(v + 1) for v in limits.values())):
        if sum(counts) <= N:
            assert N - sum(counts) >= floor


def test_binomial_trivial():
    assert fca.exact_success_binomial(0.37, 9, 9) == 1.0
    assert fca.exact_success_binomial(0.37, 0, 1) == pytest.approx(0.63, rel=1e-14)
    assert fca.exact_success_binomial(0.37, 0, 1, exact=True) == 1 - Fraction(0.37)


def test_binomial_matches_sequence_enumeration():
    want = binomial_tail_by_enumeration(Fraction(1, 5), 3, 10)
    assert fca.exact_success_binomial(Fraction(1, 5), 3, 10, exact=True) == want
    assert fca.exact_success_binomial(0.2, 3, 10) == pytest.approx(float(want), rel=1e-13)


def test_binomial_against_scipy_and_monotone():
    for N in (5, 50, 500):
        prev = -math.inf
        for Ne in range(N + 1):
            v = fca.log2_success_binomial(0.3, Ne, N)
            assert v >= prev - 1e-12
            prev = v
            assert v == pytest.approx(stats.binom.logcdf(Ne, N, 0.3) / math.log(2), rel=1e-9, abs=1e-12)


def test_binomial_limits():
    with pytest.raises(ConfigError):
        fca.exact_success_binomial(0.1, 3, 100, exact=True)
    with pytest.raises(ConfigError):
        fca.log2_success_binomial(0.1, 3, 20_000)


def test_multinomial_trivial_and_degenerate():
    noiseless = ErrorPatternDist.from_mapping({0: 1.0}, 2)
    assert fca.exact_success_multinomial(noiseless, {}, 10) == 1.0
    single = ErrorPatternDist.from_mapping({0: 0.7, 2: 0.3}, 2)
    for N in (1, 5, 17, 30):
        for Ne in range(N + 1):
            got = fca.exact_success_multinomial(single, {2: Ne}, N)
            want = fca.exact_success_binomial(0.3, Ne, N)
            assert math.log(got) == pytest.approx(math.log(want), abs=1e-12)


def test_multinomial_matches_sequences():
    probs = [Fraction(11, 20), Fraction(1, 5), Fraction(3, 20), Fraction(1, 10)]
    dist = ErrorPatternDist(2, [float(v) for v in probs])
    limits = {1: 2, 2: 1, 3: 1}
    want = multinomial_by_sequences(probs, limits, 6)
    assert fca.exact_success_multinomial(dist, limits, 6) == pytest.approx(float(want), rel=1e-12)


def test_multinomial_guard():
    with pytest.raises(ConfigError, match="entropy_bound"):
        fca.exact_success_multinomial(ErrorPatternDist(1, [0.5, 0.5]), {1: 3}, 31)


def test_entropy_bound_examples():
    assert fca.entropy_bound(0.2, 0.2, 50).log2_bound == 0
    assert fca.entropy_bound(0.5, 0.5, 50).log2_bound == 0
    eb = fca.entropy_bound(0.1, 0.3, 25)
    assert float(eb.log2_bound) == pytest.approx(25 * (h2(0.1) - h2(0.3)), rel=1e-12)
    exact = fca.log2_success_binomial(0.3, 2, 25)
    # in this lower-tail regime the entropy bound falls below the exact value
    assert float(eb.log2_bound) < exact
    assert eb.term_bound_valid is False and eb.count_bound_valid is True and eb.count_bound_exact


def test_term_bound_flags_by_regime():
    # (n - Np)(log2 p - log2(1-p)) <= 0: invalid for small n when p < 1/2
    assert fca.entropy_bound(0.1, 0.3, 25).term_bound_valid is False
    assert fca.entropy_bound(0.2, 0.6, 25).term_bound_valid is True
    assert fca.entropy_bound(0.5, 0.5, 25).term_bound_valid is True


def test_binomial_sum_big_integer():
    for N in (1, 2, 10, 97, 400):
        sums = binomial_prefix_sums(N)
        for K in range(N // 2 + 1):
            assert fca._binomial_sum_exact(N, K)
            # the log form against the exact prefix sum
            assert math.log2(sums[K]) <= N * h2(K / N) + 1e-9
    assert fca.binomial_sum_bound_holds(0.25, 1000)


def test_kl_examples():
    assert float(fca.kl_chernoff_bound(0.3 - 1e-9, 0.3, 25)) == pytest.approx(0.0, abs=1e-12)
    b = fca.kl_chernoff_bound(0.1, 0.3, 25)
    assert fca.log2_success_binomial(0.3, 2, 25) <= float(b)
    b = fca.kl_chernoff_bound(0.25, 0.5, 100)
    assert float(b) == pytest.approx(-100 * (1 - h2(0.25)), rel=1e-12)
    assert float(b) == pytest.approx(-18.872, abs=5e-4)
    assert fca.log2_success_binomial(0.5, 25, 100) < float(b)
    with pytest.raises(DomainError):
        fca.kl_chernoff_bound(0.3, 0.3, 10)


@pytest.mark.parametrize("N", [1, 10, 37, 100, 200])
def test_kl_dominates_exact_on_grid(N):
    for p in GRID[:10]:
        for a in [x for x in GRID if x < p]:
            Ne = math.floor(a * N)
            assert fca.log2_success_binomial(p, Ne, N) <= float(fca.kl_chernoff_bound(a, p, N)) + 1e-12


def test_recovery_condition():
    v = fca.check_recovery_condition(ErrorPatternDist.from_mapping({0: 1.0}, 3))
    assert v.total_break and v.deterministic_pattern == 0
    v = fca.check_recovery_condition(ErrorPatternDist(3, np.full(8, 1 / 8)))
    assert not v.total_break and v.min_acceptance[5] == pytest.approx(1 / 8)
    v = fca.check_recovery_condition(ErrorPatternDist.from_mapping({7: 1.0}, 3))
    assert v.total_break and v.deterministic_pattern == 7
    assert "nonzero" in v.reason


def test_solve_delta_examples():
    assert fca.solve_delta(1, 100, 0.1).delta == 0
    sol = fca.solve_delta(2.0 ** -4, 100, 0.1)
    rise = fca.binary_entropy(0.1 + sol.delta) - fca.binary_entropy(0.1)
    assert float(rise) == pytest.approx(0.04, rel=1e-6)
    assert 0 <= sol.residual <= 1e-6 * 4 / 100


def test_solve_delta_errors():
    with pytest.raises(InfeasibleError):
        fca.solve_delta(2.0 ** -100, 1, 0.1)
    with pytest.raises(DomainError):
        fca.solve_delta(0.5, 10, 0.5)
    with pytest.raises(DomainError):
        fca.solve_delta(0.0, 10, 0.1)


def test_solve_delta_paper_scale():
    N = ((1 << 127) - 1) // 12
    sol = fca.solve_delta(mpmath.mpf(2) ** -64, N, Fraction(1, 4096))
    assert 3.758e-37 <= float(sol.delta) <= 3.766e-37
    # first-order check: delta ~ gap / H2'(a)
    slope = math.log2((1 - 1 / 4096) / (1 / 4096))
    assert float(sol.delta) == pytest.approx(64 / N / slope, rel=1e-6)


@settings(max_examples=40, deadline=None)
@given(log_eps=st.integers(1, 64), N=st.integers(200, 10 ** 6), a=st.fractions(Fraction(1, 1000), Fraction(2, 5)))
def test_solve_delta_residual_property(log_eps, N, a):
    assume(h2(float(a)) + log_eps / N < 1 - 1e-9)
    sol = fca.solve_delta(mpmath.mpf(2) ** -log_eps, N, a)
    assert 0 <= sol.residual <= 1e-6 * log_eps / N


def test_security_condition():
    b = fca.security_budget(1, 100, {1: Fraction(1, 10)})
    v = fca.security_condition(b, 0.5)
    assert v.margin == pytest.approx(0.9) and v.satisfied
    assert fca.security_condition(b, 0.95).satisfied is False
    b = fca.security_budget(2.0 ** -64, 10, {1: 0.4, 2: 0.4})
    v = fca.security_condition(b, 0.1)
    assert not v.feasible and "no IT-secure mapping" in v.message


def test_paper_example_numbers():
    ex = fca.paper_example()
    assert ex.M == 2048 and ex.inferred_M == 2048
    assert 3.758e-37 <= float(ex.delta) <= 3.766e-37
    assert 1.5385e-33 <= float(ex.reduction) <= 1.5425e-33
    assert float(ex.reduction) == pytest.approx(4095 * float(ex.delta), rel=1e-12)


def test_analyze_noiseless_is_broken():
    rep = fca.analyze(ErrorPatternDist.from_mapping({0: 1.0}, 2), fca.AnalysisConfig(N=10))
    assert rep.verdict == "broken" and not rep.secure


def test_analyze_uniform_at_paper_scale():
    dist = ErrorPatternDist(12, np.full(4096, 1 / 4096))
    rep = fca.analyze(dist, fca.AnalysisConfig(N=((1 << 127) - 1) // 12))
    assert rep.verdict == "violated"
    js = rep.to_json()
    with mpmath.workprec(200):
        gap = mpmath.mpf(1) / 4096 - mpmath.mpf(js["margin"]["margin"])
    assert 1.5385e-33 <= float(gap) <= 1.5425e-33
    assert rep.rows[1]["excess_satisfied"] is False


def test_analyze_small_cross_check():
    probs = [0.6, 0.2, 0.15, 0.05]
    dist = ErrorPatternDist(2, probs)
    acc = {1: Fraction(3, 10), 2: Fraction(1, 5), 3: Fraction(1, 10)}
    rep = fca.analyze(dist, fca.AnalysisConfig(N=10, acceptance=acc, eps=0.5))
    limits = {1: 3, 2: 2, 3: 1}
    assert rep.thresholds.thresholds == limits
    want = multinomial_by_sequences([Fraction(p) for p in probs], limits, 10)
    assert 2.0 ** rep.log2_exact_multinomial == pytest.approx(float(want), rel=1e-12)
    js = rep.to_json()
    for row in rep.rows[1:-1]:
        p, Ne = row["p"], int(row["threshold"])
        assert row["log2_exact"] == pytest.approx(stats.binom.logcdf(Ne, 10, p) / math.log(2), rel=1e-9)
    assert set(js) >= {"config", "thresholds", "log2_exact", "log2_entropy_bound", "log2_kl_bound",
                       "regime_flags", "delta_per_pattern", "margin", "verdict"}
    header = rep.to_csv().splitlines()[0].split(",")
    assert header[:3] == ["pattern", "p", "a"]


def test_analyze_bayes_acceptance():
    dist = ErrorPatternDist(2, [0.5, 0.2, 0.2, 0.1])
    env = (np.array([0.4, 0.1, 0.1, 0.05]), np.array([0.6, 0.3, 0.3, 0.2]))
    rep = fca.analyze(dist, fca.AnalysisConfig(N=20, acceptance="bayes", envelope=env, eps=0.25))
    assert set(rep.thresholds.thresholds) == {1, 2, 3}
    with pytest.raises(ConfigError):
        fca.analyze(dist, fca.AnalysisConfig(N=20, acceptance="bayes"))


def test_precision_env(monkeypatch):
    monkeypatch.setenv("Y00LAB_PRECISION_BITS", "256")
    assert fca.precision_bits() == 256
    monkeypatch.setenv("Y00LAB_PRECISION_BITS", "lots")
    with pytest.raises(ConfigError):
        fca.precision_bits()
