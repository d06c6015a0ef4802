import math
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import chisquare, ks_2samp

from renyi_lab.cylinders import transition_prob, transition_total
from renyi_lab.expansion import DomainError, fixed_point_xstar
from renyi_lab.rscc import (
    ChainState,
    chain_step,
    ks_against_rho,
    q_interval,
    q_interval_direct,
    regularity_witness,
    rho_sampler,
    sample_digit,
    sample_digits,
    simulate_chain,
    simulate_paths,
    stationarity_check,
    witness_contraction,
    witness_rate,
)

F = Fraction


def test_q_interval_examples():
    for N in (2, 3, 7):
        assert q_interval(N, 0, 0) == F(N - 1, N)
        assert q_interval(N, F(1, 3), 1) == 0
    assert q_interval(2, 0.3, 1 - 1e-12) < 1e-10


def test_q_interval_boundary_branch_goes_below():
    # u_{2,5}(0) = 3/5 exactly, so branch 5 is not above u = 3/5
    N, x, u = 2, F(0), F(3, 5)
    assert q_interval(N, x, u) == F(1, 5)
    assert q_interval(N, x, u) == q_interval_direct(N, x, u)


@settings(max_examples=100, deadline=None)
@given(st.sampled_from([2, 3, 5]),
       st.fractions(0, 1, max_denominator=500),
       st.fractions(0, 1, max_denominator=500).filter(lambda u: u < F(99, 100)))
def test_q_interval_exact_against_direct(N, x, u):
    assert q_interval(N, x, u) == q_interval_direct(N, x, u, M=N + 5)


def test_q_interval_float_against_direct():
    rng = random.Random(2)
    worst = 0.0
    for _ in range(1000):
        N = rng.choice((2, 3, 5))
        x, u = rng.random(), rng.random() * 0.999
        worst = max(worst, abs(q_interval(N, x, u) - q_interval_direct(N, x, u, M=N + 20)))
    assert worst <= 1e-12


def test_kernel_normalization_along_chain():
    for st_ in simulate_chain(3, 1, 50, seed=4):
        s = F(st_.s)
        below = sum(transition_prob(3, s, i) for i in range(3, 200) if 1 - F(3) / (s + i) <= 0)
        assert q_interval(3, s, 0) + below == 1
        assert transition_total(3, s, 40) == 1


def test_sample_digit_examples():
    assert sample_digit(2, 1, 1e-12) == 2
    assert sample_digit(2, 0, 0.4) == 2
    assert sample_digit(2, 0, F(1, 2)) == 2  # CDF at 2 is exactly 1/2
    assert sample_digit(2, 0, 0.51) == 3
    for bad in (0, 1, -0.2):
        with pytest.raises(DomainError):
            sample_digit(2, 0.5, bad)


def test_sample_digit_is_smallest_k_reaching_v():
    rng = random.Random(5)
    for _ in range(500):
        N = rng.choice((2, 3, 5))
        s = F(rng.randrange(1001), 1000)
        v = F(rng.randrange(1, 10**6), 10**6)
        K = sample_digit(N, s, v)
        cdf = lambda k: 1 - (s + N - 1) / (s + k)
        assert cdf(K) >= v
        assert K == N or cdf(K - 1) < v


@pytest.mark.parametrize("N, s", [(2, 0.0), (2, 0.7), (3, 1.0)])
def test_sample_digit_frequencies(N, s):
    rng = np.random.default_rng(9)
    draws = sample_digits(N, np.full(10**6, s), rng.random(10**6))
    top = N + 8
    observed = [np.count_nonzero(draws == i) for i in range(N, top + 1)] + [np.count_nonzero(draws > top)]
    probs = [float(transition_prob(N, s, i)) for i in range(N, top + 1)]
    probs.append(1 - sum(probs))
    assert chisquare(observed, np.array(probs) * 10**6).pvalue > 0.01


def test_chain_step_and_forced_digits():
    s = F(0)
    for _ in range(10):
        s = chain_step(2, s, 2)
    assert s == 0


def test_simulate_chain_reproducible():
    a = simulate_chain(2, 0.3, 20, seed=42)
    b = simulate_chain(2, 0.3, 20, seed=42)
    assert a == b
    assert a[0] == ChainState(0.3, 0, 0.3)
    assert all(0 <= c.s < 1 for c in a[1:])
    with pytest.raises(ValueError):
        simulate_chain(2, 0.3, 0)


@pytest.mark.parametrize("N", [2, 3])
def test_chain_converges_to_rho(N):
    s = simulate_paths(N, 1.0, 50, 10**5, seed=1)
    assert ks_against_rho(N, s).statistic < 0.01


def test_chain_stationary_from_rho():
    N = 2
    hist = simulate_paths(N, rho_sampler(N), 5, 10**5, seed=8, record=True)
    assert ks_2samp(hist[0], hist[5]).pvalue > 0.01
    assert ks_against_rho(N, hist[5]).pvalue > 0.01


def test_simulate_paths_independent_of_threads():
    a = simulate_paths(3, 0.5, 10, 50_000, seed=3, threads=1, chunk=8192)
    b = simulate_paths(3, 0.5, 10, 50_000, seed=3, threads=4, chunk=8192)
    assert np.array_equal(a, b)


def test_chain_seeds_agree_statistically():
    a = simulate_paths(2, 1.0, 30, 50_000, seed=10).mean()
    b = simulate_paths(2, 1.0, 30, 50_000, seed=11).mean()
    se = math.sqrt(2 * 0.085 / 50_000)  # variance of rho_2 is about 0.082
    assert abs(a - b) < 3 * se


def test_stationarity_examples():
    rep = stationarity_check(2, [0.0, 0.5])
    assert rep.integral[0] == pytest.approx(1, abs=1e-12)
    assert rep.expected[1] == pytest.approx(math.log(4 / 3) / math.log(2), abs=1e-15)
    with pytest.raises(DomainError):
        stationarity_check(2, [1.0])


@pytest.mark.parametrize("N", [2, 3, 5])
def test_stationarity_grid(N):
    rep = stationarity_check(N, np.linspace(0, 0.95, 21))
    assert rep.max_discrepancy <= 1e-9


def test_witness_examples():
    assert regularity_witness(2, 0, 3) == [0, F(1, 3), F(2, 5), F(7, 17)]
    xs = fixed_point_xstar(2)
    assert all(abs(v - xs) < 1e-15 for v in regularity_witness(2, xs, 5))


@pytest.mark.parametrize("N", [2, 3, 5, 10])
def test_witness_contracts(N):
    rng = random.Random(N)
    bound = witness_contraction(N)
    assert bound < 1
    xs = fixed_point_xstar(N)
    for _ in range(20):
        x = rng.random()
        seq = regularity_witness(N, x, 8)
        d = [abs(float(v) - xs) for v in seq]
        assert all(b <= a for a, b in zip(d, d[1:]))
        ratio, first = witness_rate(N, x)
        assert ratio <= bound + 0.01
        assert first is not None and first <= 60


def test_transition_derivative_spot_check():
    # P_{N,i} is Lipschitz in x uniformly in i; compare the analytic derivative with finite differences
    N, h = 3, 1e-6
    for i in (3, 4, 10, 100):
        for x in (0.1, 0.5, 0.9):
            fd = (float(transition_prob(N, x + h, i)) - float(transition_prob(N, x - h, i))) / (2 * h)
            a, b = x + i, x + i - 1
            exact = (a * b - (x + N - 1) * (a + b)) / (a * b) ** 2
            assert fd == pytest.approx(exact, rel=1e-6, abs=1e-10)
