"""The digit Markov chain s_{n,t}: transition function, sampling, stationarity."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .cylinders import transition_prob, transition_tail
from .expansion import DomainError, _check_unit, _exactify, as_params, fixed_point_xstar
from .natext import rho_cdf, rho_ppf
from .transfer import integrate


@dataclass(frozen=True)
class ChainState:
    s: float
    n: int
    t0: float


def _branch_threshold(N: int, x, u) -> int:
    """Smallest K >= N with u_{N,K}(x) > u."""
    return max(N, math.floor(N / (1 - u) - x) + 1)


def q_interval(params, x, u):
    """Q(x, (u, 1]): total P-mass of the branches landing above u.

    Telescopes to (x + N - 1)/(x + K - 1) with K the first branch above u.
    """
    N = as_params(params).N
    _check_unit(x)
    _check_unit(u)
    x, u = _exactify(x), _exactify(u)
    if u == 1:
        return x * 0
    K = _branch_threshold(N, x, u)
    return (x + N - 1) / (x + K - 1)


def q_interval_direct(params, x, u, M: int = 10**4):
    """Brute-force Q(x, (u, 1]): sum P_{N,i}(x) branch by branch.

    M is raised past the last branch at or below u, so the only closed form
    used is the telescoped tail mass beyond M.
    """
    N = as_params(params).N
    x, u = _exactify(x), _exactify(u)
    if u == 1:
        return x * 0
    M = max(M, math.ceil(N / (1 - u)) + 2)
    total = x * 0
    for i in range(N, M + 1):
        if 1 - N / (x + i) > u:
            total += transition_prob(N, x, i)
    return total + transition_tail(N, x, M)


def sample_digit(params, s, v):
    """Inverse-CDF draw of the next digit from state s with uniform v in (0, 1).

    The CDF up to K is 1 - (s + N - 1)/(s + K), so the draw is
    ceil((s + N - 1)/(1 - v) - s), clamped to >= N.
    """
    N = as_params(params).N
    if not 0 < v < 1:
        raise DomainError(f"v={v} outside (0, 1)")
    s, v = _exactify(s), _exactify(v)
    return max(N, math.ceil((s + N - 1) / (1 - v) - s))


def sample_digits(N: int, s: np.ndarray, v: np.ndarray) -> np.ndarray:
    return np.maximum(N, np.ceil((s + N - 1) / (1 - v) - s))


def chain_step(params, s, i):
    N = as_params(params).N
    return 1 - N / (_exactify(s) + i)


def simulate_chain(params, t, n: int, seed=None) -> list[ChainState]:
    """One trajectory s_0 = t, s_k = 1 - N/(s_{k-1} + a_k), a_k ~ P_{N,.}(s_{k-1})."""
    N = as_params(params).N
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    t = float(t)
    states = [ChainState(t, 0, t)]
    s = t
    for k in range(1, n + 1):
        v = rng.random()
        while v == 0.0:
            v = rng.random()
        s = 1 - N / (s + sample_digit(N, s, v))
        states.append(ChainState(s, k, t))
    return states


def _paths_chunk(N, t, n, size, seed_seq, record):
    rng = np.random.default_rng(seed_seq)
    s = t(rng, size) if callable(t) else np.full(size, float(t))
    hist = [s.copy()] if record else None
    for _ in range(n):
        s = 1 - N / (s + sample_digits(N, s, rng.random(size)))
        if record:
            hist.append(s.copy())
    return np.stack(hist) if record else s


def simulate_paths(params, t, n: int, paths: int, seed=0, threads: int = 1, chunk: int = 2**16,
                   record: bool = False) -> np.ndarray:
    """Many independent chains run in lockstep.

    ``t`` is a starting state or a callable (rng, size) -> initial states.
    Returns the states at step n, or the full (n+1, paths) history if
    ``record``.  Each fixed-size chunk of paths gets its own spawned seed, so
    output depends on ``seed`` but not on ``threads``.
    """
    N = as_params(params).N
    sizes = [chunk] * (paths // chunk) + ([paths % chunk] if paths % chunk else [])
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        parts = list(pool.map(lambda a: _paths_chunk(N, t, n, a[0], a[1], record), zip(sizes, seeds)))
    return np.concatenate(parts, axis=-1)


def rho_sampler(params):
    return lambda rng, size: rho_ppf(params, rng.random(size))


@dataclass
class StationarityReport:
    u: list
    integral: list
    expected: list

    @property
    def max_discrepancy(self) -> float:
        return max(abs(a - b) for a, b in zip(self.integral, self.expected))


def q_integral(params, u: float, nquad: int = 256) -> float:
    """Integral of Q(x, (u, 1]) over x against rho_N, split at the jump of K."""
    N = as_params(params).N
    c = math.log(N / (N - 1))
    z = N / (1 - u)
    jump = z - math.floor(z)
    pieces = [(0.0, jump), (jump, 1.0)] if 0 < jump < 1 else [(0.0, 1.0)]
    total = 0.0
    for a, b in pieces:
        mid = 0.5 * (a + b)
        K = _branch_threshold(N, mid, u)
        # Q / (c (x + N - 1)) = 1/(c (x + K - 1)) on each piece
        total += integrate(lambda x: 1.0 / (c * (x + K - 1)), a, b, nquad)
    return total


def stationarity_check(params, u_grid, nquad: int = 256) -> StationarityReport:
    N = as_params(params).N
    u_grid = [float(u) for u in u_grid]
    for u in u_grid:
        if not 0 <= u < 1:
            raise DomainError(f"u={u} outside [0, 1)")
    got = [q_integral(N, u, nquad) for u in u_grid]
    expected = [math.log(N / (u + N - 1)) / math.log(N / (N - 1)) for u in u_grid]
    return StationarityReport(u_grid, got, expected)


def regularity_witness(params, x, n: int) -> list:
    """x_0 = x, x_{k+1} = 1 - N/(x_k + N + 1); converges to x*."""
    N = as_params(params).N
    _check_unit(x)
    seq = [_exactify(x)]
    for _ in range(n):
        seq.append(1 - N / (seq[-1] + N + 1))
    return seq


def witness_contraction(params) -> float:
    """Derivative N/(x* + N + 1)^2 of the witness map at its fixed point."""
    N = as_params(params).N
    xs = fixed_point_xstar(N)
    return N / (xs + N + 1) ** 2


def witness_rate(params, x, n: int = 60, floor: float = 1e-13):
    """Fitted geometric ratio of |x_k - x*| and the first k with |x_k - x*| <= 1e-12."""
    N = as_params(params).N
    xs = fixed_point_xstar(N)
    d = np.abs(np.asarray(regularity_witness(N, float(x), n), dtype=float) - xs)
    hit = np.nonzero(d <= 1e-12)[0]
    first = int(hit[0]) if hit.size else None
    k = np.nonzero(d > floor)[0]
    if k.size < 2:
        return 0.0, first
    return math.exp(np.polyfit(k, np.log(d[k]), 1)[0]), first


def ks_against_rho(params, samples: np.ndarray):
    """One-sample Kolmogorov-Smirnov test against the rho_N distribution."""
    from scipy import stats
    return stats.kstest(samples, lambda x: rho_cdf(params, np.clip(x, 0.0, 1.0)))
