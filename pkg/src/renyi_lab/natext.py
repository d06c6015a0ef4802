"""Natural extension of R_N on the unit square and its invariant measure."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np

from .expansion import DomainError, _check_unit, _exactify, as_params, digit, evaluate, expand, renyi_map


class ExtPoint(NamedTuple):
    x: object
    y: object


def ext_map(params, pt):
    """(x, y) -> (R_N(x), u_{N,a_1(x)}(y))."""
    N = as_params(params).N
    x, y = map(_exactify, pt)
    _check_unit(y)
    if x == 1:
        raise DomainError("ext_map undefined at x = 1")
    a = digit(N, x)
    return ExtPoint(renyi_map(N, x), 1 - N / (y + a))


def ext_inverse(params, pt):
    """(x, y) -> (u_{N,a_1(y)}(x), R_N(y))."""
    N = as_params(params).N
    x, y = map(_exactify, pt)
    _check_unit(x)
    if y == 1:
        raise DomainError("ext_inverse undefined at y = 1")
    a = digit(N, y)
    return ExtPoint(1 - N / (x + a), renyi_map(N, y))


def ext_iterate(params, pt, n: int):
    """n-fold ext_map for n > 0, |n|-fold ext_inverse for n < 0."""
    step = ext_map if n >= 0 else ext_inverse
    pt = ExtPoint(*map(_exactify, pt))
    for _ in range(abs(n)):
        pt = step(params, pt)
    return pt


def ext_iterate_closed(params, pt, n: int):
    """Iterate via the reversed-digit representation instead of composition.

    Forward:  (R^n(x), [a_n(x), ..., a_2(x), a_1(x) + y - 1]_R)
    Backward: ([a_n(y), ..., a_1(y) + x - 1]_R, R^n(y))
    """
    x, y = map(_exactify, pt)
    if n == 0:
        return ExtPoint(x, y)
    if n > 0:
        digits = expand(params, x, n)
        if digits.truncated:
            raise DomainError("orbit of x reaches 1")
        return ExtPoint(digits.remainder, evaluate(params, digits[::-1], y))
    digits = expand(params, y, -n)
    if digits.truncated:
        raise DomainError("orbit of y reaches 1")
    return ExtPoint(evaluate(params, digits[::-1], x), digits.remainder)


def ext_digit(params, pt, l: int):
    """Extended digit a_1(first coordinate of R̄^{l-1}(x, y)), any integer l."""
    return digit(params, ext_iterate(params, pt, l - 1).x)


def _rect_cdf(N: int, x, y):
    log = np.log
    return (log((N - 1 + x) / (N - 1)) - log((N - (1 - x) * (1 - y)) / (N - 1 + y))) / math.log(N / (N - 1))


def ext_measure_rect(params, x, y):
    """Extended measure of [0, x] x [0, y] in closed form."""
    N = as_params(params).N
    return float(_rect_cdf(N, float(x), float(y))) if np.isscalar(x) and np.isscalar(y) else _rect_cdf(N, x, y)


def ext_density(params, x, y):
    N = as_params(params).N
    return N / (math.log(N / (N - 1)) * (N - (1 - x) * (1 - y)) ** 2)


def rho_cdf(params, x):
    """rho_N([0, x]) = log((x + N - 1)/(N - 1)) / log(N/(N - 1))."""
    N = as_params(params).N
    return np.log((x + N - 1) / (N - 1)) / math.log(N / (N - 1))


def rho_ppf(params, v):
    N = as_params(params).N
    return (N - 1) * np.expm1(v * math.log(N / (N - 1)))


def rho_density(params, x):
    N = as_params(params).N
    return 1.0 / (math.log(N / (N - 1)) * (x + N - 1))


def rho_t_cdf(params, t, x):
    """rho_{N,t}([0, x]) = N x / (N - (1-x)(1-t)); t = 1 gives Lebesgue measure."""
    N = as_params(params).N
    x, t = _exactify(x), _exactify(t)
    return N * x / (N - (1 - x) * (1 - t))


def conditional_cdf(params, a, x):
    """Extended-measure probability of [0, x] x [0, 1] given the past value a."""
    return rho_t_cdf(params, a, x)


def rho_t_ppf(params, t, v):
    N = as_params(params).N
    return v * (N - 1 + t) / (N - v * (1 - t))


def sample_ext(params, size: int, rng: np.random.Generator):
    """Draws from the extended measure: x from rho_N, then y from rho_{N,x}."""
    x = rho_ppf(params, rng.random(size))
    y = rho_t_ppf(params, x, rng.random(size))
    return x, y


def digits_array(N: int, x: np.ndarray) -> np.ndarray:
    return np.floor(N / (1 - x))


def ext_map_array(params, x: np.ndarray, y: np.ndarray):
    N = as_params(params).N
    z = N / (1 - x)
    a = np.floor(z)
    return z - a, 1 - N / (y + a)


@dataclass
class InvarianceReport:
    rect: tuple
    estimate: float
    closed_form: float
    std_error: float
    n_samples: int
    seed: int

    @property
    def discrepancy(self) -> float:
        return self.estimate - self.closed_form

    @property
    def z_score(self) -> float:
        if self.std_error == 0:
            return 0.0 if self.discrepancy == 0 else math.inf
        return self.discrepancy / self.std_error

    def to_dict(self) -> dict:
        d = asdict(self)
        d["rect"] = list(self.rect)
        return d


def _count_preimage_hits(N, xr, yr, size, seed_seq):
    rng = np.random.default_rng(seed_seq)
    x, y = sample_ext(N, size, rng)
    fx, fy = ext_map_array(N, x, y)
    return int(np.count_nonzero((fx <= xr) & (fy <= yr)))


def ext_invariance_check(params, rect, samples: int = 10**6, seed: int = 0, threads: int = 1,
                         chunk: int = 2**18) -> InvarianceReport:
    """Monte Carlo estimate of the extended measure of R̄^{-1}([0,x] x [0,y]).

    Samples are split into fixed-size chunks with spawned seeds, so the result
    depends on ``seed`` only, not on ``threads``.
    """
    N = as_params(params).N
    xr, yr = (float(v) for v in rect)
    sizes = [chunk] * (samples // chunk) + ([samples % chunk] if samples % chunk else [])
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        hits = sum(pool.map(lambda args: _count_preimage_hits(N, xr, yr, *args), zip(sizes, seeds)))
    p = hits / samples
    return InvarianceReport(
        rect=(xr, yr),
        estimate=p,
        closed_form=float(ext_measure_rect(N, xr, yr)),
        std_error=math.sqrt(p * (1 - p) / samples),
        n_samples=samples,
        seed=seed,
    )
