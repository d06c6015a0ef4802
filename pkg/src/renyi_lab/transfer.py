"""Perron-Frobenius operator of R_N under rho_N, acting on grid densities.

U f(x) = sum_{i >= N} P_{N,i}(x) f(u_{N,i}(x)).  The sum is cut at M and the
remaining branches, which all map into [1 - N/(x+M+1), 1), are lumped into one
term carrying their exact total mass (x+N-1)/(x+M).  That lumped term is
evaluated either at 1 ("endpoint") or at the mass-weighted mean of the tail
branch points ("centroid"); the centroid rule pushes the truncation error from
O(M^-2) to O(M^-3).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import polygamma

from .expansion import as_params
from .grid import CHEBYSHEV, LINEAR, GridDensity

ENDPOINT = "endpoint"
CENTROID = "centroid"


class FitRejected(RuntimeError):
    """Error norms were not decreasing inside the fit window."""


def default_truncation(params) -> int:
    return max(1000, 100 * as_params(params).N)


def _tail_point(N: int, x: np.ndarray, M: int, tail: str) -> np.ndarray:
    if tail == ENDPOINT:
        return np.ones_like(x)
    if tail == CENTROID:
        # mean of 1 - N/(x+i) over i > M weighted by P_{N,i}(x)
        return 1 - N * (1 - (x + M) * polygamma(1, x + M + 1))
    raise ValueError(f"unknown tail rule {tail!r}")


def branch_terms(params, x, M: int | None = None, tail: str = CENTROID):
    """Weights and points of the truncated branch sum at each x.

    Returns (P, u) of shape (len(x), M - N + 2): the first M - N + 1 columns
    are the branches i = N..M, the last column is the lumped tail.
    """
    N = as_params(params).N
    M = default_truncation(N) if M is None else M
    if M < N:
        raise ValueError(f"truncation M={M} below N={N}")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    i = np.arange(N, M + 1, dtype=float)
    xi = x[:, None] + i[None, :]
    P = (x[:, None] + N - 1) / (xi * (xi - 1))
    u = 1 - N / xi
    P = np.concatenate([P, ((x + N - 1) / (x + M))[:, None]], axis=1)
    u = np.concatenate([u, _tail_point(N, x, M, tail)[:, None]], axis=1)
    return P, u


def _evaluate(f, pts):
    if isinstance(f, GridDensity):
        return f(pts)
    return np.asarray(f(pts), dtype=float) * np.ones_like(pts)


def apply_U(params, f, x, M: int | None = None, tail: str = CENTROID):
    """Uf at x for a GridDensity or vectorised callable f."""
    scalar = np.isscalar(x)
    P, u = branch_terms(params, x, M, tail)
    out = np.einsum("ij,ij->i", P, _evaluate(f, u.ravel()).reshape(u.shape))
    return float(out[0]) if scalar else out


def apply_L(params, h, x, M: int | None = None, tail: str = CENTROID):
    """Lebesgue-density transfer operator: sum_i N/(x+i)^2 h(u_{N,i}(x)).

    Equal to (x+N-1)^{-1} U[(y+N-1) h](x); the lumped tail uses the same rule
    as apply_U, which for the endpoint rule reduces to N h(1)/(x+M).
    """
    N = as_params(params).N
    scalar = np.isscalar(x)
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    P, u = branch_terms(N, xa, M, tail)
    W = P * (u + N - 1) / (xa[:, None] + N - 1)
    out = np.einsum("ij,ij->i", W, _evaluate(h, u.ravel()).reshape(u.shape))
    return float(out[0]) if scalar else out


@lru_cache(maxsize=32)
def _transfer_matrix_cached(N, nodes, kind, M, tail, lebesgue):
    nodes = np.asarray(nodes)
    n = len(nodes)
    P, u = branch_terms(N, nodes, M, tail)
    if lebesgue:
        P = P * (u + N - 1) / (nodes[:, None] + N - 1)
    if kind == CHEBYSHEV:
        proto = GridDensity(nodes, np.zeros(n), kind)
        A = np.empty((n, n))
        for k in range(n):
            A[k] = P[k] @ proto.interpolation_matrix(u[k])
    else:
        # hat functions: scatter each branch weight onto its two neighbouring nodes
        j = np.clip(np.searchsorted(nodes, u, side="right") - 1, 0, n - 2)
        t = (u - nodes[j]) / (nodes[j + 1] - nodes[j])
        rows = np.broadcast_to(np.arange(n)[:, None], u.shape)
        A = np.zeros(n * n)
        np.add.at(A, (rows * n + j).ravel(), (P * (1 - t)).ravel())
        np.add.at(A, (rows * n + j + 1).ravel(), (P * t).ravel())
        A = A.reshape(n, n)
    A.flags.writeable = False
    return A


def transfer_matrix(params, f: GridDensity, M: int | None = None, tail: str = CENTROID) -> np.ndarray:
    """Matrix A with A @ f.values = (U f)(nodes), or L for h-form densities."""
    N = as_params(params).N
    M = default_truncation(N) if M is None else M
    return _transfer_matrix_cached(N, tuple(f.nodes), f.kind, M, tail, f.form == "h")


def iterate_U(params, f: GridDensity, n: int, M: int | None = None, tail: str = CENTROID) -> GridDensity:
    """U^n f resampled at the nodes after every step."""
    return iterates(params, f, n, M, tail)[-1]


def iterates(params, f: GridDensity, n: int, M: int | None = None, tail: str = CENTROID) -> list[GridDensity]:
    """[f, U f, ..., U^n f]."""
    if n < 0:
        raise ValueError("n must be >= 0")
    A = transfer_matrix(params, f, M, tail)
    out = [f]
    v = f.values
    for _ in range(n):
        v = A @ v
        out.append(f.with_values(v))
    return out


@lru_cache(maxsize=None)
def gauss_legendre(n: int):
    t, w = np.polynomial.legendre.leggauss(n)
    return t, w


def integrate(func, a: float, b: float, n: int = 128) -> float:
    t, w = gauss_legendre(n)
    half = 0.5 * (b - a)
    return float(half * (w @ func(a + half * (t + 1))))


def integrate_rho(params, f, a: float = 0.0, b: float = 1.0, n: int = 128) -> float:
    """Integral of f over [a, b] against rho_N.

    Piecewise-linear densities are integrated segment by segment.
    """
    N = as_params(params).N
    c = math.log(N / (N - 1))
    integrand = lambda y: _evaluate(f, y) / (c * (y + N - 1))
    if isinstance(f, GridDensity) and f.kind == LINEAR:
        cuts = np.concatenate([[a], f.nodes[(f.nodes > a) & (f.nodes < b)], [b]])
        t, w = gauss_legendre(8)
        lo, hi = cuts[:-1, None], cuts[1:, None]
        pts = lo + 0.5 * (hi - lo) * (t + 1)
        vals = integrand(pts.ravel()).reshape(pts.shape)
        return float(np.sum(0.5 * (hi - lo) * (vals @ w)[:, None]))
    return integrate(integrand, a, b, n)


def u_infinity(params, f, n: int = 128) -> float:
    """Limit constant of U^n f, i.e. the rho_N-mean of f."""
    return integrate_rho(params, f, 0.0, 1.0, n)


def f_from_h(params, h) -> GridDensity:
    """Density relative to rho_N of the measure with Lebesgue density h."""
    N = as_params(params).N
    c = math.log(N / (N - 1))
    if isinstance(h, GridDensity):
        return h.with_values(c * (h.nodes + N - 1) * h.values, form="f")
    return GridDensity.from_function(lambda y: c * (y + N - 1) * h(y))


def lipschitz_norm(g: GridDensity) -> float:
    """Sup norm plus the largest nodal difference quotient."""
    v, x = g.values, g.nodes
    return float(np.max(np.abs(v)) + np.max(np.abs(np.diff(v) / np.diff(x))))


@dataclass
class RateReport:
    q_hat: float
    k_hat: float
    norms: list = field(default_factory=list)
    window: tuple = (0, 0)
    exact: bool = False


def rate_estimate(params, f: GridDensity, n_max: int = 30, M: int | None = None, tail: str = CENTROID,
                  skip: int = 2, floor: float = 1e-9) -> RateReport:
    """Fit ||U^n f - U^inf f||_L ~ k q^n ||f||_L over the pre-noise regime.

    The fit window starts at ``skip`` and stops at the first n whose error norm
    drops below ``floor * ||f||_L``.
    """
    if n_max < 5:
        raise ValueError("n_max must be >= 5")
    limit = u_infinity(params, f)
    fnorm = lipschitz_norm(f)
    norms = [lipschitz_norm(g.with_values(g.values - limit)) for g in iterates(params, f, n_max, M, tail)]
    scale = max(fnorm, 1.0)
    if max(norms[1:]) <= floor * scale:
        return RateReport(0.0, 0.0, norms, (1, n_max), exact=True)
    end = skip
    while end + 1 <= n_max and norms[end + 1] > floor * scale:
        end += 1
    if end - skip + 1 < 3:
        raise FitRejected(f"only {end - skip + 1} usable norms before the noise floor")
    window = np.arange(skip, end + 1)
    e = np.asarray(norms)[window]
    if np.any(np.diff(e) >= 0):
        raise FitRejected("error norms not monotonically decreasing in the fit window")
    slope, intercept = np.polyfit(window, np.log(e), 1)
    return RateReport(math.exp(slope), math.exp(intercept) / fnorm, norms, (int(skip), int(end)))
