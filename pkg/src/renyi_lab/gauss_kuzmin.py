"""Convergence of mu(R_N^n < x) to the invariant law, computed two ways.

The operator route integrates U^n f_0 against rho_N.  The Monte Carlo route
draws x_0 from mu and iterates R_N on fixed-point integers X / 2^P, so that
digits stay exact far beyond where double precision gives out.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .expansion import as_params
from .grid import CHEBYSHEV, LINEAR, GridDensity
from .natext import rho_cdf, rho_density, rho_ppf
from .transfer import CENTROID, f_from_h, integrate_rho, iterates

GK_COLUMNS = ["n", "x", "mu_operator", "mu_montecarlo", "limit", "abs_err_op", "abs_err_mc"]


class RouteMismatch(RuntimeError):
    """Operator and Monte Carlo routes disagree beyond the allowed z-score."""

    def __init__(self, message, reports):
        super().__init__(message)
        self.reports = reports


@dataclass
class InitialDensity:
    """Lebesgue density h of the initial measure plus a sampler for it."""

    name: str
    h: GridDensity
    ppf: object

    @classmethod
    def uniform(cls, n: int = 65):
        return cls("uniform", GridDensity.from_function(np.ones_like, n, CHEBYSHEV, "h"), lambda v: v)

    @classmethod
    def rho(cls, params, n: int = 65):
        return cls("rho", GridDensity.from_function(lambda y: rho_density(params, y), n, CHEBYSHEV, "h"),
                   lambda v: rho_ppf(params, v))

    @classmethod
    def tabulated(cls, nodes, values, name: str = "tabulated", resolution: int = 513):
        """Piecewise-linear density through (nodes, values), renormalised to mass 1.

        The table is refined onto ``resolution`` uniform nodes (keeping the
        original ones) so that U^n of it stays well resolved.
        """
        nodes = np.asarray(nodes, dtype=float)
        values = np.asarray(values, dtype=float)
        if np.any(values < 0):
            raise ValueError("density values must be nonnegative")
        mass = float(np.sum(0.5 * (values[1:] + values[:-1]) * np.diff(nodes)))
        if mass <= 0:
            raise ValueError("density has zero mass")
        coarse = GridDensity(nodes, values / mass, LINEAR, "h")
        fine = np.union1d(nodes, np.linspace(0.0, 1.0, resolution))
        h = GridDensity(fine, coarse(fine), LINEAR, "h")
        return cls(name, h, _linear_ppf(coarse.nodes, coarse.values))


def _linear_ppf(nodes, values):
    dx = np.diff(nodes)
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (values[1:] + values[:-1]) * dx)])

    def ppf(v):
        v = np.asarray(v, dtype=float)
        j = np.clip(np.searchsorted(cdf, v, side="right") - 1, 0, len(dx) - 1)
        h0 = values[j]
        slope = (values[j + 1] - h0) / dx[j]
        r = v - cdf[j]
        disc = np.sqrt(np.maximum(h0 * h0 + 2 * slope * r, 0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(h0 + disc > 0, 2 * r / (h0 + disc), 0.0)
        return np.clip(nodes[j] + t, 0.0, 1.0)

    return ppf


def limit_law(params, x):
    """lim mu(R_N^n < x) = log((x + N - 1)/(N - 1)) / log(N/(N - 1))."""
    return rho_cdf(params, x)


@dataclass
class GKRow:
    x: float
    mu_operator: float
    mu_montecarlo: float | None
    limit: float
    std_error: float | None = None

    @property
    def abs_err_op(self) -> float:
        return abs(self.mu_operator - self.limit)

    @property
    def abs_err_mc(self) -> float | None:
        return None if self.mu_montecarlo is None else abs(self.mu_montecarlo - self.limit)


@dataclass
class GKReport:
    n: int
    rows: list = field(default_factory=list)

    @property
    def sup_error(self) -> float:
        return max(r.abs_err_op for r in self.rows)

    @property
    def sup_error_mc(self) -> float | None:
        errs = [r.abs_err_mc for r in self.rows]
        return None if None in errs else max(errs)

    @property
    def errors(self) -> list:
        return [(r.x, r.mu_operator, r.limit) for r in self.rows]


def operator_route(params, density: InitialDensity, n_max: int, x_grid, M: int | None = None,
                   tail: str = CENTROID, nquad: int = 64) -> np.ndarray:
    """mu(R^n < x) for n = 0..n_max as an (n_max+1, len(x_grid)) array."""
    f0 = f_from_h(params, density.h)
    out = np.empty((n_max + 1, len(x_grid)))
    for n, g in enumerate(iterates(params, f0, n_max, M, tail)):
        out[n] = [integrate_rho(params, g, 0.0, float(x), nquad) if x > 0 else 0.0 for x in x_grid]
    return out


def _uniform_bits(rng, size, bits):
    words = -(-bits // 64)
    X = np.zeros(size, dtype=object)
    for _ in range(words):
        X = (X << 64) | rng.integers(0, 2**64, size, dtype=np.uint64).astype(object)
    return X >> (64 * words - bits)


def sample_fixed_point(density: InitialDensity, size: int, rng, precision: int) -> np.ndarray:
    """Draws X with X / 2^precision ~ mu."""
    if density.name == "uniform":
        return _uniform_bits(rng, size, precision)
    x = np.clip(density.ppf(rng.random(size)), 0.0, np.nextafter(1.0, 0.0))
    hi = np.floor(np.ldexp(x, 53)).astype(np.int64).astype(object)
    # random low bits below the 53 significant ones
    return (hi << (precision - 53)) | _uniform_bits(rng, size, precision - 53)


def bits_per_step(params) -> float:
    """Mean number of bits lost per application of R_N (Lyapunov exponent, base 2)."""
    from scipy.integrate import quad

    N = as_params(params).N
    val, _ = quad(lambda x: math.log2(N / (1 - x) ** 2) * rho_density(N, x), 0.0, 1.0)
    return val


def orbit_precision(params, n_max: int, margin: int = 64) -> int:
    """Working precision for n_max exact steps, with 50% slack over the mean loss."""
    return max(192, margin + math.ceil(1.5 * bits_per_step(params) * n_max))


def fixed_point_step(N: int, X, precision: int):
    """R_N on X / 2^precision, rounded down to the same grid."""
    one = 1 << precision
    return ((N << (2 * precision)) // (one - X)) & (one - 1)


def _mc_chunk(N, density, n_max, x_grid, size, seed_seq, precision):
    rng = np.random.default_rng(seed_seq)
    X = sample_fixed_point(density, size, rng, precision)
    thresholds = [int(math.floor(float(x) * 2.0**53)) << (precision - 53) for x in x_grid]
    counts = np.zeros((n_max + 1, len(x_grid)), dtype=np.int64)
    for n in range(n_max + 1):
        if n:
            X = fixed_point_step(N, X, precision)
        for j, thr in enumerate(thresholds):
            counts[n, j] = int(np.count_nonzero(X < thr))
    return counts


def montecarlo_route(params, density: InitialDensity, n_max: int, x_grid, samples: int, seed: int = 0,
                     precision: int | None = None, threads: int = 1, chunk: int = 2**17) -> np.ndarray:
    """Empirical mu(R^n < x) for n = 0..n_max from ``samples`` exact-digit orbits.

    ``precision`` defaults to orbit_precision(params, n_max).
    """
    N = as_params(params).N
    if precision is None:
        precision = orbit_precision(N, n_max)
    if precision < 128:
        raise ValueError("precision below 128 bits")
    sizes = [chunk] * (samples // chunk) + ([samples % chunk] if samples % chunk else [])
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        parts = pool.map(lambda a: _mc_chunk(N, density, n_max, x_grid, a[0], a[1], precision), zip(sizes, seeds))
        counts = sum(parts)
    return counts / samples


def gauss_kuzmin_experiment(params, initial_density: InitialDensity, n_max: int, x_grid, samples: int = 0,
                            seed: int = 0, M: int | None = None, tail: str = CENTROID, precision: int | None = None,
                            threads: int = 1, max_z: float = 4.0) -> list[GKReport]:
    """Reports for n = 1..n_max; raises RouteMismatch if the routes disagree."""
    x_grid = [float(x) for x in x_grid]
    op = operator_route(params, initial_density, n_max, x_grid, M, tail)
    mc = montecarlo_route(params, initial_density, n_max, x_grid, samples, seed, precision, threads) if samples else None
    limit = limit_law(params, np.asarray(x_grid))
    reports, bad = [], []
    for n in range(1, n_max + 1):
        rep = GKReport(n)
        for j, x in enumerate(x_grid):
            p_op = float(op[n, j])
            row = GKRow(x, p_op, None, float(limit[j]))
            if mc is not None:
                p = min(max(p_op, 0.0), 1.0)
                row.mu_montecarlo = float(mc[n, j])
                row.std_error = math.sqrt(p * (1 - p) / samples)
                diff = abs(row.mu_montecarlo - p_op)
                if diff > max_z * max(row.std_error, 1 / samples):
                    bad.append((n, x, diff / row.std_error if row.std_error else math.inf))
            rep.rows.append(row)
        reports.append(rep)
    if bad:
        n, x, z = max(bad, key=lambda b: b[2])
        raise RouteMismatch(f"{len(bad)} (n, x) cells disagree; worst n={n} x={x} z={z:.2f}", reports)
    return reports


def reports_to_csv(reports: list[GKReport], header_lines=()) -> str:
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(GK_COLUMNS)
    fmt = lambda v: "" if v is None else repr(float(v))
    for rep in reports:
        for r in rep.rows:
            w.writerow([rep.n, repr(r.x), fmt(r.mu_operator), fmt(r.mu_montecarlo), fmt(r.limit),
                        fmt(r.abs_err_op), fmt(r.abs_err_mc)])
    return buf.getvalue()
