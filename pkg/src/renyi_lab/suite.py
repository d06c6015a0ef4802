"""Invariant panel run by ``renyi-lab suite``.

Each check returns the worst observed deviation; a check passes when that
deviation is at most its tolerance.
"""

from __future__ import annotations

import random
from dataclasses import asdict, dataclass
from fractions import Fraction

import numpy as np

from .cylinders import bbl_conditional, bbl_exact_ratio, cylinder, cylinder_measure, s_sequence, transition_total
from .expansion import as_params, convergents
from .grid import GridDensity
from .natext import ext_measure_rect, rho_cdf
from .rscc import stationarity_check
from .transfer import apply_L, apply_U

DEFAULT_TOLERANCES = {
    "determinant": 0.0,
    "cylinder_measure": 0.0,
    "bbl": 0.0,
    "kernel_sum": 1e-12,
    "ext_marginals": 1e-12,
    "L_fixed_point": 1e-10,
    "U_constants": 1e-12,
    "Q_stationarity": 1e-9,
}


@dataclass
class CheckResult:
    name: str
    N: int
    deviation: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.deviation <= self.tolerance

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d


def random_block(rng: random.Random, N: int, max_len: int, max_digit: int | None = None) -> tuple:
    """Digits >= N with a heavy-ish tail so large digits show up."""
    length = rng.randint(1, max_len)
    cap = max_digit or 50 * N
    return tuple(min(cap, N + int(rng.paretovariate(1.0)) - 1) for _ in range(length))


def check_determinant(N, blocks) -> float:
    worst = 0
    for b in blocks:
        conv = convergents(N, b)
        for prev, cur in zip(conv, conv[1:]):
            worst = max(worst, abs(prev.p * cur.q - cur.p * prev.q - N**cur.n))
    return float(worst)


def check_cylinder_measure(N, blocks) -> float:
    return float(max(abs(cylinder(N, b).measure - cylinder_measure(N, b)) for b in blocks))


def check_bbl(N, blocks, xs) -> float:
    worst = Fraction(0)
    for b in blocks:
        s_n = s_sequence(N, b)[-1]
        for x in xs:
            worst = max(worst, abs(bbl_exact_ratio(N, b, x) - bbl_conditional(N, s_n, x)))
    return float(worst)


def check_kernel_sum(N, xs, M=200) -> float:
    return max(abs(float(transition_total(N, x, M)) - 1.0) for x in xs)


def check_ext_marginals(N, xs) -> float:
    xs = np.asarray(xs)
    ref = rho_cdf(N, xs)
    return float(max(np.max(np.abs(ext_measure_rect(N, xs, np.ones_like(xs)) - ref)),
                     np.max(np.abs(ext_measure_rect(N, np.ones_like(xs), xs) - ref))))


def check_L_fixed_point(N, n_nodes=65) -> float:
    c = 1 / np.log(N / (N - 1))
    h = GridDensity.from_function(lambda y: c / (y + N - 1), n_nodes, form="h")
    return float(np.max(np.abs(apply_L(N, h, h.nodes) - h.values)))


def check_U_constants(N, n_nodes=65) -> float:
    one = GridDensity.from_function(np.ones_like, n_nodes)
    return float(np.max(np.abs(apply_U(N, one, one.nodes) - 1.0)))


def check_Q_stationarity(N) -> float:
    return stationarity_check(N, np.linspace(0.0, 0.95, 21)).max_discrepancy


def run_panel(Ns=(2,), seed: int = 0, n_blocks: int = 100, tolerances: dict | None = None) -> list[CheckResult]:
    tol = dict(DEFAULT_TOLERANCES)
    tol.update(tolerances or {})
    out = []
    for N in Ns:
        N = as_params(N).N
        rng = random.Random(seed * 1000 + N)
        blocks = [random_block(rng, N, 20) for _ in range(n_blocks)]
        rx = [Fraction(rng.randint(0, 10**6), 10**6) for _ in range(5)]
        fx = [rng.random() for _ in range(200)]
        values = {
            "determinant": check_determinant(N, blocks),
            "cylinder_measure": check_cylinder_measure(N, blocks),
            "bbl": check_bbl(N, blocks[:20], rx),
            "kernel_sum": check_kernel_sum(N, fx),
            "ext_marginals": check_ext_marginals(N, fx),
            "L_fixed_point": check_L_fixed_point(N),
            "U_constants": check_U_constants(N),
            "Q_stationarity": check_Q_stationarity(N),
        }
        out.extend(CheckResult(name, N, dev, tol[name]) for name, dev in values.items())
    return out
