"""Acceptance criteria 1-9, one test each.

Every test prints a single ``CRITERION k: PASS|FAIL`` line (also repeated in
the terminal summary) and then asserts the same condition.
"""

import math
import random
import time
from fractions import Fraction

import numpy as np
import pytest
from scipy import integrate as sp_integrate

from conftest import ACCEPTANCE
from renyi_lab.cylinders import cylinder, cylinder_measure, s_from_convergents, s_sequence, transition_total
from renyi_lab.expansion import convergents, evaluate, expand, fixed_point_xstar
from renyi_lab.gauss_kuzmin import InitialDensity, gauss_kuzmin_experiment, montecarlo_route, operator_route
from renyi_lab.grid import GridDensity
from renyi_lab.natext import ext_density, ext_invariance_check, ext_measure_rect, rho_cdf
from renyi_lab.rscc import ks_against_rho, simulate_paths, stationarity_check, witness_contraction, witness_rate
from renyi_lab.transfer import apply_L, apply_U

NS = (2, 3, 5, 10)


def report(k, ok, detail, capsys):
    line = f"CRITERION {k}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[k] = line
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


def admissible_block(rng, N, max_len=30):
    n = rng.randint(1, max_len)
    return tuple(N + min(int(rng.paretovariate(0.8)) - 1, 10**6) for _ in range(n))


def test_criterion_1_exact_identities(capsys):
    rng = random.Random(2024)
    t0 = time.perf_counter()
    failures = 0
    checked = 0
    for N in NS:
        for _ in range(500):
            block = admissible_block(rng, N)
            n = len(block)
            conv = convergents(N, block)
            for prev, cur in zip(conv, conv[1:]):
                failures += prev.p * cur.q - cur.p * prev.q != N**cur.n
            # reconstruction: a point with this block and a random rational tail expands back to it
            tail = Fraction(rng.randrange(10**6), 10**6)
            x = evaluate(N, block, tail)
            digits = expand(N, x, n)
            failures += tuple(digits) != block or digits.remainder != tail
            # cylinder endpoints from convergents vs branch images of 0 and 1, and the measure formula
            c = cylinder(N, block)
            failures += c.left != evaluate(N, block, Fraction(0))
            failures += c.right != evaluate(N, block, Fraction(1))
            failures += c.right - c.left != cylinder_measure(N, block)
            q, q1 = conv[-1].q, conv[-2].q
            failures += cylinder_measure(N, block) != Fraction(N**n, q * (q - q1))
            failures += s_sequence(N, block) != s_from_convergents(N, block)
            checked += 1
    elapsed = time.perf_counter() - t0
    ok = failures == 0 and elapsed < 30
    report(1, ok, f"{checked} blocks, {failures} exact mismatches, {elapsed:.1f}s (limit 30s)", capsys)


def test_criterion_2_kernel_normalization(capsys):
    rng = np.random.default_rng(2)
    worst = 0.0
    for N in NS:
        for x in rng.random(1000):
            worst = max(worst, abs(float(transition_total(N, float(x), 200)) - 1.0))
    report(2, worst <= 1e-12, f"max |sum P - 1| = {worst:.2e} (tol 1e-12)", capsys)


def test_criterion_3_invariant_density(capsys):
    worst_L = worst_U = 0.0
    for N in NS:
        C = 1 / math.log(N / (N - 1))
        h = GridDensity.from_function(lambda y: C / (y + N - 1), 65, form="h")
        worst_L = max(worst_L, float(np.max(np.abs(apply_L(N, h, h.nodes) - h.values))))
        one = GridDensity.from_function(np.ones_like, 65)
        worst_U = max(worst_U, float(np.max(np.abs(apply_U(N, one, one.nodes) - 1.0))))
    ok = worst_L <= 1e-10 and worst_U <= 1e-12
    report(3, ok, f"L h* - h* = {worst_L:.2e} (tol 1e-10), U 1 - 1 = {worst_U:.2e} (tol 1e-12)", capsys)


def test_criterion_4_extended_measure(capsys):
    t0 = time.perf_counter()
    grid = [0.1, 0.3, 0.5, 0.7, 1.0]
    worst_q = worst_m = 0.0
    for N in (2, 3):
        for x in grid:
            for y in grid:
                val, _ = sp_integrate.dblquad(lambda v, u: ext_density(N, u, v), 0, x, 0, y,
                                              epsabs=1e-13, epsrel=1e-13)
                worst_q = max(worst_q, abs(ext_measure_rect(N, x, y) - val))
    for N in NS:
        xs = np.linspace(0, 1, 201)
        one = np.ones_like(xs)
        worst_m = max(worst_m, float(np.max(np.abs(ext_measure_rect(N, xs, one) - rho_cdf(N, xs)))),
                      float(np.max(np.abs(ext_measure_rect(N, one, xs) - rho_cdf(N, xs)))))
    xs2 = fixed_point_xstar(2)
    reps = [ext_invariance_check(2, rect, samples=10**6, seed=4) for rect in ((0.5, 1.0), (xs2, xs2), (0.25, 0.6))]
    worst_z = max(abs(r.z_score) for r in reps)
    elapsed = time.perf_counter() - t0
    ok = worst_q <= 1e-8 and worst_m <= 1e-12 and worst_z < 3 and elapsed < 60
    report(4, ok, f"quadrature {worst_q:.2e} (tol 1e-8), marginals {worst_m:.2e} (tol 1e-12), "
                  f"invariance max |z| = {worst_z:.2f} (< 3), {elapsed:.1f}s", capsys)


def test_criterion_5_q_stationarity(capsys):
    worst = max(stationarity_check(N, np.linspace(0, 0.95, 21)).max_discrepancy for N in (2, 3, 5))
    report(5, worst <= 1e-9, f"max discrepancy {worst:.2e} (tol 1e-9)", capsys)


def test_criterion_6_chain_ergodicity(capsys):
    stats = {N: ks_against_rho(N, simulate_paths(N, 1.0, 50, 10**5, seed=6)).statistic for N in (2, 3)}
    ok = all(v < 0.01 for v in stats.values())
    report(6, ok, "KS " + ", ".join(f"N={N}: {v:.4f}" for N, v in stats.items()) + " (< 0.01)", capsys)


def _sup_errors(nodes):
    reps = gauss_kuzmin_experiment(2, InitialDensity.uniform(nodes), 12, np.linspace(0.1, 0.9, 9))
    return [r.sup_error for r in reps]


def _fit_rate(errors, start=2):
    n = np.arange(1, len(errors) + 1)[start:]
    return math.exp(np.polyfit(n, np.log(errors[start:]), 1)[0])


def test_criterion_7_gauss_kuzmin(capsys):
    t0 = time.perf_counter()
    e = _sup_errors(65)
    e2 = _sup_errors(129)
    monotone = all(b < a for a, b in zip(e, e[1:]))
    q, q2 = _fit_rate(e), _fit_rate(e2)
    rel = abs(q2 - q) / q
    elapsed = time.perf_counter() - t0
    ok = monotone and e[-1] < 1e-6 and q < 1 and rel < 0.05 and elapsed < 120
    report(7, ok, f"monotone={monotone}, e_12={e[-1]:.2e} (< 1e-6), q_hat={q:.4f}, "
                  f"doubled {q2:.4f} (rel {rel:.1e} < 5%), {elapsed:.1f}s", capsys)


def test_criterion_8_route_agreement(capsys):
    dens = InitialDensity.uniform()
    p_op = float(operator_route(2, dens, 5, [0.5])[5, 0])
    samples = 10**6
    p_mc = float(montecarlo_route(2, dens, 5, [0.5], samples, seed=8, threads=4)[5, 0])
    se = math.sqrt(p_op * (1 - p_op) / samples)
    z = (p_mc - p_op) / se
    report(8, abs(z) < 4, f"operator {p_op:.6f}, Monte Carlo {p_mc:.6f}, z = {z:.2f} (|z| < 4)", capsys)


def test_criterion_9_regularity_witness(capsys):
    rng = random.Random(9)
    worst_margin, worst_steps = -math.inf, 0
    for N in NS:
        bound = witness_contraction(N) + 0.01
        for _ in range(100):
            ratio, first = witness_rate(N, rng.random())
            worst_margin = max(worst_margin, ratio - bound)
            worst_steps = max(worst_steps, first if first is not None else 10**9)
    ok = worst_margin <= 0 and worst_steps <= 60
    report(9, ok, f"max(ratio - bound) = {worst_margin:.4f} (<= 0), steps to 1e-12 <= {worst_steps} (<= 60)", capsys)
