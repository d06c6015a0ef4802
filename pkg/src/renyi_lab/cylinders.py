"""Cylinder sets, their Lebesgue measures and the conditional digit law."""

from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .expansion import DomainError, _check_digits, _check_unit, _exactify, as_params, convergents, evaluate


@dataclass(frozen=True)
class Cylinder:
    block: tuple
    left: Fraction
    right: Fraction

    @property
    def measure(self) -> Fraction:
        return self.right - self.left

    def __contains__(self, x) -> bool:
        return self.left <= x < self.right


def cylinder(params, block: Sequence[int]) -> Cylinder:
    """I(a_1..a_n) = [(p_n - p_{n-1})/(q_n - q_{n-1}), p_n/q_n)."""
    if not block:
        raise ValueError("block must be nonempty")
    conv = convergents(params, block)
    cur, prev = conv[-1], conv[-2]
    left = Fraction(cur.p - prev.p, cur.q - prev.q)
    return Cylinder(tuple(int(a) for a in block), left, Fraction(cur.p, cur.q))


def cylinder_measure(params, block: Sequence[int]) -> Fraction:
    N = as_params(params).N
    if not block:
        return Fraction(1)
    conv = convergents(params, block)
    q, q_prev = conv[-1].q, conv[-2].q
    return Fraction(N ** len(block), q * (q - q_prev))


def cylinder_tail_measure(params, block: Sequence[int], M: int) -> Fraction:
    """Measure of the union of I(block, i) over i > M.

    The union is the interval between the image of tail 1 - N/(M+1) and p_n/q_n.
    """
    N = as_params(params).N
    if M < N - 1:
        return cylinder_measure(params, block)
    right = evaluate(params, block, Fraction(1))
    return right - evaluate(params, block, 1 - Fraction(N, M + 1))


def bbl_conditional(params, s, x):
    """lambda(R^n < x | a_1..a_n) = N x / (N - (1-x)(1-s_n))."""
    N = as_params(params).N
    _check_unit(x)
    _check_unit(s)
    x, s = _exactify(x), _exactify(s)
    return N * x / (N - (1 - x) * (1 - s))


def bbl_exact_ratio(params, block: Sequence[int], x) -> Fraction:
    """Same conditional probability computed from cylinder endpoints."""
    cyl = cylinder(params, block)
    inner = abs(evaluate(params, block, _exactify(x)) - cyl.left)
    return inner / cyl.measure


def transition_prob(params, x, i: int):
    """P_{N,i}(x) = (x + N - 1) / ((x + i)(x + i - 1))."""
    N = as_params(params).N
    if i < N:
        raise DomainError(f"digit {i} < N={N}")
    x = _exactify(x)
    return (x + N - 1) / ((x + i) * (x + i - 1))


def transition_tail(params, x, M: int):
    """Sum of P_{N,i}(x) over i > M, which telescopes to (x+N-1)/(x+M)."""
    N = as_params(params).N
    x = _exactify(x)
    if M < N:
        return x * 0 + 1
    return (x + N - 1) / (x + M)


def transition_total(params, x, M: int):
    """Sum_{i=N}^{M} P_{N,i}(x) plus the exact tail beyond M."""
    N = as_params(params).N
    head = sum(transition_prob(params, x, i) for i in range(N, M + 1))
    return head + transition_tail(params, x, M)


def digit_law(params, i: int) -> Fraction:
    """lambda(a_1 = i) = N / (i (i + 1))."""
    N = as_params(params).N
    if i < N:
        raise DomainError(f"digit {i} < N={N}")
    return Fraction(N, i * (i + 1))


def s_sequence(params, block: Sequence[int]) -> list:
    """[s_0, ..., s_n] with s_0 = 1 and s_k = 1 - N/(a_k + s_{k-1})."""
    N = as_params(params).N
    _check_digits(N, block)
    s = [Fraction(1)]
    for a in block:
        s.append(1 - Fraction(N) / (a + s[-1]))
    return s


def s_from_convergents(params, block: Sequence[int]) -> list:
    N = as_params(params).N
    conv = convergents(params, block)
    return [Fraction(1)] + [1 - Fraction(N * b.q, c.q) for b, c in zip(conv, conv[1:])]


def blocks(params, depth: int, max_digit: int) -> Iterable[tuple]:
    """All blocks of length ``depth`` with digits in N..max_digit."""
    N = as_params(params).N
    return itertools.product(range(N, max_digit + 1), repeat=depth)


def cylinder_table_csv(params, block_list: Iterable[Sequence[int]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["block", "left", "right", "measure"])
    for b in block_list:
        cyl = cylinder(params, b)
        writer.writerow([" ".join(map(str, cyl.block)), cyl.left, cyl.right, cyl.measure])
    return buf.getvalue()
