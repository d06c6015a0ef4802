"""Renyi-type map R_N, digits, expansions and convergents.

All routines are generic over the number type.  ``int`` and ``Fraction``
inputs stay exact; floating inputs (``float`` or ``mpmath.mpf``) run at their
own working precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Sequence

#: Digit of the point x = 1 (a_1(1) is infinite).
INFINITY = math.inf


class DomainError(ValueError):
    """Argument outside the domain of a map or formula."""


@dataclass(frozen=True)
class Params:
    N: int

    def __post_init__(self):
        if isinstance(self.N, bool) or not isinstance(self.N, int):
            raise TypeError(f"N must be an int, got {type(self.N).__name__}")
        if self.N < 2:
            raise DomainError(f"N must be >= 2, got {self.N}")

    @property
    def log_ratio(self) -> float:
        """log(N/(N-1)), the normalising constant of the invariant measure."""
        return math.log(self.N / (self.N - 1))


def as_params(params) -> Params:
    if isinstance(params, Params):
        return params
    return Params(params)


class DigitSequence(tuple):
    """Tuple of digits carrying expansion metadata.

    ``truncated`` is set when the orbit hit 1 before the requested length,
    ``approximate`` when the digits came from floating-point iteration, and
    ``remainder`` holds R_N^n(x) for the last computed n (None if truncated).
    """

    truncated: bool
    approximate: bool
    remainder: object

    def __new__(cls, digits: Iterable[int] = (), truncated=False, approximate=False, remainder=None):
        self = super().__new__(cls, (int(a) for a in digits))
        self.truncated = truncated
        self.approximate = approximate
        self.remainder = remainder
        return self

    def __repr__(self):
        flags = []
        if self.truncated:
            flags.append("truncated")
        if self.approximate:
            flags.append("approximate")
        suffix = f", {', '.join(flags)}" if flags else ""
        return f"DigitSequence({tuple(self)!r}{suffix})"


@dataclass(frozen=True)
class Convergent:
    p: int
    q: int
    n: int

    @property
    def value(self) -> Fraction:
        return Fraction(self.p, self.q)


def _is_exact(x) -> bool:
    return isinstance(x, (int, Rational))


def _check_unit(x):
    if not 0 <= x <= 1:
        raise DomainError(f"x={x} outside [0, 1]")


def _exactify(x):
    # ints become Fractions so that N/(1-x) is never truncated
    return Fraction(x) if isinstance(x, int) else x


def renyi_map(params, x):
    """R_N(x) = N/(1-x) - floor(N/(1-x)), with R_N(1) = 0."""
    N = as_params(params).N
    _check_unit(x)
    x = _exactify(x)
    if x == 1:
        return x * 0
    y = N / (1 - x)
    return y - math.floor(y)


def digit(params, x):
    """First digit a_1(x) = floor(N/(1-x)); ``INFINITY`` for x = 1."""
    N = as_params(params).N
    _check_unit(x)
    x = _exactify(x)
    if x == 1:
        return INFINITY
    return math.floor(N / (1 - x))


def inverse_branch(params, i: int, x):
    """u_{N,i}(x) = 1 - N/(x + i), the inverse of R_N on the i-th cylinder."""
    N = as_params(params).N
    if i < N:
        raise DomainError(f"digit {i} < N={N}")
    x = _exactify(x)
    return 1 - N / (x + i)


def expand(params, x, n: int) -> DigitSequence:
    """First ``n`` digits of x, stopping early if the orbit reaches 1."""
    params = as_params(params)
    if n < 1:
        raise ValueError("n must be >= 1")
    _check_unit(x)
    x = _exactify(x)
    approximate = not _is_exact(x)
    digits = []
    for _ in range(n):
        if x == 1:
            return DigitSequence(digits, truncated=True, approximate=approximate)
        y = params.N / (1 - x)
        a = math.floor(y)
        digits.append(a)
        x = y - a
    return DigitSequence(digits, approximate=approximate, remainder=x)


def orbit(params, x, n: int) -> list:
    """[x, R_N(x), ..., R_N^n(x)]."""
    out = [_exactify(x)]
    for _ in range(n):
        out.append(renyi_map(params, out[-1]))
    return out


def convergents(params, digits: Sequence[int]) -> list[Convergent]:
    """Exact (p_k, q_k) for k = 0..n from the three-term recurrences."""
    N = as_params(params).N
    _check_digits(N, digits)
    out = [Convergent(1, 1, 0)]
    if not digits:
        return out
    p_prev, q_prev = 1, 1
    p, q = 1 + digits[0] - N, 1 + digits[0]
    out.append(Convergent(p, q, 1))
    for k, a in enumerate(digits[1:], start=2):
        p, p_prev = (1 + a) * p - N * p_prev, p
        q, q_prev = (1 + a) * q - N * q_prev, q
        out.append(Convergent(p, q, k))
    return out


def _check_digits(N: int, digits: Sequence[int]):
    for a in digits:
        if a == INFINITY or int(a) != a or a < N:
            raise DomainError(f"digit {a!r} not in {{N, N+1, ...}} for N={N}")


def evaluate(params, digits: Sequence[int], tail):
    """Point with leading digits ``digits`` and R_N^n-value ``tail``.

    Equivalent to u_{a_1} o ... o u_{a_n}(tail); tail = 0 gives the left
    endpoint of the cylinder and tail = 1 gives p_n/q_n.
    """
    _check_unit(tail)
    tail = _exactify(tail)
    if not digits:
        return tail
    conv = convergents(params, digits)
    cur, prev = conv[-1], conv[-2]
    return (cur.p + (tail - 1) * prev.p) / (cur.q + (tail - 1) * prev.q)


def error_bound(params, conv_n: Convergent, conv_prev: Convergent) -> Fraction:
    """N^n / (q_n (q_n - q_{n-1})), the bound on |x - p_n/q_n|."""
    N = as_params(params).N
    if conv_n.n != conv_prev.n + 1:
        raise ValueError(f"convergents {conv_prev.n} and {conv_n.n} are not consecutive")
    if conv_n.q <= conv_prev.q:
        raise ValueError("denominators must be strictly increasing")
    return Fraction(N**conv_n.n, conv_n.q * (conv_n.q - conv_prev.q))


def fixed_point_xstar(params) -> float:
    """(sqrt(N^2 + 4) - N)/2, the fixed point of u_{N,N+1}.

    Computed as 2/(sqrt(N^2+4) + N) to avoid cancellation for large N.
    """
    N = as_params(params).N
    return 2.0 / (math.sqrt(N * N + 4) + N)
