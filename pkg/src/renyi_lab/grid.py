"""Functions on [0, 1] stored by their values at interpolation nodes."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

CHEBYSHEV = "chebyshev"
LINEAR = "linear"


@lru_cache(maxsize=None)
def chebyshev_nodes(n: int) -> np.ndarray:
    """n Chebyshev-Lobatto points on [0, 1], increasing, endpoints included."""
    if n < 2:
        raise ValueError("need at least 2 nodes")
    k = np.arange(n)
    nodes = 0.5 * (1 - np.cos(np.pi * k / (n - 1)))
    nodes[0], nodes[-1] = 0.0, 1.0
    nodes.flags.writeable = False
    return nodes


@lru_cache(maxsize=None)
def chebyshev_weights(n: int) -> np.ndarray:
    w = (-1.0) ** np.arange(n)
    w[0] *= 0.5
    w[-1] *= 0.5
    w.flags.writeable = False
    return w


def barycentric_matrix(nodes: np.ndarray, weights: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Matrix B with B @ values = interpolant at x (second barycentric form)."""
    x = np.asarray(x, dtype=float)
    diff = x[:, None] - nodes[None, :]
    exact = diff == 0
    with np.errstate(divide="ignore", invalid="ignore"):
        B = weights / diff
    hit = exact.any(axis=1)
    B[hit] = exact[hit]
    B /= B.sum(axis=1, keepdims=True)
    return B


def linear_matrix(nodes: np.ndarray, x: np.ndarray) -> np.ndarray:
    x = np.clip(np.asarray(x, dtype=float), nodes[0], nodes[-1])
    j = np.clip(np.searchsorted(nodes, x, side="right") - 1, 0, len(nodes) - 2)
    t = (x - nodes[j]) / (nodes[j + 1] - nodes[j])
    B = np.zeros((len(x), len(nodes)))
    rows = np.arange(len(x))
    B[rows, j] = 1 - t
    B[rows, j + 1] = t
    return B


@dataclass(frozen=True)
class GridDensity:
    """Nodal representation of a function on [0, 1].

    ``form`` is "f" for densities relative to rho_N and "h" for densities
    relative to Lebesgue measure.
    """

    nodes: np.ndarray
    values: np.ndarray
    kind: str = CHEBYSHEV
    form: str = "f"
    _weights: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if nodes.ndim != 1 or nodes.shape != values.shape:
            raise ValueError("nodes and values must be 1-D arrays of equal length")
        if nodes[0] != 0.0 or nodes[-1] != 1.0 or np.any(np.diff(nodes) <= 0):
            raise ValueError("nodes must increase strictly from 0 to 1")
        if self.kind not in (CHEBYSHEV, LINEAR):
            raise ValueError(f"unknown interpolation kind {self.kind!r}")
        if self.form not in ("f", "h"):
            raise ValueError(f"unknown form {self.form!r}")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "values", values)
        if self.kind == CHEBYSHEV:
            n = len(nodes)
            if not np.allclose(nodes, chebyshev_nodes(n), rtol=0, atol=1e-15):
                raise ValueError("chebyshev density must use chebyshev_nodes(n)")
            object.__setattr__(self, "_weights", chebyshev_weights(n))

    @classmethod
    def from_function(cls, func, n: int = 65, kind: str = CHEBYSHEV, form: str = "f"):
        nodes = chebyshev_nodes(n) if kind == CHEBYSHEV else np.linspace(0.0, 1.0, n)
        values = np.broadcast_to(np.asarray(func(nodes), dtype=float), nodes.shape).copy()
        return cls(nodes, values, kind, form)

    def with_values(self, values, form=None):
        return GridDensity(self.nodes, values, self.kind, form or self.form)

    def interpolation_matrix(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if self.kind == CHEBYSHEV:
            return barycentric_matrix(self.nodes, self._weights, x)
        return linear_matrix(self.nodes, x)

    def __call__(self, x):
        scalar = np.isscalar(x)
        out = self.interpolation_matrix(x) @ self.values
        return float(out[0]) if scalar else out.reshape(np.shape(x))

    def to_json(self) -> str:
        return json.dumps({
            "kind": self.kind,
            "form": self.form,
            "points": [[float(a), float(b)] for a, b in zip(self.nodes, self.values)],
        })

    @classmethod
    def from_json(cls, text: str):
        d = json.loads(text)
        pts = np.asarray(d["points"], dtype=float)
        return cls(pts[:, 0], pts[:, 1], d.get("kind", LINEAR), d.get("form", "h"))
