"""Spatial grids, interpolatory projectors and Nystrom kernel operators.

Three discretizations of the cortical domain are supported:

* ``chebyshev``: Chebyshev-Lobatto points on ``[a, b]`` with Clenshaw-Curtis
  weights and barycentric polynomial interpolation off the grid;
* ``fem``: equispaced nodes with tent-function (trapezoid) weights and
  piecewise-linear interpolation;
* ``periodic``: equispaced nodes on a ring of length ``L`` with uniform
  weights ``L / n`` and linear interpolation with wraparound.

Fields are plain nodal value arrays; the discretization travels alongside.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

CHEBYSHEV = "chebyshev"
FEM = "fem"
PERIODIC = "periodic"


@dataclass(frozen=True, eq=False)
class SpatialDiscretization:
    kind: str
    nodes: np.ndarray
    quad_weights: np.ndarray
    a: float
    b: float
    bary_weights: np.ndarray | None = None

    @property
    def size(self) -> int:
        return len(self.nodes)

    @property
    def measure(self) -> float:
        return self.b - self.a

    @property
    def periodic(self) -> bool:
        return self.kind == PERIODIC

    def wrap(self, d: np.ndarray) -> np.ndarray:
        """Minimal-image representative of a displacement on the ring."""
        L = self.measure
        return d - L * np.round(d / L)

    def same_as(self, other: "SpatialDiscretization") -> bool:
        return (
            self is other
            or (self.kind == other.kind and self.size == other.size
                and np.array_equal(self.nodes, other.nodes))
        )


def clenshaw_curtis_weights(n: int) -> np.ndarray:
    """Clenshaw-Curtis weights on the ``n + 1`` Chebyshev-Lobatto points of [-1, 1].

    Direct cosine-sum evaluation, O(n^2).
    """
    theta = np.pi * np.arange(n + 1) / n
    w = np.zeros(n + 1)
    inner = np.arange(1, n)
    v = np.ones(n - 1)
    if n % 2 == 0:
        w[0] = w[n] = 1.0 / (n * n - 1)
        for k in range(1, n // 2):
            v -= 2.0 * np.cos(2 * k * theta[inner]) / (4 * k * k - 1)
        v -= np.cos(n * theta[inner]) / (n * n - 1)
    else:
        w[0] = w[n] = 1.0 / (n * n)
        for k in range(1, (n - 1) // 2 + 1):
            v -= 2.0 * np.cos(2 * k * theta[inner]) / (4 * k * k - 1)
    w[inner] = 2.0 * v / n
    return w


def chebyshev_grid(n: int, a: float = -1.0, b: float = 1.0) -> SpatialDiscretization:
    """Chebyshev-Lobatto grid with ``n + 1`` nodes, stored in ascending order."""
    if n < 2:
        raise ValueError(f"chebyshev grid needs n >= 2, got {n}")
    if not a < b:
        raise ValueError(f"need a < b, got [{a}, {b}]")
    j = np.arange(n + 1)
    # sin form of -cos(j pi / n): exactly symmetric, exact zero at the centre
    z = np.sin(np.pi * (2 * j - n) / (2 * n))
    nodes = 0.5 * (a + b) + 0.5 * (b - a) * z
    nodes[0], nodes[-1] = a, b
    bary = (-1.0) ** j
    bary[0] *= 0.5
    bary[-1] *= 0.5
    w = 0.5 * (b - a) * clenshaw_curtis_weights(n)
    return SpatialDiscretization(CHEBYSHEV, nodes, w, float(a), float(b), bary)


def fem_grid(n: int, a: float = 0.0, b: float = 1.0) -> SpatialDiscretization:
    """``n + 1`` equispaced nodes, P1 tent basis, trapezoid weights."""
    if n < 1:
        raise ValueError(f"fem grid needs n >= 1, got {n}")
    if not a < b:
        raise ValueError(f"need a < b, got [{a}, {b}]")
    nodes = np.linspace(a, b, n + 1)
    h = (b - a) / n
    w = np.full(n + 1, h)
    w[0] = w[-1] = 0.5 * h
    return SpatialDiscretization(FEM, nodes, w, float(a), float(b))


def periodic_grid(n: int, length: float, origin: float = 0.0) -> SpatialDiscretization:
    """``n`` equispaced nodes on the ring ``[origin, origin + length)``."""
    if n < 4:
        raise ValueError(f"periodic grid needs n >= 4, got {n}")
    if not length > 0:
        raise ValueError(f"ring length must be positive, got {length}")
    nodes = origin + length * np.arange(n) / n
    w = np.full(n, length / n)
    return SpatialDiscretization(PERIODIC, nodes, w, float(origin), float(origin + length))


def make_grid(kind: str, n: int, a: float, b: float) -> SpatialDiscretization:
    if kind == CHEBYSHEV:
        return chebyshev_grid(n, a, b)
    if kind == FEM:
        return fem_grid(n, a, b)
    if kind == PERIODIC:
        return periodic_grid(n, b - a, origin=a)
    raise ValueError(f"unknown spatial discretization {kind!r}")


def assemble_kernel_operator(w: Callable, disc: SpatialDiscretization, y_w=()) -> np.ndarray:
    """Nystrom matrix ``K[i, j] = w(x_i, x_j, y_w) * quad_weights[j]``.

    ``w`` is called once with broadcastable ``(s, 1)`` and ``(1, s)`` arrays.
    """
    x = disc.nodes
    vals = np.broadcast_to(np.asarray(w(x[:, None], x[None, :], y_w), dtype=float),
                           (disc.size, disc.size))
    bad = ~np.isfinite(vals)
    if bad.any():
        i, j = np.argwhere(bad)[0]
        raise FloatingPointError(
            f"kernel is not finite at node pair ({i}, {j}) = ({x[i]!r}, {x[j]!r})")
    return vals * disc.quad_weights[None, :]


def project(disc: SpatialDiscretization, f: Callable) -> np.ndarray:
    """Nodal samples of ``f``: the coordinates of the interpolatory projection."""
    vals = np.broadcast_to(np.asarray(f(disc.nodes), dtype=float), (disc.size,)).copy()
    if not np.all(np.isfinite(vals)):
        i = int(np.flatnonzero(~np.isfinite(vals))[0])
        raise FloatingPointError(f"non-finite sample at x = {disc.nodes[i]!r}")
    return vals


def evaluate_offgrid(disc: SpatialDiscretization, values, x) -> np.ndarray | float:
    """Evaluate the interpolant of nodal ``values`` at point(s) ``x``.

    ``values`` may carry leading batch axes; the last axis is spatial.
    """
    values = np.asarray(values, dtype=float)
    scalar = np.ndim(x) == 0
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if disc.periodic:
        L = disc.measure
        t = np.mod(x - disc.a, L) / (L / disc.size)
        t = np.where(np.abs(t - np.round(t)) < 1e-12, np.round(t), t)
        i0 = np.floor(t).astype(int) % disc.size
        i1 = (i0 + 1) % disc.size
        frac = t - np.floor(t)
        out = values[..., i0] * (1 - frac) + values[..., i1] * frac
    else:
        tol = 1e-12 * max(1.0, abs(disc.a), abs(disc.b))
        if np.any(x < disc.a - tol) or np.any(x > disc.b + tol):
            raise ValueError(f"evaluation point outside [{disc.a}, {disc.b}]")
        if disc.kind == FEM:
            out = np.stack([np.interp(x, disc.nodes, v) for v in values.reshape(-1, disc.size)])
            out = out.reshape(values.shape[:-1] + x.shape)
        else:
            diff = x[:, None] - disc.nodes[None, :]
            exact = diff == 0.0
            diff[exact] = 1.0
            c = disc.bary_weights[None, :] / diff
            hit = exact.any(axis=1)
            c[hit] = exact[hit].astype(float)
            c = c / c.sum(axis=1, keepdims=True)
            out = values @ c.T
    if scalar:
        return out[..., 0] if out.ndim > 1 else float(out[0])
    return out


def sup_norm(values) -> float:
    return float(np.max(np.abs(values)))


def sup_distance(v1, v2, disc1: SpatialDiscretization | None = None,
                 disc2: SpatialDiscretization | None = None) -> float:
    if disc1 is not None and disc2 is not None and not disc1.same_as(disc2):
        raise ValueError("fields live on different discretizations")
    v1, v2 = np.asarray(v1), np.asarray(v2)
    if v1.shape != v2.shape:
        raise ValueError(f"shape mismatch {v1.shape} vs {v2.shape}")
    return sup_norm(v1 - v2)
