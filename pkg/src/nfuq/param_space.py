"""Random parameter domains, Gauss rules and tensor-product collocation grids.

Quadrature weights are stored pre-multiplied by the density, so an
expectation is a plain weighted sum over the nodes.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import ndtri


@dataclass(frozen=True)
class QuadratureRule1D:
    nodes: np.ndarray
    weights: np.ndarray
    dim_index: int = 0

    def __len__(self) -> int:
        return len(self.nodes)

    def integrate(self, f) -> float:
        return math.fsum(self.weights * f(self.nodes))


def _golub_welsch(diag: np.ndarray, offdiag: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the probability measure with Jacobi matrix ``(diag, offdiag)``.

    Nodes are the Jacobi-matrix eigenvalues.  Weights come from the
    Christoffel function ``1 / sum_k p_k(z)^2`` of the orthonormal
    polynomials rather than from squared eigenvector components, which
    lose all relative accuracy once a weight drops below ~1e-16.
    """
    p = len(diag)
    if p == 1:
        return diag.copy(), np.ones(1)
    nodes = eigh_tridiagonal(diag, offdiag, eigvals_only=True)
    prev = np.zeros(p)
    cur = np.ones(p)
    total = np.ones(p)
    for k in range(p - 1):
        nxt = ((nodes - diag[k]) * cur - (offdiag[k - 1] * prev if k else 0.0)) / offdiag[k]
        prev, cur = cur, nxt
        total += cur * cur
    weights = 1.0 / total
    return nodes, weights / weights.sum()


def gauss_legendre(points: int, a: float = -1.0, b: float = 1.0) -> QuadratureRule1D:
    """Gauss-Legendre rule for the uniform density on ``[a, b]``.

    Weights sum to one; polynomials of degree ``<= 2 * points - 1`` are
    integrated exactly against ``1 / (b - a)``.
    """
    if points < 1:
        raise ValueError(f"points must be >= 1, got {points}")
    if not a < b:
        raise ValueError(f"need a < b, got [{a}, {b}]")
    k = np.arange(1, points, dtype=float)
    offdiag = k / np.sqrt(4.0 * k * k - 1.0)
    z, w = _golub_welsch(np.zeros(points), offdiag)
    # exact symmetry of the reference rule
    z = 0.5 * (z - z[::-1])
    w = 0.5 * (w + w[::-1])
    nodes = 0.5 * (a + b) + 0.5 * (b - a) * z
    return QuadratureRule1D(nodes=nodes, weights=w)


def gauss_hermite(points: int, mu: float = 0.0, sigma: float = 1.0) -> QuadratureRule1D:
    """Probabilists' Gauss-Hermite rule for ``N(mu, sigma**2)``.

    Built from the monic Hermite recurrence, so the standard-normal nodes
    coincide with ``sqrt(2)`` times the physicists' roots and the weights
    with the physicists' weights divided by ``sqrt(pi)``.
    """
    if points < 1:
        raise ValueError(f"points must be >= 1, got {points}")
    if not sigma > 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    offdiag = np.sqrt(np.arange(1, points, dtype=float))
    z, w = _golub_welsch(np.zeros(points), offdiag)
    z = 0.5 * (z - z[::-1])
    w = 0.5 * (w + w[::-1])
    return QuadratureRule1D(nodes=mu + sigma * z, weights=w)


@dataclass(frozen=True)
class Uniform:
    """Uniformly distributed parameter on ``[a, b]``."""

    a: float
    b: float
    label: str = ""

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError(f"Uniform needs a < b, got [{self.a}, {self.b}]")

    bounded = True

    def rule(self, points: int) -> QuadratureRule1D:
        return gauss_legendre(points, self.a, self.b)

    def from_unit(self, u: np.ndarray) -> np.ndarray:
        return self.a + (self.b - self.a) * u

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.a + self.b)

    def moment(self, d: int) -> float:
        return (self.b ** (d + 1) - self.a ** (d + 1)) / ((d + 1) * (self.b - self.a))


@dataclass(frozen=True)
class Normal:
    """Normally distributed parameter with mean ``mu`` and std ``sigma``."""

    mu: float
    sigma: float
    label: str = ""

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"Normal needs sigma > 0, got {self.sigma}")

    bounded = False

    def rule(self, points: int) -> QuadratureRule1D:
        return gauss_hermite(points, self.mu, self.sigma)

    def from_unit(self, u: np.ndarray) -> np.ndarray:
        return self.mu + self.sigma * ndtri(u)

    @property
    def midpoint(self) -> float:
        return self.mu

    def moment(self, d: int) -> float:
        m_prev, m = 1.0, self.mu
        if d == 0:
            return 1.0
        for k in range(2, d + 1):
            m_prev, m = m, self.mu * m + (k - 1) * self.sigma ** 2 * m_prev
        return m


Dimension = Uniform | Normal


@dataclass(frozen=True)
class ParameterSpace:
    dims: tuple

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(self.dims))
        if len(self.dims) < 1:
            raise ValueError("a parameter space needs at least one dimension")

    @property
    def m(self) -> int:
        return len(self.dims)

    def midpoint(self) -> np.ndarray:
        return np.array([d.midpoint for d in self.dims])

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw ``size`` i.i.d. points, shape ``(size, m)``, by inverse CDF."""
        u = rng.random((size, self.m))
        return np.column_stack([d.from_unit(u[:, i]) for i, d in enumerate(self.dims)])

    def grid(self, orders: Sequence[int]) -> "TensorGrid":
        orders = tuple(int(q) for q in orders)
        if len(orders) != self.m:
            raise ValueError(f"got {len(orders)} orders for a {self.m}-dimensional space")
        rules = []
        for i, (d, q) in enumerate(zip(self.dims, orders)):
            r = d.rule(q + 1)
            rules.append(QuadratureRule1D(r.nodes, r.weights, dim_index=i))
        return TensorGrid(orders=orders, rules=tuple(rules))


@dataclass(frozen=True)
class TensorGrid:
    """Dense tensor grid with ``q_i + 1`` points in dimension ``i``.

    Global indices are 1-based with dimension 1 varying fastest:
    ``k = 1 + sum_i k_i * prod_{j<i} (q_j + 1)``.
    """

    orders: tuple
    rules: tuple
    _strides: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if any(q < 0 for q in self.orders):
            raise ValueError(f"orders must be >= 0, got {self.orders}")
        if len(self.rules) != len(self.orders):
            raise ValueError("one rule per order required")
        for q, r in zip(self.orders, self.rules):
            if len(r) != q + 1:
                raise ValueError(f"rule of order {q} must have {q + 1} points, got {len(r)}")
        strides = [1]
        for q in self.orders[:-1]:
            strides.append(strides[-1] * (q + 1))
        object.__setattr__(self, "_strides", tuple(strides))

    @property
    def m(self) -> int:
        return len(self.orders)

    @property
    def total(self) -> int:
        return math.prod(q + 1 for q in self.orders)

    def global_index(self, multi: Sequence[int]) -> int:
        if len(multi) != self.m:
            raise ValueError(f"multi-index has {len(multi)} entries, grid has {self.m} dims")
        for k, q in zip(multi, self.orders):
            if not 0 <= k <= q:
                raise IndexError(f"multi-index {tuple(multi)} out of range for orders {self.orders}")
        return 1 + sum(k * s for k, s in zip(multi, self._strides))

    def multi_index(self, k: int) -> tuple:
        if not 1 <= k <= self.total:
            raise IndexError(f"global index {k} not in 1..{self.total}")
        rem = k - 1
        out = []
        for q in self.orders:
            rem, r = divmod(rem, q + 1)
            out.append(r)
        return tuple(out)

    def multi_indices(self) -> list:
        """All multi-indices in global-index order."""
        return [tuple(reversed(t)) for t in itertools.product(*(range(q + 1) for q in reversed(self.orders)))]

    def nodes(self) -> np.ndarray:
        """Collocation points ``y_k``, shape ``(d(q), m)``, row ``k - 1`` for index ``k``."""
        idx = np.array(self.multi_indices(), dtype=int).reshape(self.total, self.m)
        return np.column_stack([r.nodes[idx[:, i]] for i, r in enumerate(self.rules)])

    def weights(self) -> np.ndarray:
        """Tensor weights ``prod_i w_{i,k_i}`` in global-index order."""
        idx = np.array(self.multi_indices(), dtype=int).reshape(self.total, self.m)
        w = np.ones(self.total)
        for i, r in enumerate(self.rules):
            w = w * r.weights[idx[:, i]]
        return w


def tensor_nodes(grid: TensorGrid) -> np.ndarray:
    return grid.nodes()


def lagrange_weights_1d(nodes) -> np.ndarray:
    """Barycentric weights ``1 / prod_{r != j} (y_j - y_r)``, rescaled to max modulus 1."""
    nodes = np.asarray(nodes, dtype=float)
    if len(np.unique(nodes)) != len(nodes):
        raise ValueError("interpolation nodes must be pairwise distinct")
    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    # log-scale product avoids overflow for wide node sets
    logabs = np.log(np.abs(diff)).sum(axis=1)
    sign = np.prod(np.sign(diff), axis=1)
    w = sign * np.exp(-(logabs - logabs.min()))
    return w / np.abs(w).max()


def lagrange_basis_1d(nodes: np.ndarray, bary: np.ndarray, y: float) -> np.ndarray:
    """Values of all Lagrange basis polynomials at ``y`` (second barycentric form)."""
    diff = y - nodes
    hit = np.flatnonzero(diff == 0.0)
    if hit.size:
        out = np.zeros(len(nodes))
        out[hit[0]] = 1.0
        return out
    t = bary / diff
    return t / t.sum()


def tensor_lagrange_eval(grid: TensorGrid, values, y) -> np.ndarray | float:
    """Evaluate the tensor Lagrange interpolant of ``values`` at ``y``.

    ``values`` has leading axis of length ``d(q)`` in global-index order;
    trailing axes (e.g. spatial nodes) are carried through.
    """
    values = np.asarray(values, dtype=float)
    if values.shape[0] != grid.total:
        raise ValueError(f"expected {grid.total} values, got {values.shape[0]}")
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if len(y) != grid.m:
        raise ValueError(f"point has {len(y)} coordinates, grid has {grid.m}")
    trailing = values.shape[1:]
    # dimension 1 varies fastest: reshape to (q_m+1, ..., q_1+1, *trailing)
    arr = values.reshape(tuple(q + 1 for q in reversed(grid.orders)) + trailing)
    for i, rule in enumerate(grid.rules):
        basis = lagrange_basis_1d(rule.nodes, lagrange_weights_1d(rule.nodes), y[i])
        # dimension i sits on the last remaining parameter axis
        arr = np.tensordot(basis, arr, axes=([0], [grid.m - 1 - i]))
    return float(arr) if not trailing else arr
