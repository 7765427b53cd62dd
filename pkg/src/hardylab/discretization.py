"""Radial mesh, Gauss quadrature and the L2-orthonormal finite-element basis.

Every integral in the package is an integral over an interval ``[r_lo, r_hi]``
against either the radial measure ``r**(N-1) dr`` or the flat measure ``dr``.
The sphere-area factor is dropped everywhere; it cancels in all quotients.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

__all__ = [
    "DomainError",
    "RadialDomain",
    "Mesh",
    "QuadratureRule",
    "RawBasis",
    "Basis",
    "build_mesh",
    "refine",
    "gauss_rule",
    "hat_basis",
    "orthonormalize",
    "integrate",
    "eval_field",
    "build_basis",
]


class DomainError(ValueError):
    """A numerical precondition was violated."""


@dataclass(frozen=True)
class RadialDomain:
    r_lo: float
    r_hi: float
    dim_N: int = 3
    measure: str = "radial"

    def __post_init__(self):
        if not (self.r_lo > 0.0):
            raise DomainError(f"r_lo must be > 0, got {self.r_lo}")
        if not (self.r_hi > self.r_lo) or not np.isfinite(self.r_hi):
            raise DomainError(f"need r_lo < r_hi < inf, got ({self.r_lo}, {self.r_hi})")
        if self.measure not in ("radial", "flat"):
            raise DomainError(f"measure must be 'radial' or 'flat', got {self.measure!r}")
        if self.measure == "radial" and self.dim_N < 2:
            raise DomainError(f"radial measure needs dim_N >= 2, got {self.dim_N}")

    def density(self, r):
        """Measure density with respect to dr."""
        r = np.asarray(r, dtype=float)
        if self.measure == "flat":
            return np.ones_like(r)
        return r ** (self.dim_N - 1)

    def volume(self) -> float:
        if self.measure == "flat":
            return self.r_hi - self.r_lo
        n = self.dim_N
        return (self.r_hi**n - self.r_lo**n) / n


@dataclass(frozen=True)
class Mesh:
    domain: RadialDomain
    nodes: np.ndarray
    grading: str = "uniform"

    @property
    def n_cells(self) -> int:
        return len(self.nodes) - 1

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.nodes)


def _geometric_ratio(n_cells: int) -> float:
    # first cell h0 = L/n^2 and h0 * (q^n - 1)/(q - 1) = L  =>  (q^n - 1)/(q - 1) = n^2
    target = float(n_cells) ** 2
    lo, hi = 1.0 + 1e-12, 2.0
    while (hi**n_cells - 1.0) / (hi - 1.0) < target:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if (mid**n_cells - 1.0) / (mid - 1.0) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def build_mesh(dom: RadialDomain, n_cells: int, grading: str = "uniform") -> Mesh:
    """Nodes on ``[r_lo, r_hi]``.

    ``geometric`` grading clusters nodes toward ``r_lo``; the first cell is
    ``(r_hi - r_lo) / n_cells**2`` wide and widths grow by a constant ratio.
    """
    if int(n_cells) != n_cells or n_cells < 2:
        raise DomainError(f"n_cells must be an integer >= 2, got {n_cells}")
    n_cells = int(n_cells)
    length = dom.r_hi - dom.r_lo
    if grading == "uniform":
        nodes = dom.r_lo + length * np.arange(n_cells + 1) / n_cells
    elif grading == "geometric":
        q = _geometric_ratio(n_cells)
        widths = q ** np.arange(n_cells)
        widths *= length / widths.sum()
        nodes = dom.r_lo + np.concatenate(([0.0], np.cumsum(widths)))
    else:
        raise DomainError(f"unknown grading {grading!r}")
    nodes[0], nodes[-1] = dom.r_lo, dom.r_hi
    if np.any(np.diff(nodes) <= 0.0):
        raise DomainError("mesh nodes are not strictly increasing")
    return Mesh(dom, nodes, grading)


def refine(mesh: Mesh) -> Mesh:
    """Bisect every cell; the refined hat space contains the coarse one."""
    mids = 0.5 * (mesh.nodes[:-1] + mesh.nodes[1:])
    nodes = np.empty(2 * mesh.n_cells + 1)
    nodes[0::2] = mesh.nodes
    nodes[1::2] = mids
    return Mesh(mesh.domain, nodes, mesh.grading)


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Legendre points per cell, flattened cell by cell.

    ``weights`` already contain the measure density, ``dr_weights`` do not.
    """

    mesh: Mesh
    order: int
    points: np.ndarray
    weights: np.ndarray
    dr_weights: np.ndarray
    cell_index: np.ndarray

    @property
    def domain(self) -> RadialDomain:
        return self.mesh.domain


def gauss_rule(mesh: Mesh, order: int = 4) -> QuadratureRule:
    if order < 1:
        raise DomainError(f"quadrature order must be >= 1, got {order}")
    xi, wi = np.polynomial.legendre.leggauss(order)
    a, b = mesh.nodes[:-1], mesh.nodes[1:]
    half = 0.5 * (b - a)
    points = (0.5 * (a + b))[:, None] + half[:, None] * xi[None, :]
    dr_w = half[:, None] * wi[None, :]
    points = points.ravel()
    dr_w = dr_w.ravel()
    weights = dr_w * mesh.domain.density(points)
    cell = np.repeat(np.arange(mesh.n_cells), order)
    return QuadratureRule(mesh, order, points, weights, dr_w, cell)


@dataclass(frozen=True)
class RawBasis:
    """Functions sampled at quadrature points: ``values[k, i] = f_k(x_i)``."""

    values: np.ndarray
    gradients: np.ndarray

    @property
    def n(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class Basis:
    """L2(dmu)-orthonormal basis, ``values = transform @ raw.values``."""

    values: np.ndarray
    gradients: np.ndarray
    gram: np.ndarray
    transform: np.ndarray
    quad: Optional[QuadratureRule] = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.values.shape[0]


def hat_basis(mesh: Mesh, quad: QuadratureRule) -> RawBasis:
    """Interior piecewise-linear hats sampled at the quadrature points."""
    nodes = mesh.nodes
    n = mesh.n_cells - 1
    x = quad.points
    c = quad.cell_index
    h = mesh.widths[c]
    left = (x - nodes[c]) / h  # rising part on cell c belongs to hat at node c+1
    right = 1.0 - left
    values = np.zeros((n, x.size))
    grads = np.zeros((n, x.size))
    cols = np.arange(x.size)
    # hat k (k = 0..n-1) sits at node k+1
    rising = c <= n - 1  # cell c has right node c+1 interior
    k_r = c[rising]
    values[k_r, cols[rising]] = left[rising]
    grads[k_r, cols[rising]] = 1.0 / h[rising]
    falling = c >= 1  # cell c has left node c interior
    k_f = c[falling] - 1
    values[k_f, cols[falling]] = right[falling]
    grads[k_f, cols[falling]] = -1.0 / h[falling]
    return RawBasis(values, grads)


def _gram(values: np.ndarray, quad: QuadratureRule) -> np.ndarray:
    g = (values * quad.weights) @ values.T
    return 0.5 * (g + g.T)


def orthonormalize(raw, quad: QuadratureRule, rtol: float = 1e-13) -> Basis:
    """Two-pass classical Gram-Schmidt in the quadrature inner product.

    Works on coefficient vectors with respect to ``raw`` after a diagonal
    rescaling, so the cost is independent of the number of quadrature points.
    Accepts a :class:`RawBasis` or an existing :class:`Basis`.
    """
    G = _gram(raw.values, quad)
    n = G.shape[0]
    d = np.diag(G).copy()
    if np.any(~np.isfinite(d)) or np.any(d <= 0.0):
        raise DomainError("Gram matrix has a non-positive diagonal entry")
    s = 1.0 / np.sqrt(d)
    Gs = G * s[:, None] * s[None, :]
    Q = np.zeros((n, n))
    for k in range(n):
        v = np.zeros(n)
        v[k] = 1.0
        norm0 = 1.0
        for _ in range(2):
            if k:
                h = Q[:k] @ (Gs @ v)
                v = v - Q[:k].T @ h
        norm2 = v @ Gs @ v
        if not (norm2 > (rtol * norm0) ** 2):
            raise DomainError(f"Gram matrix numerically singular at function {k}")
        Q[k] = v / np.sqrt(norm2)
    T = Q * s[None, :]
    if isinstance(raw, Basis):
        T_total = T @ raw.transform
    else:
        T_total = T
    values = T @ raw.values
    grads = T @ raw.gradients
    return Basis(values, grads, _gram(values, quad), T_total, quad)


def integrate(f, quad: QuadratureRule, weight: Optional[Callable] = None) -> float:
    """Quadrature of ``f * weight`` against the domain measure.

    ``f`` holds samples at ``quad.points``; ``weight`` is evaluated there.
    """
    f = np.asarray(f, dtype=float)
    if f.shape != quad.points.shape:
        raise DomainError(f"shape mismatch: {f.shape} vs {quad.points.shape}")
    vals = f if weight is None else f * np.asarray(weight(quad.points), dtype=float)
    bad = ~np.isfinite(vals)
    if bad.any():
        i = int(np.argmax(bad))
        raise DomainError(f"non-finite integrand at r={quad.points[i]!r} (index {i})")
    return float(np.dot(vals, quad.weights))


def eval_field(coeffs, basis: Basis):
    """Values and radial derivatives of ``sum_k a_k e_k`` at quadrature points."""
    a = np.asarray(coeffs, dtype=float)
    if a.shape != (basis.n,):
        raise DomainError(f"expected {basis.n} coefficients, got shape {a.shape}")
    return a @ basis.values, a @ basis.gradients


def build_basis(dom: RadialDomain, n_cells: int, grading: str = "uniform", quad_order: int = 4):
    """Mesh, quadrature and orthonormal hat basis in one call."""
    mesh = build_mesh(dom, n_cells, grading)
    quad = gauss_rule(mesh, quad_order)
    basis = orthonormalize(hat_basis(mesh, quad), quad)
    return mesh, quad, basis
