"""Piecewise barycentric Lagrange interpolation and exact integration.

Restriction samples a function at the grid nodes of one side; prolongation
evaluates the continuous piecewise interpolant through those samples.
``integral_weights`` integrates the forward interpolant exactly from 0, and
``kernel_quadrature`` integrates a matrix kernel against the interpolant.
All weight builders are linear in the nodal data; the reference tables are
built once per node family and cached (single initialization, many readers).
"""

from __future__ import annotations

import threading
import weakref
from dataclasses import dataclass
from functools import lru_cache
from math import comb

import numpy as np

from .mesh import CHEBYSHEV, GridSide, NodeFamily

__all__ = [
    "BaryTable",
    "NodalFunction",
    "bary_table",
    "restrict",
    "prolong_eval",
    "prolong_pairs",
    "prolong_weights",
    "integral_weights",
    "kernel_quadrature",
    "lagrange_matrix",
    "derivative_matrix_at",
]

_cum_lock = threading.Lock()
_cum_cache: "weakref.WeakKeyDictionary[GridSide, np.ndarray]" = weakref.WeakKeyDictionary()


@dataclass(frozen=True, eq=False)
class BaryTable:
    """Per-family interpolation tables on the reference interval [0, 1].

    ``weights`` are the (scale-invariant) barycentric weights of the nodes;
    on a piece ``[t_i, t_i + h_i]`` the abscissae are the affine images of
    the reference nodes, which leaves the weights unchanged.
    ``antiderivative[j, k]`` is the integral of the j-th Lagrange basis from
    0 to node ``c_k``; ``quad`` is its last column (the full-piece
    interpolatory quadrature weights, which sum to 1).
    """

    family: NodeFamily
    weights: np.ndarray
    diff: np.ndarray
    antiderivative: np.ndarray
    quad: np.ndarray
    gauss_x: np.ndarray
    gauss_w: np.ndarray


def _lagrange_rows(nodes: np.ndarray, weights: np.ndarray, x: np.ndarray) -> np.ndarray:
    diff = x[:, None] - nodes[None, :]
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        u = weights[None, :] / diff
        out = u / u.sum(axis=1, keepdims=True)
    # exact node hits, and distances so tiny the division overflowed, both
    # collapse to a unit row at the nearest node
    bad = ~np.all(np.isfinite(out), axis=1)
    if bad.any():
        rows = np.nonzero(bad)[0]
        cols = np.abs(diff[rows]).argmin(axis=1)
        out[rows] = 0.0
        out[rows, cols] = 1.0
    return out


@lru_cache(maxsize=None)
def _table(kind: str, degree: int) -> BaryTable:
    from .mesh import reference_nodes

    fam = reference_nodes(kind, degree)
    m = degree
    c = fam.nodes
    if kind == CHEBYSHEV:
        w = np.where(np.arange(m + 1) % 2 == 0, 1.0, -1.0)
        w[0] *= 0.5
        w[-1] *= 0.5
    else:
        w = np.array([(-1.0) ** j * comb(m, j) for j in range(m + 1)], dtype=float)
        w /= np.abs(w).max()
    # differentiation matrix at the nodes
    dmat = np.zeros((m + 1, m + 1))
    for k in range(m + 1):
        for j in range(m + 1):
            if j != k:
                dmat[k, j] = (w[j] / w[k]) / (c[k] - c[j])
        dmat[k, k] = -dmat[k].sum()
    # Gauss-Legendre rule on [0, 1], exact for the degree-m basis
    ng = m // 2 + 2
    gx, gw = np.polynomial.legendre.leggauss(ng)
    gx = 0.5 * (gx + 1.0)
    gw = 0.5 * gw
    anti = np.empty((m + 1, m + 1))
    anti[:, 0] = 0.0
    for k in range(1, m + 1):
        anti[:, k] = c[k] * (gw @ _lagrange_rows(c, w, c[k] * gx))
    return BaryTable(
        family=fam, weights=w, diff=dmat,
        antiderivative=anti, quad=anti[:, -1].copy(),
        gauss_x=gx, gauss_w=gw,
    )


def bary_table(family: NodeFamily) -> BaryTable:
    return _table(family.kind, family.degree)


def lagrange_matrix(table: BaryTable, x) -> np.ndarray:
    """Values of all Lagrange basis polynomials at reference points ``x``.

    Rows sum to 1; an exact node hit returns the corresponding unit row.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return _lagrange_rows(table.family.nodes, table.weights, x)


def derivative_matrix_at(table: BaryTable, x) -> np.ndarray:
    """Rows mapping nodal values to the interpolant derivative at ``x``.

    Reference-interval scale; divide by the piece width for an actual piece.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    c = table.family.nodes
    out = np.empty((x.size, c.size))
    diff = x[:, None] - c[None, :]
    exact = np.nonzero((diff == 0.0).any(axis=1))[0]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = table.weights[None, :] / diff
        s = u.sum(axis=1, keepdims=True)
        du = -table.weights[None, :] / diff**2
        ds = du.sum(axis=1, keepdims=True)
        ell = u / s
        out[:] = (du - ds * ell) / s
    for r in exact:
        j = int(np.nonzero(diff[r] == 0.0)[0][0])
        out[r] = table.diff[j]
    return out


def _partial_integral(table: BaryTable, c: float) -> np.ndarray:
    # integral of every Lagrange basis from 0 to c, exact for degree <= M
    if c == 0.0:
        return np.zeros(table.family.degree + 1)
    pts = c * table.gauss_x
    return c * (table.gauss_w @ lagrange_matrix(table, pts))


@dataclass(frozen=True, eq=False)
class NodalFunction:
    """Values of a continuous piecewise polynomial at the nodes of one side."""

    side: GridSide
    values: np.ndarray  # (n, d)

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim == 1:
            v = v[:, None]
        if v.shape[0] != self.side.n:
            raise ValueError("value count must equal the node count of the side")
        object.__setattr__(self, "values", v)

    @property
    def d(self) -> int:
        return self.values.shape[1]


def restrict(f, side: GridSide) -> NodalFunction:
    """Sample ``f`` at every node of the side."""
    vals = np.asarray([np.atleast_1d(f(float(t))) for t in side.nodes])
    return NodalFunction(side=side, values=vals)


def prolong_pairs(side: GridSide, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Sparse interpolation weights at ``t``: (global columns, weights).

    Supported only on the piece containing ``t`` (left piece at shared
    breakpoints); the weights sum to 1, and an exact node hit gives a unit
    weight so that interpolation reproduces nodal values bit for bit.
    """
    i = side.piece_of(t)
    cols = side.piece_cols(i)
    pn = side.piece_nodes[i]
    hit = np.nonzero(pn == t)[0]
    if hit.size:
        w = np.zeros(pn.size)
        w[hit[0]] = 1.0
        return cols, w
    lo = side.breakpoints[i]
    hi = side.breakpoints[i + 1]
    x = (t - lo) / (hi - lo)
    x = min(max(x, 0.0), 1.0)
    w = lagrange_matrix(bary_table(side.family), x)[0]
    return cols, w


def prolong_weights(side: GridSide, t: float) -> np.ndarray:
    """Dense weight vector over all global nodes realizing evaluation at t."""
    cols, w = prolong_pairs(side, t)
    out = np.zeros(side.n)
    out[cols] = w
    return out


def prolong_eval(v: NodalFunction, t: float) -> np.ndarray:
    """Evaluate the piecewise interpolant of ``v`` at ``t``."""
    cols, w = prolong_pairs(v.side, t)
    return w @ v.values[cols]


def _cumulative(side: GridSide) -> np.ndarray:
    """Weights for the integral from the interval start to each breakpoint."""
    try:
        return _cum_cache[side]
    except KeyError:
        pass
    with _cum_lock:
        if side in _cum_cache:
            return _cum_cache[side]
        table = bary_table(side.family)
        m = side.family.degree
        cum = np.zeros((side.P + 1, side.n))
        for i in range(side.P):
            h = side.breakpoints[i + 1] - side.breakpoints[i]
            cum[i + 1] = cum[i]
            cum[i + 1, i * m : i * m + m + 1] += h * table.quad
        cum.setflags(write=False)
        _cum_cache[side] = cum
        return cum


def integral_weights(side: GridSide, upper: float) -> np.ndarray:
    """Weights realizing the exact integral of the interpolant on [start, upper].

    Full-piece antiderivative weights for pieces wholly inside, plus partial
    antiderivative weights on the piece containing ``upper``.
    """
    b = side.breakpoints
    tol = 1e-12 * max(1.0, abs(b[0]), abs(b[-1]))
    if upper < b[0] - tol or upper > b[-1] + tol:
        raise ValueError(f"integration endpoint {upper!r} outside [{b[0]!r}, {b[-1]!r}]")
    i = side.piece_of(upper)
    cum = _cumulative(side)
    w = cum[i].copy()
    h = b[i + 1] - b[i]
    c = (upper - b[i]) / h
    c = min(max(c, 0.0), 1.0)
    if c > 0.0:
        table = bary_table(side.family)
        m = side.family.degree
        w[i * m : i * m + m + 1] += h * _partial_integral(table, c)
    return w


def _subdivide(breaks: np.ndarray, lo: float, hi: float) -> np.ndarray:
    guard = 1e-14 * max(1.0, abs(lo), abs(hi))
    inner = breaks[(breaks > lo + guard) & (breaks < hi - guard)]
    return np.concatenate(([lo], inner, [hi]))


@lru_cache(maxsize=None)
def _cc_rule(degree: int) -> tuple[np.ndarray, np.ndarray]:
    # Chebyshev-extrema interpolatory quadrature on [0, 1]
    table = _table(CHEBYSHEV, degree)
    return table.family.nodes, table.quad


def kernel_quadrature(
    side: GridSide, lo: float, hi: float, kernel, degree: int | None = None
) -> np.ndarray:
    """Weights realizing ``int_lo^hi K(s) v(s) ds`` over the side's nodes.

    ``kernel(s)`` returns a (p, q) matrix (scalars are promoted); the result
    has shape (p, q, n). The window is subdivided at the side's piece
    breakpoints so the interpolant is a single polynomial per subpiece, and
    each subpiece uses Chebyshev-extrema quadrature of the given degree
    (default ``max(M, 5)``).
    """
    b = side.breakpoints
    tol = 1e-12 * max(1.0, abs(b[0]), abs(b[-1]))
    if lo < b[0] - tol or hi > b[-1] + tol:
        raise ValueError(
            f"kernel window [{lo!r}, {hi!r}] outside [{b[0]!r}, {b[-1]!r}]"
        )
    probe = np.atleast_2d(np.asarray(kernel(float(lo)), dtype=float))
    p, q = probe.shape
    out = np.zeros((p, q, side.n))
    if hi <= lo:
        return out
    if degree is None:
        degree = max(side.family.degree, 5)
    qx, qw = _cc_rule(degree)
    cuts = _subdivide(b, lo, hi)
    for u0, u1 in zip(cuts[:-1], cuts[1:]):
        width = u1 - u0
        if width <= 0.0:
            continue
        pts = u0 + width * qx
        for s, w in zip(pts, qw):
            kmat = np.atleast_2d(np.asarray(kernel(float(s)), dtype=float))
            cols, wl = prolong_pairs(side, float(s))
            out[:, :, cols] += (width * w) * kmat[:, :, None] * wl[None, None, :]
    return out
