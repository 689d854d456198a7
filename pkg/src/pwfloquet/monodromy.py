"""Finite-dimensional discretization of the monodromy operator.

The operator maps a history segment on ``[-tau, 0]`` to the state one period
later. It is represented through two coupled pieces of data: the history
nodal vector ``Psi`` and the forward nodal vector ``Z`` holding, on
``[0, omega]``, the derivative of the solution for differential blocks and
the solution value itself for renewal blocks. Collocating the fixed point
equation for ``Z`` at every forward node gives

    ``Z = A1 Psi + A2 Z``,

and evaluating the solution at time ``omega + theta`` for every history node
``theta`` gives the end state

    ``T Psi = B1 Psi + B2 Z = (B1 + B2 (I - A2)^{-1} A1) Psi``.

Rows of ``A1``/``A2`` apply the equation's right-hand side to the function
reconstructed from ``(Psi, Z)``: a differential block is reconstructed as
``Psi(0) + int_0^s Z`` for ``s > 0``, a renewal block is the interpolant of
``Z`` on ``(0, omega]``; both fall back to the history interpolant for
``s <= 0``. Eigenvalues of ``T`` approximate the Floquet multipliers.

Row assembly is embarrassingly parallel in principle (each row only reads
immutable inputs); this implementation assembles sequentially.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .interp import _cc_rule, _subdivide, integral_weights, prolong_pairs
from .mesh import (
    CollocationGrid,
    GridSide,
    Mesh,
    NodeFamily,
    build_grid,
)
from .model import LinearPeriodicEquation

__all__ = [
    "MonodromyDiscretization",
    "MultiplierSet",
    "CoarseDiscretizationError",
    "MissingBreakpointsError",
    "assemble",
    "multipliers",
    "eigenfunction",
]

MAX_DIMENSION = 20_000  # guard against runaway problem sizes


class CoarseDiscretizationError(RuntimeError):
    """The fixed-point system is singular: the grid is too coarse."""


class MissingBreakpointsError(ValueError):
    """Strict mode: the mesh omits smoothness breakpoints of the equation."""


@dataclass(frozen=True, eq=False)
class MonodromyDiscretization:
    """Assembled block matrices and the resulting monodromy matrix."""

    equation: LinearPeriodicEquation
    grid: CollocationGrid
    blocks: dict  # A1, A2, B1, B2
    T: np.ndarray
    merged_breakpoints: tuple[float, ...] = ()
    _eig_cache: list = field(default_factory=list, repr=False)

    @property
    def n_hist(self) -> int:
        return self.grid.history.n

    @property
    def n_fwd(self) -> int:
        return self.grid.forward.n

    @property
    def dim(self) -> int:
        return self.T.shape[0]

    def pencil(self) -> tuple[np.ndarray, np.ndarray]:
        """Generalized eigenvalue formulation separating ``(Psi, Z)``.

        Returns ``(P, Q)`` with ``P = [[B1, B2], [A1, A2 - I]]`` and
        ``Q = diag(I, 0)``; the finite eigenvalues of ``P v = mu Q v`` are
        the eigenvalues of the monodromy matrix.
        """
        a1, a2, b1, b2 = (self.blocks[k] for k in ("A1", "A2", "B1", "B2"))
        nh, nf = b1.shape[0], a2.shape[0]
        p = np.block([[b1, b2], [a1, a2 - np.eye(nf)]])
        q = np.zeros((nh + nf, nh + nf))
        q[:nh, :nh] = np.eye(nh)
        return p, q


@dataclass(frozen=True, eq=False)
class MultiplierSet:
    """Approximate Floquet multipliers, sorted by decreasing modulus.

    ``spurious`` flags eigenvalues below the discard threshold (they are
    kept in the list). The stability verdict ignores the trivial multiplier.
    """

    values: np.ndarray
    trivial_index: int | None
    verdict: str
    spurious: np.ndarray
    tol_stab: float
    tol_discard: float

    def trivial(self) -> complex | None:
        if self.trivial_index is None:
            return None
        return complex(self.values[self.trivial_index])

    def dominant(self) -> complex:
        return complex(self.values[0])

    def dominant_nontrivial(self) -> complex | None:
        for i, mu in enumerate(self.values):
            if i == self.trivial_index or self.spurious[i]:
                continue
            return complex(mu)
        return None

    def __len__(self) -> int:
        return self.values.size


def _merge_breakpoints(eq: LinearPeriodicEquation, mesh: Mesh, enforce: str):
    tol = 1e-9 * max(1.0, eq.omega)
    b = mesh.breakpoints
    missing = [
        p for p in eq.breakpoints
        if 0.0 < p < eq.omega - tol and np.abs(b - p).min() > tol
    ]
    if not missing or enforce == "ignore":
        return mesh, ()
    if enforce == "strict":
        raise MissingBreakpointsError(
            f"mesh omits smoothness breakpoints {missing}; refusing in strict mode"
        )
    if enforce != "merge":
        raise ValueError(f"unknown breakpoint enforcement mode {enforce!r}")
    warnings.warn(
        f"mesh omits smoothness breakpoints {missing}; merging them in",
        stacklevel=3,
    )
    return Mesh(np.sort(np.concatenate([b, missing]))), tuple(missing)


class _Assembler:
    def __init__(self, eq: LinearPeriodicEquation, grid: CollocationGrid,
                 quad_degree: int | None):
        self.eq = eq
        self.grid = grid
        self.d = eq.d
        self.quad_degree = quad_degree or max(grid.family.degree, 5)
        nh, nf, d = grid.history.n, grid.forward.n, eq.d
        self.A1 = np.zeros((d * nf, d * nh))
        self.A2 = np.zeros((d * nf, d * nf))
        self.B1 = np.zeros((d * nh, d * nh))
        self.B2 = np.zeros((d * nh, d * nf))
        # index of the history node at theta = 0
        self.hist0 = grid.history.n - 1

    def eval_pairs(self, source: str, s: float):
        """Weights reconstructing the source block's state at time ``s``.

        Returns (history pairs, forward pairs, forward dense row), any of
        which may be ``None``.
        """
        grid, eq = self.grid, self.eq
        if s <= 0.0:
            return prolong_pairs(grid.history, s), None, None
        if source == "y":
            cols0 = np.array([self.hist0])
            w0 = np.array([1.0])
            return (cols0, w0), None, integral_weights(grid.forward, s)
        return None, prolong_pairs(grid.forward, s), None

    def add_eval(self, hist_mat, fwd_mat, row0: int, coeff: np.ndarray,
                 source: str, s: float):
        eq, d = self.eq, self.d
        off = eq.block_offset(source)
        p, q = coeff.shape
        hp, fp, fdense = self.eval_pairs(source, s)
        for i in range(p):
            row = row0 + i
            if hp is not None:
                cols, w = hp
                for j in range(q):
                    hist_mat[row, cols * d + off + j] += coeff[i, j] * w
            if fp is not None:
                cols, w = fp
                for j in range(q):
                    fwd_mat[row, cols * d + off + j] += coeff[i, j] * w
            if fdense is not None:
                for j in range(q):
                    fwd_mat[row, off + j :: d] += coeff[i, j] * fdense

    def add_distributed(self, hist_mat, fwd_mat, row0: int, t: float, term):
        """Kernel integral over ``[t + lower, t + upper]`` in absolute time,
        split where the reconstruction changes form."""
        eq, grid, d = self.eq, self.grid, self.d
        lo, hi = t + term.lower, t + term.upper
        off = eq.block_offset(term.source)
        qx, qw = _cc_rule(self.quad_degree)

        def quad_window(side: GridSide, a: float, b: float, into, use_integral: bool):
            if b - a <= 0.0:
                return
            cuts = _subdivide(side.breakpoints, a, b)
            psi0_accum = None
            for u0, u1 in zip(cuts[:-1], cuts[1:]):
                width = u1 - u0
                if width <= 0.0:
                    continue
                pts = u0 + width * qx
                for s, w in zip(pts, qw):
                    kmat = np.atleast_2d(np.asarray(term.kernel(t, float(s) - t),
                                                    dtype=float))
                    if use_integral:
                        iw = integral_weights(side, float(s))
                        for i in range(kmat.shape[0]):
                            for j in range(kmat.shape[1]):
                                into[row0 + i, off + j :: d] += (
                                    width * w * kmat[i, j] * iw
                                )
                        if psi0_accum is None:
                            psi0_accum = np.zeros_like(kmat)
                        psi0_accum = psi0_accum + width * w * kmat
                    else:
                        cols, wl = prolong_pairs(side, float(s))
                        for i in range(kmat.shape[0]):
                            for j in range(kmat.shape[1]):
                                into[row0 + i, cols * d + off + j] += (
                                    width * w * kmat[i, j] * wl
                                )
            if psi0_accum is not None:
                # Psi(0) enters the differential reconstruction on s > 0
                for i in range(psi0_accum.shape[0]):
                    for j in range(psi0_accum.shape[1]):
                        hist_mat[row0 + i, self.hist0 * d + off + j] += psi0_accum[i, j]

        split = min(max(0.0, lo), hi)
        quad_window(grid.history, lo, min(hi, 0.0), hist_mat, use_integral=False)
        if hi > 0.0:
            if term.source == "y":
                quad_window(grid.forward, split, hi, fwd_mat, use_integral=True)
            else:
                quad_window(grid.forward, split, hi, fwd_mat, use_integral=False)

    def run(self):
        eq, grid, d = self.eq, self.grid, self.d
        # fixed-point rows: one per forward node and target component
        for k, t in enumerate(grid.forward.nodes):
            t = float(t)
            for term in eq.discrete:
                coeff = np.atleast_2d(np.asarray(term.coeff(t), dtype=float))
                row0 = k * d + eq.block_offset(term.target)
                self.add_eval(self.A1, self.A2, row0, coeff, term.source, t - term.delay)
            for term in eq.distributed:
                row0 = k * d + eq.block_offset(term.target)
                self.add_distributed(self.A1, self.A2, row0, t, term)
        # end-state rows: the reconstructed state at omega + theta
        for m, theta in enumerate(grid.history.nodes):
            s = grid.omega + float(theta)
            for block, dim in (("x", eq.d_x), ("y", eq.d_y)):
                if dim == 0:
                    continue
                row0 = m * d + eq.block_offset(block)
                self.add_eval(self.B1, self.B2, row0, np.eye(dim), block, s)
        return self.A1, self.A2, self.B1, self.B2


def assemble(eq: LinearPeriodicEquation, mesh: Mesh, family: NodeFamily, *,
             enforce: str = "merge", quad_degree: int | None = None) -> MonodromyDiscretization:
    """Discretize the monodromy operator of ``eq`` on ``mesh`` with the
    given node family.

    The mesh must span ``[0, omega]``. Smoothness breakpoints of the
    equation that are missing from the mesh are merged in with a warning
    (``enforce="merge"``, the default); ``enforce="strict"`` raises instead,
    and ``enforce="ignore"`` keeps the mesh as given (order-reduction
    studies need this deliberately unsafe mode). Raises
    :class:`CoarseDiscretizationError` when the fixed-point system is
    numerically singular.
    """
    span_tol = 1e-9 * max(1.0, eq.omega)
    if abs(mesh.breakpoints[-1] - eq.omega) > span_tol or mesh.breakpoints[0] != 0.0:
        raise ValueError(
            f"mesh spans [{mesh.breakpoints[0]}, {mesh.breakpoints[-1]}] "
            f"but the equation period is {eq.omega}"
        )
    mesh, merged = _merge_breakpoints(eq, mesh, enforce)
    grid = build_grid(mesh, family, eq.tau)
    dim = eq.d * (grid.history.n + grid.forward.n)
    if dim > MAX_DIMENSION:
        raise ValueError(f"discretization dimension {dim} exceeds {MAX_DIMENSION}")

    a1, a2, b1, b2 = _Assembler(eq, grid, quad_degree).run()
    system = np.eye(a2.shape[0]) - a2
    try:
        lu, piv = scipy.linalg.lu_factor(system)
    except scipy.linalg.LinAlgError as exc:
        raise CoarseDiscretizationError(
            "fixed-point system is singular: discretization too coarse"
        ) from exc
    rcond = _rcond(system, lu)
    if rcond < 1e-14:
        raise CoarseDiscretizationError(
            f"fixed-point system is numerically singular (rcond={rcond:.2e}): "
            "discretization too coarse"
        )
    t_mat = b1 + b2 @ scipy.linalg.lu_solve((lu, piv), a1)
    return MonodromyDiscretization(
        equation=eq, grid=grid,
        blocks={"A1": a1, "A2": a2, "B1": b1, "B2": b2},
        T=t_mat, merged_breakpoints=merged,
    )


def _rcond(system: np.ndarray, lu: np.ndarray) -> float:
    gecon = scipy.linalg.get_lapack_funcs("gecon", (system,))
    rcond, info = gecon(lu, np.linalg.norm(system, 1), norm="1")
    return float(rcond) if info == 0 else 0.0


def _eig_sorted(matrix: np.ndarray):
    vals, vecs = scipy.linalg.eig(matrix)
    order = np.lexsort((np.angle(vals), -np.abs(vals)))
    return vals[order], vecs[:, order]


def _sorted_eig(disc: MonodromyDiscretization):
    if not disc._eig_cache:
        disc._eig_cache.append(_eig_sorted(disc.T))
    return disc._eig_cache[0]


def multipliers(disc: MonodromyDiscretization, mode: str = "direct", *,
                tol_discard: float = 1e-12, tol_stab: float = 1e-6,
                trivial_radius: float = 0.1) -> MultiplierSet:
    """Extract approximate Floquet multipliers from a discretization.

    ``direct`` takes the eigenvalues of the assembled monodromy matrix.
    ``pencil`` starts from the generalized problem that separates the
    history and forward unknowns and reduces it internally to the same
    standard problem through the ``(I - A2)`` solve, so both modes agree to
    roundoff-identical values. Eigenvalues with modulus below
    ``tol_discard`` are flagged as numerically spurious but kept.
    """
    if mode == "direct":
        vals = _sorted_eig(disc)[0]
    elif mode == "pencil":
        p, _ = disc.pencil()
        nh = disc.T.shape[0]
        b1p, b2p = p[:nh, :nh], p[:nh, nh:]
        a1p, a2mi = p[nh:, :nh], p[nh:, nh:]
        # -(A2 - I) is I - A2 bit for bit, so the reduction runs through
        # the very same factorization and eigensolver as the direct mode
        try:
            lu, piv = scipy.linalg.lu_factor(-a2mi)
            t_mat = b1p + b2p @ scipy.linalg.lu_solve((lu, piv), a1p)
        except scipy.linalg.LinAlgError as exc:
            raise CoarseDiscretizationError(
                "pencil reduction failed: discretization too coarse"
            ) from exc
        vals = _eig_sorted(t_mat)[0]
    else:
        raise ValueError(f"unknown multiplier mode {mode!r}")

    mods = np.abs(vals)
    spurious = mods < tol_discard
    dist_to_one = np.abs(vals - 1.0)
    trivial_index = int(np.argmin(dist_to_one))
    if dist_to_one[trivial_index] > trivial_radius:
        trivial_index = None
    nontrivial = np.ones(vals.size, dtype=bool)
    if trivial_index is not None:
        nontrivial[trivial_index] = False
    nt_mods = mods[nontrivial]
    if nt_mods.size and np.any(nt_mods > 1.0 + tol_stab):
        verdict = "unstable"
    elif nt_mods.size == 0 or np.all(nt_mods < 1.0 - tol_stab):
        verdict = "stable"
    else:
        verdict = "inconclusive"
    return MultiplierSet(
        values=vals, trivial_index=trivial_index, verdict=verdict,
        spurious=spurious, tol_stab=tol_stab, tol_discard=tol_discard,
    )


def eigenfunction(disc: MonodromyDiscretization, index: int):
    """Eigenvector ``index`` (in modulus-sorted order) as history nodal values.

    Normalized to unit maximum absolute value; shape (n_hist, d).
    """
    from .interp import NodalFunction

    vals, vecs = _sorted_eig(disc)
    if not (0 <= index < vals.size):
        raise IndexError(f"eigenvalue index {index} out of range 0..{vals.size - 1}")
    v = vecs[:, index].reshape(disc.n_hist, disc.equation.d)
    v = v / np.abs(v).max()
    return NodalFunction(side=disc.grid.history, values=v)
