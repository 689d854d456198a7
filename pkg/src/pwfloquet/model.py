"""Linear time-periodic delay equations, periodic solutions, and benchmarks.

The state of a coupled equation is laid out as ``[x-block, y-block]``: the
renewal components (whose value is prescribed) come first, the differential
components second. Pure delay differential equations have ``d_x = 0`` and
pure renewal equations have ``d_y = 0``.

Coefficients are callbacks, not sampled matrices, so the monodromy module can
collocate them on its own grid independently of the solution mesh. Equation
and solution objects are immutable; callbacks must be pure and re-entrant.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from typing import Callable

import numpy as np

from .interp import bary_table, lagrange_matrix
from .mesh import UNIFORM, Mesh, mesh_ratio, reference_nodes

__all__ = [
    "DiscreteTerm",
    "DistributedTerm",
    "LinearPeriodicEquation",
    "NonlinearProblem",
    "ExactSolution",
    "PiecewiseSolution",
    "Builtin",
    "builtin",
    "linearize",
    "sample_solution",
    "plant_v0",
    "coupled_view_of_plant",
    "read_solution",
    "write_solution",
    "data_path",
    "integrate_orbit_guess",
]

BUILTIN_NAMES = ("logistic", "tent", "quadratic-re", "plant", "plant-coupled")


def _as_matrix_callback(c):
    if callable(c):
        return c
    mat = np.atleast_2d(np.asarray(c, dtype=float))
    return lambda *args, _m=mat: _m


@dataclass(frozen=True, eq=False)
class DiscreteTerm:
    """Contribution ``coeff(t) @ v_source(t - delay)`` to the target block."""

    target: str  # "x" or "y"
    source: str
    delay: float
    coeff: Callable[[float], np.ndarray]

    def __post_init__(self):
        object.__setattr__(self, "coeff", _as_matrix_callback(self.coeff))


@dataclass(frozen=True, eq=False)
class DistributedTerm:
    """Contribution ``int_a^b kernel(t, th) @ v_source(t + th) dth``."""

    target: str
    source: str
    lower: float
    upper: float
    kernel: Callable[[float, float], np.ndarray]

    def __post_init__(self):
        k = self.kernel
        if not callable(k):
            mat = np.atleast_2d(np.asarray(k, dtype=float))
            k = lambda t, th, _m=mat: _m
        object.__setattr__(self, "kernel", k)


@dataclass(frozen=True, eq=False)
class LinearPeriodicEquation:
    """Linear omega-periodic delay equation split into renewal and
    differential blocks.

    ``breakpoints`` lists the points in ``[0, omega)`` where the coefficients
    may lose smoothness (typically the mesh of the periodic solution the
    equation was linearized around, plus intrinsic kinks).
    """

    kind: str  # "dde" | "re" | "coupled"
    d_x: int
    d_y: int
    omega: float
    tau: float
    discrete: tuple[DiscreteTerm, ...] = ()
    distributed: tuple[DistributedTerm, ...] = ()
    breakpoints: tuple[float, ...] = ()

    def __post_init__(self):
        if self.omega <= 0 or self.tau <= 0:
            raise ValueError("omega and tau must be positive")
        if self.d_x < 0 or self.d_y < 0 or self.d_x + self.d_y == 0:
            raise ValueError("state dimensions must be nonnegative and not both zero")
        for term in self.discrete:
            if not (0.0 <= term.delay <= self.tau * (1 + 1e-12)):
                raise ValueError(f"delay {term.delay} outside [0, tau]")
        for term in self.distributed:
            if term.lower >= term.upper:
                raise ValueError("distributed bounds must be ordered")
            if term.lower < -self.tau * (1 + 1e-12) or term.upper > 1e-12:
                raise ValueError("distributed bounds must lie in [-tau, 0]")
        object.__setattr__(self, "discrete", tuple(self.discrete))
        object.__setattr__(self, "distributed", tuple(self.distributed))
        object.__setattr__(
            self, "breakpoints", tuple(sorted(float(b) for b in self.breakpoints))
        )

    @property
    def d(self) -> int:
        return self.d_x + self.d_y

    def block_offset(self, block: str) -> int:
        return 0 if block == "x" else self.d_x

    def block_dim(self, block: str) -> int:
        return self.d_x if block == "x" else self.d_y


@dataclass(frozen=True, eq=False)
class ExactSolution:
    """Closed-form periodic solution; ``fn`` accepts scalars or arrays."""

    fn: Callable
    omega: float
    d: int = 1
    derivative: Callable | None = None

    def __call__(self, t):
        return np.asarray(self.fn(t), dtype=float)


@dataclass(frozen=True, eq=False)
class PiecewiseSolution:
    """Continuous piecewise polynomial periodic solution on ``[0, omega]``.

    ``values[i, j, c]`` is component ``c`` at node ``j`` of piece ``i``; the
    representation nodes are the (shared-endpoint) family nodes of
    ``node_kind`` mapped onto each piece.
    """

    breakpoints: np.ndarray
    values: np.ndarray  # (L, m+1, d)
    node_kind: str = UNIFORM

    def __post_init__(self):
        b = np.asarray(self.breakpoints, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 3 or v.shape[0] != b.size - 1:
            raise ValueError("values must have shape (L, degree + 1, d)")
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "values", v)

    @property
    def omega(self) -> float:
        return float(self.breakpoints[-1])

    @property
    def degree(self) -> int:
        return self.values.shape[1] - 1

    @property
    def d(self) -> int:
        return self.values.shape[2]

    @property
    def L(self) -> int:
        return self.breakpoints.size - 1

    @property
    def mesh(self) -> Mesh:
        return Mesh(self.breakpoints)

    @property
    def mesh_ratio(self) -> float:
        return mesh_ratio(self.mesh)

    def __call__(self, t):
        """Evaluate at any real ``t`` (reduced modulo the period)."""
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        tt = np.mod(np.atleast_1d(t), self.omega)
        b = self.breakpoints
        idx = np.clip(np.searchsorted(b, tt, side="right") - 1, 0, self.L - 1)
        h = b[idx + 1] - b[idx]
        x = (tt - b[idx]) / h
        table = bary_table(reference_nodes(self.node_kind, self.degree))
        w = lagrange_matrix(table, x)
        out = np.einsum("pj,pjd->pd", w, self.values[idx])
        return out[0] if scalar else out

    def derivative(self) -> "PiecewiseSolution":
        """Piecewise derivative (not continuous across breakpoints)."""
        table = bary_table(reference_nodes(self.node_kind, self.degree))
        h = np.diff(self.breakpoints)
        dv = np.einsum("kj,ijd->ikd", table.diff, self.values) / h[:, None, None]
        return PiecewiseSolution(self.breakpoints, dv, self.node_kind)

    def validate(self, rtol: float = 1e-10) -> None:
        """Check continuity across breakpoints and periodicity."""
        scale = max(1.0, float(np.abs(self.values).max()))
        left = self.values[:-1, -1, :]
        right = self.values[1:, 0, :]
        if np.abs(left - right).max() > rtol * scale:
            raise ValueError("solution is discontinuous across a breakpoint")
        if np.abs(self.values[0, 0] - self.values[-1, -1]).max() > rtol * scale:
            raise ValueError("solution is not periodic")


def sample_solution(fn, omega: float, mesh: Mesh, degree: int,
                    node_kind: str = UNIFORM) -> PiecewiseSolution:
    """Sample a callable onto a piecewise polynomial over ``[0, omega]``.

    ``mesh`` may span [0, 1] (it is then scaled by ``omega``) or [0, omega].
    """
    b = mesh.breakpoints
    if abs(b[-1] - 1.0) < 1e-12 and omega != 1.0:
        b = b * omega
    fam = reference_nodes(node_kind, degree)
    L = b.size - 1
    rows = []
    for i in range(L):
        nodes = b[i] + (b[i + 1] - b[i]) * fam.nodes
        nodes[0], nodes[-1] = b[i], b[i + 1]
        rows.append(np.asarray([np.atleast_1d(fn(t)) for t in nodes], dtype=float))
    vals = np.asarray(rows)
    return PiecewiseSolution(b, vals, node_kind)


@dataclass(frozen=True, eq=False)
class NonlinearProblem:
    """Nonlinear delay equation given by a right-hand-side callback.

    ``rhs(u)`` receives an evaluator of the state history: ``u(theta)`` for
    ``theta`` in ``[-tau, 0]`` returns the state laid out as
    ``[x-block, y-block]``; a ``(k,)`` array of thetas yields a trailing
    ``(k, d)`` block. Solvers may batch over evaluation times by prepending
    axes, so the callback must be written elementwise (index with
    ``[..., c]`` rather than unpacking). The returned vector prescribes the
    x-block values and the y-block derivatives.

    ``linearize_terms(ev, omega)`` returns the coefficient terms of the
    linearization around the omega-periodic solution ``ev``.
    """

    name: str
    kind: str
    d_x: int
    d_y: int
    tau: float
    rhs: Callable | None = None
    linearize_terms: Callable | None = None
    params: dict = field(default_factory=dict)

    @property
    def d(self) -> int:
        return self.d_x + self.d_y


@dataclass(frozen=True, eq=False)
class Builtin:
    """A benchmark problem with whatever extras it supports.

    ``make_guess()`` produces a deterministic initial guess for the periodic
    solver as ``(profile over [0, 1], period)``; depending on the problem it
    samples a closed form or integrates the equation to its attractor.
    """

    name: str
    params: dict
    problem: NonlinearProblem | None = None
    linear: LinearPeriodicEquation | None = None
    exact: ExactSolution | None = None
    period_guess: float | None = None
    profile_guess: Callable | None = None  # s in [0, 1] -> state
    make_guess: Callable | None = None


class MissingDerivativesError(ValueError):
    pass


def _solution_access(solution):
    """Normalize a solution argument to (periodic evaluator, omega, breakpoints)."""
    if isinstance(solution, PiecewiseSolution):
        return solution, solution.omega, tuple(solution.breakpoints[:-1])
    if isinstance(solution, ExactSolution):
        return solution, solution.omega, ()
    if isinstance(solution, tuple) and len(solution) == 2 and callable(solution[0]):
        return solution[0], float(solution[1]), ()
    raise TypeError("solution must be a PiecewiseSolution, ExactSolution or (callable, omega)")


def linearize(problem: NonlinearProblem, solution) -> LinearPeriodicEquation:
    """Linearize a nonlinear problem around a periodic solution.

    The smoothness breakpoints of the result are the solution's mesh
    breakpoints (a closed-form solution contributes none).
    """
    if problem.linearize_terms is None:
        raise MissingDerivativesError(
            f"problem {problem.name!r} does not provide derivative callbacks"
        )
    ev, omega, bps = _solution_access(solution)
    discrete, distributed = problem.linearize_terms(ev, omega)
    return LinearPeriodicEquation(
        kind=problem.kind,
        d_x=problem.d_x,
        d_y=problem.d_y,
        omega=omega,
        tau=problem.tau,
        discrete=tuple(discrete),
        distributed=tuple(distributed),
        breakpoints=bps,
    )


# ---------------------------------------------------------------------------
# benchmark problems
# ---------------------------------------------------------------------------


def plant_v0(a: float, b: float) -> float:
    """Real root of ``v - v^3/3 - (v + a)/b`` (unique for a != 0, 0 < b <= 1).

    Safeguarded Newton from -1 with bisection fallback, tolerance 1e-14.
    """
    f = lambda v: v - v**3 / 3.0 - (v + a) / b
    df = lambda v: 1.0 - v * v - 1.0 / b
    lo, hi = -10.0, 10.0  # f decreases towards both ends: f(lo) > 0 > f(hi)
    if not (f(lo) > 0.0 > f(hi)):
        raise ValueError("parameters do not bracket a real root in [-10, 10]")
    v, fv = -1.0, f(-1.0)
    for _ in range(100):
        if fv > 0.0:
            lo = v
        else:
            hi = v
        d = df(v)
        vn = v - fv / d if d != 0.0 else 0.5 * (lo + hi)
        if not (min(lo, hi) < vn < max(lo, hi)):
            vn = 0.5 * (lo + hi)
        if abs(vn - v) <= 1e-14 * max(1.0, abs(vn)):
            v = vn
            break
        v, fv = vn, f(vn)
    return float(v)


def _gauss_panels(a: float, b: float, panels: int, n: int):
    gx, gw = np.polynomial.legendre.leggauss(n)
    edges = np.linspace(a, b, panels + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * np.diff(edges)
    x = (mid[:, None] + half[:, None] * gx[None, :]).ravel()
    w = (half[:, None] * gw[None, :]).ravel()
    return x, w


def _logistic(r: float = 1.6) -> Builtin:
    """Delay logistic equation ``y' = r y(t) (1 - y(t - 1))``."""
    tau = 1.0

    def rhs(u):
        return r * u(0.0) * (1.0 - u(-1.0))

    def lin_terms(ev, omega):
        def on_current(t):
            return np.array([[r * (1.0 - ev(t - 1.0)[0])]])

        def on_delayed(t):
            return np.array([[-r * ev(t)[0]]])

        return (
            (
                DiscreteTerm("y", "y", 0.0, on_current),
                DiscreteTerm("y", "y", 1.0, on_delayed),
            ),
            (),
        )

    problem = NonlinearProblem(
        name="logistic", kind="dde", d_x=0, d_y=1, tau=tau,
        rhs=rhs, linearize_terms=lin_terms, params={"r": r},
    )
    rc = np.pi / 2
    amp = min(1.3, 1.3 * np.sqrt(max(r - rc, 0.02)))
    period = 4.0 + 1.1 * max(r - rc, 0.0)
    profile = lambda s: np.atleast_1d(1.0 + amp * np.sin(2 * np.pi * np.asarray(s)))

    def make_guess():
        # a plain sinusoid guess can collapse onto the unstable equilibrium,
        # so integrate to the attractor instead
        return integrate_orbit_guess(problem, np.array([1.15]), t_settle=250.0)

    return Builtin(
        name="logistic", params={"r": r}, problem=problem,
        period_guess=period, profile_guess=profile, make_guess=make_guess,
    )


def _tent() -> Builtin:
    """Scalar DDE ``x'(t) = (1 - |mod(t, 2) - 1|) x(t - 1)``.

    The coefficient is piecewise linear with period 2 and kinks at the
    integers, which makes the equation a clean order-reduction probe.
    """

    def coeff(t):
        return np.array([[1.0 - abs(np.mod(t, 2.0) - 1.0)]])

    linear = LinearPeriodicEquation(
        kind="dde", d_x=0, d_y=1, omega=2.0, tau=1.0,
        discrete=(DiscreteTerm("y", "y", 1.0, coeff),),
        breakpoints=(0.0, 1.0),
    )
    return Builtin(name="tent", params={}, linear=linear)


def _quadratic_re(gamma: float = 4.0) -> Builtin:
    """Renewal equation ``x(t) = (gamma/2) int_{-3}^{-1} x(1 - x) dtheta``.

    Carries the closed-form periodic solution branch
    ``1/2 + pi/(4 gamma) + A sin(pi t / 2)`` of period 4.
    """
    tau = 3.0
    radicand = 0.5 - 1.0 / gamma - (np.pi / (2 * gamma**2)) * (1.0 + np.pi / 4.0)
    if radicand < 0:
        raise ValueError(
            f"gamma={gamma} is too small for a real periodic amplitude"
        )
    amp = float(np.sqrt(radicand))
    mean = 0.5 + np.pi / (4.0 * gamma)

    def xbar(t):
        t = np.asarray(t, dtype=float)
        return (mean + amp * np.sin(0.5 * np.pi * t))[..., None]

    def xbar_prime(t):
        t = np.asarray(t, dtype=float)
        return (0.5 * np.pi * amp * np.cos(0.5 * np.pi * t))[..., None]

    qx, qw = _gauss_panels(-3.0, -1.0, 16, 10)

    def rhs(u):
        vals = u(qx)[..., 0]
        integrand = vals * (1.0 - vals)
        return (0.5 * gamma * np.einsum("q,...q->...", qw, integrand))[..., None]

    def lin_terms(ev, omega):
        def kernel(t, th):
            return np.array([[0.5 * gamma * (1.0 - 2.0 * ev(t + th)[0])]])

        return ((), (DistributedTerm("x", "x", -3.0, -1.0, kernel),))

    problem = NonlinearProblem(
        name="quadratic-re", kind="re", d_x=1, d_y=0, tau=tau,
        rhs=rhs, linearize_terms=lin_terms, params={"gamma": gamma},
    )
    exact = ExactSolution(fn=xbar, omega=4.0, d=1, derivative=xbar_prime)
    profile = lambda s: xbar(4.0 * np.asarray(s))
    return Builtin(
        name="quadratic-re", params={"gamma": gamma}, problem=problem, exact=exact,
        period_guess=4.0, profile_guess=profile,
        make_guess=lambda: (profile, 4.0),
    )


def _plant(a: float = 0.7, b: float = 0.8, eta: float = -2.0,
           r: float = 0.08, tau: float = 25.0) -> Builtin:
    """Recurrent neural feedback model with delayed self-coupling.

    ``v' = v - v^3/3 - w + eta (v(t - tau) - v0)``,
    ``w' = r (v + a - b w)``; ``v0`` the rest state.
    """
    v0 = plant_v0(a, b)
    w0 = (v0 + a) / b

    def rhs(u):
        s0 = u(0.0)
        v, w = s0[..., 0], s0[..., 1]
        vd = u(-tau)[..., 0]
        return np.stack(
            [v - v**3 / 3.0 - w + eta * (vd - v0), r * (v + a - b * w)],
            axis=-1,
        )

    def lin_terms(ev, omega):
        def on_current(t):
            vbar = ev(t)[0]
            return np.array([[1.0 - vbar * vbar, -1.0], [r, -r * b]])

        delayed = np.array([[eta, 0.0], [0.0, 0.0]])
        return (
            (
                DiscreteTerm("y", "y", 0.0, on_current),
                DiscreteTerm("y", "y", tau, delayed),
            ),
            (),
        )

    problem = NonlinearProblem(
        name="plant", kind="dde", d_x=0, d_y=2, tau=tau,
        rhs=rhs, linearize_terms=lin_terms,
        params={"a": a, "b": b, "eta": eta, "r": r, "tau": tau, "v0": v0},
    )

    def profile(s):
        s = np.asarray(s, dtype=float)
        return np.stack(
            [v0 + 1.8 * np.sin(2 * np.pi * s), w0 + 0.4 * np.sin(2 * np.pi * s - 1.2)],
            axis=-1,
        )

    def make_guess():
        start = np.array([v0 + 0.5, w0])
        return integrate_orbit_guess(problem, start, t_settle=max(600.0, 12 * tau))

    return Builtin(
        name="plant", params=problem.params, problem=problem,
        period_guess=2.0 * tau, profile_guess=profile, make_guess=make_guess,
    )


def _plant_coupled(a: float = 0.7, b: float = 0.8, eta: float = -2.0,
                   r: float = 0.08, tau: float = 25.0) -> Builtin:
    """Coupled renewal/differential reformulation of the neural model.

    Integrating the ``w`` equation over one delay interval gives the neutral
    renewal equation ``w(t) = w(t - tau) + int_{t-tau}^{t} r (v + a - b w)``.
    State layout is ``(w, v)``: renewal block first.
    """
    v0 = plant_v0(a, b)
    qx, qw = _gauss_panels(-tau, 0.0, 48, 8)

    def rhs(u):
        s0, sd, vals = u(0.0), u(-tau), u(qx)
        w, v = s0[..., 0], s0[..., 1]
        wd, vd = sd[..., 0], sd[..., 1]
        integral = np.einsum(
            "q,...q->...", qw, r * (vals[..., 1] + a - b * vals[..., 0])
        )
        return np.stack(
            [wd + integral, v - v**3 / 3.0 - w + eta * (vd - v0)],
            axis=-1,
        )

    def lin_terms(ev, omega):
        # ev yields the coupled layout (w, v)
        def on_current(t):
            vbar = ev(t)[1]
            return np.array([[1.0 - vbar * vbar]])

        return (
            (
                DiscreteTerm("y", "x", 0.0, np.array([[-1.0]])),
                DiscreteTerm("y", "y", 0.0, on_current),
                DiscreteTerm("y", "y", tau, np.array([[eta]])),
                DiscreteTerm("x", "x", tau, np.array([[1.0]])),
            ),
            (
                DistributedTerm("x", "y", -tau, 0.0, np.array([[r]])),
                DistributedTerm("x", "x", -tau, 0.0, np.array([[-r * b]])),
            ),
        )

    problem = NonlinearProblem(
        name="plant-coupled", kind="coupled", d_x=1, d_y=1, tau=tau,
        rhs=rhs, linearize_terms=lin_terms,
        params={"a": a, "b": b, "eta": eta, "r": r, "tau": tau, "v0": v0},
    )
    return Builtin(name="plant-coupled", params=problem.params, problem=problem,
                   period_guess=2.0 * tau)


def coupled_view_of_plant(solution: PiecewiseSolution) -> PiecewiseSolution:
    """Reorder a plant solution ``(v, w)`` into the coupled layout ``(w, v)``."""
    return PiecewiseSolution(
        solution.breakpoints, solution.values[:, :, [1, 0]], solution.node_kind
    )


def builtin(name: str, **params) -> Builtin:
    """Construct a benchmark problem by name.

    Known names: ``logistic`` (r), ``tent``, ``quadratic-re`` (gamma),
    ``plant`` and ``plant-coupled`` (a, b, eta, r, tau).
    """
    factories = {
        "logistic": _logistic,
        "tent": _tent,
        "quadratic-re": _quadratic_re,
        "plant": _plant,
        "plant-coupled": _plant_coupled,
    }
    if name not in factories:
        raise ValueError(f"unknown builtin problem {name!r}; expected one of {BUILTIN_NAMES}")
    return factories[name](**params)


# ---------------------------------------------------------------------------
# initial guesses by time integration
# ---------------------------------------------------------------------------


def integrate_orbit_guess(problem: NonlinearProblem, y0: np.ndarray,
                          t_settle: float, step: float = 0.01,
                          periods_back: int = 3):
    """Integrate a DDE to its attractor and cut out one period.

    Fixed-step RK4 with linearly interpolated dense history. The period is
    estimated from the last upward crossings of component 0 through its
    late-time average. Returns ``(profile over [0, 1], period estimate)``.
    """
    if problem.kind != "dde":
        raise ValueError("orbit integration guess only supports differential problems")
    tau = problem.tau
    d = problem.d
    nhist = int(np.ceil(tau / step)) + 1
    nsteps = int(np.ceil(t_settle / step))
    ts = np.empty(nhist + nsteps)
    ys = np.empty((nhist + nsteps, d))
    ts[:nhist] = np.linspace(-tau, 0.0, nhist)
    ys[:nhist] = y0[None, :]

    filled = nhist

    def u_at(tq, t_now, y_now):
        # evaluator for the problem rhs; theta = 0 is the current stage value
        def u(theta):
            theta = np.asarray(theta, dtype=float)
            t_abs = t_now + theta
            out = np.empty(theta.shape + (d,))
            for c in range(d):
                out[..., c] = np.interp(t_abs, ts[:filled], ys[:filled, c])
            if theta.ndim == 0 and theta == 0.0:
                return np.asarray(y_now, dtype=float)
            return out
        return u

    def f(t_now, y_now):
        return np.asarray(problem.rhs(u_at(None, t_now, y_now)), dtype=float)

    t = 0.0
    y = np.asarray(y0, dtype=float)
    for i in range(nsteps):
        k1 = f(t, y)
        k2 = f(t + step / 2, y + step / 2 * k1)
        k3 = f(t + step / 2, y + step / 2 * k2)
        k4 = f(t + step, y + step * k3)
        y = y + step / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += step
        ts[filled] = t
        ys[filled] = y
        filled += 1

    # period from upward crossings of the late-time average of component 0
    tail = slice(filled - int(0.6 * nsteps), filled)
    level = ys[tail, 0].mean()
    sig = ys[tail, 0] - level
    tt = ts[tail]
    up = np.nonzero((sig[:-1] < 0) & (sig[1:] >= 0))[0]
    if up.size < periods_back + 1:
        raise RuntimeError("not enough oscillations to estimate a period; integrate longer")
    cross = tt[up] - sig[up] * (tt[up + 1] - tt[up]) / (sig[up + 1] - sig[up])
    period = float(np.mean(np.diff(cross[-(periods_back + 1):])))
    t0 = float(cross[-1] - period)

    def profile(s):
        s = np.asarray(s, dtype=float)
        t_abs = t0 + s * period
        out = np.empty(s.shape + (d,))
        for c in range(d):
            out[..., c] = np.interp(t_abs, ts[:filled], ys[:filled, c])
        return out

    return profile, period


# ---------------------------------------------------------------------------
# solution files
# ---------------------------------------------------------------------------


def write_solution(solution: PiecewiseSolution, path) -> None:
    """Write the structured text solution format (bit-exact round trip)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# piecewise periodic solution\n")
        fh.write("format 1\n")
        fh.write(f"omega {float(solution.omega)!r}\n")
        fh.write(f"dim {solution.d}\n")
        fh.write(f"degree {solution.degree}\n")
        fh.write(f"nodes {solution.node_kind}\n")
        fh.write(f"pieces {solution.L}\n")
        fh.write("breakpoints\n")
        for t in solution.breakpoints:
            fh.write(f"{float(t)!r}\n")
        fh.write("values\n")
        for i in range(solution.L):
            for j in range(solution.degree + 1):
                fh.write(" ".join(f"{float(v)!r}" for v in solution.values[i, j]))
                fh.write("\n")


def read_solution(path) -> PiecewiseSolution:
    with open(path, "r", encoding="utf-8") as fh:
        tokens = []
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if line:
                tokens.append(line)
    head = {}
    it = iter(tokens)
    for line in it:
        key, _, rest = line.partition(" ")
        if key == "breakpoints":
            break
        head[key] = rest
    if head.get("format") != "1":
        raise ValueError("unsupported solution file format")
    L = int(head["pieces"])
    d = int(head["dim"])
    m = int(head["degree"])
    bps = np.array([float(next(it)) for _ in range(L + 1)])
    marker = next(it)
    if marker != "values":
        raise ValueError("malformed solution file: missing values section")
    vals = np.empty((L, m + 1, d))
    for i in range(L):
        for j in range(m + 1):
            vals[i, j] = [float(x) for x in next(it).split()]
    sol = PiecewiseSolution(bps, vals, head.get("nodes", UNIFORM))
    if abs(sol.omega - float(head["omega"])) > 1e-12 * max(1.0, sol.omega):
        raise ValueError("solution file omega does not match the breakpoints")
    return sol


def data_path(name: str):
    """Path of a shipped data file (adapted meshes, reference solutions)."""
    return resources.files("pwfloquet").joinpath("data", name)
