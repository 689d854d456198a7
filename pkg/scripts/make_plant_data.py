#!/usr/bin/env python3
"""Regenerate the shipped data files for the delayed neural feedback model.

The periodic orbit of the model (a=0.7, b=0.8, eta=-2, r=0.08, tau=25) lives
on a strongly nonuniform time scale: a fast spike followed by long slow
plateaus. The monodromy solver takes adapted meshes as *inputs*, so this
script plays the role of the external tooling that produces them:

1. integrate the equation to its attractor and cut out one period;
2. solve the periodic problem on an arclength-equidistributed mesh;
3. iterate error-based equidistribution (the standard indicator: jumps of
   the m-th derivative across breakpoints estimate y^(m+1));
4. rescale the piece widths by a power transform so the largest/smallest
   width ratio is exactly 55.91;
5. solve once more on the final mesh and ship both the mesh (on [0, 1]) and
   the converged solution.

Writes src/pwfloquet/data/plant_adapted.mesh and plant_solution.sol.
"""

import pathlib
import sys

import numpy as np

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from pwfloquet.bvp import BvpProblem, solve_periodic
from pwfloquet.mesh import Mesh, chebyshev_family, mesh_ratio, write_mesh
from pwfloquet.model import builtin, linearize, write_solution
from pwfloquet.monodromy import assemble, multipliers

TARGET_RATIO = 55.91
L = 30
DEGREE = 5


def equidistribute(sol, L, m, floor_frac=0.02):
    """Mesh on [0, 1] equidistributing the local error indicator of ``sol``."""
    d = sol
    for _ in range(m):
        d = d.derivative()
    b01 = sol.breakpoints / sol.omega
    h = np.diff(b01)
    pm = d.values[:, 0, :]  # m-th derivative, constant per piece
    jumps = np.abs(pm[1:] - pm[:-1]).max(axis=1)
    hmid = 0.5 * (h[:-1] + h[1:])
    y_mp1 = jumps / np.maximum(hmid * sol.omega, 1e-30)
    dens_pts = np.concatenate([[b01[0]], b01[1:-1], [b01[-1]]])
    dens_val = np.concatenate([[y_mp1[0]], y_mp1, [y_mp1[-1]]]) ** (1.0 / (m + 1))
    dens_val = np.maximum(dens_val, floor_frac * dens_val.max())
    s = np.linspace(0.0, 1.0, 8001)
    dens = np.interp(s, dens_pts, dens_val)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(s))])
    cum /= cum[-1]
    bp = np.interp(np.linspace(0.0, 1.0, L + 1), cum, s)
    bp[0], bp[-1] = 0.0, 1.0
    return Mesh(bp)


def arclength_mesh(profile, L):
    s = np.linspace(0.0, 1.0, 4001)
    vals = profile(s)
    dv = np.gradient(vals[:, 0], s)
    dw = np.gradient(vals[:, 1], s)
    mon = np.sqrt(1.0 + dv**2 + dw**2)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (mon[1:] + mon[:-1]) * np.diff(s))])
    cum /= cum[-1]
    bp = np.interp(np.linspace(0.0, 1.0, L + 1), cum, s)
    bp[0], bp[-1] = 0.0, 1.0
    return Mesh(bp)


def tune_ratio(mesh, target):
    w = np.diff(mesh.breakpoints)
    alpha = np.log(target) / np.log(w.max() / w.min())
    w2 = w**alpha
    w2 /= w2.sum()
    bp = np.concatenate([[0.0], np.cumsum(w2)])
    bp[-1] = 1.0
    return Mesh(bp)


def main():
    out_dir = pathlib.Path(__file__).resolve().parents[1] / "src" / "pwfloquet" / "data"
    plant = builtin("plant")

    print("integrating to the attractor ...")
    profile, period = plant.make_guess()
    print(f"  period estimate {period:.6f}")

    mesh01 = arclength_mesh(profile, L)
    bvp = BvpProblem(problem=plant.problem, mesh=mesh01, degree=DEGREE,
                     period_guess=period, guess_profile=profile)
    result = solve_periodic(bvp)
    print(f"  arclength mesh: omega={result.period:.6f} rho={mesh_ratio(mesh01):.2f}")

    for it in range(3):
        mesh01 = equidistribute(result.solution, L, DEGREE)
        bvp = BvpProblem(problem=plant.problem, mesh=mesh01, degree=DEGREE,
                         period_guess=result.period, guess_profile=result.solution)
        result = solve_periodic(bvp)
        print(f"  equidistribution {it}: omega={result.period:.6f} "
              f"rho={mesh_ratio(mesh01):.2f}")

    mesh01 = tune_ratio(equidistribute(result.solution, L, DEGREE), TARGET_RATIO)
    bvp = BvpProblem(problem=plant.problem, mesh=mesh01, degree=DEGREE,
                     period_guess=result.period, guess_profile=result.solution)
    result = solve_periodic(bvp)
    print(f"final: omega={result.period:.6f} rho={mesh_ratio(mesh01):.6f} "
          f"residual={result.residual_norm:.1e}")

    eq = linearize(plant.problem, result.solution)
    ms = multipliers(assemble(eq, result.solution.mesh, chebyshev_family(5)))
    print(f"check: |trivial - 1| = {abs(ms.trivial() - 1.0):.2e}, "
          f"dominant nontrivial = {ms.dominant_nontrivial():.6f}")

    write_mesh(mesh01, out_dir / "plant_adapted.mesh",
               header="strongly adapted partition of [0, 1] for the delayed neural\n"
                      "feedback model (a=0.7, b=0.8, eta=-2, r=0.08, tau=25);\n"
                      "width ratio tuned to 55.91; regenerate with scripts/make_plant_data.py")
    write_solution(result.solution, out_dir / "plant_solution.sol")
    print(f"wrote {out_dir / 'plant_adapted.mesh'}")
    print(f"wrote {out_dir / 'plant_solution.sol'}")


if __name__ == "__main__":
    main()
