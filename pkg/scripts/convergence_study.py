"""Grid-refinement study for the density limits, monotonicity residuals and the solver.

Writes three CSV tables into --out:
  density.csv       extrapolated density limit and its error per profile and n
  monotonicity.csv  worst relative residual of the monotonicity identity per profile and n
  solver.csv        manufactured-solution L2 error and observed order per n

    python3 scripts/convergence_study.py [--out results/convergence] [--max-n 2048]
"""

import argparse
import csv
import math
import time
from pathlib import Path

import numpy as np

from axisym_fbp.densities import (
    density_curve,
    extrapolate_limit,
    geometric_radii,
    monotonicity_residual,
    reference_densities,
)
from axisym_fbp.fixtures import row
from axisym_fbp.grid import StreamGrid
from axisym_fbp.solver import SolverConfig, manufactured_solution, minimize

PROFILE_ROWS = {"stokes": "type1-stokes", "axis": "type2-axis-profile", "bubble": "type3-bubble"}


def _write(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    print(f"wrote {path}")


def density_table(sizes):
    rows = []
    for name, key in PROFILE_ROWS.items():
        r = row(key)
        exact = {m.label: m.value for m in reference_densities(r.point)}[r.menu]
        for n in sizes:
            t0 = time.perf_counter()
            r_min = max(0.0125, 16.0 / n)  # 16 cells across the smallest ball
            lim = extrapolate_limit(density_curve(r.grid(n), None, r.point, geometric_radii(0.4, r_min)))
            err = math.nan if lim.inconclusive else abs(lim.value - exact)
            rows.append([name, n, lim.value, exact, err, round(time.perf_counter() - t0, 2)])
            print(f"density {name:7s} n={n:5d} error {err:.2e}")
    return rows


def monotonicity_table(sizes):
    rows = []
    for name, key in PROFILE_ROWS.items():
        r = row(key)
        for n in sizes:
            g = r.grid(n)
            rep = monotonicity_residual(g, None, r.point, [0.3, 0.2, 0.1])
            worst = float(np.max(rep.relative_residual))
            rows.append([name, n, worst])
            print(f"monotonicity {name:7s} n={n:5d} residual {worst:.2e}")
    return rows


def solver_table(sizes):
    rows, prev = [], None
    for n in sizes:
        cfg = SolverConfig(geometry="rectangle", manufactured="smooth", gravity=False,
                           nx=n, ny=n, flux=1.0, y_min=-1.0, y_max=0.0)
        psi, _ = manufactured_solution(cfg)
        res = minimize(cfg)
        X, Y = res.grid.mesh()
        err = float(np.sqrt(np.sum((res.grid.values - psi(X, Y)) ** 2) * cfg.dx * cfg.dy))
        order = math.nan if prev is None else math.log2(prev / err)
        rows.append([n, err, order])
        print(f"solver n={n:4d} L2 error {err:.3e} order {order:.2f}")
        prev = err
    return rows


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results/convergence")
    ap.add_argument("--max-n", type=int, default=2048)
    a = ap.parse_args()
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    sizes = [n for n in (256, 512, 1024, 2048) if n <= a.max_n]
    # the extrapolation needs radii spanning a factor of 8 above 16 cells
    _write(out / "density.csv", ["profile", "n", "limit", "exact", "abs_error", "seconds"],
           density_table([n for n in sizes if n >= 512]))
    _write(out / "monotonicity.csv", ["profile", "n", "max_relative_residual"], monotonicity_table(sizes))
    _write(out / "solver.csv", ["n", "l2_error", "order"], solver_table([16, 32, 64, 128, 256]))


if __name__ == "__main__":
    main()
