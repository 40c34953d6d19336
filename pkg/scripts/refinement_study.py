"""Residual convergence under (h, dt) -> (h/2, dt/4) on the standard scenario.

Prints the wall-identity, a-equation, g_s-equation and momentum residuals at
each level together with the observed orders, and writes them to CSV.
"""
import argparse
import csv

import numpy as np

from prandtl_lab.grid import GridSpec, build_grid
from prandtl_lab.norms import NormParams
from prandtl_lab.prandtl import SchemeConfig, make_standard_datum, make_state, simulate
from prandtl_lab.verify import (LEVELS, a_evolution_residual, boundary_reduction_residual,
                                gs_evolution_residual, momentum_residual, observed_orders, triplet_steps)


def level(ny, dt, T, eps, p):
    g = build_grid(GridSpec(32, ny, 30.0, dt, "exponential", 4.0))
    d = make_standard_datum(g, p, eps=eps)
    n = int(round(T / dt))
    traj = simulate(make_state(g, d.omega0, d.U0, eps, p), SchemeConfig(dt=dt), T,
                    record_every=10**9, record_steps=triplet_steps(n, 3))
    last = traj.state(len(traj.omegas) - 1)
    row = {"ny": ny, "dt": dt,
           "a": float(np.max(a_evolution_residual(traj))),
           "gs": float(np.max(gs_evolution_residual(traj, p))),
           "momentum": float(np.max(momentum_residual(traj)))}
    row.update({k: boundary_reduction_residual(last, k) for k in LEVELS})
    return row


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--ny", type=int, default=96, help="coarsest y resolution")
    ap.add_argument("--dt", type=float, default=4e-3, help="coarsest time step")
    ap.add_argument("--levels", type=int, default=3)
    ap.add_argument("--T", type=float, default=0.04)
    ap.add_argument("--eps", type=float, default=0.1)
    ap.add_argument("-o", "--out", default="refinement.csv")
    args = ap.parse_args()

    p = NormParams()
    rows = [level(args.ny * 2**k, args.dt / 4**k, args.T, args.eps, p) for k in range(args.levels)]
    keys = ["a", "gs", "momentum", *LEVELS]
    print(f"{'ny':>5} {'dt':>9} " + " ".join(f"{k:>10}" for k in keys))
    for r in rows:
        print(f"{r['ny']:5d} {r['dt']:9.2e} " + " ".join(f"{r[k]:10.3e}" for k in keys))
    print("orders " + "  ".join(f"{k}: {min(observed_orders([r[k] for r in rows])):.2f}" for k in keys))
    with open(args.out, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)


if __name__ == "__main__":
    main()
