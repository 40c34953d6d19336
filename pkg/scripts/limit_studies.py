"""eps -> 0 and R -> infinity studies plus the Picard Cauchy gaps on the standard datum."""
import argparse

from prandtl_lab.grid import GridSpec, build_grid
from prandtl_lab.norms import NormParams
from prandtl_lab.prandtl import SchemeConfig, make_standard_datum, make_state, picard_solve
from prandtl_lab.verify import eps_convergence_study, truncation_convergence_study


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--ny", type=int, default=256)
    ap.add_argument("--T", type=float, default=0.05)
    ap.add_argument("--eps", type=float, nargs="+", default=[0.1, 0.05, 0.025])
    ap.add_argument("--R", type=float, nargs="+", default=[5.0, 10.0, 20.0, 30.0])
    ap.add_argument("--picard-iters", type=int, default=5)
    args = ap.parse_args()

    p = NormParams()
    g = build_grid(GridSpec(32, args.ny, 30.0, 1e-3, "exponential", 4.0))
    d = make_standard_datum(g, p)
    es = eps_convergence_study(g, d.omega0, d.U0, args.eps, args.T, SchemeConfig(), p)
    print("eps", args.eps)
    print("  diffs", " ".join(f"{x:.3e}" for x in es.diffs), f" order {es.order:.2f}")

    s0 = make_state(g, d.omega0, d.U0, 0.1, p)
    ts = truncation_convergence_study(s0, args.R, SchemeConfig(), args.T)
    print("R", args.R)
    print("  diffs", " ".join(f"{x:.3e}" for x in ts.diffs))

    gaps = picard_solve(s0, SchemeConfig(dt=1e-3, R=10.0), args.picard_iters, 0.02).cauchy_gaps
    print("Picard gaps", " ".join(f"{x:.3e}" for x in gaps))


if __name__ == "__main__":
    main()
