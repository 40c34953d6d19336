"""Standard run with every a priori monitor: fitted constants, split-sample
verdicts, lifespan estimate and the u, v, w control ratios."""
import argparse
import json

from prandtl_lab.cli import monitor_verdicts
from prandtl_lab.grid import GridSpec, build_grid
from prandtl_lab.monitors import build_trace, uvw_control_report
from prandtl_lab.norms import NormParams
from prandtl_lab.prandtl import SchemeConfig, make_standard_datum, make_state, simulate


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nx", type=int, default=32)
    ap.add_argument("--ny", type=int, default=256)
    ap.add_argument("--T", type=float, default=0.2)
    ap.add_argument("--dt", type=float, default=1e-3)
    ap.add_argument("--eps", type=float, default=0.1)
    args = ap.parse_args()

    p = NormParams()
    g = build_grid(GridSpec(args.nx, args.ny, 30.0, args.dt, "exponential", 4.0))
    d = make_standard_datum(g, p, eps=args.eps)
    s0 = make_state(g, d.omega0, d.U0, args.eps, p)
    traj = simulate(s0, SchemeConfig(dt=args.dt), args.T, record_every=10)
    trace = build_trace(traj, p)
    v = monitor_verdicts(traj, trace, p, g, d.U0)
    v["uvw"] = {k: float(x) for k, x in uvw_control_report(s0).items()}
    v["trace"] = {"t": trace.times[::5], "e_g": trace.e_g[::5], "I_sup": trace.I_sup[::5],
                  "min_sigma_omega": trace.min_sigma_omega[::5]}
    print(json.dumps(v, indent=2, default=float))


if __name__ == "__main__":
    main()
