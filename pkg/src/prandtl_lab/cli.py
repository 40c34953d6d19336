"""Command line: run, sweep, verify and compare scenarios.

Exit codes: 0 success, 1 solver error, 2 monitor violation or failed sweep
cell, 64 usage error, 65 config rejected, 74 I/O error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import itertools
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib
import tomli_w

from . import __version__
from .grid import GridSpec, InvalidSpecError, build_grid, write_field
from .norms import InvalidParamsError, NormParams, norm_report
from .prandtl import (SchemeConfig, SolverError, UnstableStepError, make_standard_datum, make_state,
                      picard_solve, simulate)

log = logging.getLogger("prandtl_lab")

EXIT_OK, EXIT_SOLVER, EXIT_VIOLATION = 0, 1, 2
EXIT_USAGE, EXIT_CONFIG, EXIT_IO = 64, 65, 74
SUITES = ("inequalities", "monitors", "structure", "compare", "convergence")
SCENARIOS = ("standard", "shear")


class ConfigError(ValueError):
    pass


# ------------------------------------------------------------ configuration

@dataclass(frozen=True)
class ModelParams:
    s: int = 4
    gamma: float = 1.0
    sigma: float = 2.6
    delta: float = 0.03
    eps: float = 0.1
    R: float | None = None


@dataclass(frozen=True)
class GridSection:
    nx: int = 32
    ny: int = 256
    Y: float = 30.0
    dt: float = 1e-3
    grading: str = "exponential"
    beta: float = 4.0


@dataclass(frozen=True)
class RunSection:
    T_end: float = 0.1
    record_every: int = 10
    integrator: str = "imex_euler"
    matching_tol: float = 1e-3
    amplitude: float = 0.2
    scale: float = 0.3
    save_fields: bool = True


@dataclass(frozen=True)
class RunConfig:
    scenario: str = "standard"
    model: ModelParams = field(default_factory=ModelParams)
    grid: GridSection = field(default_factory=GridSection)
    run: RunSection = field(default_factory=RunSection)
    sweep: dict = field(default_factory=dict)

    # -- conversions
    def to_dict(self) -> dict:
        d = {"scenario": self.scenario, "model": asdict(self.model), "grid": asdict(self.grid),
             "run": asdict(self.run)}
        if d["model"]["R"] is None:
            del d["model"]["R"]  # TOML has no null: absent means untruncated
        if self.sweep:
            d["sweep"] = {k: list(v) for k, v in self.sweep.items()}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {"scenario", "model", "grid", "run", "sweep"}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown top-level keys: {sorted(extra)}")

        def section(kind, key):
            raw = dict(d.get(key, {}))
            names = {f.name for f in fields(kind)}
            bad = set(raw) - names
            if bad:
                raise ConfigError(f"unknown keys in [{key}]: {sorted(bad)}")
            return kind(**raw)

        sweep = {k: tuple(v) for k, v in dict(d.get("sweep", {})).items()}
        bad = set(sweep) - {"eps", "R", "nx", "ny", "dt"}
        if bad:
            raise ConfigError(f"sweep axes must be among eps, R, nx, ny, dt; got {sorted(bad)}")
        cfg = cls(d.get("scenario", "standard"), section(ModelParams, "model"),
                  section(GridSection, "grid"), section(RunSection, "run"), sweep)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"scenario must be one of {SCENARIOS}")
        try:
            self.norm_params()
            self.grid_spec().validate()
            self.scheme()
        except (InvalidParamsError, InvalidSpecError, ValueError, TypeError) as e:
            raise ConfigError(str(e)) from e
        if not self.run.T_end > 0 or self.run.record_every < 1:
            raise ConfigError("T_end must be positive and record_every >= 1")

    # -- computed objects
    def norm_params(self) -> NormParams:
        p = self.model
        return NormParams(p.s, p.gamma, p.sigma, p.delta)

    def grid_spec(self) -> GridSpec:
        g = self.grid
        return GridSpec(g.nx, g.ny, g.Y, g.dt, g.grading, g.beta)

    def scheme(self) -> SchemeConfig:
        return SchemeConfig(self.run.integrator, self.grid.dt, self.model.R, self.run.matching_tol)

    def content_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def load_config(path) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: {e}") from e
    return RunConfig.from_dict(raw)


def emit_config(cfg: RunConfig) -> str:
    return tomli_w.dumps(cfg.to_dict())


# ------------------------------------------------------------ run

def _datum(cfg: RunConfig, grid):
    p = cfg.norm_params()
    a = 0.0 if cfg.scenario == "shear" else cfg.run.amplitude
    return make_standard_datum(grid, p, amplitude=a, eps=cfg.model.eps, scale=cfg.run.scale)


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


TRACE_COLUMNS = ("t", "e_g", "e_hs", "I_sup", "min_sigma_omega", "F", "wall_sup_u", "res_k0", "res_k1", "res_k2")


def write_trace_csv(path: Path, trace) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_COLUMNS)
        res = trace.boundary_residuals
        for i, t in enumerate(trace.times):
            w.writerow([repr(float(x)) for x in (
                t, trace.e_g[i], trace.e_hs[i], trace.I_sup[i], trace.min_sigma_omega[i], trace.F_vals[i],
                trace.wall_sup_u[i], *(res.get(k, [np.nan] * len(trace))[i] for k in ("k0", "k1", "k2")))])


def read_trace_csv(path: Path):
    from .monitors import EnergyTrace
    tr = EnergyTrace()
    res = {"k0": [], "k1": [], "k2": []}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            tr.times.append(float(row["t"]))
            tr.e_g.append(float(row["e_g"]))
            tr.e_hs.append(float(row["e_hs"]))
            tr.I_sup.append(float(row["I_sup"]))
            tr.min_sigma_omega.append(float(row["min_sigma_omega"]))
            tr.F_vals.append(float(row["F"]))
            tr.wall_sup_u.append(float(row["wall_sup_u"]))
            for k in res:
                res[k].append(float(row[f"res_{k}"]))
    tr.boundary_residuals = res
    return tr


def monitor_verdicts(traj, trace, p: NormParams, grid, U) -> dict:
    """Fit constants on the first half, check every monitor on the whole trace."""
    from .monitors import (energy_ode_bound, fit_constants, lifespan_estimate, linf_bounds_check,
                           lower_bound_check, max_principle_bound)
    if len(trace) < 4:
        return {k: {"status": "insufficient trace"} for k in ("energy", "linf", "lower", "max_principle")}
    consts = fit_constants(traj, trace, p)
    en = energy_ode_bound(trace, consts, p.s)
    li = linf_bounds_check(trace, consts, p.s)
    lo = lower_bound_check(trace, consts)
    H = [grid.weight(p.sigma) * w for w in traj.omegas]
    mp = max_principle_bound(traj.times, H, consts.lam)
    st = traj.state(0)
    life = lifespan_estimate(norm_report(grid, st.omega, st.u, st.U, p), grid, U, consts, p)
    return {
        "constants": asdict(consts),
        "energy": {"status": "pass" if en.violated_at is None else "violated", "violated_at": en.violated_at,
                   "blowup_time": en.blowup_time},
        "linf": {"status": "pass" if li.holds else "violated", "first_violation": li.first_violation},
        "lower": {"status": "pass" if lo.holds else "violated", "first_violation": lo.first_violation,
                  "suspended_from": lo.suspended_from},
        "max_principle": {"status": "pass" if (mp.sup_holds and mp.min_holds) else "violated",
                          "min_vacuous_from": mp.min_vacuous_from},
        "lifespan": asdict(life),
        "membership": {"status": "pass" if min(trace.min_sigma_omega) >= p.delta and
                       max(trace.I_sup) <= p.delta ** -2 else "violated"},
    }


def execute(cfg: RunConfig, out: Path) -> int:
    """Run one scenario into ``out``; returns the exit code."""
    from .monitors import build_trace
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    p = cfg.norm_params()
    grid = build_grid(cfg.grid_spec())
    manifest = {"scenario": cfg.scenario, "config": cfg.to_dict(), "version": __version__,
                "config_hash": cfg.content_hash()}
    (out / "config.toml").write_text(emit_config(cfg))
    code = EXIT_OK
    try:
        datum = _datum(cfg, grid)
        st = make_state(grid, datum.omega0, datum.U0, cfg.model.eps, p)
        traj = simulate(st, cfg.scheme(), cfg.run.T_end, record_every=cfg.run.record_every)
    except (UnstableStepError, SolverError) as e:
        manifest["error"] = {"type": type(e).__name__, "message": str(e)}
        manifest["verdict"] = "solver-error"
        code = EXIT_SOLVER
    else:
        trace = build_trace(traj, p)
        write_trace_csv(out / "trace.csv", trace)
        if cfg.run.save_fields:
            (out / "fields").mkdir(exist_ok=True)
            for i, w in enumerate(traj.omegas):
                write_field(out / "fields" / f"omega_{i:04d}.bin", grid, w)
            _write_json(out / "fields" / "times.json", [float(t) for t in traj.times])
        verdicts = monitor_verdicts(traj, trace, p, grid, datum.U0)
        _write_json(out / "verdicts" / "monitors.json", verdicts)
        failed = sorted(k for k, v in verdicts.items() if isinstance(v, dict) and v.get("status") == "violated")
        manifest["verdict"] = "violations" if failed else "pass"
        manifest["violations"] = failed
        manifest["datum"] = {"amplitude": datum.amplitude, "halvings": datum.halvings}
        code = EXIT_VIOLATION if failed else EXIT_OK
    manifest["duration_s"] = time.perf_counter() - t0
    manifest["exit_code"] = code
    _write_json(out / "manifest.json", manifest)
    return code


# ------------------------------------------------------------ sweep

def sweep_cells(cfg: RunConfig) -> list[RunConfig]:
    axes = sorted(cfg.sweep)
    cells = []
    for combo in itertools.product(*(cfg.sweep[a] for a in axes)):
        c = replace(cfg, sweep={})
        for a, v in zip(axes, combo):
            if a in ("eps", "R"):
                c = replace(c, model=replace(c.model, **{a: v}))
            else:
                c = replace(c, grid=replace(c.grid, **{a: v}))
        cells.append(c)
    return cells


def _run_cell(args) -> tuple[int, float]:
    cfg, out = args
    t0 = time.perf_counter()
    try:
        cfg.validate()
        code = execute(cfg, out)
    except ConfigError:
        code = EXIT_CONFIG
    except Exception:  # a broken cell must not stop the sweep
        log.exception("sweep cell %s failed", out)
        code = EXIT_SOLVER
    return code, time.perf_counter() - t0


def n_workers() -> int:
    try:
        return max(1, int(os.environ.get("PRANDTL_THREADS", "1")))
    except ValueError:
        return 1


def execute_sweep(cfg: RunConfig, out: Path) -> int:
    cells = sweep_cells(cfg)
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(c, out / f"cell_{i:03d}") for i, c in enumerate(cells)]
    nw = min(n_workers(), len(jobs))
    if nw > 1:
        with ProcessPoolExecutor(nw) as ex:
            results = list(ex.map(_run_cell, jobs))
    else:
        results = [_run_cell(j) for j in jobs]
    axes = sorted(cfg.sweep)
    rows = []
    for (c, d), (code, _) in zip(jobs, results):
        vals = {a: (getattr(c.model, a) if a in ("eps", "R") else getattr(c.grid, a)) for a in axes}
        rows.append({"cell": d.name, **vals, "exit_code": code,
                     "status": {EXIT_OK: "ok", EXIT_VIOLATION: "violations"}.get(code, "failed"),
                     "config_hash": c.content_hash()})
    with open(out / "aggregate.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]) if rows else ["cell"])
        w.writeheader()
        w.writerows(rows)
    return EXIT_OK if all(r["exit_code"] == EXIT_OK for r in rows) else EXIT_VIOLATION


# ------------------------------------------------------------ verify suites

def _load_run(run_dir: Path) -> RunConfig:
    p = run_dir / "config.toml"
    if not p.exists():
        raise FileNotFoundError(f"{p} missing; not a run directory")
    return load_config(p)


def suite_inequalities(cfg: RunConfig, run_dir: Path) -> dict:
    from .calculus import (family_field, hardy_lower, hardy_upper, measured_premise, pointwise_interp_check,
                           random_terms, sobolev_ratio, trace_bound)
    grid = build_grid(replace(cfg.grid_spec(), grading="exponential", beta=max(cfg.grid.beta, 3.0)))
    rng = np.random.default_rng(0)
    counts = {"hardy_upper": 0, "hardy_lower": 0, "trace": 0, "pointwise_x": 0, "pointwise_y": 0}
    fails = dict.fromkeys(counts, 0)
    sob = []
    for _ in range(25):
        terms = random_terms(rng)
        f = family_field(grid, terms)
        b = min(t.p for t in terms)

        def pw(direction):
            C0, C2 = measured_premise(grid, f, b, b, direction)
            return pointwise_interp_check(grid, f, C0, b, C2, b, direction)

        for name, chk in (("hardy_upper", lambda: hardy_upper(grid, f, 0.5).holds),
                          ("hardy_lower", lambda: hardy_lower(grid, f, -1.0).holds),
                          ("trace", lambda: trace_bound(grid, f).holds),
                          ("pointwise_x", lambda: pw("x")), ("pointwise_y", lambda: pw("y"))):
            try:
                ok = chk()
            except ValueError:  # premise or domain not met: not a violation
                continue
            counts[name] += 1
            fails[name] += int(not ok)
        sob.append(sobolev_ratio(grid, f))
    ok = not any(fails.values())
    return {"status": "pass" if ok else "violated", "checked": counts, "violations": fails,
            "sobolev_sup": max(sob)}


def suite_monitors(cfg: RunConfig, run_dir: Path) -> dict:
    from .grid import read_field
    from .prandtl import Trajectory
    trace_path = run_dir / "trace.csv"
    if not trace_path.exists():
        raise FileNotFoundError(f"{trace_path} missing")
    trace = read_trace_csv(trace_path)
    fld = sorted((run_dir / "fields").glob("omega_*.bin"))
    if len(trace) < 4 or len(fld) < 4:
        return {k: {"status": "insufficient trace"} for k in ("energy", "linf", "lower", "max_principle")}
    p = cfg.norm_params()
    grid = build_grid(cfg.grid_spec())
    datum = _datum(cfg, grid)
    st = make_state(grid, datum.omega0, datum.U0, cfg.model.eps, p)
    traj = Trajectory(grid, p, cfg.model.eps, st.U, st.px, cfg.grid.dt)
    times = json.loads((run_dir / "fields" / "times.json").read_text())
    n = min(len(fld), len(trace), len(times))
    for path, t in zip(fld[:n], times[:n]):
        traj.times.append(float(t))
        traj.omegas.append(read_field(path)[1])
    return monitor_verdicts(traj, trace.head(n), p, grid, datum.U0)


def suite_structure(cfg: RunConfig, run_dir: Path) -> dict:
    from .verify import (LEVELS, a_evolution_residual, boundary_reduction_residual, gs_evolution_residual,
                         momentum_residual, observed_orders, triplet_steps)
    p = cfg.norm_params()
    T = min(cfg.run.T_end, 0.04)
    levels = []
    for lev in range(3):
        spec = replace(cfg.grid_spec(), ny=cfg.grid.ny * 2 ** lev // 4, dt=cfg.grid.dt * 4.0 ** (1 - lev))
        grid = build_grid(spec)
        datum = _datum(cfg, grid)
        st = make_state(grid, datum.omega0, datum.U0, cfg.model.eps, p)
        sc = replace(cfg.scheme(), dt=spec.dt)
        n = int(round(T / spec.dt))
        traj = simulate(st, sc, T, record_every=10**9, record_steps=triplet_steps(n, 3))
        last = traj.state(len(traj.omegas) - 1)
        row = {"ny": spec.ny, "dt": spec.dt,
               "a": float(np.max(a_evolution_residual(traj))),
               "gs": float(np.max(gs_evolution_residual(traj, p))),
               "momentum": float(np.max(momentum_residual(traj))),
               "k0_ghost": boundary_reduction_residual(last, "k0", stencil="ghost")}
        row.update({k: boundary_reduction_residual(last, k) for k in LEVELS})
        levels.append(row)
    with open(run_dir / "verdicts" / "structure.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(levels[0]))
        w.writeheader()
        w.writerows(levels)
    orders = {k: observed_orders([r[k] for r in levels]) for k in ("a", "gs", "momentum", "k0", "k1", "k2")}
    ok = all(min(v) >= 0.8 for v in orders.values()) and levels[-1]["k0_ghost"] <= 1e-8
    return {"status": "pass" if ok else "violated", "levels": levels, "orders": orders}


def suite_compare(cfg: RunConfig, run_dir: Path, perturb: float = 1e-3, T_end: float = 0.05) -> dict:
    from .verify import ComparisonAborted, comparison_run
    p = cfg.norm_params()
    grid = build_grid(cfg.grid_spec())
    datum = _datum(cfg, grid)
    wb = datum.omega0 * (1 + perturb * np.cos(2 * np.pi * grid.X))
    try:
        rec = comparison_run(grid, datum.omega0, wb, datum.U0, replace(cfg.scheme(), R=None), T_end, p, eps=0.0)
    except ComparisonAborted as e:
        rec, aborted = e.record, str(e)
    else:
        aborted = None
    with open(run_dir / "verdicts" / "comparison.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "g_tilde_l2", "dy_g_tilde_l2"])
        w.writerows(zip(rec.times, rec.g_tilde_l2, rec.dy_g_tilde_l2))
    return {"status": "pass" if rec.holds and aborted is None else "violated", "fitted_C": rec.fitted_C,
            "validation_ratio": rec.validation_ratio, "aborted": aborted}


def suite_convergence(cfg: RunConfig, run_dir: Path) -> dict:
    from .verify import eps_convergence_study, truncation_convergence_study
    p = cfg.norm_params()
    grid = build_grid(cfg.grid_spec())
    datum = _datum(cfg, grid)
    sc = replace(cfg.scheme(), R=None)
    T = min(cfg.run.T_end, 0.05)
    es = eps_convergence_study(grid, datum.omega0, datum.U0, (0.1, 0.05, 0.025), T, sc, p)
    st = make_state(grid, datum.omega0, datum.U0, cfg.model.eps, p)
    ts = truncation_convergence_study(st, (5.0, 10.0, 20.0, grid.Y), sc, T)
    pr = picard_solve(st, replace(sc, R=cfg.model.R or 10.0), 5, 0.02)
    gaps = pr.cauchy_gaps
    ratios = [b / a for a, b in zip(gaps[:-1], gaps[1:]) if a > 0]
    eps_ok = all(b < a for a, b in zip(es.diffs[:-1], es.diffs[1:])) and es.order >= 1.5
    tr_ok = all(b < a for a, b in zip(ts.diffs[:2], ts.diffs[1:3])) and ts.diffs[-1] == 0.0
    pic_ok = bool(ratios) and max(ratios) < 0.5
    return {"status": "pass" if (eps_ok and tr_ok and pic_ok) else "violated",
            "eps": {"diffs": es.diffs, "order": es.order, "ok": eps_ok},
            "truncation": {"R": [5.0, 10.0, 20.0, grid.Y], "diffs": ts.diffs, "ok": tr_ok},
            "picard": {"gaps": gaps, "max_ratio": max(ratios) if ratios else None, "ok": pic_ok}}


SUITE_FUNCS = {"inequalities": suite_inequalities, "monitors": suite_monitors, "structure": suite_structure,
               "compare": suite_compare, "convergence": suite_convergence}


def _verdict_code(v: dict) -> int:
    def bad(d):
        return isinstance(d, dict) and d.get("status") == "violated"
    return EXIT_VIOLATION if bad(v) or any(bad(x) for x in v.values()) else EXIT_OK


def run_suite(run_dir: Path, suite: str) -> int:
    cfg = _load_run(run_dir)
    (run_dir / "verdicts").mkdir(exist_ok=True)
    v = SUITE_FUNCS[suite](cfg, run_dir)
    _write_json(run_dir / "verdicts" / f"{suite}.json", v)
    return _verdict_code(v)


# ------------------------------------------------------------ argparse

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="prandtl-lab", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="run one scenario")
    r.add_argument("config", type=Path)
    r.add_argument("-o", "--out", type=Path, help="output directory (default: runs/<config stem>)")
    for name, typ in OVERRIDES.items():
        r.add_argument(f"--{name}", type=typ, dest=name, help="override the config value")

    s = sub.add_parser("sweep", help="Cartesian sweep over [sweep] axes")
    s.add_argument("config", type=Path)
    s.add_argument("-o", "--out", type=Path)

    v = sub.add_parser("verify", help="run a verification suite against a run directory")
    v.add_argument("run_dir", type=Path)
    v.add_argument("suite", choices=SUITES)

    c = sub.add_parser("compare", help="L2 comparison of a run's datum with a perturbed copy")
    c.add_argument("run_dir", type=Path)
    c.add_argument("--perturb", type=float, default=1e-3)
    c.add_argument("--T-end", type=float, default=0.05, dest="T_end")
    return ap


# flag -> (section, key)
OVERRIDE_TARGETS = {"nx": ("grid", "nx"), "ny": ("grid", "ny"), "Y": ("grid", "Y"), "dt": ("grid", "dt"),
                    "T": ("run", "T_end"), "eps": ("model", "eps"), "R": ("model", "R"), "s": ("model", "s"),
                    "gamma": ("model", "gamma"), "sigma": ("model", "sigma"), "delta": ("model", "delta"),
                    "amplitude": ("run", "amplitude"), "integrator": ("run", "integrator")}
OVERRIDES = {"nx": int, "ny": int, "Y": float, "dt": float, "T": float, "eps": float, "R": float, "s": int,
             "gamma": float, "sigma": float, "delta": float, "amplitude": float, "integrator": str}


def _apply_overrides(cfg: RunConfig, ns) -> RunConfig:
    for flag, (sec, key) in OVERRIDE_TARGETS.items():
        val = getattr(ns, flag, None)
        if val is not None:
            cfg = replace(cfg, **{sec: replace(getattr(cfg, sec), **{key: val})})
    cfg.validate()
    return cfg


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if ns.command == "run":
            cfg = _apply_overrides(load_config(ns.config), ns)
            return execute(cfg, ns.out or Path("runs") / ns.config.stem)
        if ns.command == "sweep":
            cfg = load_config(ns.config)
            if not cfg.sweep:
                raise ConfigError("config has no [sweep] section")
            return execute_sweep(cfg, ns.out or Path("runs") / f"{ns.config.stem}_sweep")
        if ns.command == "verify":
            return run_suite(ns.run_dir, ns.suite)
        if ns.command == "compare":
            cfg = _load_run(ns.run_dir)
            (ns.run_dir / "verdicts").mkdir(exist_ok=True)
            v = suite_compare(cfg, ns.run_dir, ns.perturb, ns.T_end)
            _write_json(ns.run_dir / "verdicts" / "compare.json", v)
            return _verdict_code(v)
    except ConfigError as e:
        print(f"config rejected: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
