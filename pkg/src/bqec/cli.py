"""Command-line front end.  Every run writes CSV results and a JSON manifest
to ``--out`` and prints a short human summary.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import lattice, surface
from .capacity import (
    ChannelParams,
    _split_objective,
    gkp_achievable_rate,
    lower_bound_correlated,
    lower_bound_thermal_input,
    q_dp,
    q_idp,
    q_odp,
)
from .noise import DomainError, NoiseParams, p_err, p_err_asymptotic
from .oscillator import (
    check_triorthogonal,
    distillation_output_variance,
    load_matrix,
    max_qec_gain,
    squeezing_db,
    tms_asymptotic_optimum,
    tms_optimize_gain,
)
from .surface import fmt

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

FIGURES = ("2.8", "4.6", "4.7", "5.1", "5.2", "5.3", "7.2", "7.5")


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def parse_grid(text: str) -> list:
    """``a:b:step`` (inclusive), a comma list, or a single number."""
    try:
        if ":" in text:
            a, b, step = (float(t) for t in text.split(":"))
            if step <= 0 or b < a:
                raise ConfigError(f"bad grid '{text}'")
            count = int(round((b - a) / step)) + 1
            return [round(a + i * step, 12) for i in range(count)]
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad grid '{text}'") from exc


def parse_ints(text: str) -> list:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad integer list '{text}'") from exc


def write_csv(path: Path, header: list, rows: list) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        for row in rows:
            wr.writerow([fmt(v) for v in row])


def human(x) -> str:
    return format(float(x), ".4g")


# ------------------------------------------------------------ commands


def cmd_surface_sim(args, out: Path) -> dict:
    cfg = surface.read_config(args.config) if args.config else {}
    d = args.d if args.d is not None else cfg.get("distance", 3)
    sigma = args.sigma if args.sigma is not None else cfg.get("sigma", 0.0)
    sigma_gkp = args.sigma_gkp if args.sigma_gkp is not None else cfg.get("sigma_gkp", 0.0)
    analog = cfg.get("use_analog_info", True) and not args.no_analog
    trials = args.trials if args.trials is not None else cfg.get("trials", 1000)
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    config = surface.SurfaceGkpConfig(d, NoiseParams(sigma, sigma_gkp), analog, args.rounds, seed)
    res = surface.monte_carlo(config, trials, engine=args.engine)
    surface.write_rates_csv([res], out / "rates.csv", include_seconds=False)
    print(f"d={d} sigma={human(sigma)} sigma_gkp={human(sigma_gkp)} analog={analog} trials={trials}: "
          f"P_X={human(res.p_x)} P_Z={human(res.p_z)} P_Y={human(res.p_y)}")
    return {"d": d, "sigma": sigma, "sigma_gkp": sigma_gkp, "use_analog_info": analog,
            "trials": trials, "rounds": config.noisy_rounds, "engine": args.engine, "seed": seed}


def run_threshold(case, d_list, grid, trials, seed, analog, out: Path, name="threshold"):
    res = surface.threshold_scan(case, d_list, grid, trials, seed, analog)
    surface.write_rates_csv(res.results, out / f"{name}_rates.csv", include_seconds=False)
    rows = [[d1, d2, c if c is not None else math.nan] for (d1, d2), c in res.pair_crossings.items()]
    write_csv(out / f"{name}_crossings.csv", ["d_small", "d_large", "crossing"], rows)
    for (d1, d2), c in res.pair_crossings.items():
        print(f"case {case} crossing d={d1},{d2}: " + ("none" if c is None else human(c)))
    if res.found:
        print(f"case {case} threshold estimate {human(res.crossing)} (spread {human(res.spread)})")
    else:
        print(f"case {case}: no crossing found in the scanned grid")
    return res


def cmd_threshold(args, out: Path) -> dict:
    d_list = parse_ints(args.d)
    grid = parse_grid(args.grid)
    run_threshold(args.case, d_list, grid, args.trials, args.seed, not args.no_analog, out)
    return {"case": args.case, "d": d_list, "grid": grid, "trials": args.trials,
            "use_analog_info": not args.no_analog, "seed": args.seed}


def _code_from_arg(name: str, dim: int):
    if name == "square":
        return lattice.make_square_code(dim)
    if name == "hex":
        return lattice.make_hex_code(dim)
    return lattice.load_code(name)


def cmd_gkp_single(args, out: Path) -> dict:
    code = _code_from_arg(args.code, args.dim)
    radius = lattice.correctable_radius(code)
    sigmas = parse_grid(args.sigma)
    rows = []
    for s in sigmas:
        row = [s, lattice.failure_bound(code, s)]
        if args.code == "square" and args.dim == 2:
            row += [lattice.square_failure_probability(s), lattice.square_failure_probability(s, exact=False)]
        rows.append(row)
    header = ["sigma", "failure_bound"]
    if args.code == "square" and args.dim == 2:
        header += ["p_fail_exact", "p_fail_asymptotic"]
    write_csv(out / "gkp_single.csv", header, rows)
    print(f"code {args.code}: logical dims {code.logical_dims}, correctable radius {human(radius)}")
    if args.gamma is not None:
        print(f"loss bound at gamma={human(args.gamma)}: {human(lattice.loss_error_bound(code, args.gamma))}")
    return {"code": args.code, "dim": args.dim, "sigma": sigmas, "gamma": args.gamma}


CAPACITY_COLUMNS = ["eta", "gamma", "n_th", "n_bar", "g_dp", "q_idp", "q_odp", "lb_thermal",
                    "lb_correlated", "x_star", "gkp_rate"]


def capacity_row(eta: float, n_th: float, n_bar: float) -> list:
    p = ChannelParams(eta, n_th, n_bar)
    if p.constrained:
        lbc, xs = lower_bound_correlated(p)
    else:
        lbc, xs = math.nan, math.nan
    return [eta, 1 - eta, n_th, n_bar, q_dp(p), q_idp(p), q_odp(p), lower_bound_thermal_input(p),
            lbc, xs, gkp_achievable_rate(p)]


def cmd_capacity(args, out: Path) -> dict:
    etas = parse_grid(args.eta)
    n_bar = math.inf if args.n_bar.lower() in ("inf", "infinity") else float(args.n_bar)
    rows = [capacity_row(e, args.n_th, n_bar) for e in etas]
    write_csv(out / "capacity.csv", CAPACITY_COLUMNS, rows)
    for r in rows:
        print("eta={}: DP={} IDP={} ODP={} thermal={} correlated={} GKP={}".format(
            *(human(v) for v in (r[0], r[4], r[5], r[6], max(r[7], 0.0), r[8], r[10]))))
    return {"eta": etas, "n_th": args.n_th, "n_bar": n_bar}


TMS_COLUMNS = ["sigma", "sigma_gkp_db", "g_star", "squeezing_db", "sigma_l_star", "qec_gain"]


def tms_row(sigma: float, db: float) -> list:
    sg = 0.0 if math.isinf(db) else NoiseParams.sigma_gkp_from_db(db)
    g, sl = tms_optimize_gain(sigma, sg)
    return [sigma, db, g, squeezing_db(g), sl, sigma**2 / sl**2]


def cmd_tms(args, out: Path) -> dict:
    sigmas = parse_grid(args.sigma)
    db = math.inf if args.gkp_db is None else args.gkp_db
    rows = [tms_row(s, db) for s in sigmas]
    write_csv(out / "tms.csv", TMS_COLUMNS, rows)
    for r in rows:
        print(f"sigma={human(r[0])}: G*={human(r[2])} ({human(r[3])} dB) sigma_L*={human(r[4])} gain={human(r[5])}")
    return {"sigma": sigmas, "sigma_gkp_db": db}


def cmd_distill(args, out: Path) -> dict:
    A = load_matrix(args.matrix)
    n, m = A.shape
    report = check_triorthogonal(A, args.k)
    rows = []
    if report.valid:
        sig2, coeffs = distillation_output_variance(A, 1.0)
        print(f"triorthogonal ({n},{m},{args.k}); Sigma^2/sigma^2 = {human(sig2)}")
        rows.append([n, m, args.k, 1, sig2])
    else:
        print(f"({n},{m},{args.k}) {report.describe()}")
        rows.append([n, m, args.k, 0, math.nan])
    write_csv(out / "distill.csv", ["n", "m", "k", "triorthogonal", "output_variance_ratio"], rows)
    return {"matrix": str(args.matrix), "k": args.k}


def reproduce(figure: str, out: Path, trials: int, seed: int) -> list:
    """Write the data series behind one figure; returns the files written."""
    written = []

    def emit(name, header, rows):
        path = out / name
        write_csv(path, header, rows)
        written.append(path)

    if figure == "2.8":
        grid = np.linspace(0.05, 0.6, 56)
        emit("fig2_8.csv", ["sigma", "p_fail_exact", "p_fail_asymptotic"],
             [[s, lattice.square_failure_probability(s), lattice.square_failure_probability(s, exact=False)]
              for s in grid])
    elif figure == "4.6":
        specs = (("I", np.arange(0.16, 0.2201, 0.005)), ("II", np.arange(0.07, 0.1101, 0.005)),
                 ("III", np.arange(0.065, 0.1001, 0.005)))
        for case, grid in specs:
            run_threshold(case, [3, 5, 7], [round(float(x), 12) for x in grid], trials, seed, True, out,
                          name=f"fig4_6_case{case}")
            written += [out / f"fig4_6_case{case}_rates.csv", out / f"fig4_6_case{case}_crossings.csv"]
    elif figure == "4.7":
        grid = np.linspace(0.05, 1.0, 96)
        emit("fig4_7.csv", ["sigma", "p_err", "p_asy"], [[s, p_err(s), p_err_asymptotic(s)] for s in grid])
    elif figure == "5.1":
        rows = []
        for n_bar in (1.0, 10.0):
            for eta in np.linspace(0.5, 1.0, 101)[:-1]:
                p = ChannelParams(float(eta), 1.0, n_bar)
                rows.append([eta, n_bar, max(lower_bound_thermal_input(p), 0.0), q_dp(p), q_idp(p), q_odp(p)])
        emit("fig5_1.csv", ["eta", "n_bar", "lb_thermal", "q_dp", "q_idp", "q_odp"], rows)
    elif figure == "5.2":
        rows = []
        for gamma in np.linspace(0.0, 0.35, 71)[1:]:
            p = ChannelParams(1 - float(gamma), 1.0, 1.0)
            lbc, xs = lower_bound_correlated(p)
            rows.append([gamma, max(lower_bound_thermal_input(p), 0.0), lbc, xs, q_odp(p)])
        emit("fig5_2.csv", ["gamma", "lb_thermal", "lb_correlated", "x_star", "q_odp"], rows)
    elif figure == "5.3":
        rows = []
        for n_bar in np.linspace(0.05, 6.0, 120):
            p = ChannelParams(0.81, 1.0, float(n_bar))
            rows.append([n_bar, max(lower_bound_thermal_input(p), 0.0), lower_bound_correlated(p)[0]])
        emit("fig5_3.csv", ["n_bar", "lb_thermal", "lb_correlated"], rows)
    elif figure == "7.2":
        rows = []
        for s in np.geomspace(0.01, 0.7, 60):
            g, sl = tms_optimize_gain(float(s))
            ga, sla = tms_asymptotic_optimum(float(s))
            rows.append([s, g, squeezing_db(g), sl, ga, sla])
        emit("fig7_2.csv", ["sigma", "g_star", "squeezing_db", "sigma_l_star", "g_asymptotic",
                            "sigma_l_asymptotic"], rows)
    elif figure == "7.5":
        rows = []
        for db in (12.8, 15.0, 20.0, 25.0, 30.0):
            for s in np.linspace(0.02, 0.6, 59):
                rows.append(tms_row(float(s), db))
        emit("fig7_5.csv", TMS_COLUMNS, rows)
    else:
        raise ConfigError(f"unsupported figure '{figure}' (supported: {', '.join(FIGURES)})")
    return written


def cmd_reproduce(args, out: Path) -> dict:
    files = reproduce(args.figure, out, args.trials, args.seed)
    for f in files:
        print(f"wrote {f}")
    return {"figure": args.figure, "trials": args.trials, "seed": args.seed}


# --------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="bqec", description="GKP bosonic error-correction toolkit")
    p.add_argument("--out", default="bqec-out", help="output directory")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("surface-sim", help="Monte Carlo of one surface-GKP configuration")
    s.add_argument("--config", help="key = value file (distance, sigma, sigma_gkp, use_analog_info, trials, seed)")
    s.add_argument("--d", type=int)
    s.add_argument("--sigma", type=float)
    s.add_argument("--sigma-gkp", type=float)
    s.add_argument("--rounds", type=int, help="noisy rounds (default d)")
    s.add_argument("--trials", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--no-analog", action="store_true")
    s.add_argument("--engine", choices=("pymatching", "blossom"), default="pymatching")
    s.set_defaults(func=cmd_surface_sim)

    t = sub.add_parser("threshold", help="threshold scan over a noise grid")
    t.add_argument("--case", choices=tuple(surface.CASES), required=True)
    t.add_argument("--d", default="3,5,7")
    t.add_argument("--grid", required=True, help="a:b:step or comma list")
    t.add_argument("--trials", type=int, default=20000)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--no-analog", action="store_true")
    t.set_defaults(func=cmd_threshold)

    g = sub.add_parser("gkp-single", help="single-mode or small multi-mode GKP code figures of merit")
    g.add_argument("--code", default="square", help="square, hex or a file with the rows of S")
    g.add_argument("--dim", type=int, default=2)
    g.add_argument("--sigma", default="0.1:0.5:0.05")
    g.add_argument("--gamma", type=float)
    g.set_defaults(func=cmd_gkp_single)

    c = sub.add_parser("capacity", help="capacity bounds of a thermal-loss channel")
    c.add_argument("--eta", required=True, help="value, list or a:b:step")
    c.add_argument("--n-th", type=float, default=0.0)
    c.add_argument("--n-bar", default="inf")
    c.set_defaults(func=cmd_capacity)

    m = sub.add_parser("tms", help="two-mode-squeezing GKP code gain optimization")
    m.add_argument("--sigma", default="0.05:0.6:0.05")
    m.add_argument("--gkp-db", type=float, help="GKP squeezing in dB (ideal if omitted)")
    m.set_defaults(func=cmd_tms)

    dd = sub.add_parser("distill", help="check a triorthogonal matrix and its output variance")
    dd.add_argument("--matrix", required=True)
    dd.add_argument("--k", type=int, default=1)
    dd.set_defaults(func=cmd_distill)

    r = sub.add_parser("reproduce", help="data series behind a figure")
    r.add_argument("figure")
    r.add_argument("--trials", type=int, default=20000)
    r.add_argument("--seed", type=int, default=0)
    r.set_defaults(func=cmd_reproduce)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        surface.worker_count()
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        t0 = time.perf_counter()
        echo = args.func(args, out)
        seed = echo.get("seed", 0) if isinstance(echo, dict) else 0
        surface.write_manifest(out / "manifest.json", args.command, echo, seed, time.perf_counter() - t0)
        return EXIT_OK
    except (ConfigError, DomainError, lattice.UnsupportedError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, np.linalg.LinAlgError, AssertionError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def main() -> None:
    sys.exit(run())
