"""Command-line front end: simulate, fit, predict, select, bench."""

from __future__ import annotations

import argparse
import csv
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import model_selection, simulate
from .errors import InputError, ParameterError, QknnError
from .graph import Dataset, build_knn_graph, predict, save_edge_list
from .io import load_csv, load_vector_csv, save_vector_csv
from .objective import mse
from .solvers import FitConfig, fit_admm, fit_l2_baseline, fit_mm

DEFAULT_K = 5
DEFAULT_GRID = "0.1:20:8:log"


def parse_grid(spec: str) -> np.ndarray:
    """Parse 'min:max:count:log' or 'min:max:count:lin' into a lambda grid."""
    parts = spec.split(":")
    if len(parts) != 4 or parts[3] not in ("log", "lin"):
        raise ParameterError(f"bad grid spec {spec!r}, expected min:max:count:log|lin")
    try:
        lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ParameterError(f"bad grid spec {spec!r}: non-numeric field") from None
    if not (0 <= lo <= hi) or count < 1:
        raise ParameterError(f"bad grid spec {spec!r}: need 0 <= min <= max, count >= 1")
    if count == 1:
        return np.array([lo])
    if parts[3] == "log":
        if lo <= 0:
            raise ParameterError("log grid needs min > 0")
        return np.geomspace(lo, hi, count)
    return np.linspace(lo, hi, count)


def read_config_file(path) -> dict:
    """Flat 'key = value' manifest; '#' starts a comment."""
    out = {}
    try:
        with open(path) as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise InputError(f"{path}:{lineno}: expected 'key = value'")
                key, val = (s.strip() for s in line.split("=", 1))
                out[key.replace("-", "_")] = val
    except FileNotFoundError:
        raise InputError(f"{path}: no such file") from None
    return out


def _fit_one(data, G, solver, cfg):
    if solver == "admm":
        return fit_admm(data, G, cfg)
    if solver == "mm":
        return fit_mm(data, G, cfg)
    if solver == "l2":
        return fit_l2_baseline(data, G, cfg.lam, tol=cfg.tol, max_iter=cfg.max_iter)
    raise ParameterError(f"unknown solver {solver!r}")


def cmd_simulate(args):
    sample = simulate.gen_scenario(
        args.scenario, args.n, args.tau, args.error, args.seed
    )
    simulate.save_sample_csv(sample, args.out)
    print(f"wrote {args.out} (n={args.n}, scenario={args.scenario})")


def cmd_fit(args):
    data = load_csv(args.data)
    G = build_knn_graph(data.X, args.k)
    cfg = FitConfig(tau=args.tau, lam=args.lam, tol=args.tol, seed=args.seed)
    res = _fit_one(data, G, args.solver, cfg)
    save_vector_csv(res.theta, args.out)
    if args.dump_graph:
        save_edge_list(G, args.dump_graph)
    status = "converged" if res.converged else "NOT converged"
    print(
        f"wrote {args.out} ({status} in {res.iterations} iterations, "
        f"objective {res.objective_trace[-1]:.6g})"
    )


def cmd_predict(args):
    train = load_csv(args.train)
    theta = load_vector_csv(args.theta)
    query = load_csv(args.query) if args.query else train
    pred = predict(train.X, theta, query.X, args.k)
    save_vector_csv(pred, args.out, name="prediction")
    print(f"wrote {args.out} ({pred.size} predictions)")


def cmd_select(args):
    data = load_csv(args.data)
    G = build_knn_graph(data.X, args.k)
    grid = parse_grid(args.grid)
    report = model_selection.select_lambda(
        data,
        G,
        args.tau,
        grid,
        criterion_id=args.criterion,
        solver_id=args.solver,
        kappa=args.kappa,
        seed=args.seed,
        base_cfg=FitConfig(tau=args.tau, tol=args.tol, seed=args.seed),
    )
    report.save_csv(args.out)
    print(f"wrote {args.out} (chosen lambda = {report.chosen_lam:.6g})")


def _bench_replicate(scenario, n, error, tau, solver, k, grid, lam, seed, tol):
    sample = simulate.gen_scenario(scenario, n, tau, error, seed)
    data = Dataset(sample.X, sample.y)
    G = build_knn_graph(data.X, k)
    base_cfg = FitConfig(tau=tau, tol=tol, seed=seed)
    if lam is None:
        report = model_selection.select_lambda(
            data, G, tau, grid, criterion_id="bic", solver_id=solver,
            seed=seed, base_cfg=base_cfg,
        )
        chosen = report.chosen_lam
    else:
        chosen = lam
    cfg = FitConfig(tau=tau, lam=chosen, tol=tol, seed=seed)
    t0 = time.perf_counter()
    res = _fit_one(data, G, solver, cfg)
    elapsed = time.perf_counter() - t0
    return mse(res.theta, sample.theta_star), elapsed


def run_bench(args):
    """Monte Carlo table: mean/se of MSE and mean fit time per cell."""
    scenarios = [int(s) for s in args.scenarios.split(",")]
    sizes = [int(s) for s in args.sizes.split(",")]
    errors = args.errors.split(",")
    taus = [float(t) for t in args.taus.split(",")]
    solvers = args.solvers.split(",")
    grid = parse_grid(args.grid)
    cells = [
        (sc, n, err, tau, sol)
        for sc in scenarios
        for n in sizes
        for err in errors
        for tau in taus
        for sol in solvers
    ]

    def run_cell(cell):
        sc, n, err, tau, sol = cell
        mses, times = [], []
        failures = 0
        for rep in range(args.replicates):
            try:
                m, t = _bench_replicate(
                    sc, n, err, tau, sol, args.k, grid, args.lam,
                    args.seed + rep, args.tol,
                )
                mses.append(m)
                times.append(t)
            except QknnError as exc:
                failures += 1
                print(f"warning: cell {cell} replicate {rep} failed: {exc}",
                      file=sys.stderr)
        return mses, times, failures

    with ThreadPoolExecutor(max_workers=args.threads) as pool:
        results = list(pool.map(run_cell, cells))

    rows = []
    for cell, (mses, times, failures) in zip(cells, results):
        sc, n, err, tau, sol = cell
        if mses:
            arr = np.array(mses)
            se = arr.std(ddof=1) / np.sqrt(arr.size) if arr.size > 1 else 0.0
            rows.append(
                [sc, n, err, f"{tau:.6g}", sol, f"{arr.mean():.6g}",
                 f"{se:.6g}", f"{np.mean(times):.6g}",
                 len(mses), args.seed]
            )
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["scenario", "n", "error", "tau", "solver",
             "mse_mean", "mse_se", "time_mean_s", "replicates", "seed"]
        )
        writer.writerows(rows)
    if args.timing_out:
        with open(args.timing_out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["n", "solver", "time_mean_s"])
            for row in rows:
                writer.writerow([row[1], row[4], row[7]])
    print(f"wrote {args.out} ({len(rows)} cells)")
    return rows


def _add_common(p):
    p.add_argument("--tau", type=float, default=0.5)
    p.add_argument("--k", type=int, default=DEFAULT_K)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", default=None, help="flat key = value manifest")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qknn",
        description="Quantile regression with a fused-lasso penalty on a K-NN graph",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a benchmark scenario sample")
    p.add_argument("--scenario", type=int, required=True, choices=simulate.SCENARIOS)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--error", default="gaussian")
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit the penalized estimator")
    p.add_argument("--data", required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--solver", default="admm", choices=["admm", "mm", "l2"])
    p.add_argument("--out", required=True)
    p.add_argument("--dump-graph", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="K-NN prediction from a fitted vector")
    p.add_argument("--train", required=True)
    p.add_argument("--theta", required=True)
    p.add_argument("--query", default=None)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("select", help="choose lambda by BIC, SIC, or CV")
    p.add_argument("--data", required=True)
    p.add_argument("--criterion", default="bic", choices=["bic", "sic", "cv"])
    p.add_argument("--solver", default="admm", choices=["admm", "mm", "l2"])
    p.add_argument("--kappa", type=float, default=0.01)
    p.add_argument("--grid", default=DEFAULT_GRID, help="min:max:count:log|lin")
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("bench", help="Monte Carlo accuracy/timing tables")
    p.add_argument("--scenarios", default="1")
    p.add_argument("--sizes", default="500")
    p.add_argument("--errors", default="gaussian")
    p.add_argument("--taus", default="0.5")
    p.add_argument("--solvers", default="admm")
    p.add_argument("--lambda", dest="lam", type=float, default=None,
                   help="fixed lambda; default selects per replicate by BIC")
    p.add_argument("--grid", default=DEFAULT_GRID)
    p.add_argument("--replicates", type=int, default=1)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", required=True)
    p.add_argument("--timing-out", default=None)
    _add_common(p)
    p.set_defaults(func=run_bench)

    return parser


def _apply_config(parser_args, argv):
    """Re-parse with config-file values as defaults; explicit flags win."""
    cfg = read_config_file(parser_args.config)
    parser = build_parser()
    for action in parser._subparsers._group_actions[0].choices[
        parser_args.command
    ]._actions:
        # accept either the argparse dest or the long flag name as a key
        keys = [action.dest] + [
            s.lstrip("-").replace("-", "_") for s in action.option_strings
        ]
        for key in keys:
            if key in cfg:
                action.default = _convert(cfg[key], action)
                break
    return parser.parse_args(argv)


def _convert(raw, action):
    if action.type is not None:
        return action.type(raw)
    return raw


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "config", None):
            args = _apply_config(args, argv)
        args.func(args)
    except QknnError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
