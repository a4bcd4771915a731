"""Command-line frontend.

Subcommands::

    flod       solve a locally optimal design and print/write it as CSV
    certify    check a design file against the equivalence theorem
    round      apportion a continuous design to n observations
    curvature  print the statistical curvature of an error law
    info       print an information matrix for a (model, error, data) tuple
    adaptive   simulate one sequential experiment, emitting per-step CSV
    simulate   run the full Monte-Carlo efficiency study from a config file

Exit codes: 0 success, 1 argument/validation error, 2 numeric failure
(non-certified design, non-convergent fit). Errors are written to stderr
as one JSON object per failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from contextlib import contextmanager

import numpy as np

from . import adaptive as ad
from . import config as cfg
from . import criteria as crit
from . import design_solver as ds
from . import errors as err
from . import estimation as est
from . import information as info
from . import models as mdl
from . import sim
from .exceptions import ConfigError, NonConvergence, NotCertified, RsdesignError


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 instead of argparse's default 2
        raise _UsageError(message)


def _emit_error(kind: str, message: str) -> None:
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)


def _parse_floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(","))


def _model_from_args(args) -> mdl.ModelSpec:
    return mdl.ModelSpec(args.model, _parse_floats(args.theta), (args.xlo, args.xmax))


def _criterion_from_args(args) -> crit.Criterion:
    if args.criterion == "D":
        return crit.d_criterion()
    if args.cvec is None:
        raise _UsageError("criterion c needs --cvec")
    return crit.c_criterion(_parse_floats(args.cvec))


def _dist_from_args(args) -> err.ErrorDist:
    shape = args.shape
    if shape is None and args.dist == err.EXP_POWER:
        shape = 4.0
    if shape is None and args.dist == err.Q_GAUSSIAN:
        shape = 1.5
    return err.ErrorDist(args.dist, args.sigma, shape)


def _write_design_csv(design, out, counts=None):
    writer = csv.writer(out)
    if counts is None:
        writer.writerow(["x", "weight"])
        for x, w in zip(design.support, design.weights):
            writer.writerow([repr(float(x)), repr(float(w))])
    else:
        writer.writerow(["x", "count"])
        for x, c in zip(design.support, counts):
            writer.writerow([repr(float(x)), int(c)])


def _read_design_csv(path) -> ds.Design:
    support, weights = [], []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            support.append(float(row["x"]))
            weights.append(float(row["weight"]))
    return ds.Design(np.asarray(support), np.asarray(weights))


@contextmanager
def _open_out(path):
    if path:
        with open(path, "w", newline="") as fh:
            yield fh
    else:
        yield sys.stdout


def _add_model_args(p):
    p.add_argument("--model", required=True, choices=mdl.FAMILIES)
    p.add_argument("--theta", required=True, help="comma-separated parameter values")
    p.add_argument("--xlo", type=float, default=0.0)
    p.add_argument("--xmax", type=float, required=True)


def _add_criterion_args(p):
    p.add_argument("--criterion", default="D", choices=["D", "c"])
    p.add_argument("--cvec", default=None, help="comma-separated direction for the c criterion")


def _add_dist_args(p):
    p.add_argument("--dist", required=True, choices=err.FAMILIES)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--shape", type=float, default=None)


def build_parser() -> _Parser:
    parser = _Parser(prog="rsdesign")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("flod", help="solve a locally optimal design")
    _add_model_args(p)
    _add_criterion_args(p)
    p.add_argument("--grid", type=int, default=4001)
    p.add_argument("--out", default=None)

    p = sub.add_parser("certify", help="equivalence-theorem check of a design file")
    _add_model_args(p)
    _add_criterion_args(p)
    p.add_argument("--design", required=True, help="CSV with columns x,weight")
    p.add_argument("--grid", type=int, default=4001)
    p.add_argument("--cert-tol", type=float, default=1e-3)

    p = sub.add_parser("round", help="apportion a design to n observations")
    p.add_argument("--design", required=True, help="CSV with columns x,weight")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", default=None)

    p = sub.add_parser("curvature", help="statistical curvature of an error law")
    _add_dist_args(p)

    p = sub.add_parser("info", help="information matrix from a data file")
    _add_model_args(p)
    _add_dist_args(p)
    p.add_argument("--data", required=True, help="CSV with columns x,y")
    p.add_argument("--kind", default="J", choices=["I", "F", "M", "J", "K"])
    p.add_argument("--cluster-tol", type=float, default=est.DEFAULT_CLUSTER_TOL)
    p.add_argument("--out", default=None)

    p = sub.add_parser("adaptive", help="simulate one sequential experiment")
    p.add_argument("--seed", type=int, default=0, help="random seed of the run")
    p.add_argument("--config", required=True)
    p.add_argument("--strategy", required=True, choices=[ad.FLOD, ad.AOD, ad.RSD])
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--repeat-mode", default=None, choices=[ad.CLUSTERED, ad.NO_REPEAT])
    p.add_argument("--out", default=None)

    p = sub.add_parser("simulate", help="run the Monte-Carlo efficiency study")
    p.add_argument("--seed", type=int, default=0, help="override of the study base seed")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--plots", action="store_true")
    p.add_argument("--threads", type=int, default=None, help="worker processes")
    return parser


def _cmd_flod(args) -> int:
    model = _model_from_args(args)
    criterion = _criterion_from_args(args)
    opts = ds.SolverOptions(grid_n=args.grid)
    design = ds.flod_solve(model, criterion, opts=opts)
    with _open_out(args.out) as out:
        _write_design_csv(design, out)
    return 0


def _cmd_certify(args) -> int:
    model = _model_from_args(args)
    criterion = _criterion_from_args(args)
    design = _read_design_csv(args.design)
    cert = ds.certify(model, criterion, None, design, grid_n=args.grid, cert_tol=args.cert_tol)
    print(f"min_phi,{cert.min_phi!r}")
    print(f"argmin_x,{cert.argmin_x!r}")
    print(f"pass,{str(cert.passed).lower()}")
    if not cert.passed:
        _emit_error("NotCertified", f"min phi {cert.min_phi:.3e} at x={cert.argmin_x:.6g}")
        return 2
    return 0


def _cmd_round(args) -> int:
    design = _read_design_csv(args.design)
    exact = ds.adams_round(design, args.n)
    with _open_out(args.out) as out:
        _write_design_csv(exact, out, counts=exact.counts)
    return 0


def _cmd_curvature(args) -> int:
    dist = _dist_from_args(args)
    print(f"{err.curvature_sq(dist):.6f}")
    return 0


def _cmd_info(args) -> int:
    model = _model_from_args(args)
    dist = _dist_from_args(args)
    xs, ys = [], []
    with open(args.data, newline="") as fh:
        for row in csv.DictReader(fh):
            xs.append(float(row["x"]))
            ys.append(float(row["y"]))
    state = est.cluster(np.asarray(xs), np.asarray(ys), args.cluster_tol)
    theta = np.asarray(model.theta)
    if args.kind == "M":
        matrix = info.info_M(model, (state.representatives, state.weights)).matrix
    elif args.kind == "F":
        matrix = info.info_F(model, dist, (state.representatives, state.weights), state.n).matrix
    elif args.kind == "I":
        matrix = info.info_I_obs(model, dist, state, theta).matrix
    elif args.kind == "K":
        matrix = info.info_K(model, dist, state, theta).matrix
    else:
        matrix = info.info_J_hybrid(model, dist, state, theta).matrix
    with _open_out(args.out) as out:
        writer = csv.writer(out)
        for row in matrix:
            writer.writerow([repr(float(v)) for v in row])
    return 0


def _cmd_adaptive(args, seed: int) -> int:
    with open(args.config) as fh:
        conf = cfg.parse_config(fh.read())
    aopts = conf.adaptive
    if args.repeat_mode is not None:
        aopts.repeat_mode = args.repeat_mode
    if args.strategy == ad.FLOD:
        strategy = ad.flod_strategy()
    elif args.strategy == ad.AOD:
        strategy = ad.aod_strategy()
    else:
        strategy = ad.rsd_strategy(aopts.repeat_mode, aopts.negative_handling)
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0, args.n)))
    run = ad.run_experiment(
        conf.model, conf.dist, conf.criterion, strategy, conf.model.theta, args.n, rng,
        obs_per_point=aopts.obs_per_point, grid_n=aopts.grid_n,
        polish_iters=aopts.polish_iters, solver_opts=conf.solver,
    )
    if run.dropped is not None:
        _emit_error("ReplicateDropped", run.dropped)
        return 2
    with _open_out(args.out) as out:
        writer = csv.writer(out)
        writer.writerow(["j", "x", "y", *(f"theta{i+1}" for i in range(conf.model.p)), "Q", "min_phi"])
        m1 = run.init_design.n
        for j in range(1, run.state.n + 1):
            x, y = run.state.points[j - 1], run.state.responses[j - 1]
            if j <= m1:  # initial block: only the post-initialization fit exists
                theta_j, q, phi = run.theta_path[0], "", ""
            else:
                k = j - m1 - 1
                theta_j = run.theta_path[k + 1]
                q = "" if np.isnan(run.q_path[k]) else repr(float(run.q_path[k]))
                phi = repr(float(run.min_phi_path[k]))
            writer.writerow([
                j, repr(float(x)), repr(float(y)),
                *(repr(float(t)) for t in np.ravel(theta_j)), q, phi,
            ])
    return 0


def _cmd_simulate(args, seed: int) -> int:
    import pathlib

    with open(args.config) as fh:
        conf = cfg.parse_config(fh.read())
    if not conf.study.n_grid:
        raise ConfigError(["study.n_grid: required for simulate"])
    strategies = []
    for kind in conf.study.strategies:
        if kind == ad.FLOD:
            strategies.append(ad.flod_strategy())
        elif kind == ad.AOD:
            strategies.append(ad.aod_strategy())
        else:
            strategies.append(ad.rsd_strategy(
                conf.adaptive.repeat_mode, conf.adaptive.negative_handling
            ))
    study = sim.SimConfig(
        model=conf.model, dist=conf.dist, criterion=conf.criterion,
        n_grid=conf.study.n_grid, replicates=conf.study.replicates,
        base_seed=conf.study.base_seed if seed == 0 else seed,
        strategies=strategies,
        analysis_cluster_frac=conf.study.analysis_cluster_frac,
        obs_per_point=conf.adaptive.obs_per_point,
        grid_n=conf.adaptive.grid_n, polish_iters=conf.adaptive.polish_iters,
        workers=args.threads if args.threads else conf.study.workers,
    )
    report = sim.run_study(study)
    out_dir = pathlib.Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    sim.write_csv(report, out_dir / "efficiency.csv")
    if args.plots:
        sim.write_plots(report, out_dir)
    print(f"wrote {out_dir / 'efficiency.csv'}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise _UsageError("a subcommand is required")
        if args.command == "flod":
            return _cmd_flod(args)
        if args.command == "certify":
            return _cmd_certify(args)
        if args.command == "round":
            return _cmd_round(args)
        if args.command == "curvature":
            return _cmd_curvature(args)
        if args.command == "info":
            return _cmd_info(args)
        if args.command == "adaptive":
            return _cmd_adaptive(args, args.seed)
        return _cmd_simulate(args, args.seed)
    except _UsageError as e:
        _emit_error("UsageError", str(e))
        parser.print_usage(sys.stderr)
        return 1
    except ConfigError as e:
        for problem in e.errors:
            _emit_error("ValidationError", problem)
        return 1
    except (ValueError, OSError) as e:
        _emit_error("ValidationError", str(e))
        return 1
    except (NotCertified, NonConvergence) as e:
        _emit_error(type(e).__name__, str(e))
        return 2
    except RsdesignError as e:
        _emit_error(type(e).__name__, str(e))
        return 2


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
