"""Monte-Carlo study comparing the adaptive strategies against the fixed
locally optimal benchmark.

For each total sample size n and each strategy, seeded replicates are
simulated (strategies share the error stream per replicate so comparisons
are paired) and three relative efficiencies against the fixed benchmark are
computed, each defined so that values above one favor the strategy:

* RM:    psi of the benchmark design's normalized information over psi of
         the run's realized design, both at theta_true (design geometry).
* RJ:    ratio of Monte-Carlo means of psi at the hybrid information of the
         accumulated data, each evaluated at the run's own MLE (inference).
* RMSE:  psi at the inverse mean-squared-error matrix of the benchmark over
         the strategy's (estimation accuracy).

Results are reported with Monte-Carlo standard errors and per-cell drop
counts, and written as one CSV row per (n, strategy, metric).
"""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import adaptive as ad
from . import criteria as crit
from . import design_solver as ds
from . import errors as err
from . import estimation as est
from . import information as info
from . import models as mdl
from .exceptions import SingularInfo

METRICS = ("RM", "RJ", "RMSE")


@dataclass
class SimConfig:
    model: mdl.ModelSpec
    dist: err.ErrorDist
    criterion: crit.Criterion
    n_grid: list[int]
    replicates: int = 500
    base_seed: int = 20240901
    strategies: list[ad.Strategy] = field(
        default_factory=lambda: [ad.flod_strategy(), ad.aod_strategy(), ad.rsd_strategy()]
    )
    theta_true: tuple[float, ...] | None = None  # defaults to model.theta
    # fraction of the design-space width within which observations of one
    # run are grouped into repeat clusters for the inference metric
    analysis_cluster_frac: float = 5e-3
    obs_per_point: int = ad.OBS_PER_INITIAL_POINT
    grid_n: int = 2001
    polish_iters: int = 16
    workers: int = 1
    _flod_design: ds.Design | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if self.theta_true is None:
            self.theta_true = self.model.theta
        init = ad.default_initial_design(self.model, self.criterion)
        m1 = init.d * self.obs_per_point
        for n in self.n_grid:
            if n < m1 + self.model.p:
                raise ValueError(
                    f"n={n} is below the initial design size {m1} plus p={self.model.p}"
                )


@dataclass(frozen=True)
class ReportRow:
    model: str
    dist: str
    criterion: str
    n: int
    strategy: str
    metric: str
    value: float
    mc_se: float
    drops: int


@dataclass
class EfficiencyReport:
    rows: list[ReportRow] = field(default_factory=list)

    def value(self, n: int, strategy: str, metric: str) -> float:
        for r in self.rows:
            if r.n == n and r.strategy == strategy and r.metric == metric:
                return r.value
        raise KeyError((n, strategy, metric))

    def mc_se(self, n: int, strategy: str, metric: str) -> float:
        for r in self.rows:
            if r.n == n and r.strategy == strategy and r.metric == metric:
                return r.mc_se
        raise KeyError((n, strategy, metric))


def efficiency_rm(criterion, model, theta_true, design_star, design) -> float:
    """psi at the benchmark design over psi at the realized design."""
    psi_star = crit.psi(criterion, info.info_M(model, design_star, theta_true))
    psi_run = crit.psi(criterion, info.info_M(model, design, theta_true))
    return psi_star / psi_run


def _run_design(run: ad.AdaptiveRun) -> tuple[np.ndarray, np.ndarray]:
    """Empirical design of a run (unit mass per observation)."""
    xs = np.asarray(run.state.points)
    support, counts = np.unique(xs, return_counts=True)
    return support, counts / counts.sum()


def _psi_hybrid(run: ad.AdaptiveRun, analysis_tol: float) -> float:
    """psi of the hybrid information of a run at its own MLE, with the run's
    observations re-clustered at the analysis tolerance."""
    state = est.cluster(run.state.points, run.state.responses, analysis_tol)
    fits = est.fit_clusters(run.dist, state, warn_multimodal=False)
    j = info.info_J_hybrid(run.model, run.dist, state, run.theta_hat, fits)
    return crit.psi(run.criterion, j)


def efficiency_rj(criterion, runs_star, runs, analysis_tol: float):
    """Ratio of Monte-Carlo means of psi at the hybrid information.

    Dropped replicates and replicates with singular hybrid information are
    excluded from their own side's mean and counted.
    (value, mc_se, n_excluded_star, n_excluded) is returned.
    """
    def side(rs):
        vals, excluded = [], 0
        for r in rs:
            if r.dropped is not None or r.theta_hat is None:
                excluded += 1
                continue
            try:
                vals.append(_psi_hybrid(r, analysis_tol))
            except SingularInfo:
                excluded += 1
        return np.asarray(vals), excluded

    star, exc_star = side(runs_star)
    if runs is runs_star:
        return (1.0, 0.0, exc_star, exc_star) if star.size else (np.nan, np.nan, exc_star, exc_star)
    own, exc = side(runs)
    if star.size == 0 or own.size == 0:
        return np.nan, np.nan, exc_star, exc
    ratio = star.mean() / own.mean()
    rel_var = 0.0
    if star.size > 1:
        rel_var += star.var(ddof=1) / star.size / star.mean() ** 2
    if own.size > 1:
        rel_var += own.var(ddof=1) / own.size / own.mean() ** 2
    return float(ratio), float(abs(ratio) * np.sqrt(rel_var)), exc_star, exc


def _mse_matrix(deviations: np.ndarray) -> np.ndarray:
    return deviations.T @ deviations / deviations.shape[0]


def efficiency_rmse(criterion, runs_star, runs, theta_true):
    """psi at the inverse MSE of the benchmark over psi at the strategy's.

    Returns (value, jackknife_se). SingularInfo from a zero MSE propagates.
    """
    theta_true = np.asarray(theta_true, dtype=float)
    if runs is runs_star:
        return 1.0, 0.0  # a strategy against itself is an identity
    dev_star = np.array([r.theta_hat - theta_true for r in runs_star
                         if r.dropped is None and r.theta_hat is not None])
    dev = np.array([r.theta_hat - theta_true for r in runs
                    if r.dropped is None and r.theta_hat is not None])
    if dev_star.size == 0 or dev.size == 0:
        return np.nan, np.nan

    def value(ds_, d_):
        try:
            num = crit.psi(criterion, np.linalg.inv(_mse_matrix(ds_)))
            den = crit.psi(criterion, np.linalg.inv(_mse_matrix(d_)))
        except np.linalg.LinAlgError as e:
            raise SingularInfo(f"MSE matrix is singular: {e}") from e
        return num / den

    v = value(dev_star, dev)
    r = min(dev_star.shape[0], dev.shape[0])
    if r < 2:
        return float(v), np.nan
    # paired leave-one-out over the common replicate index range
    loo = np.empty(r)
    for i in range(r):
        loo[i] = value(np.delete(dev_star[:r], i, axis=0), np.delete(dev[:r], i, axis=0))
    se = np.sqrt((r - 1) / r * np.sum((loo - loo.mean()) ** 2))
    return float(v), float(se)


def _replicate_seed(base_seed: int, rep: int, n: int) -> np.random.SeedSequence:
    # strategies share the error stream per (replicate, n) so they are paired
    return np.random.SeedSequence((base_seed, rep, n))


def _simulate_cell(args):
    """All strategy runs of one replicate at one n (worker task)."""
    config, n, rep = args
    out = {}
    for strat in config.strategies:
        rng = np.random.default_rng(_replicate_seed(config.base_seed, rep, n))
        out[strat.kind] = ad.run_experiment(
            config.model, config.dist, config.criterion, strat,
            config.theta_true, n, rng,
            obs_per_point=config.obs_per_point,
            grid_n=config.grid_n, polish_iters=config.polish_iters,
            flod_design=config._flod_design if strat.kind == ad.FLOD else None,
        )
    return out


def run_study(config: SimConfig) -> EfficiencyReport:
    """Run the full paired study and aggregate the three efficiencies."""
    kinds = [s.kind for s in config.strategies]
    if len(set(kinds)) != len(kinds):
        raise ValueError("duplicate strategy kinds in config")
    needs_flod = ad.FLOD in kinds
    if not needs_flod:
        raise ValueError("the study needs the benchmark strategy for the ratios")
    config._flod_design = ds.flod_solve(config.model, config.criterion, config.theta_true)

    lo, hi = config.model.design_space
    analysis_tol = config.analysis_cluster_frac * (hi - lo)
    report = EfficiencyReport()
    for n in config.n_grid:
        tasks = [(config, n, rep) for rep in range(config.replicates)]
        if config.workers > 1:
            with ProcessPoolExecutor(max_workers=config.workers) as pool:
                cells = list(pool.map(_simulate_cell, tasks, chunksize=8))
        else:
            cells = [_simulate_cell(t) for t in tasks]
        runs = {k: [c[k] for c in cells] for k in kinds}
        star = runs[ad.FLOD]
        star_design = ds.design_from_exact(star[0].init_design)
        for kind in kinds:
            own = runs[kind]
            drops = sum(1 for r in own if r.dropped is not None)
            rm_vals = np.array([
                efficiency_rm(config.criterion, config.model, config.theta_true,
                              star_design, _run_design(r))
                for r in own if r.dropped is None
            ])
            rm = float(rm_vals.mean()) if rm_vals.size else np.nan
            rm_se = (
                float(rm_vals.std(ddof=1) / np.sqrt(rm_vals.size))
                if rm_vals.size > 1 else 0.0
            )
            rj, rj_se, _, _ = efficiency_rj(config.criterion, star, own, analysis_tol)
            try:
                rmse, rmse_se = efficiency_rmse(config.criterion, star, own, config.theta_true)
            except SingularInfo:
                rmse, rmse_se = np.nan, np.nan
            meta = (config.model.family, config.dist.family, config.criterion.kind)
            report.rows.append(ReportRow(*meta, n, kind, "RM", rm, rm_se, drops))
            report.rows.append(ReportRow(*meta, n, kind, "RJ", rj, rj_se, drops))
            report.rows.append(ReportRow(*meta, n, kind, "RMSE", rmse, rmse_se, drops))
    return report


CSV_COLUMNS = ("model", "dist", "criterion", "n", "strategy", "metric", "value", "mc_se", "drops")


def write_csv(report: EfficiencyReport, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for r in report.rows:
            writer.writerow([
                r.model, r.dist, r.criterion, r.n, r.strategy, r.metric,
                repr(r.value), repr(r.mc_se), r.drops,
            ])


def read_csv(path) -> EfficiencyReport:
    report = EfficiencyReport()
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            report.rows.append(ReportRow(
                row["model"], row["dist"], row["criterion"], int(row["n"]),
                row["strategy"], row["metric"], float(row["value"]),
                float(row["mc_se"]), int(row["drops"]),
            ))
    return report


def write_plots(report: EfficiencyReport, out_dir) -> list[str]:
    """Optional line plots (one SVG per metric) over n, one line per
    strategy. Requires matplotlib; returns the written paths."""
    import pathlib

    import matplotlib
    matplotlib.use("svg")
    import matplotlib.pyplot as plt

    out_dir = pathlib.Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for metric in METRICS:
        rows = [r for r in report.rows if r.metric == metric]
        if not rows:
            continue
        fig, ax = plt.subplots(figsize=(5, 3.5))
        styles = {ad.FLOD: ":", ad.AOD: "--", ad.RSD: "-"}
        for kind in sorted({r.strategy for r in rows}):
            pts = sorted((r.n, r.value) for r in rows if r.strategy == kind)
            ax.plot([p[0] for p in pts], [p[1] for p in pts],
                    styles.get(kind, "-"), label=kind)
        ax.axhline(1.0, color="gray", lw=0.5)
        ax.set_xlabel("n")
        ax.set_ylabel(metric)
        ax.legend()
        fig.tight_layout()
        path = out_dir / f"{rows[0].model}_{rows[0].dist}_{rows[0].criterion}_{metric}.svg"
        fig.savefig(path)
        plt.close(fig)
        written.append(str(path))
    return written
