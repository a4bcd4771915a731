"""Sequential design strategies: fixed optimal rollout, one-step-ahead
adaptive optimal, and one-step-ahead information-reweighted adaptive.

All three simulate the same experiment shape: n_total observations on a
compact design space, responses y = eta(x, theta_true) + sigma-scaled error.

* ``flod`` (fixed locally optimal design): solved at an oracle theta (the
  truth in the benchmark role), rounded to n_total observations up front;
  no adaptation.
* ``aod`` (adaptive optimal design): after an initial design, each
  observation goes to the minimizer of the sensitivity phi under the
  empirical design at the running MLE.
* ``rsd`` (reweighted sequential design): identical except the empirical
  design is replaced by the information-reweighted design tau, whose
  weights are proportional to the per-cluster observed informations. With
  repeats those are evaluated at the per-cluster location MLEs
  (``clustered`` mode); on a continuous design space, where repeats cannot
  be ensured, they are evaluated at the running parameter MLE instead
  (``no-repeat`` mode), with negative values floored at zero or shifted.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import criteria as crit
from . import design_solver as ds
from . import errors as err
from . import estimation as est
from . import models as mdl
from .exceptions import AllWeightsDegenerate, NegativeQ, NonConvergence

FLOD = "flod"
AOD = "aod"
RSD = "rsd"

CLUSTERED = "clustered"
NO_REPEAT = "no-repeat"


CLIP_NEGATIVE = "clip"
SHIFT_NEGATIVE = "shift"


@dataclass(frozen=True)
class Strategy:
    kind: str
    oracle_theta: tuple[float, ...] | None = None        # flod only
    repeat_mode: str = NO_REPEAT                         # rsd only
    negative_handling: str = CLIP_NEGATIVE               # rsd no-repeat only
    obs_info_fn: object = None                           # rsd diagnostics hook

    def __post_init__(self):
        if self.kind not in (FLOD, AOD, RSD):
            raise ValueError(f"unknown strategy {self.kind!r}")
        if self.repeat_mode not in (CLUSTERED, NO_REPEAT):
            raise ValueError(f"unknown repeat mode {self.repeat_mode!r}")
        if self.negative_handling not in (CLIP_NEGATIVE, SHIFT_NEGATIVE):
            raise ValueError(f"unknown negative handling {self.negative_handling!r}")


def flod_strategy(oracle_theta=None) -> Strategy:
    return Strategy(FLOD, None if oracle_theta is None else tuple(oracle_theta))


def aod_strategy() -> Strategy:
    return Strategy(AOD)


def rsd_strategy(
    repeat_mode: str = NO_REPEAT,
    negative_handling: str = CLIP_NEGATIVE,
    obs_info_fn=None,
) -> Strategy:
    return Strategy(
        RSD, repeat_mode=repeat_mode,
        negative_handling=negative_handling, obs_info_fn=obs_info_fn,
    )


# Initial designs for the three case studies (robust two/three-point designs
# with known high efficiency over a parameter range around the estimates),
# and neutral parameter guesses used only to seed the MLE numerics.
INITIAL_DESIGNS: dict[tuple[str, str], tuple[tuple[float, ...], tuple[float, ...]]] = {
    (mdl.MICHAELIS_MENTEN, "D"): ((177.83, 2000.0), (0.5, 0.5)),
    (mdl.MICHAELIS_MENTEN, "c"): ((177.83, 2000.0), (0.5, 0.5)),
    (mdl.EXP_DECAY, "D"): ((70.43, 500.0), (0.5, 0.5)),
    (mdl.EXP_DECAY, "c"): ((70.43, 500.0), (0.5, 0.5)),
    (mdl.COMPARTMENTAL, "D"): ((0.2288, 1.4170, 18.4513), (1 / 3, 1 / 3, 1 / 3)),
    (mdl.COMPARTMENTAL, "c"): ((0.1829, 2.4639, 8.8542), (1 / 3, 1 / 3, 1 / 3)),
}

DEFAULT_THETA_INIT: dict[str, tuple[float, ...]] = {
    mdl.MICHAELIS_MENTEN: (30.0, 300.0),
    mdl.EXP_DECAY: (1.0, 0.0141),
    mdl.COMPARTMENTAL: (20.0, 0.05, 4.0),
}

OBS_PER_INITIAL_POINT = 5


def default_initial_design(model: mdl.ModelSpec, criterion: crit.Criterion) -> ds.Design:
    """Case-study initial design, or log-spaced points as a generic fallback."""
    entry = INITIAL_DESIGNS.get((model.family, criterion.kind))
    lo, hi = model.design_space
    if entry is not None:
        support = np.asarray(entry[0])
        if np.all((support >= lo) & (support <= hi)):
            return ds.Design(support, np.asarray(entry[1]))
    support = lo + (hi - lo) * np.geomspace(1e-3, 1.0, model.p)
    return ds.Design(support, np.full(model.p, 1.0 / model.p))


@dataclass
class AdaptiveRun:
    """Record of one simulated experiment."""

    strategy: Strategy
    model: mdl.ModelSpec
    dist: err.ErrorDist
    criterion: crit.Criterion
    init_design: ds.ExactDesign
    n_total: int
    state: est.ExperimentState
    theta_hat: np.ndarray | None
    theta_path: list = field(default_factory=list)
    x_path: list = field(default_factory=list)
    min_phi_path: list = field(default_factory=list)
    q_path: list = field(default_factory=list)
    dropped: str | None = None
    states: list | None = None  # per-step snapshots when recorded


def _argmin_over_design(model, criterion, support, weights, theta, grid_n, polish_iters):
    """Grid + golden argmin of phi under a fixed weighted design."""
    lo, hi = model.design_space
    grid = np.linspace(lo, hi, grid_n)
    return ds._argmin_sensitivity(
        criterion, model, theta, np.asarray(support, float), np.asarray(weights, float),
        grid, None, polish_iters,
    )


def aod_step(
    model, dist, criterion, state: est.ExperimentState, theta_hat,
    *, grid_n: int = 2001, polish_iters: int = 16,
) -> tuple[float, float]:
    """Next point of the adaptive optimal design: argmin of phi under the
    empirical design at theta_hat. Returns (x, min_phi)."""
    return _argmin_over_design(
        model, criterion, state.representatives, state.weights, theta_hat,
        grid_n, polish_iters,
    )


def _info_weights(model, dist, state, theta_hat, mode, negative_handling, obs_info_fn):
    """(normalized weights, total information Q) of the reweighted design."""
    if mode == CLUSTERED:
        fits = est.fit_clusters(dist, state)
        ia = np.array([f.obs_info for f in fits])
        if np.any(ia < -1e-12):
            raise NegativeQ("negative cluster information in clustered mode")
        ia = np.maximum(ia, 0.0)
    else:
        etas = np.atleast_1d(mdl.eta(model, state.representatives, theta_hat))
        resid = state.responses - etas[state.cluster_index]
        per_obs = (
            obs_info_fn(dist, resid) if obs_info_fn is not None
            else -err.logpdf_deriv(dist, resid, 2)
        )
        ia = np.bincount(state.cluster_index, weights=per_obs, minlength=state.d)
        if np.any(ia < 0):
            if negative_handling == CLIP_NEGATIVE:
                ia = np.maximum(ia, 0.0)
            else:
                ia = ia + 1e-6 * np.max(np.abs(ia)) - float(np.min(ia))
    q = float(np.sum(ia))
    if q <= 0:
        raise AllWeightsDegenerate("total observed information is not positive")
    return ia / q, q


def rsd_weights(
    model, dist, state: est.ExperimentState, theta_hat,
    mode: str = NO_REPEAT, negative_handling: str = CLIP_NEGATIVE, obs_info_fn=None,
) -> np.ndarray:
    """Normalized information weights of the reweighted history design tau.

    ``clustered``: per-cluster observed information at the per-cluster
    location MLEs (requires genuine repeats; negative values there signal a
    failed fit). ``no-repeat``: per-cluster observed information evaluated
    at the running MLE theta_hat, where negative values are legitimate for
    heavy-tailed errors; they are floored at zero (``clip``, the default) or
    every cluster is shifted up by 1e-6 * max|i| + |min i| (``shift``)
    before normalizing.
    """
    return _info_weights(model, dist, state, theta_hat, mode, negative_handling, obs_info_fn)[0]


def rsd_step(
    model, dist, criterion, state: est.ExperimentState, theta_hat,
    mode: str = NO_REPEAT, *, negative_handling: str = CLIP_NEGATIVE,
    obs_info_fn=None, grid_n: int = 2001, polish_iters: int = 16,
) -> tuple[float, float]:
    """Next point of the information-reweighted design: argmin of phi under
    tau at theta_hat. Returns (x, min_phi)."""
    omega = rsd_weights(model, dist, state, theta_hat, mode, negative_handling, obs_info_fn)
    return _argmin_over_design(
        model, criterion, state.representatives, omega, theta_hat,
        grid_n, polish_iters,
    )


def run_experiment(
    model: mdl.ModelSpec,
    dist: err.ErrorDist,
    criterion: crit.Criterion,
    strategy: Strategy,
    theta_true,
    n_total: int,
    rng: np.random.Generator,
    *,
    init_design: ds.Design | None = None,
    obs_per_point: int = OBS_PER_INITIAL_POINT,
    theta_init=None,
    cluster_tol: float = est.DEFAULT_CLUSTER_TOL,
    grid_n: int = 2001,
    polish_iters: int = 16,
    solver_opts: ds.SolverOptions | None = None,
    flod_design: ds.Design | None = None,
    record_states: bool = False,
) -> AdaptiveRun:
    """Simulate one experiment of n_total observations under a strategy.

    The run is a pure function of its arguments and the generator state:
    the generator is consumed only for error draws, one per observation in
    assignment order. A failed parameter fit marks the run as dropped
    (recorded, not raised) per the replicate-omission policy of the study.
    """
    theta_true = np.asarray(theta_true, dtype=float)
    model_true = model.with_theta(theta_true)
    if theta_init is None:
        theta_init = np.asarray(DEFAULT_THETA_INIT[model.family])
    else:
        theta_init = np.asarray(theta_init, dtype=float)

    if strategy.kind == FLOD:
        oracle = (
            theta_true if strategy.oracle_theta is None
            else np.asarray(strategy.oracle_theta)
        )
        continuous = (
            flod_design if flod_design is not None
            else ds.flod_solve(model, criterion, oracle, solver_opts)
        )
        exact = ds.adams_round(continuous, n_total)
        points = np.repeat(exact.support, exact.counts)
        eps = err.sample(dist, rng, n_total)
        responses = np.atleast_1d(mdl.eta(model_true, points)) + eps
        state = est.cluster(points, responses, cluster_tol)
        run = AdaptiveRun(
            strategy, model, dist, criterion, exact, n_total, state, None,
            x_path=list(points),
        )
        try:
            run.theta_hat = est.fit_theta(model, dist, state, theta_init)
            run.theta_path.append(run.theta_hat)
        except NonConvergence as e:
            run.dropped = f"final fit: {e}"
        return run

    init = init_design if init_design is not None else default_initial_design(model, criterion)
    counts = np.full(init.d, obs_per_point)
    exact = ds.ExactDesign(init.support, counts)
    if exact.n + model.p > n_total:
        raise ValueError("n_total too small for the initial design plus p refits")

    points = np.repeat(exact.support, exact.counts)
    eps = err.sample(dist, rng, exact.n)
    responses = np.atleast_1d(mdl.eta(model_true, points)) + eps
    state = est.cluster(points, responses, cluster_tol)
    run = AdaptiveRun(
        strategy, model, dist, criterion, exact, n_total, state, None,
        x_path=list(points), states=[] if record_states else None,
    )

    try:
        theta_hat = est.fit_theta(model, dist, state, theta_init)
    except NonConvergence as e:
        run.dropped = f"initial fit: {e}"
        return run
    run.theta_path.append(theta_hat)

    while state.n < n_total:
        try:
            if strategy.kind == AOD:
                x_next, min_phi = aod_step(
                    model, dist, criterion, state, theta_hat,
                    grid_n=grid_n, polish_iters=polish_iters,
                )
                run.q_path.append(np.nan)
            else:
                omega, q = _info_weights(
                    model, dist, state, theta_hat,
                    strategy.repeat_mode, strategy.negative_handling,
                    strategy.obs_info_fn,
                )
                x_next, min_phi = _argmin_over_design(
                    model, criterion, state.representatives, omega, theta_hat,
                    grid_n, polish_iters,
                )
                run.q_path.append(q)
        except (NegativeQ, AllWeightsDegenerate) as e:
            run.dropped = f"step weights: {e}"
            return run

        y_next = float(mdl.eta(model_true, x_next)) + float(err.sample(dist, rng, 1)[0])
        state = state.extended(x_next, y_next)
        run.x_path.append(x_next)
        run.min_phi_path.append(min_phi)
        if record_states:
            run.states.append(state)

        try:
            theta_hat = est.fit_theta(model, dist, state, theta_hat, multi_start=False)
        except NonConvergence:
            try:
                theta_hat = est.fit_theta(model, dist, state, theta_init)
            except NonConvergence as e:
                run.dropped = f"refit at n={state.n}: {e}"
                run.state = state
                return run
        run.theta_path.append(theta_hat)

    run.state = state
    run.theta_hat = theta_hat
    return run
