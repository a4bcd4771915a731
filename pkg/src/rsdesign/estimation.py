"""Maximum-likelihood estimation for location-family nonlinear regression.

Two fitting problems appear throughout the package:

* ``fit_location`` -- the scalar location MLE eta_hat for the responses of
  one support point, together with the observed information at eta_hat and
  the residual configuration (the ancillary statistic of the location
  family).
* ``fit_theta`` -- the full parameter MLE for a nonlinear mean function,
  by damped Newton steps on the exact likelihood Hessian with a
  Fisher-scoring fallback when the observed Hessian is not positive
  definite.

Both use deterministic multi-start policies because heavy-tailed likelihoods
(Cauchy in particular) are multimodal.

``ExperimentState`` holds the sequential design history: the ordered
assignments, responses, and a greedy clustering of assignments into repeat
groups.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import errors as err
from . import models as mdl
from .exceptions import MultimodalWarning, NonConvergence

DEFAULT_CLUSTER_TOL = 1e-9


@dataclass(frozen=True)
class ClusterFit:
    """Location fit of one repeat group: MLE, observed info, configuration."""

    eta_hat: float
    obs_info: float
    config: np.ndarray


class ExperimentState:
    """Ordered design assignments with their responses and repeat groups.

    Clustering is greedy in arrival order: a new point joins the nearest
    existing cluster whose representative (running mean) lies within
    ``cluster_tol``, ties going to the lower representative; otherwise it
    founds a new cluster.
    """

    __slots__ = (
        "points", "responses", "clusters", "representatives", "cluster_tol",
        "_cluster_index",
    )

    def __init__(self, points, responses, clusters, representatives, cluster_tol):
        self.points = np.asarray(points, dtype=float)
        self.responses = np.asarray(responses, dtype=float)
        self.clusters = [np.asarray(c, dtype=int) for c in clusters]
        self.representatives = np.asarray(representatives, dtype=float)
        self.cluster_tol = float(cluster_tol)
        self._cluster_index = None

    @property
    def cluster_index(self) -> np.ndarray:
        """Per-observation cluster label (lazy, cached)."""
        if self._cluster_index is None:
            idx = np.empty(self.n, dtype=int)
            for k, c in enumerate(self.clusters):
                idx[c] = k
            self._cluster_index = idx
        return self._cluster_index

    @property
    def n(self) -> int:
        return self.points.size

    @property
    def d(self) -> int:
        return len(self.clusters)

    @property
    def counts(self) -> np.ndarray:
        return np.array([c.size for c in self.clusters])

    @property
    def weights(self) -> np.ndarray:
        return self.counts / self.n

    def cluster_responses(self, i: int) -> np.ndarray:
        return self.responses[self.clusters[i]]

    def extended(self, x: float, y: float) -> "ExperimentState":
        """New state with one more observation, clustered by the greedy rule."""
        points = np.append(self.points, float(x))
        responses = np.append(self.responses, float(y))
        clusters = [c.copy() for c in self.clusters]
        reps = self.representatives.copy()
        idx = self.n
        j = _assign_cluster(reps, float(x), self.cluster_tol)
        if j is None:
            clusters.append(np.array([idx]))
            reps = np.append(reps, float(x))
        else:
            clusters[j] = np.append(clusters[j], idx)
            m = clusters[j].size
            reps[j] += (float(x) - reps[j]) / m
        return ExperimentState(points, responses, clusters, reps, self.cluster_tol)


def _assign_cluster(reps: np.ndarray, x: float, tol: float) -> int | None:
    """Index of the cluster x joins, or None to found a new one."""
    if reps.size == 0:
        return None
    dist = np.abs(reps - x)
    best = dist.min()
    if best > tol:
        return None
    tied = np.flatnonzero(dist == best)
    if tied.size == 1:
        return int(tied[0])
    return int(tied[np.argmin(reps[tied])])


def cluster(points, responses, cluster_tol: float = DEFAULT_CLUSTER_TOL) -> ExperimentState:
    """Greedy left-to-right clustering of (x, y) pairs into repeat groups."""
    if cluster_tol < 0:
        raise ValueError("cluster_tol must be nonnegative")
    points = np.asarray(points, dtype=float)
    responses = np.asarray(responses, dtype=float)
    if points.shape != responses.shape or points.ndim != 1:
        raise ValueError("points and responses must be 1-D arrays of equal length")
    state = ExperimentState(
        np.empty(0), np.empty(0), [], np.empty(0), cluster_tol
    )
    # incremental path keeps cluster() and extended() behaviorally identical
    for x, y in zip(points, responses):
        state = state.extended(x, y)
    return state


def _location_loglik(dist: err.ErrorDist, y: np.ndarray, eta: float):
    resid = y - eta
    l0 = err.logpdf_deriv(dist, resid, 0)
    l1 = err.logpdf_deriv(dist, resid, 1)
    l2 = err.logpdf_deriv(dist, resid, 2)
    # d/deta log f0(y - eta) = -l0^(1)(y - eta)
    return float(np.sum(l0)), float(-np.sum(l1)), float(np.sum(l2))


def fit_location(
    dist: err.ErrorDist,
    y,
    *,
    max_iter: int = 200,
    grad_tol: float = 1e-10,
    step_tol: float = 1e-12,
    multi_start: bool = True,
    tie_tol: float = 1e-6,
    warn_multimodal: bool = True,
) -> ClusterFit:
    """Location MLE of a response group with observed info and configuration.

    Multi-start policy: median +/- {0, 1, 2, 4} * MAD, each polished by
    damped Newton on the log likelihood; the global maximum is reported and
    a MultimodalWarning is emitted when another start converged to a
    distinct near-tied local maximum.
    """
    y = np.asarray(y, dtype=float)
    if y.size == 0:
        raise ValueError("y must be nonempty")
    if y.size == 1:
        return ClusterFit(float(y[0]), -err.logpdf_deriv(dist, 0.0, 2), np.zeros(1))

    med = float(np.median(y))
    mad = float(np.median(np.abs(y - med)))
    spread = mad if mad > 0 else max(dist.sigma, 1e-8)
    if multi_start:
        starts = [med + k * spread for k in (0.0, 1.0, -1.0, 2.0, -2.0, 4.0, -4.0)]
    else:
        starts = [med]

    solutions = []
    for eta0 in starts:
        sol = _newton_location(dist, y, eta0, max_iter, grad_tol, step_tol)
        if sol is not None:
            solutions.append(sol)
    if not solutions:
        # report the best iterate even though nothing met tolerance
        best = max(
            (_newton_location(dist, y, s, max_iter, np.inf, 0.0) for s in starts),
            key=lambda s: s[1],
        )
        raise NonConvergence(
            "location fit did not converge from any start",
            best=best[0], grad_norm=best[2],
        )

    solutions.sort(key=lambda s: -s[1])
    eta_hat, best_ll, _ = solutions[0]
    if warn_multimodal:
        scale = max(1.0, abs(eta_hat))
        for other, ll, _ in solutions[1:]:
            if abs(other - eta_hat) > 1e-6 * scale and best_ll - ll <= tie_tol:
                warnings.warn(
                    f"near-tied local maxima at eta={eta_hat:.6g} and eta={other:.6g}",
                    MultimodalWarning,
                )
                break

    resid = y - eta_hat
    obs_info = float(-np.sum(err.logpdf_deriv(dist, resid, 2)))
    return ClusterFit(eta_hat, obs_info, resid)


def _score_polish(dist, y, eta, score, d2, grad_tol):
    """Newton iterations on the score itself.

    Ascent on the log likelihood stalls once improvements drop below float
    resolution (a plateau of width ~sqrt(eps)); root-finding on the score is
    not limited that way and reaches |score| near machine precision.
    """
    for _ in range(8):
        if abs(score) <= grad_tol * y.size or d2 >= 0:
            break
        cand = eta + score / (-d2)
        _, cand_score, cand_d2 = _location_loglik(dist, y, cand)
        if abs(cand_score) >= abs(score):
            break
        eta, score, d2 = cand, cand_score, cand_d2
    return eta, score, d2


def _newton_location(dist, y, eta0, max_iter, grad_tol, step_tol):
    """Damped Newton ascent; returns (eta, loglik, |score|) or None."""
    eta = float(eta0)
    ll, score, d2 = _location_loglik(dist, y, eta)
    for _ in range(max_iter):
        if abs(score) <= grad_tol * y.size:
            return eta, ll, abs(score)
        curv = -d2 if d2 < 0 else max(y.size * err.unit_info(dist) * 0.1, 1e-12)
        step = score / curv
        new_eta, new_ll = eta, ll
        for _ in range(60):
            cand = eta + step
            cand_ll, _, _ = _location_loglik(dist, y, cand)
            if cand_ll > ll:
                new_eta, new_ll = cand, cand_ll
                break
            step *= 0.5
        if new_eta == eta:
            # log-likelihood plateau: polish on the score instead
            eta, score, d2 = _score_polish(dist, y, eta, score, d2, grad_tol)
            ll = _location_loglik(dist, y, eta)[0]
            return (eta, ll, abs(score)) if abs(score) <= 1e-8 * y.size else None
        moved = abs(new_eta - eta)
        eta = new_eta
        ll, score, d2 = _location_loglik(dist, y, eta)
        if moved <= step_tol * max(1.0, abs(eta)):
            break
    eta, score, d2 = _score_polish(dist, y, eta, score, d2, grad_tol)
    ll = _location_loglik(dist, y, eta)[0]
    return (eta, ll, abs(score)) if abs(score) <= grad_tol * y.size else None


@dataclass
class ClusterStats:
    """Per-cluster likelihood pieces at a fixed theta (vectorized over
    observations through the cluster-index map)."""

    etas: np.ndarray      # (d,) mean response per cluster
    grads: np.ndarray     # (d, p)
    hessians: np.ndarray  # (d, p, p)
    ldots: np.ndarray     # (d,) cluster score sums  -sum l0^(1)(resid)
    obs_infos: np.ndarray  # (d,) cluster info sums  -sum l0^(2)(resid)
    loglik: float


def cluster_stats(model, dist, state: ExperimentState, theta=None) -> ClusterStats:
    reps = state.representatives
    etas = np.atleast_1d(mdl.eta(model, reps, theta))
    G = np.atleast_2d(mdl.grad_eta(model, reps, theta))
    H = mdl.hess_eta(model, reps, theta)
    if H.ndim == 2:
        H = H[None, :, :]
    idx = state.cluster_index
    resid = state.responses - etas[idx]
    l0 = err.logpdf_deriv(dist, resid, 0)
    l1 = err.logpdf_deriv(dist, resid, 1)
    l2 = err.logpdf_deriv(dist, resid, 2)
    d = state.d
    ldots = -np.bincount(idx, weights=l1, minlength=d)
    iys = -np.bincount(idx, weights=l2, minlength=d)
    return ClusterStats(etas, G, H, ldots, iys, float(np.sum(l0)))


def _theta_loglik_parts(model, dist, state, theta):
    """(loglik, grad, obs_info_matrix, scoring_matrix) at theta."""
    cs = cluster_stats(model, dist, state, theta)
    grad = cs.grads.T @ cs.ldots
    obs = (cs.grads * cs.obs_infos[:, None]).T @ cs.grads
    obs -= np.tensordot(cs.ldots, cs.hessians, axes=1)
    mu = err.unit_info(dist)
    scoring = mu * (cs.grads * state.counts[:, None]).T @ cs.grads
    return cs.loglik, grad, obs, scoring


def fit_theta(
    model: mdl.ModelSpec,
    dist: err.ErrorDist,
    state: ExperimentState,
    init,
    *,
    max_iter: int = 200,
    grad_tol: float = 1e-8,
    step_tol: float = 1e-11,
    multi_start: bool = True,
) -> np.ndarray:
    """Full-parameter MLE by damped Newton with Fisher-scoring fallback.

    Starts from ``init`` plus four deterministic +/-10% jitters (when
    ``multi_start``); invalid jittered starts are skipped. The start with
    the highest converged log likelihood wins.
    """
    init = np.asarray(init, dtype=float)
    if state.n < model.p:
        raise ValueError("need at least p observations to fit theta")
    mdl.check_theta(model.family, init)

    starts = [init]
    if multi_start:
        p = init.size
        alt = np.where(np.arange(p) % 2 == 0, 1.1, 0.9)
        for fac in (np.full(p, 1.1), np.full(p, 0.9), alt, alt[::-1].copy()):
            cand = init * fac
            if mdl.theta_valid(model.family, cand):
                starts.append(cand)

    solutions = []
    fallback = None
    for theta0 in starts:
        sol = _newton_theta(model, dist, state, theta0, max_iter, grad_tol, step_tol)
        if sol.converged:
            solutions.append(sol)
        elif fallback is None or sol.ll > fallback.ll:
            fallback = sol
    if not solutions:
        raise NonConvergence(
            "theta fit did not converge from any start",
            best=None if fallback is None else fallback.theta,
            grad_norm=None if fallback is None else fallback.grad_norm,
        )
    best = max(solutions, key=lambda s: s.ll)
    return best.theta


@dataclass
class _ThetaSolution:
    theta: np.ndarray
    ll: float
    grad_norm: float
    converged: bool


def _newton_theta(model, dist, state, theta0, max_iter, grad_tol, step_tol):
    theta = np.asarray(theta0, dtype=float).copy()
    ll, grad, obs, scoring = _theta_loglik_parts(model, dist, state, theta)
    scale = np.maximum(np.abs(theta), 1.0)
    for _ in range(max_iter):
        gnorm = float(np.max(np.abs(grad * scale)))
        if gnorm <= grad_tol * state.n:
            return _ThetaSolution(theta, ll, gnorm, True)
        step = _solve_step(obs, scoring, grad)
        moved = 0.0
        for _ in range(60):
            cand = theta + step
            if mdl.theta_valid(model.family, cand):
                cand_ll, cand_grad, cand_obs, cand_scoring = _theta_loglik_parts(
                    model, dist, state, cand
                )
                if cand_ll > ll:
                    moved = float(np.max(np.abs(step) / scale))
                    theta, ll = cand, cand_ll
                    grad, obs, scoring = cand_grad, cand_obs, cand_scoring
                    scale = np.maximum(np.abs(theta), 1.0)
                    break
            step = step * 0.5
        if moved == 0.0:
            break
        if moved <= step_tol:
            break
    gnorm = float(np.max(np.abs(grad * scale)))
    return _ThetaSolution(theta, ll, gnorm, gnorm <= 1e-6 * state.n)


def _solve_step(obs, scoring, grad):
    """Newton direction from the observed Hessian, else Fisher scoring."""
    for mat in (obs, scoring):
        try:
            c = np.linalg.cholesky(mat)
        except np.linalg.LinAlgError:
            continue
        z = np.linalg.solve(c, grad)
        return np.linalg.solve(c.T, z)
    # last resort: ridge the scoring matrix
    p = grad.size
    ridge = scoring + (1e-8 * max(np.trace(scoring), 1.0) / p) * np.eye(p)
    return np.linalg.solve(ridge, grad)


def fit_clusters(dist: err.ErrorDist, state: ExperimentState, **kwargs) -> list[ClusterFit]:
    """Location fit of every repeat group of the state."""
    return [fit_location(dist, state.cluster_responses(i), **kwargs) for i in range(state.d)]
