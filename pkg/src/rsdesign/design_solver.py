"""Continuous optimal designs by the first-order exchange algorithm,
certification against the equivalence theorem, and Adams rounding to exact
designs.

The solver iterates: find the point x* minimizing the sensitivity function
(grid search plus golden-section polish), mix it into the current design
with step 1/(iter+1), then merge near-duplicate support points and prune
negligible weights. A monotonicity guard halves the step when a proposed
update would increase the criterion, so the recorded criterion path is
nonincreasing. Iteration stops once the minimum sensitivity clears
-cert_tol, the equivalence-theorem certificate of optimality.

The same loop solves the look-ahead problem of an adaptive experiment: when
prior observed information is supplied, the sensitivity is nu instead of
phi and the criterion is evaluated on the corresponding R mixture.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import criteria as crit
from . import errors as err
from . import estimation as est
from . import information as info
from . import models as mdl
from .exceptions import InfeasibleRounding, NotCertified, SingularInfo

_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class Design:
    """A continuous design: support points with nonnegative weights summing
    to one."""

    support: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.support, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if s.ndim != 1 or s.shape != w.shape or s.size == 0:
            raise ValueError("support and weights must be 1-D arrays of equal length")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        total = w.sum()
        if not np.isclose(total, 1.0, atol=1e-8):
            raise ValueError(f"weights must sum to 1 (got {total})")
        order = np.argsort(s)
        object.__setattr__(self, "support", s[order])
        object.__setattr__(self, "weights", w[order] / total)

    @property
    def d(self) -> int:
        return self.support.size


@dataclass(frozen=True)
class ExactDesign:
    """An exact design: support points with integer replication counts."""

    support: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.support, dtype=float)
        c = np.asarray(self.counts, dtype=int)
        if s.shape != c.shape or s.ndim != 1:
            raise ValueError("support and counts must be 1-D arrays of equal length")
        if np.any(c < 0):
            raise ValueError("counts must be nonnegative")
        object.__setattr__(self, "support", s)
        object.__setattr__(self, "counts", c)

    @property
    def n(self) -> int:
        return int(self.counts.sum())


@dataclass
class SolverOptions:
    grid_n: int = 4001
    polish_iters: int = 30
    merge_tol_frac: float = 1e-3
    prune_tol: float = 1e-4
    cert_tol: float = 1e-3
    max_iters: int = 50_000
    # called as callback(iteration, objective) after each accepted update;
    # the reported objective path is nonincreasing (within float slack)
    callback: object = None


@dataclass(frozen=True)
class Certificate:
    """Equivalence-theorem certification report for a candidate design."""

    passed: bool
    min_phi: float
    argmin_x: float
    phi_at_support: np.ndarray
    cert_tol: float


@dataclass(frozen=True)
class _Prior:
    """Accumulated-information context for look-ahead solves."""

    tau_support: np.ndarray
    tau_weights: np.ndarray
    mu_beta: float


def _eval_matrix(criterion, model, theta, support, weights, prior):
    """(m_design, m_eval): the candidate's M and the matrix the sensitivity
    and objective are evaluated on (M itself, or the R mixture)."""
    m_design = info.info_M(model, (support, weights), theta).matrix
    if prior is None or prior.mu_beta >= 1.0:
        return m_design, m_design
    m_tau = info.info_M(model, (prior.tau_support, prior.tau_weights), theta).matrix
    return m_design, prior.mu_beta * m_design + (1.0 - prior.mu_beta) * m_tau


def _objective(criterion, model, theta, support, weights, prior):
    """Criterion value driving the solve: psi(M) or psi(R)."""
    _, m_eval = _eval_matrix(criterion, model, theta, support, weights, prior)
    return crit.psi(criterion, m_eval)


def _golden_min(f, lo, hi, iters):
    """Golden-section minimization of a scalar function on [lo, hi]."""
    a, b = lo, hi
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1, f2 = f(x1), f(x2)
    for _ in range(iters):
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLDEN * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (b - a)
            f2 = f(x2)
    return (x1, f1) if f1 <= f2 else (x2, f2)


def _argmin_sensitivity(
    criterion, model, theta, support, weights, grid, prior, polish_iters, grid_grads=None
):
    """Grid + golden-section argmin of the sensitivity; smaller x wins ties."""
    m_design, m_eval = _eval_matrix(criterion, model, theta, support, weights, prior)
    sens = crit.make_sensitivity(criterion, m_design, m_eval)
    if grid_grads is None:
        grid_grads = np.atleast_2d(mdl.grad_eta(model, grid, theta))
    vals = sens(grid_grads)
    i = int(np.argmin(vals))  # argmin returns the first (smallest x) on ties
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, grid.size - 1)]
    if polish_iters > 0 and hi > lo:
        def f(x):
            g = np.atleast_2d(mdl.grad_eta(model, np.array([x]), theta))
            return float(sens(g)[0])

        x_pol, f_pol = _golden_min(f, lo, hi, polish_iters)
        if f_pol < vals[i]:
            return float(x_pol), float(f_pol)
    return float(grid[i]), float(vals[i])


def _merge_prune(support, weights, merge_tol, prune_tol, bounds):
    """Merge support points closer than merge_tol (weighted mean position),
    drop weights below prune_tol, renormalize, clip into the design space."""
    order = np.argsort(support)
    s, w = support[order], weights[order]
    ms, mw = [s[0]], [w[0]]
    for x, wt in zip(s[1:], w[1:]):
        if x - ms[-1] <= merge_tol:
            tot = mw[-1] + wt
            ms[-1] = (ms[-1] * mw[-1] + x * wt) / tot if tot > 0 else ms[-1]
            mw[-1] = tot
        else:
            ms.append(x)
            mw.append(wt)
    s, w = np.array(ms), np.array(mw)
    keep = w >= prune_tol
    if not np.any(keep):
        keep = w == w.max()
    s, w = s[keep], w[keep]
    return np.clip(s, bounds[0], bounds[1]), w / w.sum()


def _default_start(model, criterion, theta, prior) -> tuple[np.ndarray, np.ndarray]:
    """A nonsingular equal-weight starting design.

    Tries p+1 equispaced interior points, then p+1 log-spaced points (mean
    functions with fast/slow exponentials need log coverage), then a coarse
    uniform grid.
    """
    lo, hi = model.design_space
    p = model.p
    candidates = []
    q = np.arange(1, p + 2) / (p + 2)
    candidates.append(lo + (hi - lo) * q)
    candidates.append(lo + (hi - lo) * np.geomspace(1e-3, 1.0, p + 1))
    candidates.append(np.linspace(lo + (hi - lo) * 1e-3, hi, 4 * p + 1))
    for s in candidates:
        w = np.full(s.size, 1.0 / s.size)
        try:
            m = info.info_M(model, (s, w), theta).matrix
            if np.linalg.cond(m) < 1e10:
                crit.psi(criterion, m)
                return s, w
        except (SingularInfo, np.linalg.LinAlgError):
            continue
    raise SingularInfo("no nonsingular starting design found")


def _sens_at_support(criterion, model, theta, support, weights, prior):
    m_design, m_eval = _eval_matrix(criterion, model, theta, support, weights, prior)
    sens = crit.make_sensitivity(criterion, m_design, m_eval)
    return sens(np.atleast_2d(mdl.grad_eta(model, support, theta)))


def _drop_inactive(criterion, model, theta, support, weights, prior, cert_tol):
    """Remove low-weight points whose sensitivity is clearly positive (the
    equivalence theorem excludes them from the optimal support)."""
    if support.size <= 1:
        return support, weights
    vals = _sens_at_support(criterion, model, theta, support, weights, prior)
    drop = (vals > cert_tol) & (weights <= 0.02)
    if not np.any(drop) or np.all(drop):
        return support, weights
    s, w = support[~drop], weights[~drop]
    return s, w / w.sum()


def _try_drop_small(criterion, model, theta, support, weights, prior, best_obj):
    """Fold light support points into their nearest neighbor when that does
    not worsen the criterion (satellites left behind by early iterations are
    absorbed; the relocation pass then re-centers the absorbing point)."""
    order = np.argsort(weights)
    for i in order:
        if support.size <= 1 or weights[i] > 0.15:
            continue
        keep = np.ones(support.size, dtype=bool)
        keep[i] = False
        s, w = support[keep], weights[keep].copy()
        w[np.argmin(np.abs(s - support[i]))] += weights[i]
        try:
            obj = _objective(criterion, model, theta, s, w, prior)
        except SingularInfo:
            continue
        if obj <= best_obj * (1.0 + 1e-9):
            return _try_drop_small(criterion, model, theta, s, w, prior, min(obj, best_obj))
    return support, weights, best_obj


def _relocate_support(criterion, model, theta, support, weights, prior, best_obj, window):
    """Fedorov-style exchange: move each support point (with its weight) to
    the nearby criterion minimizer when that improves the objective."""
    lo, hi = model.design_space
    support = support.copy()
    for i in range(support.size):
        def obj_at(z):
            s = support.copy()
            s[i] = z
            try:
                return _objective(criterion, model, theta, s, weights, prior)
            except SingularInfo:
                return np.inf

        a = max(lo, support[i] - window)
        b = min(hi, support[i] + window)
        z, fz = _golden_min(obj_at, a, b, 40)
        if fz < best_obj:
            support[i], best_obj = z, fz
    # criterion-specific exact candidate: D-optimal weights on p points are
    # uniform
    if criterion.kind == "D" and prior is None and support.size == model.p:
        w_eq = np.full(support.size, 1.0 / support.size)
        try:
            obj = _objective(criterion, model, theta, support, w_eq, prior)
            if obj <= best_obj:
                return support, w_eq, obj
        except SingularInfo:
            pass
    return support, weights, best_obj


def _first_order_solve(model, criterion, theta, opts, prior, start):
    lo, hi = model.design_space
    grid = np.linspace(lo, hi, opts.grid_n)
    grid_grads = np.atleast_2d(mdl.grad_eta(model, grid, theta))
    grid_step = (hi - lo) / (opts.grid_n - 1)
    merge_tol = opts.merge_tol_frac * (hi - lo)
    if start is not None:
        support = np.asarray(start.support, dtype=float).copy()
        weights = np.asarray(start.weights, dtype=float).copy()
    else:
        support, weights = _default_start(model, criterion, theta, prior)

    best_obj = _objective(criterion, model, theta, support, weights, prior)
    min_sens = -np.inf
    stalled = False
    for it in range(1, opts.max_iters + 1):
        if it % 25 == 0 or stalled:
            support, weights = _drop_inactive(
                criterion, model, theta, support, weights, prior, opts.cert_tol
            )
            support, weights, best_obj = _try_drop_small(
                criterion, model, theta, support, weights, prior,
                _objective(criterion, model, theta, support, weights, prior),
            )
            support, weights, best_obj = _relocate_support(
                criterion, model, theta, support, weights, prior, best_obj,
                max(2.0 * grid_step, 1.5 * merge_tol),
            )
        x_star, min_sens = _argmin_sensitivity(
            criterion, model, theta, support, weights, grid, prior,
            opts.polish_iters, grid_grads,
        )
        if min_sens >= -opts.cert_tol:
            support, weights = _drop_inactive(
                criterion, model, theta, support, weights, prior, opts.cert_tol
            )
            support, weights, best_obj = _try_drop_small(
                criterion, model, theta, support, weights, prior,
                _objective(criterion, model, theta, support, weights, prior),
            )
            support, weights, best_obj = _relocate_support(
                criterion, model, theta, support, weights, prior, best_obj,
                max(2.0 * grid_step, 1.5 * merge_tol),
            )
            sup_sens = _sens_at_support(criterion, model, theta, support, weights, prior)
            _, min_sens = _argmin_sensitivity(
                criterion, model, theta, support, weights, grid, prior,
                opts.polish_iters, grid_grads,
            )
            if min_sens >= -opts.cert_tol and np.max(np.abs(sup_sens)) <= opts.cert_tol:
                return Design(support, weights), min_sens
            if stalled:
                break
        elif stalled:
            break
        alpha = 1.0 / (it + 1.0)
        stalled = True
        for _ in range(30):
            s_new = np.append(support, x_star)
            w_new = np.append(weights * (1.0 - alpha), alpha)
            s_new, w_new = _merge_prune(s_new, w_new, merge_tol, opts.prune_tol, (lo, hi))
            try:
                obj = _objective(criterion, model, theta, s_new, w_new, prior)
            except SingularInfo:
                alpha *= 0.5
                continue
            if obj <= best_obj * (1.0 + 1e-12):
                support, weights, best_obj = s_new, w_new, min(obj, best_obj)
                stalled = False
                break
            alpha *= 0.5
        if opts.callback is not None:
            opts.callback(it, best_obj)
    raise NotCertified(
        f"solver stopped with min sensitivity {min_sens:.3e} < {-opts.cert_tol:.1e}",
        design=Design(support, weights), min_phi=min_sens,
    )


def flod_solve(
    model: mdl.ModelSpec,
    criterion: crit.Criterion,
    theta=None,
    opts: SolverOptions | None = None,
    start: Design | None = None,
) -> Design:
    """Locally optimal continuous design at theta by first-order exchange."""
    design, _ = _first_order_solve(model, criterion, theta, opts or SolverOptions(), None, start)
    return design


def solve_augmented(
    model: mdl.ModelSpec,
    criterion: crit.Criterion,
    dist: err.ErrorDist,
    state: est.ExperimentState,
    theta,
    m_next: int,
    opts: SolverOptions | None = None,
    start: Design | None = None,
    fits: list[est.ClusterFit] | None = None,
) -> Design:
    """Optimal next-run design given accumulated observed information.

    Minimizes the criterion of the look-ahead information (the R mixture of
    the candidate design with the information-reweighted history tau).
    """
    tau_s, tau_w, mu_beta = crit.history_mixture(dist, state, m_next, fits)
    prior = _Prior(tau_s, tau_w, mu_beta) if mu_beta < 1.0 else None
    design, _ = _first_order_solve(model, criterion, theta, opts or SolverOptions(), prior, start)
    return design


def certify(
    model: mdl.ModelSpec,
    criterion: crit.Criterion,
    theta,
    design: Design,
    grid_n: int = 4001,
    cert_tol: float = 1e-3,
    polish_iters: int = 30,
) -> Certificate:
    """Equivalence-theorem check: min phi >= -cert_tol on the design space
    and |phi| <= cert_tol at every support point."""
    lo, hi = model.design_space
    grid = np.linspace(lo, hi, grid_n)
    x_min, phi_min = _argmin_sensitivity(
        criterion, model, theta, design.support, design.weights, grid, None, polish_iters
    )
    phi_support = crit.phi_many(criterion, model, design, design.support, theta)
    passed = phi_min >= -cert_tol and bool(np.max(np.abs(phi_support)) <= cert_tol)
    return Certificate(passed, phi_min, x_min, phi_support, cert_tol)


def adams_round(design: Design, n: int) -> ExactDesign:
    """Adams (ceiling) divisor apportionment of n observations.

    Every positive-weight point receives at least one observation; the
    remaining seats go by highest average weight/count, ties broken toward
    the larger weight and then the smaller index.
    """
    w = np.asarray(design.weights, dtype=float)
    positive = np.flatnonzero(w > 0)
    if n < positive.size:
        raise InfeasibleRounding(
            f"cannot place n={n} observations on {positive.size} support points"
        )
    counts = np.zeros(w.size, dtype=int)
    counts[positive] = 1
    for _ in range(n - positive.size):
        priorities = w[positive] / counts[positive]
        best = max(
            range(positive.size),
            key=lambda i: (priorities[i], w[positive[i]], -positive[i]),
        )
        counts[positive[best]] += 1
    return ExactDesign(design.support, counts)


def design_from_exact(exact: ExactDesign) -> Design:
    return Design(exact.support, exact.counts / exact.n)
