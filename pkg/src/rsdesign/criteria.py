"""Optimality criteria, their directional derivatives, and the sensitivity
function of the information-reweighted adaptive design.

Two criteria are supported, both positive homogeneous and convex:

* D:  psi(M) = det(M)^(-1/p)
* c:  psi(M) = c^T M^-1 c  (generalized inverse when M is singular but
      c lies in its range)

Directional derivatives phi are normalized so that at a psi-optimal design
the minimum of phi over the design space is zero, attained at the support
points, and so that phi is dimensionless (certification tolerances apply
uniformly across criteria and parameter scales):

* D:  phi(x) = p - g_x^T M^-1 g_x
* c:  phi(x) = 1 - (c^T M^-1 g_x)^2 / (c^T M^-1 c)

The sensitivity nu generalizes phi when history carries observed
information: with Q the total per-cluster observed information, tau the
information-reweighted history design and

    R = mu*beta * M(xi) + (1 - mu*beta) * M(tau),
    beta = m_next / (mu * m_next + Q),

* D:  nu(x) = tr(M(xi) R^-1) - g_x^T R^-1 g_x
* c:  nu(x) = 1 - (c^T R^-1 g_x)^2 / (c^T R^-1 M(xi) R^-1 c),

again with minimum zero at the optimum. With no accumulated information
(Q = 0) both reduce exactly to phi.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import errors as err
from . import estimation as est
from . import information as info
from . import models as mdl
from .exceptions import NegativeQ, SingularInfo


@dataclass(frozen=True)
class Criterion:
    kind: str  # "D" or "c"
    cvec: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in ("D", "c"):
            raise ValueError(f"criterion kind must be 'D' or 'c', got {self.kind!r}")
        if self.kind == "c":
            if self.cvec is None:
                raise ValueError("c criterion needs a direction vector")
            c = tuple(float(v) for v in self.cvec)
            if not any(v != 0.0 for v in c):
                raise ValueError("c direction must be nonzero")
            object.__setattr__(self, "cvec", c)
        elif self.cvec is not None:
            raise ValueError("D criterion takes no direction vector")


def d_criterion() -> Criterion:
    return Criterion("D")


def c_criterion(cvec) -> Criterion:
    return Criterion("c", tuple(np.asarray(cvec, dtype=float)))


def _solve_spd(mat: np.ndarray, rhs: np.ndarray, rcond: float = 1e-12) -> np.ndarray:
    """Solve against a symmetric nonnegative-definite matrix through its
    eigendecomposition; generalized inverse if singular, provided the
    right-hand side lies in the retained range."""
    evals, vecs = np.linalg.eigh(mat)
    if not np.all(np.isfinite(evals)):
        raise SingularInfo("information matrix has non-finite entries")
    keep = evals > rcond * max(float(evals[-1]), 0.0)
    if not np.any(keep):
        raise SingularInfo("information matrix vanishes")
    coords = vecs.T @ rhs
    dropped = coords[~keep]
    if dropped.size and np.linalg.norm(dropped) > 1e-7 * max(np.linalg.norm(rhs), 1e-300):
        raise SingularInfo(
            "information matrix is singular and the c direction is outside its range"
        )
    sol = vecs[:, keep] @ (coords[keep] / evals[keep])
    return sol


def _check_nonsingular(m: np.ndarray) -> None:
    evals = np.linalg.eigvalsh(m)
    if not np.all(np.isfinite(evals)) or evals[0] <= max(evals[-1], 0.0) * 1e-13:
        raise SingularInfo("information matrix is numerically singular")


def psi(criterion: Criterion, matrix) -> float:
    """Criterion value at an information matrix (smaller is better)."""
    m = info.as_matrix(matrix)
    p = m.shape[0]
    if criterion.kind == "D":
        _check_nonsingular(m)
        det = float(np.linalg.det(m))
        if not np.isfinite(det) or det <= 0:
            raise SingularInfo("determinant is not positive")
        return det ** (-1.0 / p)
    c = np.asarray(criterion.cvec, dtype=float)
    if c.size != p:
        raise ValueError(f"c direction has length {c.size}, expected {p}")
    return float(c @ _solve_spd(m, c))


def phi_many(criterion: Criterion, model: mdl.ModelSpec, design, xs, theta=None) -> np.ndarray:
    """Directional derivative phi at an array of candidate points."""
    m = info.info_M(model, design, theta).matrix
    G = np.atleast_2d(mdl.grad_eta(model, np.atleast_1d(np.asarray(xs, float)), theta))
    return _sensitivity_many(criterion, m, m, G)


def phi(criterion: Criterion, model: mdl.ModelSpec, design, x: float, theta=None) -> float:
    """Directional derivative of psi at the design toward the point x."""
    return float(phi_many(criterion, model, design, np.atleast_1d(float(x)), theta)[0])


def make_sensitivity(
    criterion: Criterion, m_design: np.ndarray, m_eval: np.ndarray
):
    """Precompute the sensitivity evaluator for fixed matrices.

    Returns a callable mapping a gradient block G of shape (npts, p) to
    sensitivity values of shape (npts,). Shared kernel for phi
    (m_eval = m_design) and nu (m_eval = R).
    """
    if criterion.kind == "D":
        _check_nonsingular(m_eval)
        inv = np.linalg.inv(m_eval)
        trace = float(np.trace(inv @ m_design))

        def evaluate(G: np.ndarray) -> np.ndarray:
            return trace - np.einsum("ij,jk,ik->i", G, inv, G)

        return evaluate

    c = np.asarray(criterion.cvec, dtype=float)
    rc = _solve_spd(m_eval, c)
    const = float(rc @ m_design @ rc)
    if not np.isfinite(const) or const <= 0:
        raise SingularInfo("c direction carries no information under this design")

    def evaluate(G: np.ndarray) -> np.ndarray:
        proj = G @ rc
        return 1.0 - proj**2 / const

    return evaluate


def _sensitivity_many(
    criterion: Criterion, m_design: np.ndarray, m_eval: np.ndarray, G: np.ndarray
) -> np.ndarray:
    return make_sensitivity(criterion, m_design, m_eval)(G)


def history_mixture(
    dist: err.ErrorDist,
    state: est.ExperimentState,
    m_next: int,
    fits: list[est.ClusterFit] | None = None,
):
    """(tau_support, tau_weights, mu_beta) of the information-reweighted
    history; Q = 0 collapses the mixture onto the candidate design."""
    if fits is None:
        fits = est.fit_clusters(dist, state)
    ia = np.array([f.obs_info for f in fits])
    if np.any(ia < 0):
        raise NegativeQ("negative per-cluster observed information (failed location fit?)")
    q = float(np.sum(ia))
    mu = err.unit_info(dist)
    mu_beta = mu * m_next / (mu * m_next + q)
    if q == 0.0:
        return state.representatives, np.zeros(state.d), 1.0
    return state.representatives, ia / q, mu_beta


def nu_many(
    criterion: Criterion,
    model: mdl.ModelSpec,
    dist: err.ErrorDist,
    state: est.ExperimentState,
    theta,
    m_next: int,
    xs,
    *,
    design,
    fits: list[est.ClusterFit] | None = None,
) -> np.ndarray:
    """Sensitivity nu of the look-ahead criterion at an array of points.

    ``design`` is the candidate next-run design xi under evaluation.
    """
    tau_s, tau_w, mu_beta = history_mixture(dist, state, m_next, fits)
    m_design = info.info_M(model, design, theta).matrix
    if mu_beta >= 1.0:
        r = m_design
    else:
        m_tau = info.info_M(model, (tau_s, tau_w), theta).matrix
        r = mu_beta * m_design + (1.0 - mu_beta) * m_tau
    G = np.atleast_2d(mdl.grad_eta(model, np.atleast_1d(np.asarray(xs, float)), theta))
    return _sensitivity_many(criterion, m_design, r, G)


def nu(
    criterion: Criterion,
    model: mdl.ModelSpec,
    dist: err.ErrorDist,
    state: est.ExperimentState,
    theta,
    m_next: int,
    x: float,
    *,
    design,
    fits: list[est.ClusterFit] | None = None,
) -> float:
    """Sensitivity at one point; zero (with minimum zero) at the optimum."""
    return float(
        nu_many(
            criterion, model, dist, state, theta, m_next,
            np.atleast_1d(float(x)), design=design, fits=fits,
        )[0]
    )
