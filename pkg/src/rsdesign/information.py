"""Information matrices for nonlinear location-family regression.

All measures are p x p symmetric matrices built from per-support-point
gradients eta_dot and scalar information weights:

* M      normalized expected information  sum_i w_i g_i g_i^T
* F      expected information in the sample,  n * mu * M
* I      observed information  sum_i i_yi(eta_i) g_i g_i^T - sum_i ldot_i h_i
* J      hybrid measure  sum_i i_{a_i} g_i g_i^T  (per-cluster observed
         information at the per-cluster location MLE; gradients at theta)
* K      first observed-information term  sum_i i_yi(eta_i) g_i g_i^T
         (no per-cluster MLE; may be indefinite)
* That   one-step look-ahead  mu * m_next * M(next) + J(history)
* S      no-repeat look-ahead  mu * m_next * M(next) + K(history),
         K regularized to nonnegative-definiteness when needed

``cond_info_oracle`` evaluates the conditional expected information of a
single location cluster given its residual configuration by 1-D quadrature
over the conditional density of the location MLE. It has no closed form and
serves as the reference the cheap measures are compared against.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import errors as err
from . import estimation as est
from . import models as mdl
from . import quadrature

INFO_KINDS = ("I", "F", "M", "J", "K", "That", "S", "R", "H_oracle")


@dataclass(frozen=True)
class InfoMatrix:
    """A p x p information matrix tagged with the measure it represents."""

    matrix: np.ndarray
    kind: str
    normalized: bool = False  # True when scaled by (n*mu)^-1 like M

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        object.__setattr__(self, "matrix", 0.5 * (m + m.T))
        if self.kind not in INFO_KINDS:
            raise ValueError(f"unknown info kind {self.kind!r}")

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.matrix)[0])


def as_matrix(info) -> np.ndarray:
    """Accept an InfoMatrix or a bare array."""
    return info.matrix if isinstance(info, InfoMatrix) else np.asarray(info, dtype=float)


def _support_weights(design) -> tuple[np.ndarray, np.ndarray]:
    if hasattr(design, "support"):
        return np.asarray(design.support, float), np.asarray(design.weights, float)
    support, weights = design
    return np.asarray(support, float), np.asarray(weights, float)


def _weighted_gram(G: np.ndarray, w: np.ndarray) -> np.ndarray:
    return G.T @ (w[:, None] * G)


def info_M(model: mdl.ModelSpec, design, theta=None) -> InfoMatrix:
    """Normalized expected information of a weighted design."""
    support, weights = _support_weights(design)
    if np.any(weights < 0):
        raise ValueError("design weights must be nonnegative")
    G = np.atleast_2d(mdl.grad_eta(model, support, theta))
    return InfoMatrix(_weighted_gram(G, weights), "M", normalized=True)


def info_F(model: mdl.ModelSpec, dist: err.ErrorDist, design, n: int, theta=None) -> InfoMatrix:
    """Expected information in a sample of size n: F = n * mu * M."""
    m = info_M(model, design, theta)
    return InfoMatrix(n * err.unit_info(dist) * m.matrix, "F")


def info_I_obs(model, dist, state: est.ExperimentState, theta) -> InfoMatrix:
    """Observed information at theta (may be indefinite)."""
    cs = est.cluster_stats(model, dist, state, theta)
    mat = _weighted_gram(cs.grads, cs.obs_infos)
    mat -= np.tensordot(cs.ldots, cs.hessians, axes=1)
    return InfoMatrix(mat, "I")


def info_K(model, dist, state: est.ExperimentState, theta) -> InfoMatrix:
    """First term of the observed information (may be indefinite)."""
    cs = est.cluster_stats(model, dist, state, theta)
    return InfoMatrix(_weighted_gram(cs.grads, cs.obs_infos), "K")


def info_J_hybrid(
    model, dist, state: est.ExperimentState, theta, fits: list[est.ClusterFit] | None = None
) -> InfoMatrix:
    """Hybrid measure: per-cluster observed info at the cluster MLEs,
    gradients at theta."""
    if fits is None:
        fits = est.fit_clusters(dist, state)
    G = np.atleast_2d(mdl.grad_eta(model, state.representatives, theta))
    ia = np.array([f.obs_info for f in fits])
    return InfoMatrix(_weighted_gram(G, ia), "J")


def info_That(
    model, dist, state, theta, next_design, m_next: int,
    fits: list[est.ClusterFit] | None = None,
) -> InfoMatrix:
    """Look-ahead information: mu * m_next * M(next_design) + J(history)."""
    mu = err.unit_info(dist)
    mnext = info_M(model, next_design, theta).matrix
    j = info_J_hybrid(model, dist, state, theta, fits).matrix
    return InfoMatrix(mu * m_next * mnext + j, "That")


def regularize_psd(mat: np.ndarray, reg_c: float | None = None) -> np.ndarray:
    """Add c*I when the minimum eigenvalue is negative.

    With explicit reg_c the shift is exactly reg_c. In automatic mode the
    shift is big enough to clear the negative eigenvalue plus a scale-aware
    margin of 1e-6 * |trace| / p.
    """
    lam = float(np.linalg.eigvalsh(mat)[0])
    if lam >= 0:
        return mat
    p = mat.shape[0]
    if reg_c is None:
        reg_c = -lam + 1e-6 * abs(np.trace(mat)) / p
    return mat + reg_c * np.eye(p)


def info_S(
    model, dist, state, theta, next_design, m_next: int, reg_c: float | None = None
) -> InfoMatrix:
    """No-repeat look-ahead: mu * m_next * M(next_design) + regularized K."""
    mu = err.unit_info(dist)
    mnext = info_M(model, next_design, theta).matrix
    k = regularize_psd(info_K(model, dist, state, theta).matrix, reg_c)
    return InfoMatrix(mu * m_next * mnext + k, "S")


def cond_info_oracle(
    dist: err.ErrorDist,
    config,
    eta_true_offset: float = 0.0,
    *,
    abs_tol: float = 1e-10,
    rel_tol: float = 1e-10,
) -> float:
    """Conditional expected observed information of one location cluster.

    Given the residual configuration a = y - eta_hat of a cluster, the
    location MLE t has conditional density p(t | a) proportional to
    prod_k f0(a_k + t - eta); the conditional expected information at eta is

        h_a(eta) = integral of [-sum_k l0''(a_k + t - eta)] p(t | a) dt.

    Evaluated at eta = eta_hat - eta_true_offset. Translation invariance of
    the location family makes the value independent of the offset; the
    offset enters the computation explicitly and cancels through the
    normalization, which the tests verify numerically.
    """
    a = np.asarray(config, dtype=float)
    if a.size == 0:
        raise ValueError("config must be nonempty")
    # work in coordinates centered at eta_hat: t' = t - eta_hat, so the
    # weight peaks at t' = -offset where the total log density is maximal
    off = float(eta_true_offset)
    ref = float(np.sum(err.logpdf_deriv(dist, a, 0)))

    def integrand(tp: np.ndarray) -> np.ndarray:
        shifted = a[:, None] + tp[None, :] + off
        logw = np.sum(err.logpdf_deriv(dist, shifted, 0), axis=0) - ref
        w = np.exp(logw)
        s = -np.sum(err.logpdf_deriv(dist, shifted, 2), axis=0)
        return np.stack([w, w * s])

    norm, num = quadrature.integrate_tan_map(
        integrand, scale=dist.sigma, center=-off,
        abs_tol=abs_tol, rel_tol=rel_tol,
    )
    return float(num / norm)


def that_mixture_gap(
    model, dist, state, theta, x: float, m_next: int = 1,
    fits: list[est.ClusterFit] | None = None,
) -> float:
    """Max-abs gap between the look-ahead at a one-point design and its
    equivalent mixture form.

    With Q the total per-cluster observed information, beta defined by
    m_next / (mu * m_next + Q) and tau the information-reweighted history
    design, the identity reads

        That(delta_x) = (m_next / beta) * M(mix),
        mix = mu*beta * delta_x + (1 - mu*beta) * tau.
    """
    if fits is None:
        fits = est.fit_clusters(dist, state)
    ia = np.array([f.obs_info for f in fits])
    q = float(np.sum(ia))
    mu = err.unit_info(dist)
    beta = m_next / (mu * m_next + q)
    that = info_That(
        model, dist, state, theta, (np.array([x]), np.array([1.0])), m_next, fits
    ).matrix
    mix_support = np.append(state.representatives, x)
    mix_weights = np.append((1.0 - mu * beta) * ia / q, mu * beta)
    mix = info_M(model, (mix_support, mix_weights), theta).matrix
    return float(np.max(np.abs(that - (m_next / beta) * mix)))
