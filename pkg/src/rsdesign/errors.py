"""Location-family error distributions.

Three symmetric families, each parameterized by a scale sigma:

* ``cauchy``      f(e) = 1 / (pi*sigma*(1 + (e/sigma)^2))
* ``exp-power``   f(e) proportional to exp(-|e/sigma|^zeta / zeta), zeta > 1
* ``q-gaussian``  f(e) proportional to [1 + (q-1)*e^2/(2*sigma^2)]^(-1/(q-1)),
                  1 < q < 3 (equivalently a Student-t with
                  nu = (3-q)/(q-1) degrees of freedom scaled by
                  sigma*sqrt(2/(3-q)); full support on the real line)

The module exposes the log-density derivative stack l0^(k) for k = 0..4,
exact samplers, the per-observation Fisher information mu, and Efron's
statistical curvature gamma^2. Cauchy and q-Gaussian share the
log-quadratic kernel l = const - c*log(1 + b*e^2), so their derivatives are
computed by one set of closed forms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammainc, gammaln

from . import quadrature

CAUCHY = "cauchy"
EXP_POWER = "exp-power"
Q_GAUSSIAN = "q-gaussian"

FAMILIES = (CAUCHY, EXP_POWER, Q_GAUSSIAN)

_QUAD_OPTS = dict(abs_tol=1e-12, rel_tol=1e-12)


@dataclass(frozen=True)
class ErrorDist:
    """An error law: family name, scale, and shape parameter where needed."""

    family: str
    sigma: float = 1.0
    shape: float | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown error family {self.family!r}")
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError("sigma must be positive and finite")
        if self.family == EXP_POWER:
            if self.shape is None or not self.shape > 1:
                raise ValueError("exp-power requires shape zeta > 1")
        elif self.family == Q_GAUSSIAN:
            if self.shape is None or not (1.0 < self.shape < 3.0):
                raise ValueError("q-gaussian requires shape q in (1, 3)")
        elif self.shape is not None:
            raise ValueError("cauchy takes no shape parameter")


def cauchy(sigma: float = 1.0) -> ErrorDist:
    return ErrorDist(CAUCHY, sigma)


def exp_power(sigma: float = 1.0, zeta: float = 4.0) -> ErrorDist:
    return ErrorDist(EXP_POWER, sigma, zeta)


def q_gaussian(sigma: float = 1.0, q: float = 1.5) -> ErrorDist:
    return ErrorDist(Q_GAUSSIAN, sigma, q)


def _log_kernel_params(dist: ErrorDist) -> tuple[float, float]:
    """(c, b) for the shared kernel l = const - c*log(1 + b*e^2)."""
    if dist.family == CAUCHY:
        return 1.0, 1.0 / dist.sigma**2
    q = dist.shape
    return 1.0 / (q - 1.0), (q - 1.0) / (2.0 * dist.sigma**2)


def student_t_equivalent(dist: ErrorDist) -> tuple[float, float]:
    """(df, scale) of the Student-t representation of a q-Gaussian."""
    if dist.family != Q_GAUSSIAN:
        raise ValueError("student_t_equivalent applies to the q-gaussian family")
    q = dist.shape
    nu = (3.0 - q) / (q - 1.0)
    return nu, dist.sigma * np.sqrt(2.0 / (3.0 - q))


def log_norm_const(dist: ErrorDist) -> float:
    """log of the density normalizer (the constant part of l0^(0))."""
    if dist.family == CAUCHY:
        return -np.log(np.pi * dist.sigma)
    if dist.family == EXP_POWER:
        z = dist.shape
        # integral of exp(-|u|^z/z) over R is 2 * z^(1/z - 1) * Gamma(1/z)
        return -(np.log(2.0 * dist.sigma) + (1.0 / z - 1.0) * np.log(z) + gammaln(1.0 / z))
    nu, s = student_t_equivalent(dist)
    return float(
        gammaln((nu + 1.0) / 2.0) - gammaln(nu / 2.0)
        - 0.5 * np.log(nu * np.pi) - np.log(s)
    )


def logpdf_deriv(dist: ErrorDist, eps, k: int):
    """k-th derivative (k = 0..4) of the log density at eps; vectorizes."""
    if k not in (0, 1, 2, 3, 4):
        raise ValueError(f"derivative order k must be in 0..4, got {k}")
    e = np.asarray(eps, dtype=float)
    scalar = np.ndim(eps) == 0

    if dist.family == EXP_POWER:
        z = dist.shape
        s = dist.sigma
        u = np.abs(e) / s
        with np.errstate(divide="ignore", invalid="ignore"):
            if k == 0:
                out = log_norm_const(dist) - u**z / z
            else:
                coef = -np.prod([z - j for j in range(1, k)]) / s**k
                out = coef * u ** (z - k)
                if k % 2 == 1:
                    out = out * np.sign(e)
    else:
        c, b = _log_kernel_params(dist)
        t = b * e * e
        denom = 1.0 + t
        if k == 0:
            out = log_norm_const(dist) - c * np.log(denom)
        elif k == 1:
            out = -2.0 * c * b * e / denom
        elif k == 2:
            out = -2.0 * c * b * (1.0 - t) / denom**2
        elif k == 3:
            out = 4.0 * c * b**2 * e * (3.0 - t) / denom**3
        else:
            out = 12.0 * c * b**2 * (1.0 - 6.0 * t + t * t) / denom**4
    return float(out) if scalar else out


def loglik_stack(dist: ErrorDist, eps) -> np.ndarray:
    """l0^(k)(eps) for k = 0..4, stacked along the first axis."""
    return np.stack([logpdf_deriv(dist, eps, k) for k in range(5)])


def pdf(dist: ErrorDist, eps):
    return np.exp(logpdf_deriv(dist, eps, 0))


def cdf(dist: ErrorDist, x):
    """Distribution function (used to validate the samplers)."""
    xs = np.asarray(x, dtype=float)
    if dist.family == CAUCHY:
        out = 0.5 + np.arctan(xs / dist.sigma) / np.pi
    elif dist.family == EXP_POWER:
        z = dist.shape
        half = gammainc(1.0 / z, np.abs(xs / dist.sigma) ** z / z)
        out = 0.5 * (1.0 + np.sign(xs) * half)
    else:
        from scipy.stats import t as student_t

        nu, s = student_t_equivalent(dist)
        out = student_t.cdf(xs / s, df=nu)
    return float(out) if np.ndim(x) == 0 else out


def sample(dist: ErrorDist, rng: np.random.Generator, count: int) -> np.ndarray:
    """i.i.d. draws from the error law using exact transforms."""
    if count < 0:
        raise ValueError("count must be nonnegative")
    if count == 0:
        return np.empty(0)
    if dist.family == CAUCHY:
        u = rng.random(count)
        return dist.sigma * np.tan(np.pi * (u - 0.5))
    if dist.family == EXP_POWER:
        z = dist.shape
        # |e|^z ~ Gamma(shape 1/z, scale z*sigma^z), then a fair sign
        g = rng.gamma(1.0 / z, scale=z * dist.sigma**z, size=count)
        signs = np.where(rng.random(count) < 0.5, -1.0, 1.0)
        return signs * g ** (1.0 / z)
    nu, s = student_t_equivalent(dist)
    return s * rng.standard_t(nu, size=count)


_unit_info_cache: dict[ErrorDist, float] = {}
_curvature_cache: dict[ErrorDist, float] = {}


def unit_info(dist: ErrorDist) -> float:
    """Per-observation Fisher information mu = -E[l0^(2)] (> 0)."""
    if dist not in _unit_info_cache:
        def integrand(e):
            f = pdf(dist, e)
            return np.stack([-logpdf_deriv(dist, e, 2) * f])

        val = float(quadrature.integrate_tan_map(integrand, scale=dist.sigma, **_QUAD_OPTS)[0])
        _unit_info_cache[dist] = val
    return _unit_info_cache[dist]


def curvature_sq(dist: ErrorDist) -> float:
    """Efron's statistical curvature gamma^2 of the location family.

    gamma^2 = (nu20*nu02 - nu11^2) / nu20^3 with central moments
    nu_kl = E[ l'^k (l'' - E l'')^l ]; invariant to the scale sigma.
    """
    if dist not in _curvature_cache:
        def integrand(e):
            f = pdf(dist, e)
            l1 = logpdf_deriv(dist, e, 1)
            l2 = logpdf_deriv(dist, e, 2)
            return np.stack([l1 * l1 * f, l2 * f, l2 * l2 * f, l1 * l2 * f])

        m = quadrature.integrate_tan_map(integrand, scale=dist.sigma, **_QUAD_OPTS)
        nu20, el2, el2sq, el1l2 = (float(v) for v in m)
        nu02 = el2sq - el2**2
        nu11 = el1l2  # E[l'] = 0 for these symmetric families
        _curvature_cache[dist] = (nu20 * nu02 - nu11**2) / nu20**3
    return _curvature_cache[dist]
