"""Nonlinear mean-function families with exact parameter derivatives.

Three families over a scalar design variable x on a compact interval:

* ``michaelis-menten``   eta = th1*x / (th2 + x),            p = 2
* ``exp-decay``          eta = th1*(1 - exp(-th2*x)),        p = 2
* ``compartmental``      eta = th1*(exp(-th2*x) - exp(-th3*x)), p = 3

Gradients and Hessians with respect to theta are hand-coded closed forms
(no automatic differentiation); they vectorize over arrays of x.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .exceptions import DomainError

MICHAELIS_MENTEN = "michaelis-menten"
EXP_DECAY = "exp-decay"
COMPARTMENTAL = "compartmental"

FAMILIES = (MICHAELIS_MENTEN, EXP_DECAY, COMPARTMENTAL)

_NPARAMS = {MICHAELIS_MENTEN: 2, EXP_DECAY: 2, COMPARTMENTAL: 3}


@dataclass(frozen=True)
class ModelSpec:
    """A mean-function family, its parameter vector and design space."""

    family: str
    theta: tuple[float, ...]
    design_space: tuple[float, float]

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown model family {self.family!r}")
        theta = tuple(float(t) for t in self.theta)
        object.__setattr__(self, "theta", theta)
        lo, hi = (float(v) for v in self.design_space)
        object.__setattr__(self, "design_space", (lo, hi))
        if len(theta) != _NPARAMS[self.family]:
            raise ValueError(
                f"{self.family} takes {_NPARAMS[self.family]} parameters, got {len(theta)}"
            )
        if not all(np.isfinite(theta)):
            raise ValueError("theta must be finite")
        if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
            raise ValueError("design_space must be a finite interval [x_lo, x_hi] with x_lo < x_hi")
        check_theta(self.family, theta)

    @property
    def p(self) -> int:
        return _NPARAMS[self.family]

    def with_theta(self, theta) -> "ModelSpec":
        """Same family and design space, different parameter vector."""
        return replace(self, theta=tuple(float(t) for t in np.asarray(theta)))


def check_theta(family: str, theta) -> None:
    """Raise if theta violates the family's parameter constraints."""
    t = np.asarray(theta, dtype=float)
    if family == MICHAELIS_MENTEN:
        if not (t[0] > 0 and t[1] > 0):
            raise ValueError("michaelis-menten requires th1 > 0 and th2 > 0")
    elif family == EXP_DECAY:
        if not (t[0] > 0 and t[1] > 0):
            raise ValueError("exp-decay requires th1 > 0 and th2 > 0")
    elif family == COMPARTMENTAL:
        # th3 > th2 keeps the concentration nonnegative on x >= 0
        # (fast absorption, slow elimination)
        if not (t[0] > 0 and t[1] > 0 and t[2] > t[1]):
            raise ValueError("compartmental requires th1 > 0, th2 > 0 and th3 > th2")
    else:
        raise ValueError(f"unknown model family {family!r}")


def theta_valid(family: str, theta) -> bool:
    try:
        check_theta(family, theta)
    except ValueError:
        return False
    return True


def _check_domain(model: ModelSpec, x) -> np.ndarray:
    xs = np.asarray(x, dtype=float)
    lo, hi = model.design_space
    if np.any(xs < lo) or np.any(xs > hi) or not np.all(np.isfinite(xs)):
        raise DomainError(f"x outside design space [{lo}, {hi}]")
    return xs


def eta(model: ModelSpec, x, theta=None):
    """Mean response at x; vectorizes over x."""
    xs = _check_domain(model, x)
    t = np.asarray(model.theta if theta is None else theta, dtype=float)
    if model.family == MICHAELIS_MENTEN:
        out = t[0] * xs / (t[1] + xs)
    elif model.family == EXP_DECAY:
        out = t[0] * (1.0 - np.exp(-t[1] * xs))
    else:
        out = t[0] * (np.exp(-t[1] * xs) - np.exp(-t[2] * xs))
    return float(out) if np.isscalar(x) else out


def grad_eta(model: ModelSpec, x, theta=None) -> np.ndarray:
    """Gradient of eta with respect to theta.

    Returns shape (p,) for scalar x, else (len(x), p).
    """
    xs = _check_domain(model, x)
    t = np.asarray(model.theta if theta is None else theta, dtype=float)
    if model.family == MICHAELIS_MENTEN:
        denom = t[1] + xs
        g = np.stack([xs / denom, -t[0] * xs / denom**2], axis=-1)
    elif model.family == EXP_DECAY:
        e = np.exp(-t[1] * xs)
        g = np.stack([1.0 - e, t[0] * xs * e], axis=-1)
    else:
        e2 = np.exp(-t[1] * xs)
        e3 = np.exp(-t[2] * xs)
        g = np.stack([e2 - e3, -t[0] * xs * e2, t[0] * xs * e3], axis=-1)
    return g


def hess_eta(model: ModelSpec, x, theta=None) -> np.ndarray:
    """Hessian of eta with respect to theta, assembled symmetric.

    Returns shape (p, p) for scalar x, else (len(x), p, p).
    """
    xs = _check_domain(model, x)
    t = np.asarray(model.theta if theta is None else theta, dtype=float)
    scalar = np.ndim(xs) == 0
    xs = np.atleast_1d(xs)
    n = xs.shape[0]
    p = model.p
    h = np.zeros((n, p, p))
    if model.family == MICHAELIS_MENTEN:
        denom = t[1] + xs
        h[:, 0, 1] = h[:, 1, 0] = -xs / denom**2
        h[:, 1, 1] = 2.0 * t[0] * xs / denom**3
    elif model.family == EXP_DECAY:
        e = np.exp(-t[1] * xs)
        h[:, 0, 1] = h[:, 1, 0] = xs * e
        h[:, 1, 1] = -t[0] * xs**2 * e
    else:
        e2 = np.exp(-t[1] * xs)
        e3 = np.exp(-t[2] * xs)
        h[:, 0, 1] = h[:, 1, 0] = -xs * e2
        h[:, 0, 2] = h[:, 2, 0] = xs * e3
        h[:, 1, 1] = t[0] * xs**2 * e2
        h[:, 2, 2] = -t[0] * xs**2 * e3
    return h[0] if scalar else h
