"""JSON configuration parsing with exhaustive validation.

The config is a single JSON object with blocks

* ``model``:     {"family", "theta", "design_space"}
* ``error``:     {"family", "sigma", "shape"?}
* ``criterion``: "D" or {"c": [..p floats..]}
* ``study``:     {"n_grid", "replicates"?, "base_seed"?, "strategies"?,
                  "analysis_cluster_frac"?, "workers"?}
* ``solver``:    optional overrides of the design-solver options
* ``adaptive``:  optional {"repeat_mode"?, "negative_handling"?,
                  "obs_per_point"?, "grid_n"?, "polish_iters"?}

Validation is collected: every problem is reported, not just the first.
Unknown keys anywhere are rejected.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from . import adaptive as ad
from . import criteria as crit
from . import design_solver as ds
from . import errors as err
from . import models as mdl
from .exceptions import ConfigError

_TOP_KEYS = {"model", "error", "criterion", "study", "solver", "adaptive"}
_MODEL_KEYS = {"family", "theta", "design_space"}
_ERROR_KEYS = {"family", "sigma", "shape"}
_STUDY_KEYS = {
    "n_grid", "replicates", "base_seed", "strategies",
    "analysis_cluster_frac", "workers",
}
_SOLVER_KEYS = {"grid_n", "polish_iters", "merge_tol_frac", "prune_tol", "cert_tol", "max_iters"}
_ADAPTIVE_KEYS = {"repeat_mode", "negative_handling", "obs_per_point", "grid_n", "polish_iters"}


@dataclass
class AdaptiveOptions:
    repeat_mode: str = ad.NO_REPEAT
    negative_handling: str = ad.CLIP_NEGATIVE
    obs_per_point: int = ad.OBS_PER_INITIAL_POINT
    grid_n: int = 2001
    polish_iters: int = 16


@dataclass
class StudyOptions:
    n_grid: list[int] = field(default_factory=list)
    replicates: int = 500
    base_seed: int = 20240901
    strategies: list[str] = field(default_factory=lambda: [ad.FLOD, ad.AOD, ad.RSD])
    analysis_cluster_frac: float = 5e-3
    workers: int = 1


@dataclass
class Config:
    model: mdl.ModelSpec
    dist: err.ErrorDist
    criterion: crit.Criterion
    study: StudyOptions
    solver: ds.SolverOptions
    adaptive: AdaptiveOptions


def _check_keys(block: dict, allowed: set, where: str, problems: list[str]):
    for key in block:
        if key not in allowed:
            problems.append(f"{where}: unknown key {key!r}")


def _parse_model(block, problems: list[str]):
    if not isinstance(block, dict):
        problems.append("model: must be an object")
        return None
    _check_keys(block, _MODEL_KEYS, "model", problems)
    family = block.get("family")
    if family not in mdl.FAMILIES:
        problems.append(f"model.family: expected one of {mdl.FAMILIES}, got {family!r}")
        return None
    theta = block.get("theta")
    space = block.get("design_space")
    try:
        return mdl.ModelSpec(family, tuple(theta), tuple(space))
    except (TypeError, ValueError) as e:
        problems.append(f"model: {e}")
        return None


def _parse_error(block, problems: list[str]):
    if not isinstance(block, dict):
        problems.append("error: must be an object")
        return None
    _check_keys(block, _ERROR_KEYS, "error", problems)
    family = block.get("family")
    if family not in err.FAMILIES:
        problems.append(f"error.family: expected one of {err.FAMILIES}, got {family!r}")
        return None
    sigma = block.get("sigma", 1.0)
    shape = block.get("shape")
    if family == err.EXP_POWER and shape is None:
        shape = 4.0
    if family == err.Q_GAUSSIAN and shape is None:
        shape = 1.5
    bad = False
    if not (isinstance(sigma, (int, float)) and sigma > 0):
        problems.append(f"error.sigma: must be a positive number, got {sigma!r}")
        bad = True
    if shape is not None and not isinstance(shape, (int, float)):
        problems.append(f"error.shape: must be a number, got {shape!r}")
        bad = True
    elif family == err.Q_GAUSSIAN and not (1.0 < float(shape) < 3.0):
        problems.append(f"error.shape: q-gaussian shape must lie in (1, 3), got {shape!r}")
        bad = True
    elif family == err.EXP_POWER and not float(shape) > 1.0:
        problems.append(f"error.shape: exp-power shape must exceed 1, got {shape!r}")
        bad = True
    if bad:
        return None
    try:
        return err.ErrorDist(family, float(sigma), None if shape is None else float(shape))
    except (TypeError, ValueError) as e:
        problems.append(f"error: {e}")
        return None


def _parse_criterion(block, p: int | None, problems: list[str]):
    if block == "D":
        return crit.d_criterion()
    if isinstance(block, dict) and set(block) == {"c"}:
        try:
            c = crit.c_criterion(block["c"])
        except (TypeError, ValueError) as e:
            problems.append(f"criterion: {e}")
            return None
        if p is not None and len(c.cvec) != p:
            problems.append(f"criterion.c: length {len(c.cvec)} does not match p={p}")
            return None
        return c
    problems.append('criterion: expected "D" or {"c": [...]}')
    return None


def _parse_study(block, problems: list[str]) -> StudyOptions:
    out = StudyOptions()
    if block is None:
        return out
    if not isinstance(block, dict):
        problems.append("study: must be an object")
        return out
    _check_keys(block, _STUDY_KEYS, "study", problems)
    if "n_grid" in block:
        grid = block["n_grid"]
        if not (isinstance(grid, list) and grid and all(isinstance(n, int) and n > 0 for n in grid)):
            problems.append("study.n_grid: must be a nonempty list of positive integers")
        else:
            out.n_grid = grid
    for key, cond, desc in (
        ("replicates", lambda v: isinstance(v, int) and v >= 1, "an integer >= 1"),
        ("base_seed", lambda v: isinstance(v, int) and v >= 0, "a nonnegative integer"),
        ("workers", lambda v: isinstance(v, int) and v >= 1, "an integer >= 1"),
        ("analysis_cluster_frac", lambda v: isinstance(v, (int, float)) and 0 <= v < 1, "in [0, 1)"),
    ):
        if key in block:
            if cond(block[key]):
                setattr(out, key, block[key])
            else:
                problems.append(f"study.{key}: must be {desc}, got {block[key]!r}")
    if "strategies" in block:
        strategies = block["strategies"]
        valid = (ad.FLOD, ad.AOD, ad.RSD)
        if not (isinstance(strategies, list) and strategies
                and all(s in valid for s in strategies)):
            problems.append(f"study.strategies: must be a nonempty subset of {valid}")
        else:
            out.strategies = strategies
    return out


def _parse_options(block, cls, allowed, where, problems: list[str]):
    out = cls()
    if block is None:
        return out
    if not isinstance(block, dict):
        problems.append(f"{where}: must be an object")
        return out
    _check_keys(block, allowed, where, problems)
    for key in allowed & set(block):
        setattr(out, key, block[key])
    return out


def parse_config(text: str) -> Config:
    """Parse and fully validate a JSON config; raises ConfigError carrying
    every problem found."""
    problems: list[str] = []
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError([f"invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}"])
    if not isinstance(raw, dict):
        raise ConfigError(["top level: must be a JSON object"])
    _check_keys(raw, _TOP_KEYS, "top level", problems)
    for required in ("model", "error", "criterion"):
        if required not in raw:
            problems.append(f"top level: missing required block {required!r}")

    model = _parse_model(raw.get("model"), problems) if "model" in raw else None
    dist = _parse_error(raw.get("error"), problems) if "error" in raw else None
    criterion = (
        _parse_criterion(raw.get("criterion"), model.p if model else None, problems)
        if "criterion" in raw else None
    )
    study = _parse_study(raw.get("study"), problems)
    solver = _parse_options(raw.get("solver"), ds.SolverOptions, _SOLVER_KEYS, "solver", problems)
    adaptive_opts = _parse_options(
        raw.get("adaptive"), AdaptiveOptions, _ADAPTIVE_KEYS, "adaptive", problems
    )
    if adaptive_opts.repeat_mode not in (ad.CLUSTERED, ad.NO_REPEAT):
        problems.append(f"adaptive.repeat_mode: unknown mode {adaptive_opts.repeat_mode!r}")
    if adaptive_opts.negative_handling not in (ad.CLIP_NEGATIVE, ad.SHIFT_NEGATIVE):
        problems.append(
            f"adaptive.negative_handling: unknown value {adaptive_opts.negative_handling!r}"
        )

    if problems:
        raise ConfigError(problems)
    return Config(model, dist, criterion, study, solver, adaptive_opts)
