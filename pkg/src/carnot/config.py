"""Experiment configuration: JSON in, constructed objects out.

A config file only needs to override the defaults below.  Field menus are
sympy expressions in x1..xn or probe directions; integrands use the menu
serialization of :mod:`carnot.functionals`.
"""

from __future__ import annotations

import copy
import importlib
import json

import numpy as np

from . import groups
from .fields import GridDomain, ScalarField, from_expression, probe_field
from .functionals import (Functional, IntegrandFunctional, BlackBoxFunctional,
                          integrand_from_config)
from .mollify import MollifierFamily
from .recovery import MinimizeSettings, uniform_xi_grid


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


DEFAULTS = {
    "group": "heisenberg:1",
    "norm": "weighted-max",
    "grid": {"lo": None, "hi": None, "shape": 12},
    "fields": [{"expr": "x1**2 + 0.5*x2"}],
    "integrand": {"kind": "power", "p": 2},
    "p": 2.0,
    "mollifier_resolution": 9,
    "schedules": {
        "eps": [0.4, 0.2, 0.1],
        "rho": [0.9, 0.7, 0.5],
        "delta": 1.0,
        "h": [1, 2, 4, 8, 16],
    },
    "xi_grid": {"radius": 4.0, "points": 9},
    "recovery": {"ball_radius": 1.0, "cells_per_axis": 12},
    "gamma": {"kind": "offset", "base": {"kind": "power", "p": 2}, "scale": 1.0},
    "minimizer": {"max_iter": 200, "step_rule": "sqrt"},
    "samples": 200,
    "seed": 0,
    "tol_scale": 1.0,
}


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def load_config(path: str | None = None, overrides: dict | None = None) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        try:
            with open(path) as fh:
                cfg = _merge(cfg, json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if overrides:
        cfg = _merge(cfg, overrides)
    return cfg


def build_group(cfg: dict) -> groups.StratifiedGroup:
    try:
        return groups.from_config(cfg["group"])
    except (KeyError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def build_norm(cfg: dict, group: groups.StratifiedGroup) -> groups.HomogeneousNorm:
    try:
        return group.norm(cfg["norm"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def build_grid(cfg: dict, group: groups.StratifiedGroup) -> GridDomain:
    spec = cfg["grid"]
    lo = spec.get("lo") or [-1.0] * group.n
    hi = spec.get("hi") or [1.0] * group.n
    if len(lo) != group.n or len(hi) != group.n:
        raise ConfigError(f"grid box must have {group.n} axes")
    return GridDomain.box(np.asarray(lo, float), np.asarray(hi, float), spec["shape"])


def build_fields(cfg: dict, group: groups.StratifiedGroup) -> list:
    out = []
    for entry in cfg["fields"]:
        if "expr" in entry:
            field = from_expression(group, entry["expr"])
        elif "probe" in entry:
            field = probe_field(group, np.asarray(entry["probe"], float))
        else:
            raise ConfigError(f"field entry needs 'expr' or 'probe': {entry}")
        if "name" in entry:
            import dataclasses
            field = dataclasses.replace(field, name=entry["name"])
        out.append(field)
    return out


def build_functional(cfg: dict, group: groups.StratifiedGroup) -> Functional:
    spec = cfg["integrand"]
    if "blackbox" in spec:
        mod_name, _, attr = spec["blackbox"].partition(":")
        try:
            target = getattr(importlib.import_module(mod_name), attr)
        except (ImportError, AttributeError) as exc:
            raise ConfigError(f"cannot resolve blackbox {spec['blackbox']}: {exc}") from exc
        obj = target(group) if callable(target) and not isinstance(target, Functional) else target
        if isinstance(obj, Functional):
            return obj
        return BlackBoxFunctional(obj, name=spec["blackbox"])
    try:
        return IntegrandFunctional(group, integrand_from_config(spec, group.m))
    except (KeyError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def build_mollifier(cfg: dict, norm: groups.HomogeneousNorm) -> MollifierFamily:
    return MollifierFamily(norm, resolution=int(cfg["mollifier_resolution"]))


def build_xi_grid(cfg: dict, group: groups.StratifiedGroup) -> np.ndarray:
    spec = cfg["xi_grid"]
    return uniform_xi_grid(group.m, float(spec["radius"]), int(spec["points"]))


def build_minimizer_settings(cfg: dict) -> MinimizeSettings:
    spec = cfg["minimizer"]
    return MinimizeSettings(max_iter=int(spec.get("max_iter", 200)),
                            step_rule=str(spec.get("step_rule", "sqrt")),
                            step_scale=spec.get("step_scale"))


def build_gamma_sequence(cfg: dict, group: groups.StratifiedGroup) -> list:
    """(h, integrand) pairs for the variational-limit experiment."""
    from .functionals import OffsetIntegrand, ShiftedArgIntegrand

    spec = cfg["gamma"]
    try:
        hs = [int(h) for h in cfg["schedules"]["h"]]
        base = integrand_from_config(spec["base"], group.m)
        kind = spec.get("kind", "constant")
        if kind == "offset":
            scale = float(spec.get("scale", 1.0))
            return [(h, OffsetIntegrand(base, scale / h)) for h in hs]
        if kind == "alternating":
            shift = np.asarray(spec["shift"], float)
            return [(h, ShiftedArgIntegrand(base, (-1) ** h * shift)) for h in hs]
        if kind == "constant":
            return [(h, base) for h in hs]
    except (KeyError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    raise ConfigError(f"unknown gamma sequence kind {spec.get('kind')!r}")
