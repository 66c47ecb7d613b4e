"""Flat TOML configuration.

Every key names a field of one of the nested config dataclasses
(camera, constraints, clustering, GA) or of :class:`PlanConfig` itself,
e.g. ``fod = 40`` or ``population_size = 50``. ``seed`` and ``delta`` are
plan-level and forwarded to the parts that need them. Two keys control
mesh loading: ``weld_tol`` and ``flip_normals``.
"""
from __future__ import annotations

import dataclasses

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigError, IoError
from .mesh import WELD_TOL
from .planner import ClusterConfig, PlanConfig
from .solver import GaParams
from .viewgen import ConstraintSpace
from .visibility import CameraModel

_SECTIONS = {
    "camera": CameraModel,
    "constraints": ConstraintSpace,
    "cluster": ClusterConfig,
    "ga": GaParams,
}
_PLAN_ONLY = {"seed", "delta"}
MESH_KEYS = {"weld_tol": WELD_TOL, "flip_normals": False}


def _field_owner():
    owner = {}
    for section, cls in _SECTIONS.items():
        for f in dataclasses.fields(cls):
            if f.name not in _PLAN_ONLY:
                owner[f.name] = section
    for f in dataclasses.fields(PlanConfig):
        if f.name not in _SECTIONS:
            owner[f.name] = None
    return owner


KNOWN_KEYS = sorted(set(_field_owner()) | set(MESH_KEYS))


def _coerce(key, value, default):
    if isinstance(value, dict):
        raise ConfigError(f"{key}: nested tables are not supported; use flat keys")
    if isinstance(default, bool) and not isinstance(value, bool):
        raise ConfigError(f"{key}: expected true/false, got {value!r}")
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
    if isinstance(default, float) and (isinstance(value, bool) or not isinstance(value, (int, float))):
        raise ConfigError(f"{key}: expected a number, got {value!r}")
    if isinstance(default, float):
        return float(value)
    return value


def build_config(values):
    """PlanConfig plus mesh-loading options from a flat mapping; raises ConfigError."""
    owner = _field_owner()
    unknown = sorted(set(values) - set(owner) - set(MESH_KEYS))
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")

    base = PlanConfig()
    parts = {name: {} for name in _SECTIONS}
    top = {}
    mesh_opts = dict(MESH_KEYS)
    for key, value in values.items():
        if key in MESH_KEYS:
            mesh_opts[key] = _coerce(key, value, MESH_KEYS[key])
            continue
        section = owner[key]
        target = base if section is None else getattr(base, section)
        default = getattr(target, key)
        coerced = value if default is None else _coerce(key, value, default)
        (top if section is None else parts[section])[key] = coerced

    try:
        nested = {name: dataclasses.replace(getattr(base, name), **kw) for name, kw in parts.items()}
        cfg = dataclasses.replace(base, **nested, **top)
        cfg = dataclasses.replace(cfg, ga=dataclasses.replace(cfg.ga, delta=cfg.delta, seed=cfg.seed))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return cfg, mesh_opts


def load_config(path=None, overrides=None):
    values = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                values = tomllib.load(fh)
        except OSError as exc:
            raise IoError(f"cannot read config {path}: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return build_config(values)


def config_to_flat(cfg):
    """Inverse of :func:`build_config` for the PlanConfig part."""
    out = {}
    owner = _field_owner()
    for key, section in owner.items():
        src = cfg if section is None else getattr(cfg, section)
        out[key] = getattr(src, key)
    return out
