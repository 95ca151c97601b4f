"""Strict JSON run configuration.

Example document::

    {
      "system": {"preset": "worked_example"},
      "n": 200, "dt": 2e-4, "scheme": "imex_cn",
      "schedule": {"kind": "uniform", "T": 0.5},
      "initial": {"x": {"sine": 2.0, "mode": 1}, "y": 2.0},
      "disturbance": {"level": 0.01,
                      "shape11": [0, 3.14159, -1], "p11": {"kind": "sinusoid", "frequency": 2.0},
                      "p12": {"kind": "sinusoid", "frequency": 1.0}},
      "horizon": 20.0, "sample_dt": 0.01, "seed": 0
    }

Unknown keys anywhere raise :class:`ConfigError` naming the offending field.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Any, Optional

import numpy as np

from .certificate import ExampleParams, worked_example_params
from .functionspace import Poly, h01_norm_poly
from .pde_ode import SCHEMES, DisturbanceSignal, HybridState, TimeProfile


class ConfigError(ValueError):
    pass


SYSTEM_KEYS = {"preset", "a", "c", "l", "B", "D", "alpha", "beta", "gamma",
               "delta_jump", "kappa1", "kappa3"}
TOP_KEYS = {"system", "n", "dt", "scheme", "schedule", "initial", "disturbance", "horizon",
            "sample_dt", "seed", "output", "epsilon", "margin", "floor", "sweep"}
PROFILE_KEYS = {"kind", "amplitude", "frequency", "phase", "period", "seed"}
DIST_KEYS = {"level", "shape11", "p11", "p12", "shape21", "p21", "p22"}
SCHEDULE_KEYS = {"kind", "T", "taus"}
INITIAL_KEYS = {"x", "y"}
SWEEP_KEYS = {"axis", "values", "workers"}
SWEEP_AXES = ("T", "amplitude", "n")

_POLY_MAP = {"B": "B_poly", "D": "D_poly", "alpha": "alpha_poly", "beta": "beta_poly",
             "gamma": "gamma_poly"}


def _check_keys(obj: Any, allowed: set, where: str):
    if not isinstance(obj, dict):
        raise ConfigError(f"{where}: expected an object")
    extra = sorted(set(obj) - allowed)
    if extra:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(extra)}")


def _num(obj, key, where, default=None, positive=False, nonneg=False, integer=False):
    if key not in obj:
        if default is None:
            raise ConfigError(f"{where}.{key}: required")
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}.{key}: expected a number, got {v!r}")
    if integer and not float(v).is_integer():
        raise ConfigError(f"{where}.{key}: expected an integer, got {v!r}")
    if not math.isfinite(v):
        raise ConfigError(f"{where}.{key}: must be finite")
    if positive and not v > 0:
        raise ConfigError(f"{where}.{key}: must be positive, got {v!r}")
    if nonneg and v < 0:
        raise ConfigError(f"{where}.{key}: must be nonnegative, got {v!r}")
    return int(v) if integer else float(v)


def _poly(v, where) -> Poly:
    if not isinstance(v, list) or not all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in v):
        raise ConfigError(f"{where}: expected an array of coefficients")
    try:
        return Poly(v if v else [0.0])
    except ValueError as e:
        raise ConfigError(f"{where}: {e}") from None


def parse_system(obj) -> ExampleParams:
    where = "system"
    _check_keys(obj, SYSTEM_KEYS, where)
    preset = obj.get("preset")
    if preset not in (None, "worked_example"):
        raise ConfigError(f"{where}.preset: unknown preset {preset!r}")
    kw = {}
    for k in ("a", "c", "l", "delta_jump", "kappa1", "kappa3"):
        if k in obj:
            kw[k] = _num(obj, k, where)
    for k, attr in _POLY_MAP.items():
        if k in obj:
            kw[attr] = _poly(obj[k], f"{where}.{k}")
    try:
        if preset == "worked_example":
            return worked_example_params(**kw)
        for k in ("a", "c", "l"):
            if k not in kw:
                raise ConfigError(f"{where}.{k}: required without a preset")
        return ExampleParams(**kw)
    except (ValueError, TypeError) as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(f"{where}: {e}") from None


def parse_profile(obj, where) -> TimeProfile:
    _check_keys(obj, PROFILE_KEYS, where)
    kind = obj.get("kind", "zero")
    try:
        return TimeProfile(kind=kind,
                           amplitude=_num(obj, "amplitude", where, 1.0 if kind != "zero" else 0.0),
                           frequency=_num(obj, "frequency", where, 0.0),
                           phase=_num(obj, "phase", where, 0.0),
                           period=_num(obj, "period", where, 1.0),
                           seed=_num(obj, "seed", where, 0, integer=True))
    except ValueError as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(f"{where}: {e}") from None


def scale_to_level(d: DisturbanceSignal, level: float, l: float) -> DisturbanceSignal:
    """Rescale a signal so that its sup-norm equals ``level`` (zero stays zero)."""
    cur = d.sup_norm(l)
    if level == 0.0:
        return d.scaled(0.0)
    if cur == 0.0:
        raise ConfigError("disturbance.level: cannot rescale a zero signal to a positive level")
    return d.scaled(level / cur)


def parse_disturbance(obj, l: float) -> DisturbanceSignal:
    where = "disturbance"
    _check_keys(obj, DIST_KEYS, where)
    kw = {}
    for k in ("shape11", "shape21"):
        if k in obj:
            kw[k] = _poly(obj[k], f"{where}.{k}")
    for k in ("p11", "p12", "p21", "p22"):
        if k in obj:
            kw[k] = parse_profile(obj[k], f"{where}.{k}")
    d = DisturbanceSignal(**kw)
    try:
        d.check_domain(l)
    except ValueError as e:
        raise ConfigError(f"{where}: {e}") from None
    if "level" in obj:
        d = scale_to_level(d, _num(obj, "level", where, nonneg=True), l)
    return d


@dataclass(frozen=True)
class InitialSpec:
    sine: float = 1.0
    mode: int = 1
    poly: Optional[Poly] = None
    y: float = 1.0

    def state(self, l: float, n: int) -> HybridState:
        if self.poly is not None:
            return HybridState.from_functions(self.poly, self.y, l, n)
        k = self.mode
        return HybridState.from_functions(lambda z: self.sine * np.sin(k * np.pi * z / l), self.y, l, n)


def parse_initial(obj) -> InitialSpec:
    where = "initial"
    _check_keys(obj, INITIAL_KEYS, where)
    y = _num(obj, "y", where, 1.0)
    x = obj.get("x", {"sine": 1.0})
    _check_keys(x, {"sine", "mode", "poly"}, f"{where}.x")
    if "poly" in x:
        if "sine" in x or "mode" in x:
            raise ConfigError(f"{where}.x: give either poly or sine/mode")
        return InitialSpec(poly=_poly(x["poly"], f"{where}.x.poly"), y=y)
    return InitialSpec(sine=_num(x, "sine", f"{where}.x", 1.0),
                       mode=_num(x, "mode", f"{where}.x", 1, positive=True, integer=True), y=y)


def parse_schedule_obj(obj):
    where = "schedule"
    _check_keys(obj, SCHEDULE_KEYS, where)
    kind = obj.get("kind")
    if kind == "uniform":
        return ("uniform", _num(obj, "T", where, positive=True))
    if kind == "random":
        return "random"
    if kind == "explicit":
        taus = obj.get("taus")
        if not isinstance(taus, list):
            raise ConfigError(f"{where}.taus: expected an array of times")
        return ("explicit", [float(t) for t in taus])
    raise ConfigError(f"{where}.kind: expected uniform, random or explicit, got {kind!r}")


def parse_schedule_flag(spec: str):
    """``uniform:T`` | ``random`` | ``explicit:t0,t1,...``"""
    kind, _, arg = spec.partition(":")
    try:
        if kind == "uniform":
            T = float(arg)
            if not T > 0:
                raise ValueError
            return ("uniform", T)
        if kind == "random" and not arg:
            return "random"
        if kind == "explicit":
            return ("explicit", [float(t) for t in arg.split(",") if t.strip()])
    except ValueError:
        pass
    raise ConfigError(f"--schedule: cannot parse {spec!r} (uniform:T | random | explicit:t0,t1,...)")


@dataclass(frozen=True)
class SweepSpec:
    axis: str
    values: tuple
    workers: Optional[int] = None


@dataclass(frozen=True)
class RunConfig:
    system: ExampleParams
    n: int = 100
    dt: float = 1e-3
    scheme: str = "imex_cn"
    schedule: Any = ("uniform", 0.5)
    initial: InitialSpec = field(default_factory=InitialSpec)
    disturbance: DisturbanceSignal = field(default_factory=DisturbanceSignal)
    disturbance_raw: Optional[dict] = None
    horizon: float = 20.0
    sample_dt: float = 0.01
    seed: int = 0
    output: Optional[str] = None
    epsilon: Optional[float] = None
    margin: Optional[float] = None
    floor: float = 1e-4
    sweep: Optional[SweepSpec] = None

    def with_overrides(self, **kw) -> "RunConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw) if kw else self


def parse_config(doc: dict) -> RunConfig:
    _check_keys(doc, TOP_KEYS, "config")
    if "system" not in doc:
        raise ConfigError("config.system: required")
    ex = parse_system(doc["system"])
    kw = dict(system=ex)
    if "n" in doc:
        kw["n"] = _num(doc, "n", "config", integer=True)
        if kw["n"] < 3:
            raise ConfigError("config.n: need at least 3 interior nodes")
    for k in ("dt", "sample_dt"):
        if k in doc:
            kw[k] = _num(doc, k, "config", positive=True)
    if "horizon" in doc:
        kw["horizon"] = _num(doc, "horizon", "config", nonneg=True)
    if "floor" in doc:
        kw["floor"] = _num(doc, "floor", "config", positive=True)
    if "seed" in doc:
        kw["seed"] = _num(doc, "seed", "config", integer=True, nonneg=True)
    for k in ("epsilon", "margin"):
        if k in doc and doc[k] is not None:
            kw[k] = _num(doc, k, "config", positive=True)
    if "scheme" in doc:
        if doc["scheme"] not in SCHEMES:
            raise ConfigError(f"config.scheme: expected one of {SCHEMES}, got {doc['scheme']!r}")
        kw["scheme"] = doc["scheme"]
    if "output" in doc:
        if not isinstance(doc["output"], str):
            raise ConfigError("config.output: expected a path string")
        kw["output"] = doc["output"]
    if "schedule" in doc:
        kw["schedule"] = parse_schedule_obj(doc["schedule"])
    if "initial" in doc:
        kw["initial"] = parse_initial(doc["initial"])
    if "disturbance" in doc:
        kw["disturbance"] = parse_disturbance(doc["disturbance"], ex.l)
        kw["disturbance_raw"] = doc["disturbance"]
    if "sweep" in doc:
        sw = doc["sweep"]
        _check_keys(sw, SWEEP_KEYS, "sweep")
        if sw.get("axis") not in SWEEP_AXES:
            raise ConfigError(f"sweep.axis: expected one of {SWEEP_AXES}")
        vals = sw.get("values")
        if not isinstance(vals, list) or not vals:
            raise ConfigError("sweep.values: expected a nonempty array")
        workers = _num(sw, "workers", "sweep", 0, integer=True, nonneg=True) or None
        kw["sweep"] = SweepSpec(sw["axis"], tuple(float(v) for v in vals), workers)
    return RunConfig(**kw)


def load_config(path: str) -> RunConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as e:
        raise ConfigError(f"{path}: {e.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: line {e.lineno}, column {e.colno}: {e.msg}") from None
    try:
        return parse_config(doc)
    except ConfigError as e:
        raise ConfigError(f"{path}: {e}") from None


def disturbance_at_level(cfg: RunConfig, level: float) -> DisturbanceSignal:
    """The configured signal rescaled to sup-norm ``level``; a default shape when none is set."""
    d = cfg.disturbance
    if d.is_zero:
        if level == 0.0:
            return d
        l = cfg.system.l
        d = default_disturbance(l)
    return scale_to_level(d, level, cfg.system.l)


def default_disturbance(l: float) -> DisturbanceSignal:
    """Sinusoidal flow and jump disturbances with sup-norm 1."""
    shape = Poly([0.0, l, -1.0]) * (1.0 / h01_norm_poly(Poly([0.0, l, -1.0]), l))
    a = 1.0 / math.sqrt(2.0)
    return DisturbanceSignal(
        shape11=shape, p11=TimeProfile("sinusoid", a, 2.0, 0.0), p12=TimeProfile("sinusoid", a, 1.3, 0.5),
        shape21=shape, p21=TimeProfile("sinusoid", a, 0.7, 0.2), p22=TimeProfile("sinusoid", a, 1.1, 0.0))
