"""Scenario files: parsing, validation, presets and serialisation.

A scenario is a TOML document with the sections ``[plant]``, ``[controller]``,
``[trigger]``, ``[noise]``, ``[integrator]`` and ``[output]``.  Unknown sections
or keys are rejected with the offending line number.
"""

from __future__ import annotations

import math
import re
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from importlib import resources
from typing import Optional

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import DomainError, ParseError, ValidationError

CONTROLLERS = ("balsi_exact", "balsi_regularized", "extended_matching",
               "nominal_known_theta", "open_loop")
PLANTS = ("wing_rock", "lti_chain")


@dataclass
class PlantSection:
    name: str = "wing_rock"
    theta: list = field(default_factory=list)
    x0: list = field(default_factory=list)
    kappa: float = 1.0
    mu: float = 15.0
    n: int = 1


@dataclass
class ControllerSection:
    kind: str = "balsi_regularized"
    theta_hat0: Optional[list] = None
    L: float = 1.5
    sigma: float = 0.5
    beta: float = 1e17
    rank_tol: float = 1e-9
    feas_tol: float = 1e-8
    qp_tol: float = 1e-10
    qp_max_iter: int = 100000
    qp_method: str = "active_set"
    reinit_period: float = 0.0
    gamma: float = 10.0
    eps: float = 0.001


@dataclass
class TriggerSection:
    T: float = 0.4
    A2: float = 2e5
    A4: float = 2e5


@dataclass
class NoiseSection:
    amplitude: float = 0.0
    frequency: float = 0.0
    direction: Optional[list] = None


@dataclass
class IntegratorSection:
    rel_tol: float = 1e-9
    abs_tol: float = 1e-11
    max_step: float = 0.05
    event_tol: float = 1e-9


@dataclass
class OutputSection:
    t_final: float = 4.0
    dt: float = 0.001
    seed: int = 0


@dataclass
class Scenario:
    name: str = "scenario"
    plant: PlantSection = field(default_factory=PlantSection)
    controller: ControllerSection = field(default_factory=ControllerSection)
    trigger: TriggerSection = field(default_factory=TriggerSection)
    noise: NoiseSection = field(default_factory=NoiseSection)
    integrator: IntegratorSection = field(default_factory=IntegratorSection)
    output: OutputSection = field(default_factory=OutputSection)

    @property
    def theta_hat0(self):
        th0 = self.controller.theta_hat0
        return np.array(self.plant.theta if th0 is None else th0, dtype=float)

    def to_dict(self):
        out = {}
        for f in fields(self):
            if f.name == "name":
                continue
            sec = asdict(getattr(self, f.name))
            out[f.name] = {k: v for k, v in sec.items() if v is not None}
        return out


SECTIONS = {
    "plant": PlantSection,
    "controller": ControllerSection,
    "trigger": TriggerSection,
    "noise": NoiseSection,
    "integrator": IntegratorSection,
    "output": OutputSection,
}


# ---------------------------------------------------------------- parsing

def _line_of(text, section, key=None):
    """1-based line of ``[section]`` or of ``key`` inside it (0 if not found)."""
    current = None
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        m = re.fullmatch(r"\[\s*([A-Za-z0-9_]+)\s*\]", line)
        if m:
            current = m.group(1)
            if key is None and current == section:
                return i
            continue
        if key is not None and current == section:
            m = re.match(r"([A-Za-z0-9_]+)\s*=", line)
            if m and m.group(1) == key:
                return i
    return 0


def _coerce(sec_cls, section, key, value, text):
    default = {f.name: f for f in fields(sec_cls)}[key]
    lineno = _line_of(text, section, key)
    kind = default.type if isinstance(default.type, str) else default.type.__name__
    if "list" in kind:
        if not isinstance(value, list) or not all(isinstance(v, (int, float)) and
                                                   not isinstance(v, bool) for v in value):
            raise ParseError(f"{section}.{key} must be a list of numbers", lineno)
        return [float(v) for v in value]
    if kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ParseError(f"{section}.{key} must be a number", lineno)
        return float(value)
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ParseError(f"{section}.{key} must be an integer", lineno)
        return value
    if kind == "str":
        if not isinstance(value, str):
            raise ParseError(f"{section}.{key} must be a string", lineno)
        return value
    return value


def loads(text, name="scenario"):
    """Parse and validate scenario text."""
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ParseError(str(exc), int(m.group(1)) if m else 0) from None
    scenario = Scenario(name=name)
    for section, body in raw.items():
        if section not in SECTIONS:
            raise ParseError(f"unknown section [{section}]", _line_of(text, section))
        if not isinstance(body, dict):
            raise ParseError(f"{section} must be a table", _line_of(text, section))
        sec_cls = SECTIONS[section]
        known = {f.name for f in fields(sec_cls)}
        values = {}
        for key, value in body.items():
            if key not in known:
                raise ParseError(f"unknown key {section}.{key}", _line_of(text, section, key))
            values[key] = _coerce(sec_cls, section, key, value, text)
        setattr(scenario, section, replace(getattr(scenario, section), **values))
    if "plant" not in raw:
        raise ValidationError("a [plant] section is required")
    validate(scenario)
    return scenario


def load(path):
    path = str(path)
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    stem = re.sub(r"\.toml$", "", path.replace("\\", "/").rsplit("/", 1)[-1])
    return loads(text, name=stem)


# ---------------------------------------------------------------- validation

def _require(cond, message):
    if not cond:
        raise ValidationError(message)


def _finite_list(values, length, label):
    _require(values is not None and len(values) == length,
             f"{label} must have {length} entries")
    _require(all(math.isfinite(v) for v in values), f"{label} must be finite")


def validate(sc):
    """Raise ValidationError naming the first violated invariant."""
    p, c, tr, nz, ig, out = sc.plant, sc.controller, sc.trigger, sc.noise, sc.integrator, sc.output
    _require(p.name in PLANTS, f"plant.name must be one of {', '.join(PLANTS)}")
    _require(p.kappa > 0, "plant.kappa must be > 0")
    if p.name == "wing_rock":
        n, l = 3, 5
        _require(p.mu > 0, "plant.mu must be > 0")
        _require(c.L > 1, "controller.L must be > 1")
    else:
        _require(p.n >= 1, "plant.n must be >= 1")
        n, l = p.n, p.n * (p.n + 3) // 2
        _require(c.sigma > 0, "controller.sigma must be > 0")
    _finite_list(p.theta, l, "plant.theta")
    _finite_list(p.x0, n, "plant.x0")
    _require(c.kind in CONTROLLERS, f"controller.kind must be one of {', '.join(CONTROLLERS)}")
    _finite_list(list(sc.theta_hat0), l, "controller.theta_hat0")
    box = build_structure(sc).box
    _require(box.contains(np.array(p.theta)), "plant.theta must lie in the admissible set")
    _require(box.contains(sc.theta_hat0), "controller.theta_hat0 must lie in the admissible set")
    if c.kind == "extended_matching":
        _require(p.name == "wing_rock", "extended_matching requires the wing_rock plant")
        _require(c.gamma >= 0, "controller.gamma must be >= 0")
        _require(0 < c.eps < p.kappa, "controller.eps must lie in (0, kappa)")
    _require(c.beta > 0, "controller.beta must be > 0")
    _require(0 < c.rank_tol < 1e-3, "controller.rank_tol must lie in (0, 1e-3)")
    _require(c.feas_tol > 0 and c.qp_tol > 0, "controller.feas_tol and qp_tol must be > 0")
    _require(c.qp_max_iter >= 1, "controller.qp_max_iter must be >= 1")
    _require(c.qp_method in ("active_set", "iterative"),
             "controller.qp_method must be active_set or iterative")
    _require(c.reinit_period >= 0, "controller.reinit_period must be >= 0 (0 disables)")
    _require(tr.T > 0, "trigger.T must be > 0")
    _require(tr.A2 > 0, "trigger.A2 must be > 0 (a must be positive definite)")
    _require(tr.A4 >= 0, "trigger.A4 must be >= 0")
    _require(nz.amplitude >= 0, "noise.amplitude must be >= 0")
    _require(math.isfinite(nz.frequency), "noise.frequency must be finite")
    if nz.direction is not None:
        _finite_list(nz.direction, n, "noise.direction")
    _require(ig.rel_tol > 0 and ig.abs_tol > 0 and ig.max_step > 0 and ig.event_tol > 0,
             "integrator tolerances must be > 0")
    _require(ig.event_tol < ig.max_step, "integrator.event_tol must be < max_step")
    _require(out.t_final > 0, "output.t_final must be > 0")
    _require(out.dt > 0, "output.dt must be > 0")
    return sc


# ---------------------------------------------------------------- builders

def build_structure(sc):
    from .plants import lti_chain_structure, wing_rock_structure
    try:
        if sc.plant.name == "wing_rock":
            return wing_rock_structure(sc.plant.kappa, sc.plant.mu)
        return lti_chain_structure(sc.plant.n, sc.plant.kappa)
    except DomainError as exc:
        raise ValidationError(str(exc)) from None


def build_plant(sc):
    from .plants import lti_chain, wing_rock
    try:
        if sc.plant.name == "wing_rock":
            return wing_rock(sc.plant.kappa, sc.plant.mu, sc.plant.theta)
        return lti_chain(sc.plant.n, sc.plant.kappa, sc.plant.theta)
    except DomainError as exc:
        raise ValidationError(str(exc)) from None


def build_law(sc):
    from .control import LtiLaw, WingRockLaw
    if sc.plant.name == "wing_rock":
        return WingRockLaw(sc.controller.L, sc.plant.mu)
    return LtiLaw(sc.plant.n, sc.controller.sigma)


def build_noise(sc):
    from .plants import NoiseSpec
    d = sc.noise.direction
    return NoiseSpec(sc.noise.amplitude, sc.noise.frequency, None if d is None else np.array(d))


def build_integrator(sc):
    from .hybrid import IntegratorConfig
    ig = sc.integrator
    return IntegratorConfig(ig.rel_tol, ig.abs_tol, ig.max_step, ig.event_tol)


def build_trigger(sc):
    from .hybrid import TriggerSpec
    return TriggerSpec(sc.trigger.T, sc.trigger.A2, sc.trigger.A4)


def build_update(sc):
    from .identifier import UpdateConfig
    c = sc.controller
    mode = "exact" if c.kind == "balsi_exact" else "regularized"
    return UpdateConfig(mode=mode, beta=c.beta, rank_tol=c.rank_tol, qp_tol=c.qp_tol,
                        qp_max_iter=c.qp_max_iter, feas_tol=c.feas_tol, method=c.qp_method)


# ---------------------------------------------------------------- output

def _fmt(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    if isinstance(value, str):
        return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(value, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_fmt(float(v)) for v in value) + "]"
    raise TypeError(f"cannot serialise {type(value).__name__}")


def dumps(sc):
    """Serialise a scenario; ``loads(dumps(sc))`` reproduces it exactly."""
    lines = []
    for section, body in sc.to_dict().items():
        lines.append(f"[{section}]")
        for key, value in body.items():
            lines.append(f"{key} = {_fmt(value)}")
        lines.append("")
    return "\n".join(lines)


# ---------------------------------------------------------------- presets

def preset_names():
    root = resources.files("balsi") / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))


def preset_text(name):
    path = resources.files("balsi") / "presets" / f"{name}.toml"
    if not path.is_file():
        raise ValidationError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return path.read_text(encoding="utf-8")


def preset(name):
    return loads(preset_text(name), name=name)
