"""Run configuration: dataclass, validation, and the text file format.

Config files are plain ``key = value`` lines ('#' starts a comment).
The only required key is ``problem``; every other key overrides the
catalog default for that problem.  Keys that are not run-level fields
are looked up among the problem's physical parameters, so a file like::

    problem = shock
    v_max = -0.5
    shock_width = 1e-3
    enable_tvd = true

selects the discontinuous-jump variant with the slope limiter on.
"""

import dataclasses
from dataclasses import dataclass, field

from . import problems, timestepping
from .errors import ConfigError


@dataclass
class RunConfig:
    problem: str
    dim: int = 1
    # mesh
    nx: int = 1
    ny: int = 0
    n_energy: int = 1
    x_lo: float = 0.0
    x_hi: float = 1.0
    y_lo: float = 0.0
    y_hi: float = 0.0
    eps_lo: float = 0.0
    eps_hi: float = 1.0
    energy_ratio: float = 1.0
    # discretization
    degree: int = 2
    scheme: str = "ssprk3"
    cfl_safety: float = 0.9
    t_end: float = 1.0
    # boundary kinds (fixed per problem; recorded for the run echo)
    bc_x_lo: str = "periodic"
    bc_x_hi: str = "periodic"
    bc_y_lo: str = "none"
    bc_y_hi: str = "none"
    # solvers
    c2p_method: str = "newton"
    step_mode: str = "realizable"
    backend: str = "auto"
    tol_c2p: float = 1e-8
    tol_coll: float = 1e-8
    max_iters: int = 10000
    # limiter
    enable_tvd: bool = False
    beta_tvd: float = 1.25
    # output
    snapshots: int = 4
    ledger_every: int = 1
    seed: int = 0
    params: dict = field(default_factory=dict)

    def validate(self):
        spec = problems.CATALOG.get(self.problem)
        if spec is None:
            raise ConfigError("unknown problem %r" % (self.problem,))
        if self.dim != spec.dim:
            raise ConfigError("problem %s is %dD" % (self.problem, spec.dim))
        if self.nx < 1 or self.n_energy < 1 or (self.dim == 2 and self.ny < 1):
            raise ConfigError("element counts must be positive")
        if not (self.x_hi > self.x_lo and self.eps_hi > self.eps_lo >= 0.0):
            raise ConfigError("domain bounds are inverted")
        if self.dim == 2 and not self.y_hi > self.y_lo:
            raise ConfigError("domain bounds are inverted")
        if self.energy_ratio <= 0.0:
            raise ConfigError("energy_ratio must be positive")
        if self.degree < 1:
            raise ConfigError("degree must be at least 1")
        timestepping.get_scheme(self.scheme)
        if not 0.0 < self.cfl_safety <= 1.0:
            raise ConfigError("cfl_safety must lie in (0, 1]")
        if self.t_end <= 0.0:
            raise ConfigError("t_end must be positive")
        if self.snapshots < 0 or self.ledger_every < 1:
            raise ConfigError("output cadence fields must be nonnegative")
        defaults = spec.defaults
        for key in ("bc_x_lo", "bc_x_hi", "bc_y_lo", "bc_y_hi"):
            if getattr(self, key) != defaults.get(key, "none"):
                raise ConfigError(
                    "%s is part of the %s problem definition" % (key, self.problem)
                )
        unknown = set(self.params) - set(spec.param_names)
        if unknown:
            raise ConfigError(
                "unknown parameter(s) for %s: %s" % (self.problem, ", ".join(sorted(unknown)))
            )
        missing = set(spec.param_names) - set(self.params)
        if missing:
            raise ConfigError("missing parameter(s): %s" % ", ".join(sorted(missing)))
        return self


_RUN_FIELDS = {f.name: f.type for f in dataclasses.fields(RunConfig) if f.name != "params"}


def default_config(problem, long=False):
    """The catalog configuration for ``problem`` (desk scale by default)."""
    spec = problems.CATALOG.get(problem)
    if spec is None:
        raise ConfigError("unknown problem %r" % (problem,))
    values = dict(spec.defaults)
    if long:
        values.update(spec.long_overrides)
    params = dict(values.pop("params", {}))
    return RunConfig(problem=problem, dim=spec.dim, params=params, **values).validate()


def _convert(key, text):
    kind = _RUN_FIELDS[key]
    try:
        if kind == "bool" or kind is bool:
            low = text.lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError(text)
        if kind == "int" or kind is int:
            return int(text)
        if kind == "float" or kind is float:
            return float(text)
        return text
    except ValueError:
        raise ConfigError("bad value %r for key %r" % (text, key)) from None


def parse_text(text):
    """Key/value pairs from config text; values stay strings."""
    pairs = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("line %d is not 'key = value': %r" % (lineno, raw.strip()))
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or not value:
            raise ConfigError("line %d is not 'key = value': %r" % (lineno, raw.strip()))
        if key in pairs:
            raise ConfigError("duplicate key %r on line %d" % (key, lineno))
        pairs[key] = value
    return pairs


def resolve(pairs, long=False):
    """RunConfig from parsed key/value strings, on catalog defaults."""
    pairs = dict(pairs)
    problem = pairs.pop("problem", None)
    if problem is None:
        raise ConfigError("config must set 'problem'")
    cfg = default_config(problem, long=long)
    for key, value in pairs.items():
        if key in _RUN_FIELDS:
            setattr(cfg, key, _convert(key, value))
        else:
            try:
                cfg.params[key] = float(value)
            except ValueError:
                raise ConfigError("bad value %r for parameter %r" % (value, key)) from None
    return cfg.validate()


def load(path, long=False):
    with open(path, "r", encoding="utf-8") as fh:
        return resolve(parse_text(fh.read()), long=long)


def dump(cfg):
    """Render a config as parseable text (the run echo)."""
    lines = ["problem = %s" % cfg.problem]
    for name in _RUN_FIELDS:
        if name == "problem":
            continue
        value = getattr(cfg, name)
        if isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, float):
            value = repr(value)
        lines.append("%s = %s" % (name, value))
    for key in sorted(cfg.params):
        lines.append("%s = %r" % (key, cfg.params[key]))
    return "\n".join(lines) + "\n"
