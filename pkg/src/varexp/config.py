"""Flat ``key = value`` run configuration.

Lines are ``dotted.key = value``; ``#`` starts a comment. Unknown keys and
keys that do not apply to the selected kinds are rejected.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path


class ConfigError(ValueError):
    pass


def _bool(s):
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _times(s):
    s = s.strip()
    return tuple(float(x) for x in s.split(",") if x.strip()) if s else ()


# key -> (parser, default)
SCHEMA = {
    "rect.xmin": (float, -1.0),
    "rect.xmax": (float, 1.0),
    "rect.ymin": (float, -1.0),
    "rect.ymax": (float, 1.0),
    "mesh.nx": (int, 50),
    "mesh.ny": (int, 50),
    "p.kind": (str, "paper_floor"),
    "p.value": (float, None),
    "p.a": (float, None),
    "p.b": (float, None),
    "p.c0": (float, None),
    "p.c1": (float, None),
    "q.kind": (str, "paper_floor"),
    "q.value": (float, None),
    "q.a": (float, None),
    "q.b": (float, None),
    "q.c0": (float, None),
    "q.c1": (float, None),
    "sigma": (float, None),
    "u0.kind": (str, "gaussian"),
    "u0.amplitude": (float, 0.25),
    "u0.b": (float, None),
    "u0.mx": (int, None),
    "u0.my": (int, None),
    "u0.path": (str, None),
    "u0.boundary": (str, "project"),
    "time.T": (float, 1.0),
    "time.dt": (float, 0.01),
    "time.report_every": (float, 0.1),
    "solver.tol": (float, 1e-10),
    "solver.maxiter": (int, None),
    "lambda1.mode": (str, "fem"),
    "estimators.starts": (int, 20),
    "estimators.steps": (int, 200),
    "seed": (int, 0),
    "constants.B_sigma": (float, None),
    "constants.C1": (float, None),
    "constants.C2": (float, None),
    "decay.envelope": (str, "certified"),
    "overflow.threshold": (float, 1e12),
    "output.csv": (str, None),
    "output.svg": (str, None),
    "output.snapshots": (_times, ()),
    "output.snapshot_prefix": (str, None),
}

_KIND_KEYS = {
    "constant": {"value"},
    "paper_floor": {"a", "b"},
    "linear_x": {"c0", "c1"},
}
_FLOOR_DEFAULTS = {"p": (0.2, 2.5), "q": (0.1, 6.0)}
_U0_KEYS = {
    "gaussian": {"amplitude", "b"},
    "product_sine": {"amplitude", "mx", "my"},
    "nodal_file": {"path"},
}
_CHOICES = {
    "u0.boundary": ("project", "zero"),
    "lambda1.mode": ("fem", "analytic-square"),
    "decay.envelope": ("certified", "always"),
    "p.kind": tuple(_KIND_KEYS),
    "q.kind": tuple(_KIND_KEYS),
    "u0.kind": tuple(_U0_KEYS),
}


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Parse ``key = value`` lines into a dict of raw strings."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in body.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        raw[key] = value
    return raw


@dataclass
class RunConfig:
    values: dict = field(default_factory=dict)
    base_dir: Path = field(default_factory=Path.cwd)

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        v = self.values.get(key)
        return default if v is None else v

    @property
    def dt(self) -> float:
        return self.values["time.dt"]

    @property
    def T(self) -> float:
        return self.values["time.T"]

    @property
    def n_steps(self) -> int:
        return int(math.floor(self.T / self.dt + 1e-9))

    @property
    def report_stride(self) -> int:
        return int(round(self.values["time.report_every"] / self.dt))

    def items(self):
        for key in SCHEMA:
            v = self.values.get(key)
            if v is not None and v != ():
                yield key, v

    def with_overrides(self, **kv) -> "RunConfig":
        """Copy with some keys replaced (``p__kind`` or ``"p.kind"`` spelling).

        Changing ``p.kind``, ``q.kind`` or ``u0.kind`` drops the old kind's
        parameters unless they are given too.
        """
        kv = {k.replace("__", "."): v for k, v in kv.items()}
        vals = dict(self.values)
        for f in ("p", "q", "u0"):
            if f"{f}.kind" in kv:
                for key in list(vals):
                    if key.startswith(f + ".") and key not in (f"{f}.kind", "u0.boundary") \
                            and key not in kv:
                        vals[key] = None
        vals.update(kv)
        return build_config(vals, self.base_dir, typed=True)


def build_config(raw: dict, base_dir=None, typed: bool = False) -> RunConfig:
    vals = {}
    for key, (conv, default) in SCHEMA.items():
        if key in raw and raw[key] is not None:
            try:
                vals[key] = raw[key] if typed and not isinstance(raw[key], str) else conv(raw[key])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {key}: {raw[key]!r} ({exc})") from None
        else:
            vals[key] = default
    unknown = set(raw) - set(SCHEMA)
    if unknown:
        raise ConfigError(f"unknown keys: {sorted(unknown)}")
    for key, choices in _CHOICES.items():
        if vals[key] not in choices:
            raise ConfigError(f"{key} must be one of {choices}, got {vals[key]!r}")

    for f in ("p", "q"):
        kind = vals[f"{f}.kind"]
        allowed = _KIND_KEYS[kind]
        for sub in ("value", "a", "b", "c0", "c1"):
            if sub not in allowed and f"{f}.{sub}" in raw and raw[f"{f}.{sub}"] is not None:
                raise ConfigError(f"{f}.{sub} does not apply to {f}.kind = {kind}")
        if kind == "paper_floor":
            da, db = _FLOOR_DEFAULTS[f]
            vals[f"{f}.a"] = da if vals[f"{f}.a"] is None else vals[f"{f}.a"]
            vals[f"{f}.b"] = db if vals[f"{f}.b"] is None else vals[f"{f}.b"]
        for sub in allowed:
            if vals[f"{f}.{sub}"] is None:
                raise ConfigError(f"{f}.kind = {kind} requires {f}.{sub}")

    kind = vals["u0.kind"]
    for sub in ("amplitude", "b", "mx", "my", "path"):
        if sub not in _U0_KEYS[kind] and f"u0.{sub}" in raw and raw[f"u0.{sub}"] is not None:
            raise ConfigError(f"u0.{sub} does not apply to u0.kind = {kind}")
    if kind == "gaussian" and vals["u0.b"] is None:
        vals["u0.b"] = 1.0
    if kind == "product_sine":
        vals["u0.mx"] = vals["u0.mx"] or 1
        vals["u0.my"] = vals["u0.my"] or 1
    if kind == "nodal_file" and not vals["u0.path"]:
        raise ConfigError("u0.kind = nodal_file requires u0.path")

    dt, T, rep = vals["time.dt"], vals["time.T"], vals["time.report_every"]
    if not dt > 0:
        raise ConfigError("time.dt must be positive")
    if T < 0 or (T > 0 and T < dt * (1 - 1e-12)):
        raise ConfigError("time.T must be 0 or >= time.dt")
    k = round(rep / dt)
    if rep <= 0 or k < 1 or abs(k * dt - rep) > 1e-12 * max(1.0, rep):
        raise ConfigError("time.report_every must be a positive multiple of time.dt")
    if vals["mesh.nx"] < 1 or vals["mesh.ny"] < 1:
        raise ConfigError("mesh.nx, mesh.ny must be >= 1")
    if vals["sigma"] is not None and not vals["sigma"] > 0:
        raise ConfigError("sigma must be positive")
    if vals["solver.tol"] <= 0:
        raise ConfigError("solver.tol must be positive")
    if vals["estimators.starts"] < 1 or vals["estimators.steps"] < 0:
        raise ConfigError("estimators.starts >= 1, estimators.steps >= 0")
    return RunConfig(vals, Path(base_dir) if base_dir else Path.cwd())


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return build_config(parse_config_text(text, str(path)), path.parent)


REFERENCE_CONFIG = """\
# Omega = [-1,1]^2, 50x50 cells (5000 triangles, 2601 vertices)
mesh.nx = 50
mesh.ny = 50
p.kind = paper_floor
p.a = 0.2
p.b = 2.5
q.kind = paper_floor
q.a = 0.1
q.b = 6
sigma = 0.1
u0.kind = gaussian
u0.amplitude = 0.25
u0.b = 1
time.T = 1
time.dt = 0.01
time.report_every = 0.1
"""


def reference_config(**overrides) -> RunConfig:
    cfg = build_config(parse_config_text(REFERENCE_CONFIG, "<reference>"))
    return cfg.with_overrides(**overrides) if overrides else cfg
