"""Plain-text experiment configuration.

Format: ``[section]`` headers and ``key = value`` lines; ``#`` starts a
comment.  Unknown sections or keys, duplicates and malformed values are
rejected with the line number and ``section.key``.

Sections, keys and defaults::

    [experiment]  kind (required: propagation | kernel-decay | spectral-locality
                  | cosine-bounds | gevrey-coefficients), mode = float, seed
    [lattice]     d = 1, L = 10
    [potential]   type = constant (constant | sites | uniform), value = 0,
                  sites = "x1,..,xd:v; ...", lo = -1, hi = 1
    [function]    family = gaussian (gaussian | bump | gevrey_bump | polynomial
                  | cosine_window), center = 0, width = 1, b = 1, omega = 1,
                  coeffs = (comma list)
    [grid]        R, eps, n, t (comma lists; ``a..b`` is an inclusive integer
                  range), n_max
    [params]      lam0 = 0, spike = 1, alpha, beta, interval_eps, s = 1,
                  symbolic_n_max = 12
    [output]      csv = <kind>.csv, json = summary.json

Potential numbers are kept as exact rationals (decimal input is read
exactly) so that both scalar modes see the same instance.  ``seed`` is
mandatory for ``type = uniform``.  Grid defaults depend on the experiment
(see :data:`GRID_DEFAULTS`).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from fractions import Fraction

from propspeed.errors import PropspeedError

KINDS = ("propagation", "kernel-decay", "spectral-locality", "cosine-bounds",
         "gevrey-coefficients")
MODES = ("float", "exact")
POTENTIALS = ("constant", "sites", "uniform")
FAMILIES = ("gaussian", "bump", "gevrey_bump", "polynomial", "cosine_window")

GRID_DEFAULTS = {
    "propagation": dict(R=tuple(range(1, 7))),
    "kernel-decay": dict(R=tuple(range(2, 15))),
    "spectral-locality": dict(R=tuple(range(4, 13)), eps=(1.0, 0.5, 0.25)),
    "cosine-bounds": dict(R=(2.0, 5.0, 10.0), n=tuple(range(0, 7)),
                          t=(1.0, 2.0, 5.0, 10.0, 20.0)),
    "gevrey-coefficients": dict(n_max=60),
}


class ConfigError(PropspeedError, ValueError):
    """Malformed configuration; ``line`` and ``field`` locate the problem."""

    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


@dataclass(frozen=True)
class PotentialSpec:
    type: str = "constant"
    value: Fraction = Fraction(0)
    sites: tuple = ()
    lo: Fraction = Fraction(-1)
    hi: Fraction = Fraction(1)


@dataclass(frozen=True)
class FunctionSpec:
    family: str = "gaussian"
    center: float = 0.0
    width: float = 1.0
    b: Fraction = Fraction(1)
    omega: float = 1.0
    coeffs: tuple = ()


@dataclass(frozen=True)
class GridSpec:
    R: tuple | None = None
    eps: tuple | None = None
    n: tuple | None = None
    t: tuple | None = None
    n_max: int | None = None


@dataclass(frozen=True)
class Params:
    lam0: float = 0.0
    spike: Fraction = Fraction(1)
    alpha: float | None = None
    beta: float | None = None
    interval_eps: float | None = None
    s: float = 1.0
    symbolic_n_max: int = 12


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    mode: str = "float"
    seed: int | None = None
    d: int = 1
    L: int = 10
    potential: PotentialSpec = field(default_factory=PotentialSpec)
    function: FunctionSpec = field(default_factory=FunctionSpec)
    grid: GridSpec = field(default_factory=GridSpec)
    params: Params = field(default_factory=Params)
    csv: str | None = None
    json: str = "summary.json"

    def grid_value(self, name: str):
        v = getattr(self.grid, name)
        return GRID_DEFAULTS.get(self.kind, {}).get(name) if v is None else v

    @property
    def csv_name(self) -> str:
        return self.csv or f"{self.kind}.csv"

    def with_mode(self, mode: str) -> "ExperimentConfig":
        if mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")
        return dataclasses.replace(self, mode=mode)

    def dump(self) -> str:
        return dump_config(self)


# ---------------------------------------------------------------------------
# value parsers


def _int(text):
    return int(text)


def _pos_int(text):
    v = int(text)
    if v < 1:
        raise ValueError("must be >= 1")
    return v


def _nonneg_int(text):
    v = int(text)
    if v < 0:
        raise ValueError("must be >= 0")
    return v


def _float(text):
    v = float(text)
    if v != v:
        raise ValueError("NaN not allowed")
    return v


def _rational(text):
    return Fraction(text.strip())


def _choice(options):
    def parse(text):
        if text not in options:
            raise ValueError(f"must be one of {', '.join(options)}")
        return text
    return parse


def _list(item, integer_ranges=False):
    def parse(text):
        out = []
        for part in text.split(","):
            part = part.strip()
            if not part:
                raise ValueError("empty list item")
            if ".." in part and integer_ranges:
                a, b = part.split("..")
                a, b = int(a), int(b)
                if b < a:
                    raise ValueError(f"empty range {part}")
                out.extend(item(str(k)) for k in range(a, b + 1))
            else:
                out.append(item(part))
        return tuple(out)
    return parse


def _sites(text):
    out = []
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        if ":" not in part:
            raise ValueError(f"site entry {part!r} needs 'coords:value'")
        xs, val = part.split(":")
        out.append((tuple(int(x) for x in xs.split(",")), Fraction(val.strip())))
    return tuple(out)


def _str(text):
    if not text:
        raise ValueError("empty")
    return text


# (section, key) -> (target attribute path, parser)
SCHEMA = {
    ("experiment", "kind"): (("kind",), _choice(KINDS)),
    ("experiment", "mode"): (("mode",), _choice(MODES)),
    ("experiment", "seed"): (("seed",), _int),
    ("lattice", "d"): (("d",), _pos_int),
    ("lattice", "L"): (("L",), _pos_int),
    ("potential", "type"): (("potential", "type"), _choice(POTENTIALS)),
    ("potential", "value"): (("potential", "value"), _rational),
    ("potential", "sites"): (("potential", "sites"), _sites),
    ("potential", "lo"): (("potential", "lo"), _rational),
    ("potential", "hi"): (("potential", "hi"), _rational),
    ("function", "family"): (("function", "family"), _choice(FAMILIES)),
    ("function", "center"): (("function", "center"), _float),
    ("function", "width"): (("function", "width"), _float),
    ("function", "b"): (("function", "b"), _rational),
    ("function", "omega"): (("function", "omega"), _float),
    ("function", "coeffs"): (("function", "coeffs"), _list(_rational)),
    ("grid", "R"): (("grid", "R"), _list(_float, integer_ranges=True)),
    ("grid", "eps"): (("grid", "eps"), _list(_float)),
    ("grid", "n"): (("grid", "n"), _list(_nonneg_int, integer_ranges=True)),
    ("grid", "t"): (("grid", "t"), _list(_float, integer_ranges=True)),
    ("grid", "n_max"): (("grid", "n_max"), _pos_int),
    ("params", "lam0"): (("params", "lam0"), _float),
    ("params", "spike"): (("params", "spike"), _rational),
    ("params", "alpha"): (("params", "alpha"), _float),
    ("params", "beta"): (("params", "beta"), _float),
    ("params", "interval_eps"): (("params", "interval_eps"), _float),
    ("params", "s"): (("params", "s"), _float),
    ("params", "symbolic_n_max"): (("params", "symbolic_n_max"), _nonneg_int),
    ("output", "csv"): (("csv",), _str),
    ("output", "json"): (("json",), _str),
}
SECTIONS = tuple(dict.fromkeys(sec for sec, _ in SCHEMA))
_SUB = {"potential": PotentialSpec, "function": FunctionSpec, "grid": GridSpec,
        "params": Params}
_INT_GRIDS = ("propagation", "kernel-decay", "spectral-locality")


def parse_config(text: str) -> ExperimentConfig:
    """Strict parse of the key=value format described in the module docstring."""
    top, subs, seen, lines = {}, {k: {} for k in _SUB}, {}, {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {line!r}", lineno)
            section = line[1:-1].strip()
            if section not in SECTIONS:
                raise ConfigError(f"unknown section [{section}]", lineno)
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", lineno)
        if section is None:
            raise ConfigError("key outside of any section", lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        name = f"{section}.{key}"
        if (section, key) not in SCHEMA:
            raise ConfigError(f"unknown key {key!r} in [{section}]", lineno, name)
        if (section, key) in seen:
            raise ConfigError(f"duplicate key (first set on line {seen[(section, key)]})",
                              lineno, name)
        seen[(section, key)] = lineno
        path, parser = SCHEMA[(section, key)]
        try:
            parsed = parser(value)
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"bad value {value!r}: {exc}", lineno, name) from None
        lines[name] = lineno
        if len(path) == 1:
            top[path[0]] = parsed
        else:
            subs[path[0]][path[1]] = parsed
    if "kind" not in top:
        raise ConfigError("missing required key", None, "experiment.kind")
    for name, cls in _SUB.items():
        top[name] = cls(**subs[name])
    cfg = ExperimentConfig(**top)
    _validate(cfg, lines)
    return cfg


def _validate(cfg: ExperimentConfig, lines: dict):
    pot = cfg.potential
    if pot.type == "uniform" and cfg.seed is None:
        raise ConfigError("potential type 'uniform' requires experiment.seed",
                          lines.get("potential.type"), "experiment.seed")
    if pot.type == "uniform" and pot.hi < pot.lo:
        raise ConfigError("hi < lo", lines.get("potential.hi"), "potential.hi")
    for x, _ in pot.sites:
        if len(x) != cfg.d:
            raise ConfigError(f"site {x} has {len(x)} coordinates, lattice has d={cfg.d}",
                              lines.get("potential.sites"), "potential.sites")
        if any(abs(c) > cfg.L for c in x):
            raise ConfigError(f"site {x} outside the box |x_i| <= {cfg.L}",
                              lines.get("potential.sites"), "potential.sites")
    if cfg.kind in _INT_GRIDS and cfg.grid.R is not None:
        if any(r != int(r) or r < 0 for r in cfg.grid.R):
            raise ConfigError("R values must be nonnegative integers here",
                              lines.get("grid.R"), "grid.R")
    if cfg.function.family == "polynomial" and not cfg.function.coeffs:
        raise ConfigError("polynomial family needs coeffs", lines.get("function.family"),
                          "function.coeffs")
    if not cfg.function.width > 0:
        raise ConfigError("width must be > 0", lines.get("function.width"), "function.width")


# ---------------------------------------------------------------------------
# serialisation


def _fmt(v) -> str:
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _fmt_sites(sites) -> str:
    return "; ".join(",".join(str(c) for c in x) + ":" + str(v) for x, v in sites)


def dump_config(cfg: ExperimentConfig) -> str:
    """Serialise so that ``parse_config(dump_config(c)) == c``.

    Floats are written with ``repr`` (shortest round-tripping form).
    """
    out = []
    current = None
    for (section, key), (path, _) in SCHEMA.items():
        obj = cfg
        for p in path:
            obj = getattr(obj, p)
        if obj is None:
            continue
        if section in _SUB and key in ("sites", "coeffs") and obj == ():
            continue
        if section != current:
            if out:
                out.append("")
            out.append(f"[{section}]")
            current = section
        if key == "sites":
            text = _fmt_sites(obj)
        elif isinstance(obj, tuple):
            text = ", ".join(_fmt(x) for x in obj)
        else:
            text = _fmt(obj)
        out.append(f"{key} = {text}")
    return "\n".join(out) + "\n"
