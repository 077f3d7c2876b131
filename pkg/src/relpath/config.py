"""Run configuration: an INI-style grammar with a fixed schema.

Grammar
-------
A config is a sequence of ``[section]`` headers, each followed by
``key = value`` lines.  ``#`` and ``;`` start comment lines.  Keys are
case-sensitive.  Values are typed by the schema below:

* ``int`` is a decimal integer.
* ``float`` is any Python float literal, including ``inf``.
* ``floats`` is a comma-separated list of floats.
* ``choice`` is one of the listed words.

Every config needs a ``[scenario]`` section.  Some scenarios need one more
section, listed in ``REQUIRED_BLOCKS``.  Every other key falls back to the
defaults in ``SCHEMA``, and the parsed :class:`RunConfig` carries every
section fully populated.
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass
from typing import Any, Dict, Mapping, Optional, Tuple

from .errors import ConfigError

SCENARIOS = ("propagate", "double-slit", "which-path", "environment", "entropy-scan", "history",
             "influence-check")


@dataclass(frozen=True)
class Field:
    kind: str
    default: Any
    choices: Tuple[str, ...] = ()


def _f(default: float) -> Field:
    return Field("float", float(default))


def _i(default: int) -> Field:
    return Field("int", int(default))


def _c(default: str, *choices: str) -> Field:
    return Field("choice", default, tuple(choices))


SCHEMA: Dict[str, Dict[str, Field]] = {
    "scenario": {
        "name": _c("double-slit", *SCENARIOS),
        "mode": _c("spectral", "kernel", "spectral"),
        "eta": _f(0.0),
        "seed": _i(42),
        "band_limit": _c("auto", "auto", "on", "off"),
        "out": Field("str", "out"),
    },
    "grid": {"x_min": _f(-15.0), "x_max": _f(15.0), "n_points": _i(301)},
    "time": {"t_start": _f(0.0), "t_end": _f(1.0), "n_steps": _i(100)},
    "constants": {"hbar": _f(1.0), "mass": _f(1.0)},
    "potential": {"kind": _c("none", "none", "constant", "harmonic"), "value": _f(0.0), "omega": _f(1.0)},
    "initial": {"center": _f(0.0), "width": _f(1.0), "momentum": _f(0.0)},
    "slits": {"x1": _f(-1.0), "x2": _f(1.0), "w1": _f(1.0), "w2": _f(1.0)},
    "environment": {
        "x_min": _f(-1.0), "x_max": _f(1.0), "n_points": _i(3), "mass": _f(math.inf),
        "coupling": _c("bilinear", "bilinear", "contact", "source"),
        "strength": _f(1.0), "width": _f(1.0), "omega": _f(0.0),
        "initial": _c("uniform", "uniform", "gaussian", "delta"),
        "center": _f(0.0), "spread": _f(1.0),
    },
    "scan": {"couplings": Field("floats", (0.0, 0.5, 1.0, 2.0)), "route": _c("both", "both", "eigen", "replica")},
    "history": {"n_stages": _i(2)},
    "influence": {"g_amplitude": _f(1.0), "alpha_re": _f(0.0), "alpha_im": _f(-1.0)},
}

# An infinitely heavy environment is a static pointer.
INFINITE_OK = {("environment", "mass")}

REQUIRED_BLOCKS = {
    "propagate": ("initial",),
    "environment": ("environment",),
    "entropy-scan": ("scan",),
    "history": ("history",),
    "influence-check": ("influence",),
}

# Tiny-lattice scenarios enumerate paths, so their defaults are small.
SCENARIO_DEFAULTS = {
    "history": {"grid": {"x_min": -1.0, "x_max": 1.0, "n_points": 3},
                "time": {"t_end": 2.0, "n_steps": 4}},
    "influence-check": {"grid": {"x_min": -1.0, "x_max": 1.0, "n_points": 3},
                        "time": {"t_end": 1.5, "n_steps": 3}},
    "propagate": {"grid": {"x_min": -12.0, "x_max": 12.0, "n_points": 241}},
}


@dataclass(frozen=True)
class RunConfig:
    scenario: str
    blocks: Mapping[str, Mapping[str, Any]]

    def get(self, section: str, key: str) -> Any:
        return self.blocks[section][key]

    def section(self, name: str) -> Mapping[str, Any]:
        return self.blocks[name]

    @property
    def mode(self) -> str:
        return self.blocks["scenario"]["mode"]

    @property
    def seed(self) -> int:
        return self.blocks["scenario"]["seed"]

    @property
    def eta(self) -> float:
        return self.blocks["scenario"]["eta"]

    def replace(self, section: str, **values: Any) -> "RunConfig":
        blocks = {s: dict(v) for s, v in self.blocks.items()}
        blocks[section].update(values)
        cfg = RunConfig(self.scenario, blocks)
        validate(cfg)
        return cfg


_HEADER = re.compile(r"^\s*\[([^\]]+)\]\s*$")
_ENTRY = re.compile(r"^\s*([^=:#;\s][^=:]*?)\s*[=:]")


def _line_numbers(text: str) -> Dict[Tuple[str, str], int]:
    out: Dict[Tuple[str, str], int] = {}
    section = None
    for no, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped[0] in "#;":
            continue
        m = _HEADER.match(line)
        if m:
            section = m.group(1).strip()
            out.setdefault((section, ""), no)
            continue
        m = _ENTRY.match(line)
        if m and section is not None:
            out[(section, m.group(1).strip())] = no
    return out


def _convert(field: Field, raw: str, where: str) -> Any:
    raw = raw.strip()
    if field.kind == "choice":
        if raw not in field.choices:
            raise ConfigError(f"{where}: expected one of {', '.join(field.choices)}, got {raw!r}")
        return raw
    try:
        if field.kind == "int":
            if not re.fullmatch(r"[+-]?\d+", raw):
                raise ValueError
            return int(raw)
        if field.kind == "float":
            v = float(raw)
            if math.isnan(v):
                raise ValueError
            return v
        if field.kind == "floats":
            parts = [p.strip() for p in raw.split(",") if p.strip()]
            vals = tuple(float(p) for p in parts)
            if any(math.isnan(v) for v in vals):
                raise ValueError
            return vals
        return raw
    except ValueError:
        raise ConfigError(f"{where}: expected {field.kind}, got {raw!r}") from None


def defaults(scenario: str) -> Dict[str, Dict[str, Any]]:
    blocks = {s: {k: f.default for k, f in fields.items()} for s, fields in SCHEMA.items()}
    for s, vals in SCENARIO_DEFAULTS.get(scenario, {}).items():
        blocks[s].update(vals)
    blocks["scenario"]["name"] = scenario
    return blocks


def parse_config(text: str, scenario: Optional[str] = None) -> RunConfig:
    """Parse and validate config text.

    ``scenario`` (the CLI subcommand) supplies the name when the text has
    none and must agree with it when both are present.
    """
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"),
                                       inline_comment_prefixes=None, default_section="\x00")
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError(f"line {exc.lineno}: entry outside any [section]") from None
    except (configparser.DuplicateSectionError, configparser.DuplicateOptionError) as exc:
        raise ConfigError(f"line {exc.lineno}: {exc.message.splitlines()[0]}") from None
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0] if exc.errors else "?"
        raise ConfigError(f"line {lineno}: cannot parse entry") from None
    lines = _line_numbers(text)

    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"line {lines.get((section, ''), '?')}: unknown block [{section}]")
        for key in parser[section]:
            if key not in SCHEMA[section]:
                raise ConfigError(f"line {lines.get((section, key), '?')}: unknown key '{key}' in [{section}]")
    if not parser.has_section("scenario"):
        raise ConfigError("missing required block [scenario]")

    named = parser["scenario"].get("name")
    if named is not None:
        named = _convert(SCHEMA["scenario"]["name"], named,
                         f"line {lines.get(('scenario', 'name'), '?')}: [scenario] name")
    if scenario is not None and named is not None and named != scenario:
        raise ConfigError(f"config names scenario {named!r} but {scenario!r} was requested")
    name = named or scenario
    if name is None:
        raise ConfigError("[scenario] has no name and no scenario was requested")
    if name not in SCENARIOS:
        raise ConfigError(f"unknown scenario {name!r}")
    for block in REQUIRED_BLOCKS.get(name, ()):
        if not parser.has_section(block):
            raise ConfigError(f"missing required block [{block}] for scenario {name}")

    blocks = defaults(name)
    for section in parser.sections():
        for key, raw in parser[section].items():
            where = f"line {lines.get((section, key), '?')}: [{section}] {key}"
            blocks[section][key] = _convert(SCHEMA[section][key], raw, where)
    cfg = RunConfig(name, blocks)
    validate(cfg, lines)
    return cfg


def validate(cfg: RunConfig, lines: Optional[Dict[Tuple[str, str], int]] = None) -> None:
    lines = lines or {}

    def fail(section: str, key: str, msg: str) -> None:
        no = lines.get((section, key))
        prefix = f"line {no}: " if no else ""
        raise ConfigError(f"{prefix}[{section}] {key}: {msg}")

    b = cfg.blocks
    for section, key in (("grid", "n_points"), ("environment", "n_points")):
        if b[section][key] < 2:
            fail(section, key, f"must be >= 2, got {b[section][key]}")
    for section in ("grid", "environment"):
        if not b[section]["x_min"] < b[section]["x_max"]:
            fail(section, "x_max", "must exceed x_min")
    if b["time"]["n_steps"] < 0:
        fail("time", "n_steps", "must be >= 0")
    if b["time"]["t_end"] < b["time"]["t_start"]:
        fail("time", "t_end", "must not precede t_start")
    if b["time"]["n_steps"] == 0 and b["time"]["t_end"] != b["time"]["t_start"]:
        fail("time", "n_steps", "0 steps needs a zero-length window")
    if not b["constants"]["hbar"] > 0 or math.isinf(b["constants"]["hbar"]):
        fail("constants", "hbar", "must be positive and finite")
    if not b["constants"]["mass"] > 0:
        fail("constants", "mass", "must be positive")
    if not b["environment"]["mass"] > 0:
        fail("environment", "mass", "must be positive")
    if not 0.0 <= b["scenario"]["eta"] <= 0.05:
        fail("scenario", "eta", "must lie in [0, 0.05]")
    if b["slits"]["x1"] == b["slits"]["x2"]:
        fail("slits", "x2", "slits must differ")
    if b["slits"]["w1"] == 0 and b["slits"]["w2"] == 0:
        fail("slits", "w2", "weights cannot both be zero")
    if not b["initial"]["width"] > 0:
        fail("initial", "width", "must be positive")
    if not b["environment"]["width"] > 0:
        fail("environment", "width", "must be positive")
    if not b["environment"]["spread"] > 0:
        fail("environment", "spread", "must be positive")
    if len(b["scan"]["couplings"]) == 0:
        fail("scan", "couplings", "needs at least one sample")
    if b["history"]["n_stages"] < 0:
        fail("history", "n_stages", "must be >= 0")
    n_stages = b["history"]["n_stages"]
    if cfg.scenario == "history" and n_stages > 0 and b["time"]["n_steps"] % n_stages:
        fail("history", "n_stages", "must divide [time] n_steps")
    for section, fields in SCHEMA.items():
        for key, field in fields.items():
            if (section, key) in INFINITE_OK or field.kind not in ("float", "floats"):
                continue
            vals = b[section][key] if field.kind == "floats" else (b[section][key],)
            if not all(math.isfinite(v) for v in vals):
                fail(section, key, "must be finite")


def _format(field: Field, value: Any) -> str:
    if field.kind == "float":
        return repr(float(value))
    if field.kind == "floats":
        return ", ".join(repr(float(v)) for v in value)
    return str(value)


def serialize(cfg: RunConfig) -> str:
    """Text form that :func:`parse_config` maps back to an equal config."""
    out = []
    for section, fields in SCHEMA.items():
        out.append(f"[{section}]")
        for key, field in fields.items():
            out.append(f"{key} = {_format(field, cfg.blocks[section][key])}")
        out.append("")
    return "\n".join(out)
