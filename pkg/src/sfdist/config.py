"""INI run configuration: strict parsing into domain, field, and method blocks.

One sectioned key-value format serves every subcommand so that the
cross-validation suite can share domain/field blocks verbatim.  Unknown
sections or keys are hard errors, not warnings.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field

import numpy as np

from .domain import Domain, VelocityField
from .errors import ConfigError

ENV_OUTPUT_DIR = "SFDIST_OUTPUT_DIR"
ENV_MAX_THREADS = "SFDIST_MAX_THREADS"

# allowed keys per section; a trailing "?" marks an optional key
_SCHEMA = {
    "domain": ["lengths", "sites", "boundary?"],
    "field": ["family", "params?", "direction_j?", "exclusion_radius?",
              "values_file?"],
    "run": ["seed?", "output?", "threads?"],
    "oracle": ["n_particles", "mass?", "state?", "components?"],
    "bec": ["n_particles", "mass?"],
    "quasiparticle": ["dimension", "lengths", "kmax", "dispersion",
                      "params?", "beta", "velocity?"],
    "pimc": ["n_particles", "mass?", "beta", "n_slices", "sweeps",
             "thermalization?", "chains?", "i?", "j?", "n_bins?",
             "measure_every?", "block_size?", "staging_length?",
             "cycle_length?", "potential?", "g?", "w?",
             "enable_permutations?"],
    "cmps": ["state_file?", "length?", "bond_dim?", "state_seed?",
             "n_modes?", "scale?", "with_q?", "mass?", "points?", "tol?"],
    "rtqc": ["state_file", "region", "n_region", "mode?"],
    "validate": ["scenarios?"],
}

_REQUIRED_SECTIONS = {
    "oracle": ("domain", "field", "oracle"),
    "bec": ("domain", "field", "bec"),
    "quasiparticle": ("quasiparticle",),
    "pimc": ("domain", "field", "pimc"),
    "cmps": ("field", "cmps"),
    "rtqc": ("rtqc",),
    "validate": (),
}


@dataclass
class RunConfig:
    subcommand: str
    sections: dict                      # raw {section: {key: str}} echo
    seed: int = 0
    output: str = "."
    threads: int | None = None
    domain: Domain | None = None
    velocity_field: VelocityField | None = None
    method: dict = field(default_factory=dict)


def _floats(text: str, key: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in text.replace(",", " ").split())
    except ValueError:
        raise ConfigError(f"{key}: expected numbers, got {text!r}") from None


def _ints(text: str, key: str) -> tuple[int, ...]:
    vals = _floats(text, key)
    if any(v != int(v) for v in vals):
        raise ConfigError(f"{key}: expected integers, got {text!r}")
    return tuple(int(v) for v in vals)


def _bool(text: str, key: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {text!r}")


class _Section:
    """Typed access to one section with strict unknown-key detection."""

    def __init__(self, name: str, raw: dict):
        self.name = name
        self.raw = dict(raw)
        allowed = {k.rstrip("?") for k in _SCHEMA[name]}
        required = {k for k in _SCHEMA[name] if not k.endswith("?")}
        unknown = set(self.raw) - allowed
        if unknown:
            raise ConfigError(
                f"[{name}]: unknown keys {sorted(unknown)}; "
                f"allowed: {sorted(allowed)}")
        missing = required - set(self.raw)
        if missing:
            raise ConfigError(f"[{name}]: missing required keys {sorted(missing)}")

    def get(self, key, default=None):
        return self.raw.get(key, default)

    def floats(self, key, default=None):
        if key not in self.raw:
            return default
        return _floats(self.raw[key], f"[{self.name}] {key}")

    def ints(self, key, default=None):
        if key not in self.raw:
            return default
        return _ints(self.raw[key], f"[{self.name}] {key}")

    def int(self, key, default=None):
        if key not in self.raw:
            return default
        vals = _ints(self.raw[key], f"[{self.name}] {key}")
        if len(vals) != 1:
            raise ConfigError(f"[{self.name}] {key}: expected a single integer")
        return vals[0]

    def float(self, key, default=None):
        if key not in self.raw:
            return default
        vals = _floats(self.raw[key], f"[{self.name}] {key}")
        if len(vals) != 1:
            raise ConfigError(f"[{self.name}] {key}: expected a single number")
        return vals[0]

    def bool(self, key, default=None):
        if key not in self.raw:
            return default
        return _bool(self.raw[key], f"[{self.name}] {key}")


def parse_domain(sec: _Section) -> Domain:
    lengths = sec.floats("lengths")
    sites = sec.ints("sites")
    boundary = sec.get("boundary", "periodic")
    if boundary not in ("periodic", "open"):
        raise ConfigError(f"[domain] boundary must be periodic or open, "
                          f"got {boundary!r}")
    if len(lengths) != len(sites):
        raise ConfigError("[domain] lengths and sites must have equal length")
    return Domain(tuple(lengths), tuple(sites), boundary)


def parse_field(sec: _Section, domain: Domain | None) -> VelocityField:
    family = sec.get("family")
    params = sec.floats("params", ())
    direction_j = sec.int("direction_j", 0)
    excl = sec.float("exclusion_radius", 0.0)
    values = None
    if family == "tabulated":
        path = sec.get("values_file")
        if path is None:
            raise ConfigError("[field] tabulated family needs values_file")
        if domain is None:
            raise ConfigError("[field] tabulated family needs a [domain] block")
        values = np.loadtxt(path, delimiter=",", ndmin=2)
        if values.shape != (domain.nsites, domain.dim):
            raise ConfigError(
                f"[field] values_file has shape {values.shape}, expected "
                f"({domain.nsites}, {domain.dim})")
    elif "values_file" in sec.raw:
        raise ConfigError("[field] values_file is only valid for tabulated")
    return VelocityField(family, params=params, direction_j=direction_j,
                         exclusion_radius=excl, domain=domain, values=values)


def load_config(path: str, subcommand: str) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    sections = {name: dict(parser[name]) for name in parser.sections()}
    return build_config(sections, subcommand)


def build_config(sections: dict, subcommand: str) -> RunConfig:
    if subcommand not in _REQUIRED_SECTIONS:
        raise ConfigError(f"unknown subcommand {subcommand!r}")
    wanted = set(_REQUIRED_SECTIONS[subcommand]) | {"run"}
    if subcommand == "validate":
        wanted.add("validate")
    unknown = set(sections) - wanted
    if unknown:
        raise ConfigError(
            f"unexpected sections {sorted(unknown)} for subcommand "
            f"{subcommand!r}; expected at most {sorted(wanted)}")
    missing = set(_REQUIRED_SECTIONS[subcommand]) - set(sections)
    if missing:
        raise ConfigError(f"missing required sections {sorted(missing)}")

    cfg = RunConfig(subcommand, sections)
    run = _Section("run", sections.get("run", {}))
    cfg.seed = run.int("seed", 0)
    cfg.output = os.environ.get(ENV_OUTPUT_DIR) or run.get("output", ".")
    cfg.threads = run.int("threads")
    env_threads = os.environ.get(ENV_MAX_THREADS)
    if env_threads:
        cap = int(env_threads)
        cfg.threads = cap if cfg.threads is None else min(cfg.threads, cap)

    if "domain" in sections:
        cfg.domain = parse_domain(_Section("domain", sections["domain"]))
    if "field" in sections:
        cfg.velocity_field = parse_field(_Section("field", sections["field"]),
                                         cfg.domain)
    method_name = subcommand if subcommand in sections else None
    if method_name:
        cfg.method = _Section(method_name, sections[method_name]).raw
    return cfg


def method_section(cfg: RunConfig) -> _Section:
    return _Section(cfg.subcommand, cfg.method)
