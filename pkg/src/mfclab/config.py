"""Run configuration: sectioned key=value files.

Format: `[section]` headers and `key = value` lines; blank lines and
comments (everything after `#`) are ignored.  Sections are [model], [sim],
[experiment], [output].  Unknown sections, unknown keys, duplicate keys,
type errors, and keys that do not apply to the chosen model kind or
experiment are all rejected with the offending line number.
"""

import dataclasses
import hashlib
from dataclasses import dataclass

from .dynamics import SimConfig
from .models import AdvertisingParams, VintageParams

EXPERIMENT_NAMES = ("lift-check", "converge", "feedback-opt", "regularity",
                    "diagnose", "oracle-compare")

SIM_KEYS = {"t0": "float", "horizon": "float", "steps": "int", "paths": "int",
            "seed": "int"}
SIM_DEFAULTS = {"t0": 0.0, "horizon": 1.0, "steps": 50, "paths": 200, "seed": 7}

OUTPUT_KEYS = {"outdir": "str", "dump_paths": "bool"}
OUTPUT_DEFAULTS = {"outdir": "out", "dump_paths": False}

EXPERIMENT_KEYS = {
    "name": "str",
    "n_list": "int_list",
    "intervals": "int",
    "grid_points": "int",
    "pairs": "int",
    "lam": "float",
    "convex_kappa": "float",
    "mixture_weight": "float",
    "gain": "float",
    "mis_gain": "float",
    "n_particles": "int",
    "n_defect": "int",
    "level": "float",
    "monotone_from": "int",
    "law_seed": "int",
    "samples": "int",
}

# which option keys each experiment accepts (beyond "name")
EXPERIMENT_OPTIONS = {
    "lift-check": {"n_list", "law_seed"},
    "converge": {"n_list", "mixture_weight", "gain", "monotone_from"},
    "feedback-opt": {"intervals", "grid_points", "gain", "mis_gain",
                     "n_particles", "level"},
    "regularity": {"pairs", "lam", "convex_kappa", "n_defect", "n_list", "gain"},
    "diagnose": {"samples"},
    "oracle-compare": {"intervals", "grid_points", "gain", "n_particles", "level"},
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    model_kind: str
    model_params: object
    sim: SimConfig
    experiment: str
    options: dict
    outdir: str
    dump_paths: bool
    fingerprint: str  # sha256 of the raw config text


def _convert(raw: str, typ: str, key: str, line: int):
    try:
        if typ == "int":
            return int(raw)
        if typ == "float":
            return float(raw)
        if typ == "str":
            return raw
        if typ == "bool":
            lowered = raw.lower()
            if lowered in ("true", "yes", "1", "on"):
                return True
            if lowered in ("false", "no", "0", "off"):
                return False
            raise ValueError(raw)
        if typ == "int_list":
            return tuple(int(part.strip()) for part in raw.split(",") if part.strip())
    except ValueError:
        raise ConfigError(f"line {line}: expected {typ} for '{key}', got {raw!r}") from None
    raise ConfigError(f"line {line}: no converter for type {typ!r}")  # pragma: no cover


def _scan(text: str) -> dict:
    """Raw scan: {section: {key: (value, line)}} with duplicate/shape errors."""
    sections = {}
    current = None
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip()
            if name not in ("model", "sim", "experiment", "output"):
                raise ConfigError(f"line {lineno}: unknown section [{name}]")
            if name in sections:
                raise ConfigError(f"line {lineno}: duplicate section [{name}]")
            sections[name] = {}
            current = name
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw_line.strip()!r}")
        if current is None:
            raise ConfigError(f"line {lineno}: key outside any section")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in sections[current]:
            raise ConfigError(f"line {lineno}: duplicate key '{key}' in [{current}]")
        sections[current][key] = (value, lineno)
    return sections


def _typed_section(entries: dict, section: str, keys: dict, defaults: dict) -> dict:
    out = dict(defaults)
    for key, (raw, line) in entries.get(section, {}).items():
        if key not in keys:
            raise ConfigError(f"line {line}: unknown key '{key}' in [{section}]")
        out[key] = _convert(raw, keys[key], key, line)
    return out


def _model_from(entries: dict):
    table = entries.get("model", {})
    kind = "advertising"
    if "kind" in table:
        raw, line = table["kind"]
        if raw not in ("advertising", "vintage"):
            raise ConfigError(f"line {line}: model kind must be advertising or vintage, "
                              f"got {raw!r}")
        kind = raw
    params_cls = AdvertisingParams if kind == "advertising" else VintageParams
    field_types = {f.name: ("int" if isinstance(f.default, int) else "float")
                   for f in dataclasses.fields(params_cls)}
    overrides = {}
    for key, (raw, line) in table.items():
        if key == "kind":
            continue
        if key not in field_types:
            raise ConfigError(f"line {line}: unknown key '{key}' in [model] "
                              f"for kind {kind}")
        overrides[key] = _convert(raw, field_types[key], key, line)
    return kind, params_cls(**overrides)


def parse_config(path: str) -> RunConfig:
    with open(path, "r", encoding="utf-8") as handle:
        text = handle.read()
    entries = _scan(text)
    kind, params = _model_from(entries)
    sim_values = _typed_section(entries, "sim", SIM_KEYS, SIM_DEFAULTS)
    try:
        sim = SimConfig(**sim_values)
    except ValueError as exc:
        raise ConfigError(f"[sim] rejected: {exc}") from None
    exp_table = entries.get("experiment", {})
    if "name" not in exp_table:
        raise ConfigError("missing 'name' in [experiment] section")
    name_raw, name_line = exp_table["name"]
    if name_raw not in EXPERIMENT_NAMES:
        raise ConfigError(f"line {name_line}: unknown experiment {name_raw!r} "
                          f"(choose from {', '.join(EXPERIMENT_NAMES)})")
    allowed = EXPERIMENT_OPTIONS[name_raw]
    options = {}
    for key, (raw, line) in exp_table.items():
        if key == "name":
            continue
        if key not in EXPERIMENT_KEYS:
            raise ConfigError(f"line {line}: unknown key '{key}' in [experiment]")
        if key not in allowed:
            raise ConfigError(f"line {line}: key '{key}' does not apply to "
                              f"experiment {name_raw}")
        options[key] = _convert(raw, EXPERIMENT_KEYS[key], key, line)
    out_values = _typed_section(entries, "output", OUTPUT_KEYS, OUTPUT_DEFAULTS)
    return RunConfig(
        model_kind=kind,
        model_params=params,
        sim=sim,
        experiment=name_raw,
        options=options,
        outdir=out_values["outdir"],
        dump_paths=out_values["dump_paths"],
        fingerprint=hashlib.sha256(text.encode("utf-8")).hexdigest(),
    )
