"""Property-file configuration and provider profile loading.

Both formats are flat ``key=value`` documents with ``#`` comments.
"""
from __future__ import annotations

import logging
from dataclasses import MISSING, fields
from decimal import Decimal, InvalidOperation
from importlib import resources
from pathlib import Path

from .domain import EngineConfig, ProviderProfile
from .errors import ConfigParseError, ConfigTypeError

log = logging.getLogger(__name__)

# property key -> EngineConfig field
PROPERTY_KEYS = {
    "smartpick.cloud.compute.provider": "compute_provider",
    "smartpick.cloud.compute.instanceFamily": "compute_instance_family",
    "smartpick.cloud.compute.relay": "compute_relay",
    "smartpick.cloud.compute.knob": "compute_knob",
    "smartpick.train.max.batch": "train_max_batch",
    "smartpick.train.pref.sameInstance": "train_pref_same_instance",
    "smartpick.train.min.ram.gb": "train_min_ram_gb",
    "smartpick.train.errorDifference.trigger": "train_error_difference_trigger_s",
}
FIELD_TO_KEY = {v: k for k, v in PROPERTY_KEYS.items()}

_PROVIDER_ALIASES = {"aws": "aws-sim", "gcp": "gcp-sim"}


def _parse_bool(raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _parse_int(raw: str) -> int:
    return int(raw.strip())


def _parse_float(raw: str) -> float:
    return float(raw.strip())


def _parse_decimal(raw: str) -> Decimal:
    try:
        return Decimal(raw.strip())
    except InvalidOperation:
        raise ValueError(f"not a decimal: {raw!r}") from None


def _parser_for(annotation) -> callable:
    name = annotation if isinstance(annotation, str) else getattr(annotation, "__name__", "")
    return {
        "bool": _parse_bool,
        "int": _parse_int,
        "float": _parse_float,
        "Decimal": _parse_decimal,
    }.get(name, str.strip)


def read_properties(path) -> list[tuple[int, str, str]]:
    """Return ``(line_no, key, value)`` triples, skipping blanks and comments."""
    out = []
    text = Path(path).read_text(encoding="utf-8")
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigParseError(path, line_no, f"expected key=value, got {stripped!r}")
        key, value = stripped.split("=", 1)
        out.append((line_no, key.strip(), value.strip()))
    return out


def _coerce(path, line_no, key, raw, annotation):
    try:
        return _parser_for(annotation)(raw)
    except ValueError as exc:
        raise ConfigTypeError(path, line_no, f"bad value for {key}: {exc}") from None


def load_config(path) -> EngineConfig:
    types = {f.name: f.type for f in fields(EngineConfig)}
    values = {}
    for line_no, key, raw in read_properties(path):
        field_name = PROPERTY_KEYS.get(key)
        if field_name is None:
            log.warning("%s:%d: unknown property %s ignored", path, line_no, key)
            continue
        values[field_name] = _coerce(path, line_no, key, raw, types[field_name])
    provider = values.get("compute_provider")
    if provider is not None:
        values["compute_provider"] = _PROVIDER_ALIASES.get(provider.lower(), provider)
    return EngineConfig(**values)


def dump_config(cfg: EngineConfig) -> str:
    lines = []
    for f in fields(EngineConfig):
        value = getattr(cfg, f.name)
        if isinstance(value, bool):
            value = "True" if value else "False"
        lines.append(f"{FIELD_TO_KEY[f.name]}={value}")
    return "\n".join(lines) + "\n"


def save_config(cfg: EngineConfig, path) -> None:
    Path(path).write_text(dump_config(cfg), encoding="utf-8")


def load_profile(path) -> ProviderProfile:
    types = {f.name: f.type for f in fields(ProviderProfile)}
    values = {}
    for line_no, key, raw in read_properties(path):
        if key not in types:
            log.warning("%s:%d: unknown profile key %s ignored", path, line_no, key)
            continue
        values[key] = _coerce(path, line_no, key, raw, types[key])
    missing = [f.name for f in fields(ProviderProfile) if f.name not in values and f.default is MISSING]
    if missing:
        raise ConfigParseError(path, 0, f"profile is missing required keys: {', '.join(missing)}")
    return ProviderProfile(**values)


def dump_profile(profile: ProviderProfile) -> str:
    return "".join(f"{f.name}={getattr(profile, f.name)}\n" for f in fields(ProviderProfile))


def bundled_profiles() -> list[str]:
    root = resources.files("hybridplan") / "profiles"
    return sorted(p.name[: -len(".properties")] for p in root.iterdir() if p.name.endswith(".properties"))


def resolve_profile(name_or_path) -> ProviderProfile:
    """Load a bundled profile by name (``aws-sim``) or a profile file by path."""
    candidate = Path(str(name_or_path))
    if candidate.is_file():
        return load_profile(candidate)
    name = _PROVIDER_ALIASES.get(str(name_or_path).lower(), str(name_or_path))
    ref = resources.files("hybridplan") / "profiles" / f"{name}.properties"
    if not ref.is_file():
        raise FileNotFoundError(f"no bundled profile {name!r}; available: {', '.join(bundled_profiles())}")
    with resources.as_file(ref) as p:
        return load_profile(p)
