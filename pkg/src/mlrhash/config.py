from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, Mapping, Optional

from .errors import UsageError


THREADS_ENV = "MLRH_THREADS"
SYLVESTER_FORMS = ("exact", "paper")
DB_CODE_MODES = ("reencode", "hf")


@dataclass
class NumericsConfig:
    """Tolerances shared by the linear algebra kernels and the feature map."""

    symmetry_tol: float = 1e-10
    jacobi_tol: float = 1e-12
    jacobi_max_sweeps: int = 100
    denominator_floor: float = 1e-12
    residual_tol: float = 1e-8
    sigma_floor: float = 1e-12


@dataclass
class PathsConfig:
    """Optional filesystem locations used across commands."""

    ledger: Optional[Path] = None


@dataclass
class RunConfig:
    """Top level configuration consumed by every command."""

    alpha: float = 1.0
    beta: float = 1e-5
    lam: float = 1.0
    bits: int = 32
    runs: int = 3
    max_outer: int = 30
    dcc_sweeps: int = 3
    rel_tol: float = 1e-6
    seed: int = 0
    sylvester_form: str = "exact"
    rbf_m: int = 0
    db_codes: str = "reencode"
    map_cutoff: Optional[int] = None
    threads: int = 0
    paths: PathsConfig = field(default_factory=PathsConfig)
    numerics: NumericsConfig = field(default_factory=NumericsConfig)

    def validate(self) -> "RunConfig":
        for name in ("alpha", "beta", "lam", "rel_tol"):
            if not getattr(self, name) > 0:
                raise UsageError(f"{_display_key(name)} must be positive, got {getattr(self, name)}")
        for name in ("bits", "runs", "max_outer", "dcc_sweeps"):
            if getattr(self, name) < 1:
                raise UsageError(f"{name} must be at least 1, got {getattr(self, name)}")
        if self.seed < 0 or self.seed >= 2**64:
            raise UsageError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if self.rbf_m < 0:
            raise UsageError(f"rbf_m must be non-negative, got {self.rbf_m}")
        if self.sylvester_form not in SYLVESTER_FORMS:
            raise UsageError(f"sylvester_form must be one of {SYLVESTER_FORMS}, got {self.sylvester_form!r}")
        if self.db_codes not in DB_CODE_MODES:
            raise UsageError(f"db_codes must be one of {DB_CODE_MODES}, got {self.db_codes!r}")
        if self.map_cutoff is not None and self.map_cutoff < 1:
            raise UsageError(f"map_cutoff must be at least 1, got {self.map_cutoff}")
        if self.threads < 0:
            raise UsageError(f"threads must be non-negative, got {self.threads}")
        return self

    def effective_threads(self) -> int:
        """Worker count for parallel sections; 0 means one per CPU."""
        return self.threads if self.threads > 0 else (os.cpu_count() or 1)

    def to_dict(self) -> Dict[str, Any]:
        """Return a JSON serialisable copy of the config for persistence."""
        payload = asdict(self)
        payload["paths"] = {"ledger": str(self.paths.ledger) if self.paths.ledger else None}
        return payload

    def to_text(self) -> str:
        """Render the config in the `key = value` file format accepted by `load_config`."""
        lines = []
        for key, value in _flatten(self.to_dict()).items():
            if value is None:
                continue
            lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"


def load_config(path: Optional[Path]) -> RunConfig:
    """
    Load configuration from *path* if provided, otherwise use defaults.

    The file holds one `key = value` pair per line; `#` starts a comment. Nested
    blocks use dotted keys such as `numerics.jacobi_tol`. The `MLRH_THREADS`
    environment variable seeds the thread count before the file is applied.
    """
    config = RunConfig()
    env_threads = os.getenv(THREADS_ENV)
    if env_threads:
        _apply_config_updates(config, {"threads": env_threads})

    if path is None:
        return config.validate()

    payload: Dict[str, str] = {}
    with Path(path).expanduser().open("r", encoding="utf-8") as handle:
        for number, raw in enumerate(handle, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{number}: expected 'key = value', got {raw.strip()!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            payload[key] = value

    _apply_config_updates(config, payload)
    return config.validate()


def apply_overrides(config: RunConfig, overrides: Mapping[str, Any]) -> RunConfig:
    """Apply command-line values on top of *config*; `None` means the flag was not given."""
    _apply_config_updates(config, {key: value for key, value in overrides.items() if value is not None})
    return config.validate()


def _apply_config_updates(config: RunConfig, payload: Mapping[str, Any]) -> None:
    """Update *config* in-place using (possibly dotted) keys from *payload*."""
    for raw_key, value in payload.items():
        key = "lam" if raw_key == "lambda" else raw_key.replace("-", "_")
        target: Any = config
        if "." in key:
            block, key = key.split(".", 1)
            if block not in ("paths", "numerics"):
                raise UsageError(f"unknown config block {block!r}")
            target = getattr(config, block)
        known = {item.name: item for item in fields(target)}
        if key not in known:
            raise UsageError(f"unknown config key {raw_key!r}")
        setattr(target, key, _coerce(raw_key, value, getattr(target, key), key))


def _coerce(raw_key: str, value: Any, current: Any, key: str) -> Any:
    if not isinstance(value, str):
        return value
    text = value.strip()
    try:
        if key == "ledger":
            return Path(text) if text else None
        if key == "map_cutoff":
            return None if text.lower() in ("", "none") else int(text)
        if isinstance(current, bool):
            return text.lower() in ("1", "true", "yes", "on")
        if isinstance(current, int):
            return int(text)
        if isinstance(current, float):
            return float(text)
    except ValueError as exc:
        raise UsageError(f"invalid value {value!r} for {raw_key}") from exc
    return text


def _flatten(payload: Mapping[str, Any], prefix: str = "") -> Dict[str, Any]:
    flat: Dict[str, Any] = {}
    for key, value in payload.items():
        name = f"{prefix}{_display_key(key)}"
        if isinstance(value, Mapping):
            flat.update(_flatten(value, prefix=f"{name}."))
        else:
            flat[name] = value
    return flat


def _display_key(key: str) -> str:
    return "lambda" if key == "lam" else key
