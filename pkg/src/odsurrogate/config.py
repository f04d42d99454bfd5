"""Flat ``key = value`` run configuration.

Relative paths resolve against the config file's directory. The only
environment override is ``ODSURROGATE_OUTPUT_DIR`` for the output directory.
"""

from __future__ import annotations

import configparser
import hashlib
import os
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError

INPUT_KEYS = ("r", "h", "b", "gamma", "n_x", "n_y", "sa1_to_sa2", "dzn_to_sa2")
OPTIONAL_INPUT_KEYS = ("n_x_prev",)
KNOWN_KEYS = set(INPUT_KEYS) | set(OPTIONAL_INPUT_KEYS) | {
    "seed",
    "bin_width",
    "blocklist",
    "stall_passes",
    "max_passes",
    "wall_clock_budget",
    "output_dir",
    "delimiter",
    "abs_provenance",
    "clustering_mode",
}


@dataclass
class PipelineConfig:
    inputs: dict[str, Path]
    seed: int = 0
    bin_width: int = 25
    blocklist: tuple[str, ...] = ()
    stall_passes: int = 3
    max_passes: int = 1_000_000
    wall_clock_budget: float | None = None
    output_dir: Path = Path("out")
    delimiter: str = ","
    abs_provenance: bool = False
    clustering_mode: str = "max"
    raw: dict[str, str] = field(default_factory=dict)

    def missing_inputs(self) -> list[str]:
        return [f"{k}={p}" for k, p in self.inputs.items() if not p.is_file()]

    def digest(self) -> str:
        """Hash of the settings as written (paths unresolved), for the manifest."""
        text = "\n".join(f"{k}={self.raw[k]}" for k in sorted(self.raw))
        return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _parse_bool(key: str, text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off", ""):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {text!r}")


def parse_config(text: str, base_dir: Path) -> PipelineConfig:
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#",))
    try:
        parser.read_string("[run]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    raw = {k: v.strip() for k, v in parser["run"].items()}
    unknown = sorted(set(raw) - KNOWN_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    missing = [k for k in INPUT_KEYS if not raw.get(k)]
    if missing:
        raise ConfigError(f"config lacks input paths: {', '.join(missing)}")

    def path(v: str) -> Path:
        p = Path(v)
        return p if p.is_absolute() else base_dir / p

    inputs = {k: path(raw[k]) for k in INPUT_KEYS}
    for k in OPTIONAL_INPUT_KEYS:
        if raw.get(k):
            inputs[k] = path(raw[k])

    def num(key, cast, default):
        if not raw.get(key):
            return default
        try:
            return cast(raw[key])
        except ValueError:
            raise ConfigError(f"{key}: cannot parse {raw[key]!r}") from None

    out_dir = os.environ.get("ODSURROGATE_OUTPUT_DIR") or raw.get("output_dir") or "out"
    cfg = PipelineConfig(
        inputs=inputs,
        seed=num("seed", int, 0),
        bin_width=num("bin_width", int, 25),
        blocklist=tuple(c.strip() for c in raw.get("blocklist", "").split(",") if c.strip()),
        stall_passes=num("stall_passes", int, 3),
        max_passes=num("max_passes", int, 1_000_000),
        wall_clock_budget=num("wall_clock_budget", float, None),
        output_dir=path(out_dir),
        delimiter=raw.get("delimiter") or ",",
        abs_provenance=_parse_bool("abs_provenance", raw.get("abs_provenance", "")),
        clustering_mode=raw.get("clustering_mode") or "max",
        raw=raw,
    )
    if cfg.bin_width < 1:
        raise ConfigError("bin_width must be >= 1")
    if cfg.stall_passes < 1 or cfg.max_passes < 1:
        raise ConfigError("stall_passes and max_passes must be >= 1")
    if cfg.clustering_mode not in ("max", "directed"):
        raise ConfigError("clustering_mode must be 'max' or 'directed'")
    return cfg


def load_config(path) -> PipelineConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, path.parent)


def render_config(entries: dict[str, object]) -> str:
    return "".join(f"{k} = {v}\n" for k, v in entries.items())
