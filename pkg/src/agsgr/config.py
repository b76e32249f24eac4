"""Flat ``key = value`` run configuration.

Precedence is command-line flag, then config file, then built-in default.
The ``AGSGR_CONFIG`` environment variable names a config file used when
no ``--config`` is given.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

from .exceptions import ConfigError
from .groups import DEFAULT_CAP
from .ingest import DEFAULT_WINDOW

ENV_VAR = "AGSGR_CONFIG"


def parse_bool(s: str) -> bool:
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def parse_int_list(s: str) -> tuple[int, ...]:
    """``"1-5"``, ``"2,4,6"`` or a mix such as ``"1-3,8"``."""
    out: list[int] = []
    for part in str(s).split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            a, b = part.split("-", 1)
            lo, hi = int(a), int(b)
            if hi < lo:
                raise ValueError(f"empty range {part!r}")
            out.extend(range(lo, hi + 1))
        else:
            out.append(int(part))
    if not out:
        raise ValueError("empty list")
    return tuple(dict.fromkeys(out))


def parse_cap(s: str) -> int | None:
    if str(s).strip().lower() in ("none", "unlimited", "0"):
        return None
    v = int(s)
    if v < 1:
        raise ValueError("cap must be positive")
    return v


def _path(s: str) -> str:
    return str(s)


@dataclass(frozen=True)
class Key:
    name: str
    parse: Callable[[str], Any]
    default: Any
    help: str
    minimum: float | None = None

    @property
    def flag(self) -> str:
        return "--" + self.name.replace(".", "-").replace("_", "-")

    @property
    def dest(self) -> str:
        return self.name.replace(".", "_")


KEYS: tuple[Key, ...] = (
    Key("checkins", _path, None, "check-in CSV: user_id,poi_id,timestamp,lat,lon,category"),
    Key("edges", _path, None, "friendship CSV: u,v"),
    Key("groups", _path, None, "optional explicit groups CSV: event_id,user_id,poi_id,timestamp"),
    Key("data_dir", _path, "agsgr-data", "directory of the ingested dataset"),
    Key("model", _path, None, "model checkpoint path (default: <data_dir>/model.bin)"),
    Key("index_cache", _path, None, "optional cache file for per-topic spatial indexes"),
    Key("report_dir", _path, None, "output directory for reports (default: <data_dir>/reports)"),
    Key("target_user", int, None, "target user id for recommend"),
    Key("group_size", int, 5, "group size h, target included", 2),
    Key("core", int, 3, "minimum in-group degree k", 1),
    Key("top_k", int, 10, "number of recommended locations K", 1),
    Key("cap", parse_cap, DEFAULT_CAP, "max candidate groups per query ('none' for unlimited)"),
    Key("relax_friendship", parse_bool, False, "allow members who are not direct friends of the target"),
    Key("epochs", int, 200, "training epochs (one full-batch Adam step each)", 1),
    Key("lr", float, 1e-2, "Adam learning rate", 0.0),
    Key("dim", int, 32, "latent dimension", 1),
    Key("l2", float, 1e-3, "L2 regularization weight", 0.0),
    Key("neg_ratio", int, 4, "negative topics sampled per visited topic", 1),
    Key("n_alt_groups", int, 4, "unobserved friend groups sampled per observed group", 0),
    Key("train_targets", str, "initiator", "members acting as target in training: initiator or all"),
    Key("seed", int, 0, "root random seed"),
    Key("window", int, DEFAULT_WINDOW, "co-check-in window in seconds (strict)", 1),
    Key("train_fraction", float, 0.8, "chronological share of group events used for training", 0.0),
    Key("eval.n_targets", int, 100, "number of sampled evaluation targets", 1),
    Key("eval.seed", int, 0, "target sampling seed"),
    Key("eval.k_range", parse_int_list, tuple(range(1, 6)), "k values, e.g. 1-5"),
    Key("eval.h_range", parse_int_list, tuple(range(2, 11)), "h values, e.g. 2-10"),
    Key("eval.K_range", parse_int_list, (10,), "K values, e.g. 5,10"),
    Key("threads", int, 1, "worker threads for per-target evaluation", 1),
    Key("trials", int, None, "oracle-check instances per suite (default: per-suite counts)", 1),
)
KEY_BY_NAME = {k.name: k for k in KEYS}


def read_config_file(path) -> dict[str, str]:
    """Raw ``key -> value`` strings; ``#`` starts a comment."""
    out: dict[str, str] = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in KEY_BY_NAME:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = value
    return out


def config_path(explicit: str | None) -> str | None:
    return explicit if explicit else os.environ.get(ENV_VAR) or None


def resolve(flags: dict[str, Any], file_values: dict[str, str]) -> dict[str, Any]:
    """Merge flag values (already typed, ``None`` = absent) over file values over defaults."""
    out: dict[str, Any] = {}
    for key in KEYS:
        v = flags.get(key.name)
        if v is None and key.name in file_values:
            try:
                v = key.parse(file_values[key.name])
            except ValueError as exc:
                raise ConfigError(f"{key.name}: {exc}") from None
        if v is None:
            v = key.default
        if key.minimum is not None and v is not None and v < key.minimum:
            raise ConfigError(f"{key.name} must be >= {key.minimum}, got {v}")
        out[key.name] = v
    if out["train_targets"] not in ("initiator", "all"):
        raise ConfigError("train_targets must be 'initiator' or 'all'")
    if not 0.0 < out["train_fraction"] <= 1.0:
        raise ConfigError("train_fraction must lie in (0, 1]")
    if out["group_size"] < out["core"] + 1:
        raise ConfigError("group_size must be >= core + 1")
    data = Path(out["data_dir"])
    out["model"] = out["model"] or str(data / "model.bin")
    out["report_dir"] = out["report_dir"] or str(data / "reports")
    return out


def keys_help() -> str:
    width = max(len(k.name) for k in KEYS)
    lines = ["config keys (file 'key = value'; flag --key-name overrides):"]
    for k in KEYS:
        d = "" if k.default is None else f" [default: {_fmt(k.default)}]"
        lines.append(f"  {k.name:<{width}}  {k.help}{d}")
    return "\n".join(lines)


def _fmt(v) -> str:
    if isinstance(v, tuple):
        return ",".join(str(x) for x in v)
    return str(v)
