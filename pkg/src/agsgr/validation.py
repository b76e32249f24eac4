"""Small input-validation helpers and seed plumbing."""

from __future__ import annotations

import numbers
import zlib

import numpy as np

from .exceptions import ConfigError


def check_int(name: str, value, minimum: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_float(name: str, value, minimum: float | None = None, strict: bool = False) -> float:
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a number, got {value!r}") from None
    if not np.isfinite(v):
        raise ConfigError(f"{name} must be finite")
    if minimum is not None and (v <= minimum if strict else v < minimum):
        op = ">" if strict else ">="
        raise ConfigError(f"{name} must be {op} {minimum}, got {v}")
    return v


def check_query_params(k, h, K) -> None:
    check_int("core", k, 1)
    check_int("group_size", h, k + 1)
    check_int("top_k", K, 1)


def derive_seed(root: int, namespace: str) -> int:
    """Independent child seed for ``namespace`` from one root seed."""
    ss = np.random.SeedSequence([int(root) & 0xFFFFFFFF, zlib.crc32(namespace.encode())])
    return int(ss.generate_state(1)[0])
