"""TOML protocol files.

Every amplitude may be a plain number or a string ``"sqrt:p/q"`` (optionally
with a leading ``-``), which is parsed as an exact fraction before the square
root is taken.  Absent sections keep the default protocol::

    [initial]
    heads = "sqrt:1/3"
    tails = "sqrt:2/3"

    [spin_prep.tails]          # S state Fbar prepares on each R result
    up = "sqrt:1/2"
    down = "sqrt:1/2"

    [bases.wbar.okbar]         # bases.f / bases.wbar / bases.w
    hbar = "sqrt:1/2"
    tbar = "-sqrt:1/2"

    [times]
    f_measures_s = "t2"
"""
from __future__ import annotations

import math
import re
import sys
from fractions import Fraction
from pathlib import Path
from typing import Any, Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .experiment import ConfigError, ProtocolConfig, TimePoint

_TOP_KEYS = {"initial", "spin_prep", "bases", "times"}
_BASES = {"f": "f_basis", "wbar": "wbar_basis", "w": "w_basis"}


class ConfigParseError(ValueError):
    def __init__(self, path: str, line: int | None, column: int | None, message: str):
        self.path, self.line, self.column = path, line, column
        where = f"{path}:{line}:{column}" if line is not None else path
        super().__init__(f"{where}: {message}")


def parse_amplitude(value: Any, field: str = "amplitude") -> float:
    if isinstance(value, bool):
        raise ConfigError(field, "expected a number, got a boolean")
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(field, f"expected a number or 'sqrt:p/q', got {value!r}")
    text = value.strip().replace(" ", "")
    sign = 1.0
    if text.startswith("-"):
        sign, text = -1.0, text[1:]
    try:
        if text.startswith("sqrt:"):
            frac = Fraction(text[5:])
            if frac < 0:
                raise ConfigError(field, "square root of a negative number")
            return sign * math.sqrt(frac)
        return sign * float(Fraction(text))
    except (ValueError, ZeroDivisionError):
        raise ConfigError(field, f"cannot parse amplitude {value!r}") from None


def _table(data: Mapping, field: str) -> dict[str, dict[str, float]]:
    if not isinstance(data, Mapping):
        raise ConfigError(field, "expected a table")
    out = {}
    for key, comps in data.items():
        if not isinstance(comps, Mapping):
            raise ConfigError(f"{field}.{key}", "expected a table of amplitudes")
        out[key] = {lab: parse_amplitude(v, f"{field}.{key}.{lab}") for lab, v in comps.items()}
    return out


def config_from_mapping(data: Mapping) -> ProtocolConfig:
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ConfigError(sorted(unknown)[0], f"unknown section (allowed: {sorted(_TOP_KEYS)})")
    kwargs: dict[str, Any] = {}
    init = data.get("initial", {})
    extra = set(init) - {"heads", "tails"}
    if extra:
        raise ConfigError(f"initial.{sorted(extra)[0]}", "unknown key (allowed: heads, tails)")
    if "heads" in init:
        kwargs["a_heads"] = parse_amplitude(init["heads"], "initial.heads")
    if "tails" in init:
        kwargs["a_tails"] = parse_amplitude(init["tails"], "initial.tails")
    if "spin_prep" in data:
        prep = dict(ProtocolConfig().spin_prep)
        prep.update(_table(data["spin_prep"], "spin_prep"))
        kwargs["spin_prep"] = prep
    for key, table in data.get("bases", {}).items():
        if key not in _BASES:
            raise ConfigError(f"bases.{key}", f"unknown basis (allowed: {sorted(_BASES)})")
        kwargs[_BASES[key]] = _table(table, f"bases.{key}")
    if "times" in data:
        times = dict(ProtocolConfig().time_labels)
        for step, label in data["times"].items():
            if step not in times:
                raise ConfigError(f"times.{step}", f"unknown step (allowed: {sorted(times)})")
            try:
                times[step] = TimePoint.parse(str(label))
            except ValueError as exc:
                raise ConfigError(f"times.{step}", str(exc)) from None
        kwargs["time_labels"] = times
    cfg = ProtocolConfig(**kwargs)
    cfg.validate()
    return cfg


def loads_config(text: str, source: str = "<string>") -> ProtocolConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        line, col = getattr(exc, "lineno", None), getattr(exc, "colno", None)
        if line is None:
            m = re.search(r"line (\d+), column (\d+)", str(exc))
            line, col = (int(m.group(1)), int(m.group(2))) if m else (None, None)
        msg = getattr(exc, "msg", str(exc))
        raise ConfigParseError(source, line, col, msg) from None
    return config_from_mapping(data)


def load_config(path: str | Path | None, *, default_if_missing: bool = False) -> ProtocolConfig:
    """Read a protocol file; ``None`` (or a missing file with the flag) gives the default protocol."""
    if path is None:
        return ProtocolConfig()
    p = Path(path)
    if not p.exists():
        if default_if_missing:
            return ProtocolConfig()
        raise ConfigError("config", f"file not found: {p}")
    return loads_config(p.read_text(encoding="utf-8"), str(p))
