"""Strict JSON run configuration.

Example (every key except ``grid`` and ``t_end`` optional)::

    {
      "grid": {"n": 256, "len": "128pi", "dealias_fraction": 1.0},
      "ic": {"kind": "gaussian", "width": 1.0, "modulation": [0, 0], "band_limit": [0.8, 1.3]},
      "epsilon": 0.05,
      "t_start": 1.0,
      "t_end": 64.0,
      "dt_max": 0.1,
      "cfl_safety": 0.5,
      "output_times": {"per_octave": 4},
      "boundary_mass_threshold": 1e-6,
      "blowup_factor": 1000.0,
      "nonlinear": true,
      "abort_on_boundary": true
    }

``grid`` takes ``n_a``/``n_b``/``len_a``/``len_b`` or the shorthands ``n`` and
``len`` for a square box.  Lengths may be numbers or strings such as
``"128pi"``.  ``output_times`` is a list of times or ``{"per_octave": k}``
for ``t_start * 2^(j/k)`` up to ``t_end``.  Defaults are those of
:class:`mzk.solver.RunConfig` and :class:`mzk.grid.InitialCondition`.
"""

from __future__ import annotations

import json
import math
import re
from pathlib import Path

from .grid import GridSpec, InitialCondition
from .solver import RunConfig, default_output_times


class ConfigError(ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


TOP_KEYS = {"grid", "ic", "epsilon", "t_start", "t_end", "dt_max", "cfl_safety", "output_times",
            "boundary_mass_threshold", "blowup_factor", "nonlinear", "abort_on_boundary"}
GRID_KEYS = {"n", "len", "n_a", "n_b", "len_a", "len_b", "dealias_fraction"}
IC_KEYS = {"kind", "width", "modulation", "band_limit"}

_PI_RE = re.compile(r"^\s*([0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)?\s*\*?\s*pi\s*$")


def _check_keys(obj, allowed: set, where: str) -> None:
    if not isinstance(obj, dict):
        raise ConfigError(where, "expected an object")
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise ConfigError(f"{where}.{unknown[0]}" if where else unknown[0],
                          f"unknown key (allowed: {', '.join(sorted(allowed))})")


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(where, f"expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(where, "must be finite")
    return float(value)


def _length(value, where: str) -> float:
    if isinstance(value, str):
        m = _PI_RE.match(value)
        if not m:
            raise ConfigError(where, f"cannot parse length {value!r}")
        return (float(m.group(1)) if m.group(1) else 1.0) * math.pi
    return _number(value, where)


def _integer(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(where, f"expected an integer, got {value!r}")
    return value


def _bool(value, where: str) -> bool:
    if not isinstance(value, bool):
        raise ConfigError(where, f"expected true/false, got {value!r}")
    return value


def _grid(obj) -> GridSpec:
    _check_keys(obj, GRID_KEYS, "grid")
    n_a = obj.get("n_a", obj.get("n"))
    n_b = obj.get("n_b", obj.get("n"))
    len_a = obj.get("len_a", obj.get("len"))
    len_b = obj.get("len_b", obj.get("len"))
    for name, v in (("n_a", n_a), ("n_b", n_b), ("len_a", len_a), ("len_b", len_b)):
        if v is None:
            raise ConfigError(f"grid.{name}", "missing")
    kw = dict(
        n_a=_integer(n_a, "grid.n_a"), n_b=_integer(n_b, "grid.n_b"),
        len_a=_length(len_a, "grid.len_a"), len_b=_length(len_b, "grid.len_b"),
    )
    if "dealias_fraction" in obj:
        kw["dealias_fraction"] = _number(obj["dealias_fraction"], "grid.dealias_fraction")
    try:
        return GridSpec(**kw)
    except ValueError as exc:
        name = str(exc).split(" ")[0]
        raise ConfigError(f"grid.{name}" if name in GRID_KEYS else "grid", str(exc)) from None


def _ic(obj) -> InitialCondition:
    _check_keys(obj, IC_KEYS, "ic")
    kw = {}
    if "kind" in obj:
        kw["kind"] = obj["kind"]
    if "width" in obj:
        kw["width"] = _number(obj["width"], "ic.width")
    if "modulation" in obj:
        mod = obj["modulation"]
        if not isinstance(mod, list) or len(mod) != 2:
            raise ConfigError("ic.modulation", "expected [m_x, m_y]")
        kw["modulation"] = tuple(_number(m, "ic.modulation") for m in mod)
    if obj.get("band_limit") is not None:
        bl = obj["band_limit"]
        if not isinstance(bl, list) or len(bl) != 2:
            raise ConfigError("ic.band_limit", "expected [k_lo, k_hi]")
        kw["band_limit"] = tuple(_number(b, "ic.band_limit") for b in bl)
    try:
        return InitialCondition(**kw)
    except ValueError as exc:
        raise ConfigError("ic", str(exc)) from None


def config_from_dict(obj: dict) -> RunConfig:
    _check_keys(obj, TOP_KEYS, "")
    if "grid" not in obj:
        raise ConfigError("grid", "missing")
    if "t_end" not in obj:
        raise ConfigError("t_end", "missing")
    kw = {"grid": _grid(obj["grid"])}
    if "ic" in obj:
        kw["ic"] = _ic(obj["ic"])
    for key in ("epsilon", "t_start", "t_end", "dt_max", "cfl_safety", "boundary_mass_threshold", "blowup_factor"):
        if key in obj:
            kw[key] = _number(obj[key], key)
    for key in ("nonlinear", "abort_on_boundary"):
        if key in obj:
            kw[key] = _bool(obj[key], key)
    t_start = kw.get("t_start", 1.0)
    if "output_times" in obj:
        ot = obj["output_times"]
        if isinstance(ot, dict):
            _check_keys(ot, {"per_octave"}, "output_times")
            per = _integer(ot.get("per_octave", 4), "output_times.per_octave")
            if per < 1:
                raise ConfigError("output_times.per_octave", "must be >= 1")
            if not kw["t_end"] > t_start:
                raise ConfigError("t_end", "must exceed t_start")
            kw["output_times"] = tuple(default_output_times(t_start, kw["t_end"], per))
        elif isinstance(ot, list):
            kw["output_times"] = tuple(_number(t, "output_times") for t in ot)
        else:
            raise ConfigError("output_times", "expected a list or {\"per_octave\": k}")
    try:
        return RunConfig(**kw)
    except ValueError as exc:
        msg = str(exc)
        field = msg.split(" ")[0] if msg.split(" ")[0] in TOP_KEYS else "config"
        raise ConfigError(field, msg) from None


def parse_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("file", f"cannot read {path}: {exc}") from None
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("file", f"malformed JSON: {exc}") from None
    return config_from_dict(obj)
