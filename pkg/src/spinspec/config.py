"""
Run configuration files.

INI-style text: ``[section]`` headers, ``key = value`` lines, comma lists and
``start:stop[:step]`` ranges (inclusive). Example::

    [spectrum]
    slow_drift_hz2 = 66

    [tone.100]
    freq_hz = 100
    amp = 15.3 uG
    phase = random

    [scheme]
    kind = equidistant
    n = 11
    f_mod = 80:120:0.25

    [measurement]
    kind = fringe
    shots = 100
    phi_points = 16
    seed = 7

    [output]
    prefix = out/fig3
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidArgumentError
from .estimate.scan import FringeMeasurement
from .noise import DiscreteSpectrum, NoiseTone, UnitsConfig, default_units, tone_from_field
from .schedule import SCHEMES


class ConfigError(ValueError):
    """Invalid configuration; the message names the file, line and field."""


@dataclass(frozen=True, eq=False)
class SchemeSpec:
    kind: str
    n_values: np.ndarray
    f_values: np.ndarray | None = None
    T: float | None = None

    def f_mod_for(self, n: int) -> np.ndarray:
        """Modulation frequencies for ``n`` pulses (from ``T`` if one was given)."""
        if self.f_values is not None:
            return self.f_values
        return np.array([(n + 1) / (2.0 * self.T)])


@dataclass(frozen=True, eq=False)
class RunConfig:
    units: UnitsConfig
    spectrum: DiscreteSpectrum
    scheme: SchemeSpec
    measurement: FringeMeasurement | None
    prefix: str


def parse_range(text: str, kind=float) -> np.ndarray:
    """``"1,3,5"`` -> list, ``"80:120:0.25"`` -> inclusive range, ``"1:19"`` -> step 1."""
    text = text.strip()
    if ":" in text:
        parts = [kind(p) for p in text.split(":")]
        if len(parts) == 2:
            parts.append(kind(1))
        if len(parts) != 3:
            raise ValueError(f"bad range {text!r}")
        start, stop, step = parts
        if step <= 0 or stop < start:
            raise ValueError(f"bad range {text!r}")
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        return np.array([start + i * step for i in range(count)], dtype=float if kind is float else np.int64)
    vals = [kind(v) for v in text.split(",") if v.strip()]
    if not vals:
        raise ValueError("empty list")
    return np.array(vals, dtype=float if kind is float else np.int64)


_AMP = re.compile(r"^\s*([-+0-9.eE]+)\s*(uG|rad_s)\s*$")


class _Reader:
    def __init__(self, text: str, source: str):
        self.source = source
        self.lines = text.splitlines()
        self.cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        self.cp.optionxform = str
        try:
            self.cp.read_string(text, source=source)
        except configparser.Error as exc:
            raise ConfigError(str(exc)) from None

    def where(self, section: str, key: str | None = None) -> str:
        current = None
        for i, line in enumerate(self.lines, start=1):
            s = line.strip()
            if s.startswith("[") and s.endswith("]"):
                current = s[1:-1].strip()
                if key is None and current == section:
                    return f"{self.source}:{i}"
            elif current == section and key is not None and re.match(rf"{re.escape(key)}\s*[=:]", s):
                return f"{self.source}:{i}"
        return self.source

    def fail(self, section, key, msg):
        field = f"[{section}] {key}" if key else f"[{section}]"
        raise ConfigError(f"{self.where(section, key)}: {field}: {msg}")

    def get(self, section, key, conv=str, default=...):
        if not self.cp.has_section(section) or not self.cp.has_option(section, key):
            if default is ...:
                self.fail(section, key, "missing required field")
            return default
        raw = self.cp.get(section, key)
        try:
            return conv(raw)
        except (ValueError, InvalidArgumentError) as exc:
            self.fail(section, key, f"invalid value {raw!r} ({exc})")


def _parse_amp(text: str):
    m = _AMP.match(text)
    if not m:
        raise ValueError("expected '<number> uG' or '<number> rad_s'")
    return float(m.group(1)), m.group(2)


def _parse_phase(text: str):
    text = text.strip()
    return None if text.lower() == "random" else float(text)


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    return parse_config(text, str(path))


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    r = _Reader(text, source)

    kappa = r.get("units", "kappa", float, None)
    try:
        units = UnitsConfig(kappa) if kappa is not None else default_units()
    except InvalidArgumentError as exc:
        r.fail("units", "kappa", str(exc))

    tones = []
    for sec in r.cp.sections():
        if not (sec == "tone" or sec.startswith("tone.")):
            continue
        f = r.get(sec, "freq_hz", float)
        amp, unit = r.get(sec, "amp", _parse_amp)
        phase = r.get(sec, "phase", _parse_phase, None)
        try:
            tones.append(tone_from_field(amp, f, phase, units) if unit == "uG" else NoiseTone(amp, f, phase))
        except InvalidArgumentError as exc:
            r.fail(sec, "amp", str(exc))
    drift = r.get("spectrum", "slow_drift_hz2", float, 0.0)
    try:
        spectrum = DiscreteSpectrum(tuple(tones), drift)
    except InvalidArgumentError as exc:
        r.fail("spectrum", None, str(exc))

    if not r.cp.has_section("scheme"):
        r.fail("scheme", None, "missing section")
    kind = r.get("scheme", "kind")
    if kind not in SCHEMES:
        r.fail("scheme", "kind", f"must be exactly one of {', '.join(SCHEMES)}")
    n_values = r.get("scheme", "n", lambda t: parse_range(t, int))
    if np.any(n_values < 0):
        r.fail("scheme", "n", "pulse counts must be >= 0")
    f_values = r.get("scheme", "f_mod", parse_range, None)
    T = r.get("scheme", "T", float, None)
    if (f_values is None) == (T is None):
        r.fail("scheme", "f_mod", "give exactly one of f_mod or T")
    if f_values is not None and np.any(f_values <= 0):
        r.fail("scheme", "f_mod", "modulation frequencies must be positive")
    if T is not None and T <= 0:
        r.fail("scheme", "T", "must be positive")
    scheme = SchemeSpec(kind, n_values, f_values, T)

    mkind = r.get("measurement", "kind", str, "analytic")
    measurement = None
    if mkind == "fringe":
        shots = r.get("measurement", "shots", int)
        points = r.get("measurement", "phi_points", int)
        seed = r.get("measurement", "seed", int)
        period = r.get("measurement", "common_period", float, None)
        if shots < 1:
            r.fail("measurement", "shots", "must be >= 1")
        if points < 3:
            r.fail("measurement", "phi_points", "must be >= 3")
        if period is not None and period <= 0:
            r.fail("measurement", "common_period", "must be positive")
        measurement = FringeMeasurement(shots, points, seed, period)
    elif mkind != "analytic":
        r.fail("measurement", "kind", "must be 'analytic' or 'fringe'")

    prefix = r.get("output", "prefix", str, Path(source).stem if source != "<config>" else "spinspec")
    return RunConfig(units, spectrum, scheme, measurement, prefix)
