"""INI run configuration with units at the boundary.

Files use the lab units of the key suffix (um, ms, us, G/cm, um^2/ms);
accessors return SI domain objects. Example::

    [geometry]
    kind = cylinder
    diameter_um = 5
    d0_um2_ms = 2.3

    [acquisition]
    gradient_g_cm = 21.6

    [sequence]
    n_pulses = 8
    te_ms = 80
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .noise import GAMMA_1H, KINDS, AcquisitionParams, Geometry, parse_mode

UM = 1e-6
MS = 1e-3
US = 1e-6
G_PER_CM = 1e-2  # T/m
UM2_PER_MS = 1e-9  # m^2/s


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _float_list(text: str) -> tuple:
    return tuple(float(v) for v in re.split(r"[,\s]+", text.strip()) if v)


def _kind(text: str) -> str:
    if text not in KINDS:
        raise ValueError(f"unknown geometry {text!r}, expected one of {', '.join(KINDS)}")
    return text


def _mode(text: str) -> str:
    parse_mode(text)
    return text


# section -> key -> (parser, default)
SCHEMA = {
    "geometry": {
        "kind": (_kind, "cylinder"),
        "diameter_um": (float, 5.0),
        "d0_um2_ms": (float, 2.3),
    },
    "acquisition": {
        "gradient_g_cm": (float, 0.0),
        "gamma_rad_s_t": (float, GAMMA_1H),
        "t2_ms": (float, math.inf),
    },
    "sequence": {
        "n_pulses": (int, 8),
        "te_ms": (float, 80.0),
        "x_ms": (_float_list, ()),
        "x_min_ms": (float, math.nan),
        "x_max_ms": (float, math.nan),
        "n_points": (int, 50),
        "scan": (str, "x"),
        "te_min_ms": (float, 10.0),
        "te_max_ms": (float, 120.0),
        "n_te": (int, 12),
        "compare_hahn": (_bool, True),
    },
    "walk": {
        "n_walkers": (int, 10000),
        "dt_us": (float, math.nan),
        "seed": (int, 0),
        "duration_ms": (float, math.nan),
        "n_samples": (int, 200),
    },
    "fit": {
        "d_min_um": (float, 0.1),
        "d_max_um": (float, 100.0),
        "n_starts": (int, 8),
        "fit_d0": (_bool, False),
        "spectrum_mode": (_mode, "single"),
    },
}


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(repr(float(v)) for v in value)
    return str(value)


def _line_numbers(text: str) -> dict:
    """Map (section, key) to the 1-based line where it is defined."""
    lines, section = {}, None
    for i, raw in enumerate(text.splitlines(), 1):
        s = raw.strip()
        if not s or s[0] in "#;":
            continue
        m = re.match(r"\[(.+)\]$", s)
        if m:
            section = m.group(1).strip()
            lines[(section, None)] = i
            continue
        key = re.split(r"[=:]", s, maxsplit=1)[0].strip().lower()
        lines[(section, key)] = i
    return lines


@dataclass
class RunConfig:
    """Typed values for every schema key; ``explicit`` records keys set in the file."""

    values: dict
    explicit: frozenset = field(default_factory=frozenset)

    def __eq__(self, other):
        if not isinstance(other, RunConfig):
            return NotImplemented
        return _canonical(self.values) == _canonical(other.values)

    def __getitem__(self, item):
        section, key = item
        return self.values[section][key]

    def replace(self, section: str, key: str, value) -> "RunConfig":
        values = {s: dict(v) for s, v in self.values.items()}
        values[section][key] = value
        return RunConfig(values, self.explicit | {(section, key)})

    # ---------------------------------------------------------- io

    @classmethod
    def defaults(cls) -> "RunConfig":
        return cls({s: {k: d for k, (_, d) in keys.items()} for s, keys in SCHEMA.items()})

    @classmethod
    def from_string(cls, text: str, source: str = "<config>") -> "RunConfig":
        parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
        try:
            parser.read_string(text, source=source)
        except configparser.Error as exc:
            raise ConfigError(f"{source}: {exc}") from None
        lines = _line_numbers(text)
        values = cls.defaults().values
        explicit = set()
        for section in parser.sections():
            if section not in SCHEMA:
                line = lines.get((section, None), "?")
                raise ConfigError(f"{source}:{line}: unknown section [{section}]")
            for key, raw in parser.items(section):
                line = lines.get((section, key), "?")
                if key not in SCHEMA[section]:
                    raise ConfigError(f"{source}:{line}: unknown field [{section}] {key}")
                conv = SCHEMA[section][key][0]
                try:
                    values[section][key] = conv(raw)
                except ValueError as exc:
                    raise ConfigError(f"{source}:{line}: bad value for [{section}] {key}: {exc}") from None
                explicit.add((section, key))
        return cls(values, frozenset(explicit))

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_string(fh.read(), source=str(path))

    def to_string(self) -> str:
        out = []
        for section, keys in SCHEMA.items():
            out.append(f"[{section}]")
            for key in keys:
                out.append(f"{key} = {_format(self.values[section][key])}")
            out.append("")
        return "\n".join(out)

    def resolved(self) -> dict:
        """Plain-data copy for metadata sidecars (lab units, as in the file)."""
        return {s: {k: _jsonable(v) for k, v in keys.items()} for s, keys in self.values.items()}

    # ---------------------------------------------------------- domain objects

    def geometry(self) -> Geometry:
        g = self.values["geometry"]
        try:
            return Geometry(g["kind"], g["diameter_um"] * UM, g["d0_um2_ms"] * UM2_PER_MS)
        except ValueError as exc:
            raise ConfigError(f"[geometry]: {exc}") from None

    def acquisition(self) -> AcquisitionParams:
        a = self.values["acquisition"]
        try:
            return AcquisitionParams(a["gamma_rad_s_t"], a["gradient_g_cm"] * G_PER_CM)
        except ValueError as exc:
            raise ConfigError(f"[acquisition]: {exc}") from None

    @property
    def t2(self) -> float | None:
        t2 = self.values["acquisition"]["t2_ms"]
        return None if math.isinf(t2) else t2 * MS

    @property
    def n_pulses(self) -> int:
        return self.values["sequence"]["n_pulses"]

    @property
    def te(self) -> float:
        return self.values["sequence"]["te_ms"] * MS

    def x_grid(self) -> np.ndarray:
        """x delays in seconds: the explicit list, else a linear grid ending at TE/N.

        Without ``x_min_ms`` the grid starts one grid step above zero.
        """
        s = self.values["sequence"]
        if s["x_ms"]:
            return np.array(s["x_ms"]) * MS
        hi = s["x_max_ms"] * MS if not math.isnan(s["x_max_ms"]) else self.te / self.n_pulses
        if s["n_points"] < 1:
            raise ConfigError("[sequence] n_points must be at least 1")
        n = s["n_points"]
        lo = s["x_min_ms"] * MS if not math.isnan(s["x_min_ms"]) else hi / n
        return np.linspace(lo, hi, n)

    def te_grid(self) -> np.ndarray:
        s = self.values["sequence"]
        return np.linspace(s["te_min_ms"], s["te_max_ms"], s["n_te"]) * MS

    def dt(self) -> float | None:
        dt = self.values["walk"]["dt_us"]
        return None if math.isnan(dt) else dt * US

    def fit_options(self):
        from .estimation import FitOptions

        f = self.values["fit"]
        return FitOptions(
            d_min=f["d_min_um"] * UM,
            d_max=f["d_max_um"] * UM,
            n_starts=f["n_starts"],
            fit_d0=f["fit_d0"],
            spectrum_mode=f["spectrum_mode"],
        )


def _jsonable(v):
    if isinstance(v, tuple):
        return list(v)
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def _canonical(values: dict) -> dict:
    # NaN defaults must compare equal to themselves
    return {s: {k: ("nan" if isinstance(v, float) and math.isnan(v) else v) for k, v in keys.items()}
            for s, keys in values.items()}
