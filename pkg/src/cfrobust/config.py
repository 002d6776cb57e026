"""Experiment configuration: dataclass, INI recipes and dotted-key overrides."""

import configparser
import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from importlib import resources

from . import SCHEMES
from .channel import PropagationParams
from .precoders import THETA_MODES, IDENTITY_SCALED, RobustSolveSettings

SINR_MODELS = ("received", "literal")


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


@dataclass
class SimConfig:
    N: int = 32
    K: int = 8
    L: int = 8
    N_a: int = 1
    sigma_e: object = math.sqrt(0.1)
    snr_db: object = 15.0
    n_channel_draws: int = 20
    n_error_draws: int = 20
    n_geometries: int = 1
    schemes: tuple = SCHEMES
    seed: int = 1
    theta_mode: str = IDENTITY_SCALED
    sinr_model: str = "received"
    normalize_channels: bool = True
    area_side: float = 1000.0
    solver: RobustSolveSettings = field(default_factory=RobustSolveSettings)
    propagation: PropagationParams = field(default_factory=PropagationParams)

    def __post_init__(self):
        self.schemes = tuple(self.schemes)
        self.validate()

    def validate(self):
        for name in ("N", "K", "L", "n_channel_draws", "n_error_draws", "n_geometries"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be at least 1")
        if self.L > self.N:
            raise ConfigError(f"L={self.L} exceeds N={self.N}")
        if not 0 <= self.N_a <= self.L:
            raise ConfigError(f"N_a={self.N_a} must lie in [0, L={self.L}]")
        if not self.area_side > 0:
            raise ConfigError("area_side must be positive")
        if isinstance(self.sigma_e, (list, tuple)) and isinstance(self.snr_db, (list, tuple)):
            raise ConfigError("only one of sigma_e / snr_db may be a sweep list")
        if any(s < 0 for s in _as_list(self.sigma_e)):
            raise ConfigError("sigma_e must be nonnegative")
        bad = [s for s in self.schemes if s not in SCHEMES]
        if bad or not self.schemes:
            raise ConfigError(f"unknown schemes {bad}; choose from {SCHEMES}")
        if self.theta_mode not in THETA_MODES:
            raise ConfigError(f"theta_mode must be one of {THETA_MODES}")
        if self.sinr_model not in SINR_MODELS:
            raise ConfigError(f"sinr_model must be one of {SINR_MODELS}")

    @property
    def sweep_axis(self):
        if isinstance(self.sigma_e, (list, tuple)):
            return "sigma_e"
        if isinstance(self.snr_db, (list, tuple)):
            return "snr_db"
        return None

    def at(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["schemes"] = list(self.schemes)
        for key in ("sigma_e", "snr_db"):
            if isinstance(d[key], tuple):
                d[key] = list(d[key])
        return d

    def digest(self):
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _as_list(x):
    return list(x) if isinstance(x, (list, tuple)) else [x]


def desk_config(**changes):
    return SimConfig(**changes)


def paper_config(**changes):
    base = dict(N=128, K=16, L=32, N_a=1, n_channel_draws=100, n_error_draws=100)
    base.update(changes)
    return SimConfig(**base)


# --- INI recipes -----------------------------------------------------------

_TOP_SECTIONS = {
    "network": ("N", "K", "L", "N_a", "area_side"),
    "experiment": ("sigma_e", "snr_db", "n_channel_draws", "n_error_draws", "n_geometries",
                   "schemes", "seed", "theta_mode", "sinr_model", "normalize_channels"),
}
_NESTED = {"solver": RobustSolveSettings, "propagation": PropagationParams}


def _field_types(cls):
    return {f.name: f.type for f in dataclasses.fields(cls)}


def _parse_value(key, raw, current):
    raw = raw.strip()
    try:
        if key in ("sigma_e", "snr_db"):
            vals = [float(v) for v in raw.replace(",", " ").split()]
            if not vals:
                raise ValueError("empty")
            return vals[0] if len(vals) == 1 and "," not in raw else tuple(vals)
        if key == "schemes":
            return tuple(s.strip() for s in raw.split(",") if s.strip())
        if isinstance(current, bool):
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(current, int):
            return int(raw)
        if isinstance(current, float):
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"bad value for {key!r}: {raw!r}") from None


def _locate(dotted):
    if "." not in dotted:
        raise ConfigError(f"override key {dotted!r} must be section.key")
    section, key = dotted.split(".", 1)
    if section in _TOP_SECTIONS:
        if key not in _TOP_SECTIONS[section]:
            raise ConfigError(f"unknown key {key!r} in section [{section}]")
    elif section in _NESTED:
        if key not in _field_types(_NESTED[section]):
            raise ConfigError(f"unknown key {key!r} in section [{section}]")
    else:
        raise ConfigError(f"unknown section [{section}]")
    return section, key


def apply_settings(cfg, items):
    """Apply ``(section.key, raw string)`` pairs to ``cfg``; returns a new config."""
    top, nested = {}, {s: {} for s in _NESTED}
    for dotted, raw in items:
        section, key = _locate(dotted)
        if section in _NESTED:
            current = getattr(getattr(cfg, section), key)
            nested[section][key] = _parse_value(key, raw, current)
        else:
            top[key] = _parse_value(key, raw, getattr(cfg, key))
    for section, vals in nested.items():
        if vals:
            try:
                top[section] = dataclasses.replace(getattr(cfg, section), **vals)
            except ValueError as exc:
                raise ConfigError(f"[{section}] {exc}") from None
    try:
        return dataclasses.replace(cfg, **top)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None


def load_config(path, base=None):
    """Read an INI recipe on top of ``base`` (desk defaults when omitted)."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # keys are case-sensitive (N vs n)
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError:
        raise
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    items = [(f"{s}.{k}", v) for s in parser.sections() for k, v in parser.items(s)]
    return apply_settings(base or SimConfig(), items)


def parse_overrides(pairs):
    out = []
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"override {pair!r} is not key=value")
        k, v = pair.split("=", 1)
        out.append((k.strip(), v))
    return out


def dump_config(cfg):
    """Render ``cfg`` as an INI recipe that :func:`load_config` reads back."""
    d = cfg.to_dict()
    lines = []
    for section, keys in _TOP_SECTIONS.items():
        lines.append(f"[{section}]")
        for k in keys:
            v = d[k]
            if isinstance(v, list):
                v = ", ".join(repr(x) if isinstance(x, float) else str(x) for x in v)
            lines.append(f"{k} = {v}")
        lines.append("")
    for section in _NESTED:
        lines.append(f"[{section}]")
        for k, v in d[section].items():
            lines.append(f"{k} = {v!r}" if isinstance(v, float) else f"{k} = {v}")
        lines.append("")
    return "\n".join(lines)


def recipe_path(name):
    """Path of a shipped recipe (``fig1``, ``fig2``)."""
    return str(resources.files("cfrobust") / "recipes" / f"{name}.cfg")
