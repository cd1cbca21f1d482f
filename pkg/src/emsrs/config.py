"""Scenario configuration: a flat ``key = value unit`` text format.

Example::

    # thermal electron column, protocol (a)
    species = electron
    d = 1 nm
    B0 = 1.8 T
    bias_axis = x
    temperature = 10 K
    N_S = 1000
    pulses = y:pi rad
    phi_grid = periodic(0, 2*pi, 12) rad
    N_e = 1000000
    seed = 42

Dimensional values must carry a unit. Numbers may be arithmetic
expressions in ``pi``. Grids are ``[a, b, ...]``, ``linspace(start, stop,
n)`` (both ends included) or ``periodic(start, stop, n)`` (stop excluded),
followed by one unit. Pulses are ``axis:angle`` items separated by ``;``,
where ``axis`` is ``x``, ``-y``, ... or a vector ``[1, 1, 0]``. ``t0_grid``
holds Larmor phases ``omega0 t0``, not times.
"""

import ast
import hashlib
import math
import operator
import re
from dataclasses import dataclass, fields, replace

import numpy as np

from .constants import custom_species, species_by_name
from .exceptions import ConfigError, DomainError

__all__ = [
    "ScenarioConfig",
    "Pulse",
    "parse_quantity",
    "parse_config",
    "load_config",
    "dump_config",
    "parse_assignments",
    "parse_grid",
    "evaluate_expression",
]

_TWO_PI = 2 * math.pi

# unit -> (dimension, factor to SI)
UNITS = {
    "m": ("length", 1.0), "cm": ("length", 1e-2), "mm": ("length", 1e-3),
    "um": ("length", 1e-6), "nm": ("length", 1e-9), "pm": ("length", 1e-12),
    "A": ("length", 1e-10),
    "T": ("field", 1.0), "mT": ("field", 1e-3), "uT": ("field", 1e-6), "G": ("field", 1e-4),
    "K": ("temperature", 1.0), "mK": ("temperature", 1e-3),
    "eV": ("energy", 1.0), "keV": ("energy", 1e3), "MeV": ("energy", 1e6),
    "rad": ("angle", 1.0), "mrad": ("angle", 1e-3), "urad": ("angle", 1e-6),
    "deg": ("angle", math.pi / 180),
    "s": ("time", 1.0), "ms": ("time", 1e-3), "us": ("time", 1e-6),
    "ns": ("time", 1e-9), "ps": ("time", 1e-12), "fs": ("time", 1e-15),
    "rad/s": ("angular_frequency", 1.0), "Hz": ("angular_frequency", _TWO_PI),
    "kHz": ("angular_frequency", _TWO_PI * 1e3), "MHz": ("angular_frequency", _TWO_PI * 1e6),
    "GHz": ("angular_frequency", _TWO_PI * 1e9),
    "rad/s/T": ("gyromagnetic", 1.0), "Hz/T": ("gyromagnetic", _TWO_PI),
    "MHz/T": ("gyromagnetic", _TWO_PI * 1e6), "GHz/T": ("gyromagnetic", _TWO_PI * 1e9),
    "%": ("fraction", 1e-2),
}
# canonical unit written by dump_config
_SI_UNIT = {"length": "m", "field": "T", "temperature": "K", "energy": "eV", "angle": "rad",
            "time": "s", "gyromagnetic": "rad/s/T"}
_UNIT_SUFFIXES = sorted(UNITS, key=len, reverse=True)

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_NAMES = {"pi": math.pi, "tau": _TWO_PI}


def evaluate_expression(text):
    """Evaluate an arithmetic expression of numbers and ``pi`` safely."""
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError:
        raise ConfigError(f"cannot parse number {text!r}") from None

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) \
                and not isinstance(node.value, bool):
            return node.value
        if isinstance(node, ast.Name) and node.id in _NAMES:
            return _NAMES[node.id]
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.UAdd, ast.USub)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        raise ConfigError(f"unsupported expression {text!r}")

    try:
        return ev(tree)
    except (ZeroDivisionError, OverflowError):
        raise ConfigError(f"cannot evaluate {text!r}") from None


def _split_unit(text):
    text = text.strip()
    for unit in _UNIT_SUFFIXES:
        if text.endswith(unit):
            head = text[: -len(unit)]
            # a bare letter unit must not swallow the tail of a name like "pi"
            if unit[0].isalpha() and head and (head[-1].isalpha() or head[-1] == "_"):
                continue
            return head.strip(), unit
    return text, None


def _convert(value, unit, dimension, key):
    if unit is None:
        if dimension == "fraction":
            return value
        raise ConfigError(f"{key}: a unit is required ({dimension})")
    dim, factor = UNITS[unit]
    if dim != dimension:
        raise ConfigError(f"{key}: unit {unit!r} is a {dim}, expected {dimension}")
    return value * factor


def parse_quantity(text, dimension, key="value"):
    """Parse ``'0.1 nm'`` style text into an SI float."""
    number, unit = _split_unit(text)
    return float(_convert(evaluate_expression(number), unit, dimension, key))


def parse_grid(text, dimension, key="grid"):
    """Parse ``[..] unit``, ``linspace(a, b, n) unit`` or ``periodic(a, b, n) unit``."""
    body, unit = _split_unit(text)
    m = re.fullmatch(r"(linspace|periodic)\((.*)\)", body.strip())
    if m:
        parts = [p for p in m.group(2).split(",")]
        if len(parts) != 3:
            raise ConfigError(f"{key}: {m.group(1)} takes (start, stop, n)")
        start, stop = (evaluate_expression(p) for p in parts[:2])
        n = evaluate_expression(parts[2])
        if not float(n).is_integer() or n < 1:
            raise ConfigError(f"{key}: point count must be a positive integer")
        values = np.linspace(start, stop, int(n), endpoint=m.group(1) == "linspace")
    else:
        inner = body.strip()
        if inner.startswith("[") and inner.endswith("]"):
            inner = inner[1:-1]
        items = [p for p in inner.split(",") if p.strip()]
        values = [evaluate_expression(p) for p in items]
    if len(values) == 0:
        raise ConfigError(f"{key}: grid is empty")
    return tuple(float(_convert(v, unit, dimension, key)) for v in values)


_NAMED_AXES = {"x": (1.0, 0.0, 0.0), "y": (0.0, 1.0, 0.0), "z": (0.0, 0.0, 1.0)}


def _parse_axis(text, key):
    t = text.strip()
    sign = -1.0 if t.startswith("-") else 1.0
    name = t.lstrip("+-")
    if name in _NAMED_AXES:
        return tuple(sign * c for c in _NAMED_AXES[name])
    if t.startswith("[") and t.endswith("]"):
        vec = np.array([evaluate_expression(p) for p in t[1:-1].split(",")], dtype=float)
        norm = np.linalg.norm(vec)
        if vec.shape != (3,) or norm == 0:
            raise ConfigError(f"{key}: axis must be a non-zero 3-vector")
        if abs(norm - 1.0) > 1e-15:  # leave unit vectors untouched so dumps round-trip
            vec = vec / norm
        return tuple(float(c) for c in vec)
    raise ConfigError(f"{key}: unknown axis {text!r}")


def _format_axis(axis):
    for name, vec in _NAMED_AXES.items():
        if tuple(axis) == vec:
            return name
        if tuple(axis) == tuple(-c for c in vec):
            return "-" + name
    return "[" + ", ".join(repr(c) for c in axis) + "]"


@dataclass(frozen=True)
class Pulse:
    """Instantaneous rotation by ``angle`` [rad] about the unit vector ``axis``."""

    axis: tuple
    angle: float


def _parse_pulses(text, key):
    pulses = []
    for item in text.split(";"):
        item = item.strip()
        if not item:
            continue
        if ":" not in item:
            raise ConfigError(f"{key}: pulse {item!r} is not 'axis:angle unit'")
        axis, angle = item.split(":", 1)
        pulses.append(Pulse(_parse_axis(axis, key), parse_quantity(angle, "angle", key)))
    return tuple(pulses)


def _optional(text):
    return None if text.strip().lower() in ("none", "") else text


def _parse_int(text, key, minimum=1):
    value = evaluate_expression(text)
    if not float(value).is_integer() or value < minimum:
        raise ConfigError(f"{key}: expected an integer >= {minimum}, got {text!r}")
    return int(value)


@dataclass(frozen=True)
class ScenarioConfig:
    """One fully specified scenario, in SI units.

    ``temperature`` is ``None`` for a pure spin polarised along the bias axis.
    ``polarization``, when set, overrides the thermal Bloch-vector length.
    """

    species: str = "electron"
    preset: str = "paper"
    gamma: float = None
    g: float = None
    I: float = 0.5
    d: float = 0.1e-9
    B0: float = 1.8
    bias_axis: tuple = (1.0, 0.0, 0.0)
    temperature: float = None
    N_S: int = 1
    polarization: float = None
    pulses: tuple = ()
    t0_grid: tuple = (0.0,)
    phi_grid: tuple = tuple(float(v) for v in np.linspace(0, _TWO_PI, 12, endpoint=False))
    N_e: int = 1_000_000
    seed: int = 0
    beam_energy: float = 200e3
    t_life: float = None
    dz: float = 1e-6
    dr_perp: float = 10e-12

    def __post_init__(self):
        if self.species not in ("electron", "proton", "custom"):
            raise ConfigError(f"species must be electron, proton or custom, got {self.species!r}")
        if self.species == "custom" and (self.gamma is None or self.g is None):
            raise ConfigError("custom species needs gamma and g")
        if self.preset not in ("paper", "codata"):
            raise ConfigError(f"preset must be paper or codata, got {self.preset!r}")
        for name in ("d", "beam_energy", "dz", "dr_perp"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")
        if not self.B0 >= 0:
            raise DomainError("B0 must be non-negative")
        if self.temperature is not None and not self.temperature > 0:
            raise DomainError("temperature must be positive")
        if self.t_life is not None and not self.t_life > 0:
            raise DomainError("t_life must be positive")
        if self.polarization is not None and not 0 <= self.polarization <= 1:
            raise DomainError("polarization must lie in [0, 1]")
        if self.N_S < 1 or self.N_e < 1:
            raise DomainError("N_S and N_e must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise DomainError("seed must be an unsigned 64-bit integer")
        if not self.t0_grid or not self.phi_grid:
            raise ConfigError("grids must be non-empty")
        n = np.asarray(self.bias_axis, dtype=float)
        if n.shape != (3,) or abs(np.linalg.norm(n) - 1) > 1e-12:
            raise ConfigError("bias_axis must be a unit vector")

    def spin_species(self):
        if self.species == "custom":
            return custom_species(self.gamma, self.g, self.I)
        return species_by_name(self.species, self.preset)

    @property
    def pure(self):
        return self.temperature is None

    def replace(self, **changes):
        return replace(self, **changes)

    def config_hash(self):
        """SHA-256 of the canonical serialisation."""
        return hashlib.sha256(dump_config(self).encode()).hexdigest()


# key -> (parser, formatter)
def _q(dimension):
    return (lambda t, k: parse_quantity(t, dimension, k),
            lambda v: f"{v!r} {_SI_UNIT[dimension]}")


def _opt(pair):
    parse, fmt = pair
    return (lambda t, k: None if _optional(t) is None else parse(t, k),
            lambda v: "none" if v is None else fmt(v))


def _grid(dimension):
    return (lambda t, k: parse_grid(t, dimension, k),
            lambda v: "[" + ", ".join(repr(x) for x in v) + "] " + _SI_UNIT[dimension])


def _temperature(text, key):
    if text.strip().lower() == "pure":
        return None
    return parse_quantity(text, "temperature", key)


def _fraction(text, key):
    return parse_quantity(text, "fraction", key)


_FIELDS = {
    "species": (lambda t, k: t.strip().lower(), str),
    "preset": (lambda t, k: t.strip().lower(), str),
    "gamma": _opt(_q("gyromagnetic")),
    "g": (lambda t, k: None if _optional(t) is None else float(evaluate_expression(t)),
          lambda v: "none" if v is None else repr(v)),
    "I": (lambda t, k: float(evaluate_expression(t)), repr),
    "d": _q("length"),
    "B0": _q("field"),
    "bias_axis": (_parse_axis, _format_axis),
    "temperature": (_temperature, lambda v: "pure" if v is None else f"{v!r} K"),
    "N_S": (_parse_int, str),
    "polarization": (lambda t, k: None if _optional(t) is None else _fraction(t, k),
                     lambda v: "none" if v is None else repr(v)),
    "pulses": (_parse_pulses,
               lambda v: "; ".join(f"{_format_axis(p.axis)}:{p.angle!r} rad" for p in v)),
    "t0_grid": _grid("angle"),
    "phi_grid": _grid("angle"),
    "N_e": (_parse_int, str),
    "seed": (lambda t, k: _parse_int(t, k, minimum=0), str),
    "beam_energy": _q("energy"),
    "t_life": _opt(_q("time")),
    "dz": _q("length"),
    "dr_perp": _q("length"),
}
_ALIASES = {"temperature_K": "temperature", "polarization_override": "polarization",
            "axis": "bias_axis", "Ne": "N_e", "NS": "N_S", "energy": "beam_energy"}


def parse_assignments(pairs, base=None):
    """Apply ``(key, text)`` pairs on top of ``base`` (defaults if ``None``)."""
    values = {}
    for key, text in pairs:
        key = _ALIASES.get(key.strip(), key.strip())
        if key not in _FIELDS:
            raise ConfigError(f"unknown config key {key!r}")
        values[key] = _FIELDS[key][0](text, key)
    base = ScenarioConfig() if base is None else base
    return replace(base, **values)


def parse_config(text, base=None):
    pairs = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        pairs.append((key, value))
    seen = [_ALIASES.get(k.strip(), k.strip()) for k, _ in pairs]
    dupes = {k for k in seen if seen.count(k) > 1}
    if dupes:
        raise ConfigError(f"duplicate keys: {', '.join(sorted(dupes))}")
    return parse_assignments(pairs, base)


def load_config(path, base=None):
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_config(fh.read(), base)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None


def dump_config(cfg):
    """Canonical text form; ``parse_config(dump_config(c)) == c``."""
    lines = []
    for f in fields(cfg):
        lines.append(f"{f.name} = {_FIELDS[f.name][1](getattr(cfg, f.name))}")
    return "\n".join(lines) + "\n"
