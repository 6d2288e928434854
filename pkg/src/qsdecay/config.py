"""Sectioned ``key = value`` run configuration.

Example::

    [barrier]
    U0 = 3
    a = 0
    b = 3

    [state]
    E0 = 1.217          # or: auto (ground state of the closed well)

    [field]
    amplitude = 0.05
    omega = 0.1
    envelope = monochromatic   # or sin2
    n_cycles = 6
    phase = 0

    [engine]
    engine = itm        # itm | tdse | both

    [numerics]
    dx = 0.1

    [output]
    dir = out

    [sweep]
    parameter = amplitude
    values = 0.02, 0.05, 0.12

Keys are case-insensitive.  Unknown sections or keys, malformed numbers
and values rejected by the physical constructors raise :class:`ConfigError`
carrying the line number of the offending entry.
"""

from __future__ import annotations

import configparser
import dataclasses
import enum
import math
import re
from dataclasses import dataclass, field as dc_field
from pathlib import Path

from .params import BarrierSpec, Envelope, FieldSpec, StateError, derive_state


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        where = ""
        if source and line:
            where = f"{source}:{line}: "
        elif line:
            where = f"line {line}: "
        elif source:
            where = f"{source}: "
        super().__init__(where + message)
        self.line = line
        self.source = source


class Engine(str, enum.Enum):
    ITM = "itm"
    TDSE = "tdse"
    BOTH = "both"


SWEEP_PARAMETERS = ("amplitude", "omega", "b", "E0")


@dataclass(frozen=True)
class Numerics:
    # ITM
    n_per_cycle: int = 2000
    n_points: int = 2001
    shift_periods: int = 0
    # TDSE
    dx: float = 0.1
    dt: float = 0.02
    t_fieldfree: float = 150.0
    t_end: float | None = None
    fit_start: float = 10.0
    n_energies: int = 600
    order_n: int = 2
    gamma_w: float | None = None
    buffer: float = 20.0
    boundary_threshold: float = 1e-8
    sampling: str = "point"
    infinite_reference: bool = False


@dataclass(frozen=True)
class OutputSpec:
    dir: str = "out"
    format: str = "csv"


@dataclass(frozen=True)
class SweepSpec:
    parameter: str | None = None
    values: tuple = ()


@dataclass(frozen=True)
class RunConfig:
    barrier: BarrierSpec
    E0: float | None
    field: FieldSpec
    engine: Engine = Engine.ITM
    numerics: Numerics = Numerics()
    output: OutputSpec = OutputSpec()
    sweep: SweepSpec = SweepSpec()
    gamma_width: float | None = None
    source: str | None = dc_field(default=None, compare=False)

    @property
    def auto_energy(self) -> bool:
        return self.E0 is None

    def to_ini(self) -> str:
        """Canonical text of the resolved configuration (round-trips through :func:`parse_config`)."""
        return dump_config(self)

    def with_value(self, parameter: str, value: float) -> "RunConfig":
        """Copy with one sweepable parameter replaced."""
        if parameter == "amplitude":
            return dataclasses.replace(self, field=dataclasses.replace(self.field, amplitude=float(value)))
        if parameter == "omega":
            return dataclasses.replace(self, field=dataclasses.replace(self.field, omega=float(value)))
        if parameter == "b":
            return dataclasses.replace(self, barrier=dataclasses.replace(self.barrier, b=float(value)))
        if parameter == "E0":
            derive_state(self.barrier, float(value))
            return dataclasses.replace(self, E0=float(value))
        raise ConfigError(f"cannot sweep {parameter!r}; choose one of {', '.join(SWEEP_PARAMETERS)}")


def _float(text):
    v = float(text)
    if not math.isfinite(v):
        raise ValueError(f"non-finite value {text!r}")
    return v


def _int(text):
    f = float(text)
    if f != int(f):
        raise ValueError(f"integer expected, got {text!r}")
    return int(f)


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"boolean expected, got {text!r}")


def _auto_or(conv):
    def parse(text):
        return None if text.strip().lower() in ("auto", "none", "") else conv(text)
    return parse


def _choice(*options):
    def parse(text):
        t = text.strip()
        if t not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {t!r}")
        return t
    return parse


def _float_list(text):
    items = [s for s in re.split(r"[,\s]+", text.strip()) if s]
    return tuple(_float(s) for s in items)


_NUMERIC_PARSERS = {
    "n_per_cycle": _int, "n_points": _int, "shift_periods": _int,
    "dx": _float, "dt": _float, "t_fieldfree": _float, "t_end": _auto_or(_float),
    "fit_start": _float, "n_energies": _int, "order_n": _int, "gamma_w": _auto_or(_float),
    "buffer": _float, "boundary_threshold": _float, "infinite_reference": _bool,
    "sampling": _choice("point", "cell"),
}

# section -> {lower-case key: (canonical name, parser)}
SCHEMA = {
    "barrier": {"u0": ("U0", _float), "a": ("a", _float), "b": ("b", _float), "delta": ("delta", _float)},
    "state": {"e0": ("E0", _auto_or(_float)), "gamma_width": ("gamma_width", _auto_or(_float))},
    "field": {"amplitude": ("amplitude", _float), "omega": ("omega", _float),
              "envelope": ("envelope", Envelope.parse), "n_cycles": ("n_cycles", _int),
              "phase": ("phase", _float)},
    "engine": {"engine": ("engine", Engine)},
    "numerics": {k: (k, f) for k, f in _NUMERIC_PARSERS.items()},
    "output": {"dir": ("dir", str), "format": ("format", _choice("csv"))},
    "sweep": {"parameter": ("parameter", _choice(*SWEEP_PARAMETERS)), "values": ("values", _float_list)},
}

REQUIRED = {"barrier": ("u0", "b"), "state": ("e0",), "field": ("amplitude", "omega")}


def _line_index(text: str) -> dict:
    """Map ``(section, key)`` and ``(section, None)`` to 1-based line numbers."""
    index = {}
    section = None
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        m = re.match(r"\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip().lower()
            index.setdefault((section, None), n)
            continue
        m = re.match(r"([^=:]+?)\s*[=:]", line)
        if m and section is not None:
            index[(section, m.group(1).strip().lower())] = n
    return index


def _read(text: str, source: str | None):
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"),
                                   default_section="__defaults__")
    try:
        cp.read_string(text, source=source or "<config>")
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("entry before the first [section] header", exc.lineno, source) from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"duplicate section [{exc.section}]", exc.lineno, source) from None
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"duplicate key {exc.option!r} in [{exc.section}]", exc.lineno, source) from None
    except configparser.ParsingError as exc:
        lineno, line = exc.errors[0]
        raise ConfigError(f"cannot parse {line.strip()!r} (expected key = value)", lineno, source) from None
    return cp


def parse_config(text: str, overrides=(), source: str | None = None) -> RunConfig:
    """Parse configuration text, apply ``section.key=value`` overrides and validate.

    Raises
    ------
    ConfigError
    """
    cp = _read(text, source)
    lines = _line_index(text)
    raw = {}
    for sec in cp.sections():
        name = sec.strip().lower()
        if name not in SCHEMA:
            raise ConfigError(f"unknown section [{sec}]", lines.get((name, None)), source)
        for key, value in cp.items(sec):
            if key not in SCHEMA[name]:
                raise ConfigError(f"unknown key {key!r} in [{sec}]", lines.get((name, key)), source)
            raw[(name, key)] = (value, lines.get((name, key)), source)
    for item in overrides:
        sec, key, value = split_override(item)
        raw[(sec, key)] = (value, None, f"--override {item}")

    for sec, keys in REQUIRED.items():
        for key in keys:
            if (sec, key) not in raw:
                canon = SCHEMA[sec][key][0]
                raise ConfigError(f"missing required key {canon!r} in [{sec}]",
                                  lines.get((sec, None)), source)

    vals = {}
    for (sec, key), (value, line, src) in raw.items():
        canon, conv = SCHEMA[sec][key]
        try:
            vals[(sec, canon)] = conv(value)
        except ValueError as exc:
            raise ConfigError(f"[{sec}] {canon} = {value!r}: {exc}", line, src) from None

    def section_line(sec):
        return lines.get((sec, None))

    def pick(sec, names):
        return {n: vals[(sec, n)] for n in names if (sec, n) in vals}

    try:
        barrier = BarrierSpec(**{"a": 0.0, **pick("barrier", ("U0", "a", "b", "delta"))})
    except ValueError as exc:
        raise ConfigError(f"[barrier]: {exc}", section_line("barrier"), source) from None
    try:
        field = FieldSpec(**pick("field", ("amplitude", "omega", "envelope", "n_cycles", "phase")))
    except ValueError as exc:
        raise ConfigError(f"[field]: {exc}", section_line("field"), source) from None
    E0 = vals[("state", "E0")]
    if E0 is not None:
        try:
            derive_state(barrier, E0)
        except StateError as exc:
            raise ConfigError(str(exc), lines.get(("state", "e0")), source) from None
    try:
        numerics = Numerics(**pick("numerics", tuple(_NUMERIC_PARSERS)))
    except TypeError as exc:  # pragma: no cover - keys are validated above
        raise ConfigError(str(exc), section_line("numerics"), source) from None
    if not 0 < numerics.dt <= 0.05:
        raise ConfigError("[numerics] dt must be in (0, 0.05]", lines.get(("numerics", "dt")), source)
    if not numerics.dx > 0:
        raise ConfigError("[numerics] dx must be positive", lines.get(("numerics", "dx")), source)
    if numerics.order_n < 1:
        raise ConfigError("[numerics] order_n must be >= 1", lines.get(("numerics", "order_n")), source)
    sweep = SweepSpec(vals.get(("sweep", "parameter")), vals.get(("sweep", "values"), ()))
    return RunConfig(
        barrier=barrier, E0=E0, field=field,
        engine=vals.get(("engine", "engine"), Engine.ITM),
        numerics=numerics,
        output=OutputSpec(**pick("output", ("dir", "format"))),
        sweep=sweep,
        gamma_width=vals.get(("state", "gamma_width")),
        source=source,
    )


def split_override(item: str):
    """``"field.amplitude=0.05"`` -> ``("field", "amplitude", "0.05")``."""
    if "=" not in item:
        raise ConfigError(f"override {item!r} must look like section.key=value")
    lhs, value = item.split("=", 1)
    if "." not in lhs:
        raise ConfigError(f"override {item!r} must look like section.key=value")
    sec, key = (s.strip().lower() for s in lhs.split(".", 1))
    if sec not in SCHEMA:
        raise ConfigError(f"override {item!r}: unknown section [{sec}]")
    if key not in SCHEMA[sec]:
        raise ConfigError(f"override {item!r}: unknown key {key!r} in [{sec}]")
    return sec, key, value.strip()


def load_config(path, overrides=()) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", source=str(p)) from None
    return parse_config(text, overrides, source=str(p))


def _fmt(v):
    if v is None:
        return "auto"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, enum.Enum):
        return v.value
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ", ".join(repr(float(x)) for x in v)
    return str(v)


def dump_config(cfg: RunConfig) -> str:
    f = cfg.field
    parts = [
        ("barrier", [("U0", cfg.barrier.U0), ("a", cfg.barrier.a), ("b", cfg.barrier.b),
                     ("delta", cfg.barrier.delta)]),
        ("state", [("E0", cfg.E0)] + ([("gamma_width", cfg.gamma_width)] if cfg.gamma_width is not None else [])),
        ("field", [("amplitude", f.amplitude), ("omega", f.omega), ("envelope", f.envelope),
                   ("n_cycles", f.n_cycles), ("phase", f.phase)]),
        ("engine", [("engine", cfg.engine)]),
        ("numerics", [(k.name, getattr(cfg.numerics, k.name)) for k in dataclasses.fields(Numerics)]),
        ("output", [("dir", cfg.output.dir), ("format", cfg.output.format)]),
    ]
    if cfg.sweep.parameter is not None or cfg.sweep.values:
        sweep = []
        if cfg.sweep.parameter is not None:
            sweep.append(("parameter", cfg.sweep.parameter))
        if cfg.sweep.values:
            sweep.append(("values", cfg.sweep.values))
        parts.append(("sweep", sweep))
    out = []
    for sec, items in parts:
        out.append(f"[{sec}]")
        out.extend(f"{k} = {_fmt(v)}" for k, v in items)
        out.append("")
    return "\n".join(out).rstrip() + "\n"
