"""Physical inputs, derived state quantities and regime gates.

Everything is in atomic units.  The barrier thickness seen by the
semiclassical calculation is ``b - a``; with a narrow well (``a = 0``) this
is just the outer edge ``b``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field as dc_field


class Envelope(str, enum.Enum):
    MONOCHROMATIC = "monochromatic"
    SIN_SQUARED = "sin2"

    @classmethod
    def parse(cls, text: str) -> "Envelope":
        key = text.strip().lower().replace("_", "").replace("-", "")
        aliases = {
            "monochromatic": cls.MONOCHROMATIC,
            "mono": cls.MONOCHROMATIC,
            "cw": cls.MONOCHROMATIC,
            "sin2": cls.SIN_SQUARED,
            "sinsquared": cls.SIN_SQUARED,
            "pulse": cls.SIN_SQUARED,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown envelope {text!r}") from None


@dataclass(frozen=True)
class BarrierSpec:
    """Well of width ``a`` followed by a flat barrier of height ``U0`` up to ``b``.

    ``delta`` is the width of an optional linear ramp on the outer edge; only
    the exit-velocity cross-check uses it, ``0`` is the sharp-edge limit.
    """

    U0: float
    a: float
    b: float
    delta: float = 0.0

    def __post_init__(self):
        if not self.U0 > 0:
            raise ValueError("barrier height U0 must be positive")
        if not (0 <= self.a < self.b):
            raise ValueError("need 0 <= a < b")
        if self.delta < 0:
            raise ValueError("slope width delta must be >= 0")

    @property
    def thickness(self) -> float:
        return self.b - self.a


@dataclass(frozen=True)
class QSState:
    E0: float
    p0: float
    kappa0: float
    gamma_width: float | None = None


@dataclass(frozen=True)
class FieldSpec:
    """Linearly polarised field ``amplitude * env(t) * cos(omega t + phase)``.

    ``phase`` is reduced modulo 2 pi on construction so that physically
    identical fields compare (and evaluate) identically.
    """

    amplitude: float
    omega: float
    envelope: Envelope = Envelope.MONOCHROMATIC
    n_cycles: int = 6
    phase: float = 0.0

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError("field amplitude must be >= 0")
        if not self.omega > 0:
            raise ValueError("omega must be positive")
        if not isinstance(self.envelope, Envelope):
            object.__setattr__(self, "envelope", Envelope.parse(str(self.envelope)))
        if self.envelope is Envelope.SIN_SQUARED and int(self.n_cycles) < 1:
            raise ValueError("n_cycles must be >= 1 for a sin^2 pulse")
        object.__setattr__(self, "n_cycles", int(self.n_cycles))
        # reduce modulo 2 pi; rounding removes the last-bit residue of the
        # subtraction so that phase and phase + 2 pi give identical fields
        ph = round(math.fmod(float(self.phase), 2 * math.pi), 12) % (2 * math.pi)
        object.__setattr__(self, "phase", ph)

    @property
    def pF(self) -> float:
        return self.amplitude / self.omega

    @property
    def duration(self) -> float:
        """Pulse length ``2 pi n_p / omega``; infinite for a monochromatic field."""
        if self.envelope is Envelope.MONOCHROMATIC:
            return math.inf
        return 2 * math.pi * self.n_cycles / self.omega


@dataclass(frozen=True)
class DimlessParams:
    K0: float
    Fred: float
    zF: float
    gammaK: float
    mu: float
    Lpeaks: float
    pF: float
    Up: float

    @property
    def Lpeaks_appendix(self) -> float:
        # the alternative count 2 p0 pF / omega, reported next to Lpeaks
        return 2.0 * self.Lpeaks


class StateError(ValueError):
    """Raised when the requested energy does not describe a quasistationary state."""


def derive_state(barrier: BarrierSpec, E0: float, gamma_width: float | None = None) -> QSState:
    if not (0.0 < E0 < barrier.U0):
        raise StateError(
            f"state not quasistationary: need 0 < E0 < U0, got E0={E0!r}, U0={barrier.U0!r}"
        )
    return QSState(
        E0=float(E0),
        p0=math.sqrt(2.0 * E0),
        kappa0=math.sqrt(2.0 * (barrier.U0 - E0)),
        gamma_width=gamma_width,
    )


def dimensionless(state: QSState, field: FieldSpec, barrier: BarrierSpec | None = None,
                  b: float | None = None) -> DimlessParams:
    """Dimensionless numbers controlling the regime.

    The characteristic field is built from ``E0`` (there is no binding
    energy for a quasistationary state).  ``mu`` needs the barrier thickness,
    given either as ``barrier`` or directly as ``b``.
    """
    if b is None:
        b = barrier.thickness if barrier is not None else 0.0
    F0, w = field.amplitude, field.omega
    pF = F0 / w
    E_ch = (2.0 * state.E0) ** 1.5
    return DimlessParams(
        K0=state.E0 / w,
        Fred=F0 / E_ch,
        zF=F0 ** 2 / w ** 3,
        gammaK=state.kappa0 * w / F0 if F0 > 0 else math.inf,
        mu=F0 * b ** 2 / state.kappa0,
        Lpeaks=state.p0 * pF / w,
        pF=pF,
        Up=pF ** 2 / 4.0,
    )


@dataclass(frozen=True)
class Gate:
    name: str
    passed: bool
    value: float
    limit: float
    margin: float
    note: str = ""

    def line(self) -> str:
        flag = "PASS" if self.passed else "WARN"
        return f"{flag} {self.name}: value={self.value:.6g} limit={self.limit:.6g} margin={self.margin:.6g} {self.note}".rstrip()


def _exit_psi(state: QSState, b: float, field: FieldSpec, cos_phi: float) -> float | None:
    """Imaginary start phase solving the x-matching condition at sin(phi0) = 0."""
    k0, w, pF = state.kappa0, field.omega, field.pF

    def f(s):
        return (k0 / w) * s - (pF / w) * cos_phi * (math.cosh(s) - 1.0 - s * math.sinh(s)) - b

    s = b * w / k0
    for _ in range(100):
        fs = f(s)
        ds = k0 / w + (pF / w) * cos_phi * s * math.cosh(s)
        if ds <= 0:
            return None
        step = fs / ds
        s -= step
        if s <= 0:
            return None
        if abs(step) < 1e-14 * max(1.0, s):
            return s
    return None


def validity_report(barrier: BarrierSpec, state: QSState, field: FieldSpec) -> list[Gate]:
    """Named regime checks.  Nothing here aborts a calculation."""
    dl = dimensionless(state, field, barrier)
    b = barrier.thickness
    k0 = state.kappa0
    F0 = field.amplitude
    no_field = F0 == 0.0
    gates = []

    limit = k0 ** 2 / 2.0
    gates.append(Gate("exit_at_edge", F0 * b < limit, F0 * b, limit, limit - F0 * b,
                      "field*thickness below kappa0^2/2 (escape through the flat top only)"))

    # kinetic energy right after the step must stay under the instantaneous barrier top
    worst = math.inf
    for cos_phi in (1.0, -1.0):
        if no_field:
            v0sq = state.p0 ** 2
        else:
            s = _exit_psi(state, b, field, cos_phi)
            if s is None:
                worst = -math.inf
                continue
            v0sq = (state.p0 ** 2 - 2 * k0 * field.pF * cos_phi * math.sinh(s)
                    - field.pF ** 2 * math.sinh(s) ** 2)
        top = 2.0 * (barrier.U0 - F0 * b * cos_phi)
        worst = min(worst, top - v0sq)
    gates.append(Gate("exit_below_top", worst > 0, worst, 0.0, worst,
                      "min over cos(phi0)=+-1 of 2(U0 - F b cos) - v0^2"))

    gates.append(Gate("multiquantum", dl.K0 > 1.0, dl.K0, 1.0, dl.K0 - 1.0, "E0/omega >> 1"))
    gates.append(Gate("reduced_field", dl.Fred < 1.0, dl.Fred, 1.0, 1.0 - dl.Fred, "F/(2E0)^1.5 << 1"))
    gates.append(Gate("opaque_barrier", k0 * b > 1.0, k0 * b, 1.0, k0 * b - 1.0, "kappa0*b >> 1"))
    many = no_field or dl.Lpeaks > 1.0
    gates.append(Gate("peak_count", many, dl.Lpeaks, 1.0, dl.Lpeaks - 1.0,
                      f"p0 pF/omega >> 1 (2 p0 pF/omega = {dl.Lpeaks_appendix:.4g})"))
    gates.append(Gate("weak_field_mu", dl.mu < 1.0, dl.mu, 1.0, 1.0 - dl.mu,
                      "mu << 1: spectrum reshaped, total rate unchanged"))
    return gates


@dataclass
class RegimeSummary:
    """Bundle of everything the output writers echo about the inputs."""

    barrier: BarrierSpec
    state: QSState
    field: FieldSpec
    dimless: DimlessParams = dc_field(init=False)
    gates: list[Gate] = dc_field(init=False)

    def __post_init__(self):
        self.dimless = dimensionless(self.state, self.field, self.barrier)
        self.gates = validity_report(self.barrier, self.state, self.field)
