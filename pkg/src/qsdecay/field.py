"""Laser field, field-induced momentum and its time integrals.

Conventions: ``E(t) = F0 env(t) cos(omega t + phase)`` is the electric field
and ``P(t)`` the field momentum with ``dP/dt = -E``.  For the monochromatic
field ``P(t) = -(F0/omega) sin(omega t + phase)`` (zero cycle average); for the
sin^2 pulse ``P(t) = int_t^T E dt'`` so that ``P`` vanishes after the pulse.
``G`` and ``H`` are antiderivatives of ``P`` and ``P**2`` with ``G(0) = H(0) = 0``.

All closed forms are stored as finite sums ``c * t**m * exp(i k Omega t)``
(:class:`ExpPoly`), which makes antiderivatives exact and lets every quantity
be evaluated at complex time by analytic continuation.
"""

from __future__ import annotations

import functools
import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .params import Envelope, FieldSpec


class ExpPoly:
    """Finite sum of ``c * t**m * exp(1j * k * base * t)`` with integer ``k``."""

    def __init__(self, terms=None, base=1.0):
        self.base = float(base)
        self.terms = {}
        for key, c in (terms or {}).items():
            if c != 0:
                self.terms[key] = complex(c)

    @classmethod
    def cosine(cls, amp, k, phase, base):
        """``amp * cos(k base t + phase)``."""
        if k == 0:
            return cls({(0, 0): amp * math.cos(phase)}, base)
        e = np.exp(1j * phase)
        return cls({(0, k): 0.5 * amp * e, (0, -k): 0.5 * amp / e}, base)

    def _check(self, other):
        if self.base != other.base:
            raise ValueError("ExpPoly bases differ")

    def __add__(self, other):
        if not isinstance(other, ExpPoly):
            other = ExpPoly({(0, 0): other}, self.base)
        self._check(other)
        out = defaultdict(complex, self.terms)
        for key, c in other.terms.items():
            out[key] += c
        return ExpPoly(out, self.base)

    __radd__ = __add__

    def __neg__(self):
        return ExpPoly({k: -c for k, c in self.terms.items()}, self.base)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if not isinstance(other, ExpPoly):
            return ExpPoly({k: c * other for k, c in self.terms.items()}, self.base)
        self._check(other)
        out = defaultdict(complex)
        for (m1, k1), c1 in self.terms.items():
            for (m2, k2), c2 in other.terms.items():
                out[(m1 + m2, k1 + k2)] += c1 * c2
        return ExpPoly(out, self.base)

    __rmul__ = __mul__

    def antiderivative(self):
        """Exact primitive; the integration constant is whatever falls out
        of the term-by-term formula (no constant term is added)."""
        out = defaultdict(complex)
        for (m, k), c in self.terms.items():
            if k == 0:
                out[(m + 1, 0)] += c / (m + 1)
                continue
            # int t^m e^{iat} = e^{iat} sum_j (-1)^j m!/(m-j)! t^(m-j) / (ia)^(j+1)
            ia = 1j * k * self.base
            coef = c
            for j in range(m + 1):
                out[(m - j, k)] += coef / ia
                coef = -coef * (m - j) / ia
        return ExpPoly(out, self.base)

    def __call__(self, t):
        t = np.asarray(t, dtype=complex)
        acc = np.zeros_like(t)
        for (m, k), c in sorted(self.terms.items()):
            term = c * np.exp(1j * k * self.base * t)
            if m:
                term = term * t ** m
            acc = acc + term
        return acc


@dataclass(frozen=True)
class ComplexTime:
    """Dimensionless complex phase ``omega t = phi + i psi``."""

    phi: float
    psi: float = 0.0

    def time(self, omega: float) -> complex:
        return complex(self.phi, self.psi) / omega


@dataclass(frozen=True)
class FieldSample:
    E: complex
    pF_t: complex
    G_t: complex


class FieldModel:
    """Vectorised evaluator of ``E``, ``P``, ``G`` and ``H`` for a :class:`FieldSpec`.

    For the pulse, times whose real part lies outside ``[0, T]`` see no field:
    ``P`` is frozen at its edge value and ``G``, ``H`` continue linearly.
    """

    def __init__(self, spec: FieldSpec):
        self.spec = spec
        F0, w, ph = spec.amplitude, spec.omega, spec.phase
        self.pulsed = spec.envelope is Envelope.SIN_SQUARED
        if not self.pulsed:
            base = w
            self._E = ExpPoly.cosine(F0, 1, ph, base)
            self._P = -self._E.antiderivative()
            self.T = None
        else:
            n = spec.n_cycles
            base = w / n
            # sin^2(base t / 2) cos(w t + ph) = cos/2 - [cos((w+base)t+ph) + cos((w-base)t+ph)]/4
            self._E = (ExpPoly.cosine(0.5 * F0, n, ph, base)
                       + ExpPoly.cosine(-0.25 * F0, n + 1, ph, base)
                       + ExpPoly.cosine(-0.25 * F0, n - 1, ph, base))
            self.T = 2.0 * math.pi * n / w
            prim = self._E.antiderivative()
            self._P = -prim + complex(prim(self.T))
        g = self._P.antiderivative()
        self._G = g - complex(g(0.0))
        h = (self._P * self._P).antiderivative()
        self._H = h - complex(h(0.0))
        if self.pulsed:
            self._edges = {
                name: (complex(f(0.0)), complex(f(self.T)))
                for name, f in (("P", self._P), ("G", self._G), ("H", self._H))
            }

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.spec.omega

    def _split(self, t):
        t = np.asarray(t, dtype=complex)
        if not self.pulsed:
            return t, None, None
        before = t.real < 0.0
        after = t.real > self.T
        return t, before, after

    def E(self, t):
        t, before, after = self._split(t)
        out = self._E(t)
        if before is not None:
            out = np.where(before | after, 0.0, out)
        return out

    def P(self, t):
        t, before, after = self._split(t)
        out = self._P(t)
        if before is not None:
            p0, pT = self._edges["P"]
            out = np.where(before, p0, np.where(after, pT, out))
        return out

    def G(self, t):
        t, before, after = self._split(t)
        out = self._G(t)
        if before is not None:
            (p0, pT), (g0, gT) = self._edges["P"], self._edges["G"]
            out = np.where(before, g0 + p0 * t, np.where(after, gT + pT * (t - self.T), out))
        return out

    def H(self, t):
        t, before, after = self._split(t)
        out = self._H(t)
        if before is not None:
            (p0, pT), (h0, hT) = self._edges["P"], self._edges["H"]
            out = np.where(before, h0 + p0 ** 2 * t, np.where(after, hT + pT ** 2 * (t - self.T), out))
        return out


@functools.lru_cache(maxsize=64)
def field_model(spec: FieldSpec) -> FieldModel:
    return FieldModel(spec)


def eval_field(spec: FieldSpec, t) -> FieldSample:
    """Field, field momentum and displacement integral at one (complex) time.

    Parameters
    ----------
    spec : FieldSpec
    t : ComplexTime or complex
        Either a dimensionless phase ``omega t`` or a time in atomic units.
    """
    if isinstance(t, ComplexTime):
        t = t.time(spec.omega)
    m = field_model(spec)
    return FieldSample(complex(m.E(t)), complex(m.P(t)), complex(m.G(t)))


def pulse_net_momentum(spec: FieldSpec, t_start: float | None = None, t_end: float | None = None) -> float:
    """``int E dt`` over the pulse, or over ``[t_start, t_end]`` if given.

    Computed from the closed-form antiderivative: ``int_a^b E = P(a) - P(b)``.
    """
    if spec.envelope is not Envelope.SIN_SQUARED:
        raise ValueError("net momentum is defined for a finite (sin^2) pulse only")
    m = field_model(spec)
    a = 0.0 if t_start is None else t_start
    b = m.T if t_end is None else t_end
    return float((m.P(a) - m.P(b)).real)
