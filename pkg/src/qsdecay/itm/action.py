"""Reduced action along the complex trajectories.

The action is ``W = int_{t_s}^{T_c} (L + E0) dt - v x |_{T_c}`` with the
Lagrangian ``L = v^2/2 - x E(t) - U0 Theta(b - x)``.  The contour runs
vertically from ``t_s`` down to the exit time ``t0`` (under-barrier piece,
Gauss-Legendre quadrature) and then along the real axis to ``T_c`` where the
free motion is integrated in closed form.
"""

from __future__ import annotations

import math

import numpy as np
from numpy.polynomial.legendre import leggauss

from ..field import field_model
from ..params import BarrierSpec, Envelope, FieldSpec, QSState
from .saddles import SaddlePoint, SaddleSystem

QUAD_TOL = 1e-10
_GL_ORDERS = (16, 32, 64, 128, 256)


class QuadratureError(RuntimeError):
    pass


def field_free_action(state: QSState, barrier: BarrierSpec) -> complex:
    d = barrier.thickness
    return complex(-state.p0 * d, state.kappa0 * d)


def prefactor_sq(state: QSState, v=None) -> float:
    """Narrow-well prefactor ``8 kappa0^3 v / (kappa0^2 + v^2)``, ``v = p0`` by default."""
    k0 = state.kappa0
    v = state.p0 if v is None else v
    return 8.0 * k0 ** 3 * v / (k0 ** 2 + v ** 2)


def field_free_rate(state: QSState, barrier: BarrierSpec) -> float:
    return prefactor_sq(state) * math.exp(-2.0 * state.kappa0 * barrier.thickness)


def cutoff_time(field: FieldSpec, t0, shift_periods: int = 0):
    """End of the real-time integration.

    Monochromatic: the first multiple of the period not below the reference
    window ``[0, 2 pi / omega)`` plus ``shift_periods`` extra periods.
    Pulse: the end of the pulse.
    """
    m = field_model(field)
    if m.pulsed:
        return m.T + shift_periods * m.period
    t0 = np.asarray(t0, float)
    return (np.floor(t0 / m.period) + 1.0 + shift_periods) * m.period


def _under_barrier(system: SaddleSystem, t0, tau, n):
    m, k0 = system.model, system.state.kappa0
    x, wts = leggauss(n)
    sig = 0.5 * tau[:, None] * (x[None, :] + 1.0)  # sigma in [0, tau]
    ts = (t0 + 1j * tau)[:, None]
    t = t0[:, None] + 1j * sig
    Pts = m.P(ts)
    v = 1j * k0 + m.P(t) - Pts
    xI = (1j * k0 - Pts) * (t - ts) + m.G(t) - m.G(ts)
    f = 0.5 * v * v - xI * m.E(t) - 0.5 * k0 ** 2
    # int_{t_s}^{t0} f dt along t = t0 + i sigma, sigma from tau down to 0
    return -1j * 0.5 * tau * (f * wts[None, :]).sum(axis=1)


def under_barrier_action(system: SaddleSystem, t0, tau, tol=QUAD_TOL):
    """Adaptive-order Gauss-Legendre integral of ``L + E0`` from ``t_s`` to ``t0``."""
    t0 = np.atleast_1d(np.asarray(t0, float))
    tau = np.atleast_1d(np.asarray(tau, float))
    prev = _under_barrier(system, t0, tau, _GL_ORDERS[0])
    err = np.full(t0.shape, np.inf)
    for n in _GL_ORDERS[1:]:
        cur = _under_barrier(system, t0, tau, n)
        err = np.abs(cur - prev) / np.maximum(1.0, np.abs(cur))
        prev = cur
        if np.all(err < tol):
            return cur
    raise QuadratureError(f"under-barrier quadrature did not reach {tol:g}; achieved {err.max():.3e}")


def free_action(system: SaddleSystem, t0, tau, p, Tc):
    """Closed-form ``int_{t0}^{Tc} (E0 - v^2/2) dt - x(t0) v0`` after the exit."""
    m = system.model
    t0 = np.asarray(t0, float)
    tau = np.asarray(tau, float)
    p = np.asarray(p, float)
    c = system.exit_position(t0, tau)
    _, v0 = system.velocities(t0, tau)
    E0 = system.state.E0
    Tc = np.asarray(Tc, float)
    return ((E0 - 0.5 * p ** 2) * (Tc - t0)
            - p * (m.G(Tc + 0j) - m.G(t0 + 0j))
            - 0.5 * (m.H(Tc + 0j) - m.H(t0 + 0j))
            - c * v0)


def action_arrays(system: SaddleSystem, t0, tau, p, shift_periods=0):
    t0 = np.atleast_1d(np.asarray(t0, float))
    tau = np.atleast_1d(np.asarray(tau, float))
    p = np.broadcast_to(np.asarray(p, float), t0.shape)
    Tc = cutoff_time(system.field, t0, shift_periods)
    return under_barrier_action(system, t0, tau) + free_action(system, t0, tau, p, Tc)


def action_full(state: QSState, barrier: BarrierSpec, field: FieldSpec, saddle: SaddlePoint, p,
                shift_periods: int = 0) -> complex:
    """Complex reduced action for one converged saddle.

    Parameters
    ----------
    shift_periods : int
        Move the real-time cutoff by this many periods (monochromatic field).
        At the peak momenta the modulus of the coherent branch sum does not
        depend on it.
    """
    system = SaddleSystem(state, barrier, field)
    t0 = saddle.t0 if math.isfinite(saddle.t0) else saddle.phi0 / field.omega
    tau = saddle.tau if math.isfinite(saddle.tau) else saddle.psi0 / field.omega
    return complex(action_arrays(system, [t0], [tau], p, shift_periods)[0])


def action_weakfield(state: QSState, barrier: BarrierSpec, field: FieldSpec, phi0, p,
                     bare_kappa: str = "p") -> complex:
    """Action to first order in the field amplitude.

    ``bare_kappa`` selects what multiplies ``(pF/omega) cos(phi0)`` in the
    last term: ``"p"`` (final momentum, the reading that reproduces the
    relative phase of the two branches of the full action) or ``"kappa0"``.
    Only the real part depends on this choice.

    The real part carries the same period-dependent secular phase as the full
    action only up to a constant; compare imaginary parts or branch
    differences.
    """
    k0, p0, w = state.kappa0, state.p0, field.omega
    F0, pF = field.amplitude, field.pF
    b = barrier.thickness
    psi00 = b * w / k0
    c, s = np.cos(phi0), np.sin(phi0)
    kap = {"p": p, "kappa0": k0}[bare_kappa]
    im = k0 * b * (1.0 + F0 * b * c / (2 * k0 ** 2) + p0 * F0 * psi00 ** 3 * s / (3 * k0 * b * w ** 2))
    re = (p0 * (p - p0) / w * phi0 + psi00 * F0 * b ** 2 * s / (2 * k0)
          - p * b + pF * b * s + kap * pF / w * c)
    return re + 1j * im


def weakfield_mu(state: QSState, barrier: BarrierSpec, field: FieldSpec) -> float:
    return field.amplitude * barrier.thickness ** 2 / state.kappa0


def is_pulse(field: FieldSpec) -> bool:
    return field.envelope is Envelope.SIN_SQUARED
