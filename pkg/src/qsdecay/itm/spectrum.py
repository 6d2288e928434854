"""Photoelectron spectra and total rates from the saddle-point sum."""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.integrate import trapezoid

from ..params import BarrierSpec, Envelope, FieldSpec, QSState, validity_report
from .action import action_arrays, field_free_action, field_free_rate, prefactor_sq
from .saddles import SaddlePoint, SaddleSystem, classical_boundaries, find_saddles

log = logging.getLogger(__name__)


class SpectrumKind(str, enum.Enum):
    PEAKS = "peaks"
    CONTINUOUS = "continuous"


@dataclass
class Spectrum:
    kind: SpectrumKind
    p: np.ndarray
    weight: np.ndarray
    saddles: list = dc_field(default_factory=list)
    meta: dict = dc_field(default_factory=dict)

    @property
    def energy(self):
        return 0.5 * self.p ** 2

    def second_moment_width(self):
        """Standard deviation of the energy distribution."""
        E = self.energy
        w = self.weight
        if self.kind is SpectrumKind.CONTINUOUS:
            # dw/dp -> per-sample weights on the uniform grid
            w = w * np.gradient(self.p)
        tot = w.sum()
        if tot <= 0:
            return 0.0
        mean = (w * E).sum() / tot
        return float(math.sqrt(max((w * (E - mean) ** 2).sum() / tot, 0.0)))


@dataclass(frozen=True)
class RateSummary:
    R: float
    R0: float
    ratio: float
    w: float | None = None


def regularization_beta(field: FieldSpec) -> float:
    return field.amplitude ** (1.0 / 3.0) * field.omega


def peak_momenta(state: QSState, field: FieldSpec, j_range=None, bounds=None):
    """ATI-like peak momenta ``p_j = sqrt(p0^2 - pF^2/2 + 2 j omega)``.

    Parameters
    ----------
    j_range : iterable of int, optional
        Photon numbers to consider; by default every ``j`` with a real ``p_j``
        inside ``bounds``.
    bounds : (float, float), optional
        Classical boundaries; defaults to ``[max(0, p0 - pF), p0 + pF]``.

    Returns
    -------
    j, p : ndarray
    """
    if field.envelope is not Envelope.MONOCHROMATIC:
        raise ValueError("peak momenta exist for the monochromatic field only")
    p0, pF, w = state.p0, field.pF, field.omega
    base = p0 ** 2 - 0.5 * pF ** 2
    if bounds is None:
        bounds = (max(0.0, p0 - pF), p0 + pF)
    lo, hi = bounds
    if j_range is None:
        jlo = math.floor((lo ** 2 - base) / (2 * w)) - 1
        jhi = math.ceil((hi ** 2 - base) / (2 * w)) + 1
        j = np.arange(jlo, jhi + 1)
    else:
        j = np.asarray(list(j_range), int)
    rad = base + 2.0 * j * w
    ok = rad > 0
    j, rad = j[ok], rad[ok]
    p = np.sqrt(rad)
    inside = (p >= lo) & (p <= hi)
    return j[inside], p[inside]


def slope_dp_dt0(state: QSState, barrier: BarrierSpec, field: FieldSpec, saddle: SaddlePoint,
                 h_phase: float = 1e-4) -> float:
    """Slope of ``p(t0)`` at a saddle by central differences along the branch.

    Falls back to the weak-field slope ``E(t0)`` if the re-solve fails.
    """
    system = SaddleSystem(state, barrier, field)
    s = system.slope_fd(np.array([saddle.t0]), np.array([saddle.tau]), h_phase)[0]
    if not np.isfinite(s):
        log.warning("finite-difference slope failed at phi0=%.6g; using weak-field slope", saddle.phi0)
        s = float(system.model.E(saddle.t0).real)
    return float(s)


def _decorate(system: SaddleSystem, groups, p_targets, shift_periods=0, h_phase=1e-4):
    """Fill in ``W`` and ``dp_dt0`` for all saddles in ``groups`` (in place)."""
    flat = [(k, sp) for k, g in enumerate(groups) for sp in g]
    if not flat:
        return
    K = np.array([k for k, _ in flat])
    t0 = np.array([sp.t0 for _, sp in flat])
    tau = np.array([sp.tau for _, sp in flat])
    p = np.asarray(p_targets, float)[K]
    W = action_arrays(system, t0, tau, p, shift_periods)
    slope = system.slope_fd(t0, tau, h_phase)
    bad = ~np.isfinite(slope)
    if bad.any():
        log.warning("%d finite-difference slopes failed; using weak-field slope", int(bad.sum()))
        slope[bad] = system.model.E(t0[bad] + 0j).real
    for (_, sp), Wi, si in zip(flat, W, slope):
        sp.W = complex(Wi)
        sp.dp_dt0 = float(si)


def coherent_sum(saddles, beta):
    """``sum_alpha exp(i W_alpha) / sqrt(dp/dt0_alpha + i beta)``.

    With ``beta > 0`` the argument of the square root stays in the upper
    half plane, so the principal branch is continuous in ``p``.
    """
    acc = 0j
    for sp in saddles:
        acc += np.exp(1j * sp.W) / np.sqrt(complex(sp.dp_dt0, beta))
    return acc


def _meta(state, barrier, field, **extra):
    meta = {
        "U0": barrier.U0, "a": barrier.a, "b": barrier.b, "thickness": barrier.thickness,
        "E0": state.E0, "p0": state.p0, "kappa0": state.kappa0,
        "amplitude": field.amplitude, "omega": field.omega, "envelope": field.envelope.value,
        "n_cycles": field.n_cycles, "phase": field.phase,
        "beta": regularization_beta(field),
    }
    meta.update(extra)
    return meta


def spectrum_monochromatic(state: QSState, barrier: BarrierSpec, field: FieldSpec,
                           n_per_cycle: int = 2000, shift_periods: int = 0) -> Spectrum:
    """Discrete peak spectrum ``dR_j`` for a monochromatic field.

    ``dR_j = omega^2 / (2 pi p_j) * P0^2 * |sum_alpha exp(i W_alpha) / sqrt(dp/dt0 + i beta)|^2``
    with ``beta = F0^(1/3) omega``.
    """
    if field.envelope is not Envelope.MONOCHROMATIC:
        raise ValueError("monochromatic field expected")
    gates = validity_report(barrier, state, field)
    for g in gates:
        if not g.passed:
            log.warning("validity gate: %s", g.line())
    P02 = prefactor_sq(state)
    if field.amplitude == 0.0:
        R0 = field_free_rate(state, barrier)
        return Spectrum(SpectrumKind.PEAKS, np.array([state.p0]), np.array([R0]), [[]],
                        _meta(state, barrier, field, p_min=state.p0, p_max=state.p0, gates=gates))
    system = SaddleSystem(state, barrier, field)
    pmin, pmax, segs = classical_boundaries(system, n_per_cycle)
    j, pj = peak_momenta(state, field, bounds=(pmin, pmax))
    groups = find_saddles(system, pj, segs=segs)
    _decorate(system, groups, pj, shift_periods)
    beta = regularization_beta(field)
    w = field.omega
    keep_p, keep_w, keep_s, keep_j = [], [], [], []
    for jj, p, g in zip(j, pj, groups):
        if not g:
            log.warning("no saddles at p_%d = %.8g; peak omitted", jj, p)
            continue
        if len(g) != 2:
            log.warning("%d saddles at p_%d = %.8g (two expected)", len(g), jj, p)
        amp = coherent_sum(g, beta)
        keep_p.append(p)
        keep_w.append(w ** 2 / (2 * math.pi * p) * P02 * abs(amp) ** 2)
        keep_s.append(g)
        keep_j.append(int(jj))
    dev = max((abs(sp.v0 - state.p0) / state.p0 for g in keep_s for sp in g), default=0.0)
    log.info("max |v0 - p0|/p0 over saddles: %.3e (constant prefactor used)", dev)
    meta = _meta(state, barrier, field, p_min=pmin, p_max=pmax, j=keep_j,
                 max_v0_deviation=dev, gates=gates, n_per_cycle=n_per_cycle)
    return Spectrum(SpectrumKind.PEAKS, np.array(keep_p), np.array(keep_w), keep_s, meta)


def spectrum_pulse(state: QSState, barrier: BarrierSpec, field: FieldSpec, p_grid=None,
                   n_points: int = 2001, n_per_cycle: int = 2000) -> Spectrum:
    """Continuous momentum density ``dw/dp`` for a sin^2 pulse.

    ``dw/dp = |sum_alpha P0 exp(i W_alpha) / sqrt(dp/dt0 + i beta)|^2`` summed
    coherently over every saddle inside the pulse.  The default grid spans
    the classical boundaries of the pulse with ``n_points`` samples.
    """
    if field.envelope is not Envelope.SIN_SQUARED:
        raise ValueError("sin^2 pulse expected")
    gates = validity_report(barrier, state, field)
    for g in gates:
        if not g.passed:
            log.warning("validity gate: %s", g.line())
    P0 = math.sqrt(prefactor_sq(state))
    if field.amplitude == 0.0:
        raise ValueError("zero-amplitude pulse has a delta-function spectrum; use the field-free rate")
    system = SaddleSystem(state, barrier, field)
    pmin, pmax, segs = classical_boundaries(system, n_per_cycle)
    if p_grid is None:
        p_grid = np.linspace(pmin, pmax, n_points)
    p_grid = np.asarray(p_grid, float)
    if p_grid.size < 1000:
        log.warning("p grid has %d samples; at least 1000 recommended", p_grid.size)
    if p_grid.min() > pmin or p_grid.max() < pmax:
        log.warning("p grid [%g, %g] does not cover the classical boundaries [%g, %g]",
                    p_grid.min(), p_grid.max(), pmin, pmax)
    groups = find_saddles(system, p_grid, segs=segs)
    _decorate(system, groups, p_grid)
    beta = regularization_beta(field)
    dens = np.array([abs(P0 * coherent_sum(g, beta)) ** 2 if g else 0.0 for g in groups])
    meta = _meta(state, barrier, field, p_min=pmin, p_max=pmax, gates=gates,
                 duration=field.duration, n_per_cycle=n_per_cycle)
    return Spectrum(SpectrumKind.CONTINUOUS, p_grid, dens, groups, meta)


def total_rate(spectrum: Spectrum, R0: float) -> RateSummary:
    if spectrum.kind is SpectrumKind.PEAKS:
        R = float(np.sum(spectrum.weight))
        return RateSummary(R=R, R0=R0, ratio=R / R0)
    w = float(trapezoid(spectrum.weight, spectrum.p))
    R = w / spectrum.meta["duration"]
    return RateSummary(R=R, R0=R0, ratio=R / R0, w=w)


def itm_rate(state: QSState, barrier: BarrierSpec, field: FieldSpec, **kw) -> RateSummary:
    """Convenience: spectrum plus total rate for either field model."""
    R0 = field_free_rate(state, barrier)
    if field.envelope is Envelope.MONOCHROMATIC:
        spec = spectrum_monochromatic(state, barrier, field, **kw)
    else:
        spec = spectrum_pulse(state, barrier, field, **kw)
    return total_rate(spec, R0)


__all__ = [
    "Spectrum", "SpectrumKind", "RateSummary", "peak_momenta", "slope_dp_dt0",
    "spectrum_monochromatic", "spectrum_pulse", "total_rate", "coherent_sum",
    "regularization_beta", "field_free_action", "itm_rate",
]
