"""End-to-end TDSE runs: field-free reference rate and pulsed spectra."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field as dc_field

import numpy as np

from ..params import BarrierSpec, FieldSpec
from .analysis import RateFit, TdseSpectrum, decay_rate_fit, window_spectrum
from .solver import Grid, TdseRun, Wavefunction, build_potential, ground_state, propagate

log = logging.getLogger(__name__)


@dataclass
class TdseResult:
    E0: float
    history: np.ndarray
    fit: RateFit | None
    spectrum: TdseSpectrum | None
    psi: Wavefunction
    run: TdseRun
    meta: dict = dc_field(default_factory=dict)


def ground_energy(barrier: BarrierSpec, dx: float = 0.1, x_max: float | None = None,
                  sampling: str = "point") -> float:
    """Ground-state energy of the well closed by an infinite barrier."""
    if x_max is None:
        x_max = barrier.b + 60.0
    grid = Grid(0.0, dx * math.ceil(x_max / dx), dx)
    return ground_state(grid, build_potential(grid, barrier, True, sampling))[1]


def default_energies(E0: float, field: FieldSpec, n: int = 600, pad_low: float = 0.3, pad_high: float = 0.6):
    p0 = math.sqrt(2 * E0)
    lo = max(0.5 * max(p0 - field.pF, 0.0) ** 2 - pad_low, 0.01)
    hi = 0.5 * (p0 + field.pF) ** 2 + pad_high
    return np.linspace(lo, hi, n)


def run_field_free(barrier: BarrierSpec, dx: float = 0.1, dt: float = 0.02, t_end: float = 150.0,
                   fit_start: float = 10.0, **run_kw) -> TdseResult:
    """Decay of the state after the sudden switch to the finite barrier, no field."""
    t_wall = time.time()
    grid = Grid.for_run(barrier, None, t_end, dx=dx)
    psi0, E0 = ground_state(grid, build_potential(grid, barrier, True, run_kw.get("sampling", "point")))
    run = TdseRun(barrier=barrier, field=None, grid=grid, dt=dt, **run_kw)
    psi = propagate(run, psi0, t_end)
    hist = np.array(run.history)
    fit = decay_rate_fit(hist, (fit_start, None))
    meta = {"grid_x_max": grid.x_max, "grid_n": grid.n, "dx": dx, "dt": dt, "t_end": t_end,
            "wall_time_s": time.time() - t_wall}
    return TdseResult(E0, hist, fit, None, psi, run, meta)


def run_pulse(barrier: BarrierSpec, field: FieldSpec, dx: float = 0.1, dt: float = 0.02,
              energies=None, n_energies: int = 600, gamma_w=None, order_n: int = 2,
              buffer: float = 20.0, infinite: bool = False, t_end: float | None = None,
              fit_start: float = 10.0, **run_kw) -> TdseResult:
    """Propagate through the pulse and analyse the outgoing wavepacket.

    With ``infinite`` the barrier is never cut (pure above-threshold
    ionisation reference).  The spectrum is taken at ``t_end`` (default:
    end of the pulse) from the part of the wavefunction beyond
    ``b + buffer``.
    """
    t_wall = time.time()
    if t_end is None:
        t_end = field.duration if math.isfinite(field.duration) else 10 * 2 * math.pi / field.omega
    grid = Grid.for_run(barrier, field, t_end, dx=dx)
    sampling = run_kw.get("sampling", "point")
    U_inf = build_potential(grid, barrier, True, sampling)
    psi0, E0 = ground_state(grid, U_inf)
    switch = t_end + 1.0 if infinite else 0.0
    run = TdseRun(barrier=barrier, field=field, grid=grid, dt=dt, switch_time=switch, **run_kw)
    psi = propagate(run, psi0, t_end)
    hist = np.array(run.history)
    fit = None
    if not infinite:
        try:
            fit = decay_rate_fit(hist, (fit_start, None))
        except ValueError:
            fit = None
    if energies is None:
        energies = default_energies(E0, field, n_energies)
    U = U_inf if infinite else build_potential(grid, barrier, False, sampling)
    p0 = math.sqrt(2 * E0)
    cb = (0.5 * max(p0 - field.pF, 0.0) ** 2, 0.5 * (p0 + field.pF) ** 2)
    spec = window_spectrum(psi, U, energies, gamma_w=gamma_w, order_n=order_n,
                           x_cut=barrier.b + buffer, cb=cb)
    meta = {"grid_x_max": grid.x_max, "grid_n": grid.n, "dx": dx, "dt": dt, "t_end": t_end,
            "infinite": infinite, "buffer": buffer, "wall_time_s": time.time() - t_wall}
    return TdseResult(E0, hist, fit, spec, psi, run, meta)
