"""Decay-rate fits, window-operator spectra and ITM/TDSE comparison."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field as dc_field

import numba
import numpy as np
from scipy import stats
from scipy.integrate import trapezoid

from ..itm.spectrum import Spectrum, SpectrumKind
from .solver import Grid, Wavefunction, hamiltonian_bands
from . import _kernels

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RateFit:
    R: float
    ci95: float
    n_points: int
    t_start: float
    t_end: float
    monotone: bool


def decay_rate_fit(history, fit_window=(10.0, None)) -> RateFit:
    """Least-squares slope of ``ln N(t)``.

    Parameters
    ----------
    history : array-like, shape (m, >=2)
        Rows ``(t, N, ...)``.
    fit_window : (float, float or None)
        Time range used for the fit; the default skips the first 10 a.u. of
        transient after the barrier switch.
    """
    h = np.asarray(history, float)
    t, N = h[:, 0], h[:, 1]
    lo, hi = fit_window
    sel = t >= lo
    if hi is not None:
        sel &= t <= hi
    t, N = t[sel], N[sel]
    if t.size < 3:
        raise ValueError("fewer than three samples in the fit window")
    y = np.log(N)
    res = stats.linregress(t, y)
    tq = stats.t.ppf(0.975, t.size - 2)
    # allow round-off-level wiggles before calling N(t) non-monotone
    noise = 1e-12 + 10 * np.abs(res.stderr) * (t[-1] - t[0]) / max(t.size, 1)
    monotone = bool(np.all(np.diff(y) <= noise))
    if not monotone:
        log.warning("N(t) is not monotone in the fit window (field-driven recurrences?)")
    return RateFit(R=float(-res.slope), ci95=float(tq * res.stderr), n_points=int(t.size),
                   t_start=float(t[0]), t_end=float(t[-1]), monotone=monotone)


@numba.njit(cache=True)
def _window_density(psi, d, e, energies, zs):
    n = psi.shape[0]
    out = np.empty(energies.shape[0])
    sub = np.full(n, e + 0j)
    for j in range(energies.shape[0]):
        chi = psi.copy()
        for z in zs:
            chi = _kernels.thomas(sub, d - energies[j] - z, sub, chi)
        s = 0.0
        for i in range(n):
            s += chi[i].real * chi[i].real + chi[i].imag * chi[i].imag
        out[j] = s
    return out


def window_kernel_area(gamma_w: float, order_n: int = 2) -> float:
    """``int gamma^(2n) / (x^(2n) + gamma^(2n)) dx``."""
    return gamma_w * math.pi / (order_n * math.sin(math.pi / (2 * order_n)))


def window_kernel(E, gamma_w: float, order_n: int = 2):
    """Unit-area window profile used to smooth model spectra for comparison."""
    g2n = gamma_w ** (2 * order_n)
    return g2n / (np.asarray(E) ** (2 * order_n) + g2n) / window_kernel_area(gamma_w, order_n)


@dataclass
class TdseSpectrum:
    E: np.ndarray
    dwdE: np.ndarray
    gamma_w: float
    order_n: int
    escaped_norm: float
    meta: dict = dc_field(default_factory=dict)


def window_spectrum(psi: Wavefunction, U, energies, gamma_w=None, order_n: int = 2,
                    x_cut: float | None = None, ramp: float = 10.0,
                    cb: tuple | None = None) -> TdseSpectrum:
    """Energy density of the outgoing part of ``psi`` by the window operator.

    ``P(E) = gamma^(2n) || prod_k (H - E - z_k)^(-1) psi ||^2`` with ``z_k``
    the upper-half-plane roots of ``z^(2n) = -gamma^(2n)``, so that
    ``P(E) = <psi| gamma^(2n) / ((H - E)^(2n) + gamma^(2n)) |psi>``.  Only the
    part of ``psi`` beyond ``x_cut`` is used (smoothly switched on over
    ``ramp`` a.u.), with ``H`` restricted to that region.  The density is
    rescaled so that its integral over ``energies`` equals the escaped norm.
    """
    grid = psi.grid
    E = np.asarray(energies, float)
    if gamma_w is None:
        gamma_w = 0.5 * float(np.min(np.diff(E)))
    if cb is not None and (E.min() > cb[0] or E.max() < cb[1]):
        log.warning("energy grid [%g, %g] does not cover the classical boundaries [%g, %g]",
                    E.min(), E.max(), cb[0], cb[1])
    x = grid.x
    i0 = grid.index_at(x_cut) if x_cut is not None else 0
    xs = x[i0:]
    mask = np.clip((xs - xs[0]) / ramp, 0.0, 1.0) if ramp > 0 else np.ones_like(xs)
    mask = np.sin(0.5 * np.pi * mask) ** 2
    phi = psi.values[i0:] * mask
    d, e = hamiltonian_bands(grid, np.asarray(U)[i0:])
    k = np.arange(1, order_n + 1)
    zs = gamma_w * np.exp(1j * np.pi * (2 * k - 1) / (2 * order_n))
    P = _window_density(phi.astype(complex), d.astype(complex), complex(e), E, zs) * grid.dx
    P *= gamma_w ** (2 * order_n)
    dens = P / window_kernel_area(gamma_w, order_n)
    escaped = float(np.vdot(phi, phi).real * grid.dx)
    area = trapezoid(dens, E)
    raw_area = area
    if area > 0:
        dens *= escaped / area
    meta = {"x_cut": float(xs[0]), "raw_integral": float(raw_area), "escaped_norm": escaped}
    return TdseSpectrum(E, dens, float(gamma_w), int(order_n), escaped, meta)


def itm_energy_density(spec: Spectrum):
    """``(E, dw/dE)`` from a continuous ITM momentum spectrum."""
    if spec.kind is not SpectrumKind.CONTINUOUS:
        raise ValueError("continuous (pulse) spectrum required")
    p = spec.p
    with np.errstate(divide="ignore", invalid="ignore"):
        dens = np.where(p > 0, spec.weight / p, 0.0)
    return 0.5 * p ** 2, dens


def smooth_like(E_src, dens_src, E_out, gamma_w, order_n=2, support=None):
    """Convolve a sampled density with the window profile and sample at ``E_out``."""
    E_src = np.asarray(E_src)
    dens_src = np.asarray(dens_src)
    lo = min(E_out.min(), E_src.min()) - 20 * gamma_w
    hi = max(E_out.max(), E_src.max()) + 20 * gamma_w
    h = gamma_w / 8.0
    fine = np.arange(lo, hi + h, h)
    f = np.interp(fine, E_src, dens_src, left=0.0, right=0.0)
    if support is not None:
        f[(fine < support[0]) | (fine > support[1])] = 0.0
    half = int(math.ceil(40 * gamma_w / h))
    kx = h * np.arange(-half, half + 1)
    ker = window_kernel(kx, gamma_w, order_n) * h
    conv = np.convolve(f, ker, mode="same")
    return np.interp(E_out, fine, conv)


@dataclass
class ComparisonReport:
    log_rms: float
    ratio_at_E0: float
    tdse_shoulder_fraction: float
    total_rate_ratio: float
    itm_ge_fraction: float
    log_rms_above_E0: float
    low_energy_ratio: float
    shape_log_rms: float
    cb: tuple
    E: np.ndarray = dc_field(repr=False, default=None)
    itm: np.ndarray = dc_field(repr=False, default=None)
    tdse: np.ndarray = dc_field(repr=False, default=None)

    def lines(self):
        return [
            f"log_rms_within_cb = {self.log_rms:.6g}",
            f"log_rms_within_cb_above_E0 = {self.log_rms_above_E0:.6g}",
            f"ratio_at_E0 = {self.ratio_at_E0:.6g}",
            f"itm_ge_tdse_fraction = {self.itm_ge_fraction:.6g}",
            f"low_energy_ratio_E_below_0.8 = {self.low_energy_ratio:.6g}",
            f"shape_log_rms_within_cb = {self.shape_log_rms:.6g}",
            f"tdse_shoulder_fraction_outside_cb = {self.tdse_shoulder_fraction:.6g}",
            f"total_rate_ratio = {self.total_rate_ratio:.6g}",
            f"cb = [{self.cb[0]:.6g}, {self.cb[1]:.6g}]",
        ]


def compare(itm, tdse: TdseSpectrum, R_itm: float = 1.0, R_tdse: float = 1.0, E0: float | None = None,
            cb: tuple | None = None, smooth: bool = True, low_energy: float = 0.8,
            floor: float = 1e-10) -> ComparisonReport:
    """Compare an ITM spectrum with a TDSE window spectrum.

    Both densities are divided by their own field-free rates (``R_itm``,
    ``R_tdse``).  An ITM pulse spectrum is converted to ``dw/dE`` and, with
    ``smooth``, convolved with the same window profile as the TDSE one so
    that both have the same resolution.  ``itm`` may also be a
    :class:`TdseSpectrum` (e.g. for self-comparison).

    Within-CB statistics use the classical boundaries shrunk by ``2 gamma_w``
    on each side, where the smoothed ITM edge is still rising.  Samples below
    ``floor`` times the peak of either density are ignored in log measures.
    """
    E = tdse.E
    if isinstance(itm, TdseSpectrum):
        Ei, di = itm.E, itm.dwdE
        if cb is None:
            cb = (float(E.min()), float(E.max()))
        a = np.interp(E, Ei, di) if smooth is False or Ei is E else smooth_like(Ei, di, E, tdse.gamma_w, tdse.order_n)
        total_itm = trapezoid(di, Ei)
    else:
        Ei, di = itm_energy_density(itm)
        if cb is None:
            cb = (0.5 * itm.meta["p_min"] ** 2, 0.5 * itm.meta["p_max"] ** 2)
        if smooth:
            a = smooth_like(Ei, di, E, tdse.gamma_w, tdse.order_n, support=cb)
        else:
            a = np.interp(E, Ei, di, left=0.0, right=0.0)
        total_itm = trapezoid(itm.weight, itm.p)
    a = a / R_itm
    b = tdse.dwdE / R_tdse
    edge = 2 * tdse.gamma_w if smooth else 0.0
    inside = (E >= cb[0] + edge) & (E <= cb[1] - edge)
    ok = inside & (a > floor * a.max()) & (b > floor * b.max())
    lr = np.log(a[ok]) - np.log(b[ok])
    log_rms = float(np.sqrt(np.mean(lr ** 2))) if lr.size else math.nan
    ge = float(np.mean(a[ok] >= b[ok])) if lr.size else math.nan
    if E0 is None:
        E0 = 0.5 * (cb[0] + cb[1])
    above = ok & (E >= E0)
    lra = np.log(a[above]) - np.log(b[above])
    log_rms_above = float(np.sqrt(np.mean(lra ** 2))) if lra.size else math.nan
    # same measure after scaling both to unit area inside the CB: shape only
    if lr.size:
        sa, sb = trapezoid(np.where(inside, a, 0.0), E), trapezoid(np.where(inside, b, 0.0), E)
        shape = float(np.sqrt(np.mean((lr - math.log(sa / sb)) ** 2)))
    else:
        shape = math.nan
    low = ok & (E < low_energy)
    low_ratio = float(np.exp(np.mean(np.log(a[low]) - np.log(b[low])))) if low.any() else math.nan
    ratio_E0 = float(np.interp(E0, E, a) / np.interp(E0, E, b))
    tot_b = trapezoid(tdse.dwdE, E)
    outside = ~((E >= cb[0]) & (E <= cb[1]))
    shoulder = float(trapezoid(np.where(outside, tdse.dwdE, 0.0), E) / tot_b) if tot_b > 0 else math.nan
    total_ratio = float((total_itm / R_itm) / (tdse.escaped_norm / R_tdse)) if tdse.escaped_norm > 0 else math.nan
    return ComparisonReport(log_rms=log_rms, ratio_at_E0=ratio_E0, tdse_shoulder_fraction=shoulder,
                            total_rate_ratio=total_ratio, itm_ge_fraction=ge,
                            log_rms_above_E0=log_rms_above, low_energy_ratio=low_ratio,
                            shape_log_rms=shape, cb=tuple(cb),
                            E=E, itm=a, tdse=b)
