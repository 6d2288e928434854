"""Grid-based solution of the 1D time-dependent Schroedinger equation.

The state starts as the ground state of the well closed by an infinitely
wide barrier; at ``switch_time`` the barrier is cut to its finite width and
the wavefunction is propagated in the length gauge,
``H(t) = -1/2 d^2/dx^2 + U(x) + x E(t)``.

Hard walls (``psi = 0``) sit at ``x = 0`` and one step beyond the last grid
point.  Each time step applies the dipole phase for half a step, a
Crank-Nicolson step of the field-free Hamiltonian, and the second half of the
dipole phase.  The field-free factor is constant, so its tridiagonal
factorisation is computed once per run.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.linalg import eigh_tridiagonal

from ..field import field_model
from ..params import BarrierSpec, Envelope, FieldSpec
from . import _kernels

log = logging.getLogger(__name__)


class GridTooSmallError(RuntimeError):
    def __init__(self, t, amplitude, threshold):
        super().__init__(
            f"grid too small: |psi| = {amplitude:.3e} > {threshold:.1e} at the right boundary "
            f"at t = {t:.3f} a.u.; increase x_max"
        )
        self.t = t
        self.amplitude = amplitude


class ConvergenceError(RuntimeError):
    pass


class Gauge(str, enum.Enum):
    LENGTH = "length"


@dataclass(frozen=True)
class Grid:
    """Uniform grid of interior points ``x_i = x_min + i dx``, ``i = 1 .. n``.

    The wavefunction vanishes at ``x_min`` and at ``x_max = x_min + (n+1) dx``.
    """

    x_min: float
    x_max: float
    dx: float

    def __post_init__(self):
        if not self.dx > 0:
            raise ValueError("dx must be positive")
        if not self.x_max > self.x_min + 2 * self.dx:
            raise ValueError("empty grid")

    @property
    def n(self) -> int:
        return int(round((self.x_max - self.x_min) / self.dx)) - 1

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(1, self.n + 1)

    def index_at(self, x) -> int:
        """Number of interior points with coordinate ``<= x``."""
        return int(np.searchsorted(self.x, x, side="right"))

    @classmethod
    def for_run(cls, barrier: BarrierSpec, field: FieldSpec | None, t_end: float, dx: float = 0.1,
                E0: float | None = None, margin: float = 100.0, min_free: float = 500.0,
                front_speed: float | None = None):
        """Grid large enough that nothing reaches the right wall by ``t_end``.

        Besides the classical electrons (speed up to ``p0 + pF``), the sudden
        barrier switch feeds a faint high-momentum tail, resolved only up to
        the grid cut-off, whose amplitude front travels at about ``0.7/dx``.
        The reach is ``b + v t_end + margin`` with
        ``v = max(p0 + pF + 0.5, front_speed)`` (default ``0.75/dx``) and at
        least ``min_free`` a.u. of free space to the right of the barrier.
        """
        p0 = math.sqrt(2 * E0) if E0 else math.sqrt(2 * barrier.U0)
        pF = field.pF if field is not None else 0.0
        if front_speed is None:
            front_speed = 0.75 / dx
        reach = max(p0 + pF + 0.5, front_speed) * t_end + margin
        x_max = barrier.b + max(reach, min_free)
        x_max = dx * math.ceil(x_max / dx)
        return cls(0.0, x_max, dx)


def build_potential(grid: Grid, barrier: BarrierSpec, infinite: bool = False,
                    sampling: str = "point") -> np.ndarray:
    """Potential on the grid: ``0`` for ``x <= a``, ``U0`` on ``(a, b]``
    (or on ``(a, x_max)`` when ``infinite``) and ``0`` beyond ``b``.

    ``sampling="point"`` takes the value at each grid point, so the step
    edges snap to the grid.  ``"cell"`` uses the average over the cell
    ``[x - dx/2, x + dx/2]``, which moves the edges continuously with ``dx``
    and gives smooth grid convergence.
    """
    if barrier.a <= 0.0:
        raise ValueError("degenerate well: a = 0 cannot be represented on the grid (need a > 0)")
    if barrier.b >= grid.x_max - grid.dx:
        raise ValueError(f"barrier edge b={barrier.b} lies outside the grid (x_max={grid.x_max})")
    x = grid.x
    right = math.inf if infinite else barrier.b
    if sampling == "point":
        return np.where((x > barrier.a) & (x <= right), barrier.U0, 0.0)
    if sampling == "cell":
        lo, hi = x - 0.5 * grid.dx, x + 0.5 * grid.dx
        cover = (np.minimum(hi, right) - np.maximum(lo, barrier.a)) / grid.dx
        return barrier.U0 * np.clip(cover, 0.0, 1.0)
    raise ValueError(f"unknown potential sampling {sampling!r} (point or cell)")


def hamiltonian_bands(grid: Grid, U):
    """Diagonal and (constant) off-diagonal of the 3-point Hamiltonian."""
    return 1.0 / grid.dx ** 2 + U, -0.5 / grid.dx ** 2


def energy(grid: Grid, U, psi) -> float:
    d, e = hamiltonian_bands(grid, U)
    Hpsi = d * psi
    Hpsi[1:] += e * psi[:-1]
    Hpsi[:-1] += e * psi[1:]
    return float(np.vdot(psi, Hpsi).real / np.vdot(psi, psi).real)


@dataclass
class Wavefunction:
    values: np.ndarray
    t: float
    grid: Grid

    @property
    def norm(self) -> float:
        return float(np.vdot(self.values, self.values).real * self.grid.dx)

    def copy(self):
        return Wavefunction(self.values.copy(), self.t, self.grid)


def ground_state(grid: Grid, U, dtau: float = 1.0, tol: float = 1e-10, maxiter: int = 20000,
                 check: bool = True):
    """Lowest eigenpair by implicit imaginary-time relaxation.

    Each step solves ``(1 + dtau H) psi_new = psi_old`` and renormalises;
    relaxation stops once the energy changes by less than ``tol`` between
    steps.  With ``check`` the energy is compared against a direct
    tridiagonal eigensolve.

    Returns
    -------
    (Wavefunction, float)
    """
    d, e = hamiltonian_bands(grid, U)
    n = grid.n
    sub = np.full(n, dtau * e, complex)
    sup = sub.copy()
    diag = (1.0 + dtau * d).astype(complex)
    x = grid.x
    # any nodeless start overlaps the ground state
    psi = (x * np.exp(-x)).astype(complex)
    psi /= math.sqrt(np.vdot(psi, psi).real * grid.dx)
    E_old = energy(grid, U, psi)
    drift = math.inf
    for it in range(maxiter):
        psi = _kernels.thomas(sub, diag, sup, psi)
        psi /= math.sqrt(np.vdot(psi, psi).real * grid.dx)
        E = energy(grid, U, psi)
        drift = abs(E - E_old)
        E_old = E
        if drift < tol:
            break
    else:
        raise ConvergenceError(f"imaginary-time relaxation did not converge: last drift {drift:.3e}")
    psi = psi.real.astype(complex)
    psi[np.abs(psi) < _kernels.TINY] = 0.0
    psi *= np.sign(psi[np.argmax(np.abs(psi))].real)
    if check:
        w = eigh_tridiagonal(d, np.full(n - 1, e), select="i", select_range=(0, 0),
                             eigvals_only=True)[0]
        if abs(w - E) > 1e-6:
            raise ConvergenceError(f"relaxed energy {E:.10f} disagrees with eigensolver {w:.10f}")
    return Wavefunction(psi, 0.0, grid), E


@dataclass
class TdseRun:
    barrier: BarrierSpec
    field: FieldSpec | None
    grid: Grid
    dt: float = 0.02
    gauge: Gauge = Gauge.LENGTH
    switch_time: float = 0.0
    sample_every: float = 0.5
    boundary_threshold: float = 1e-8
    boundary_points: int = 10
    sampling: str = "point"
    history: list = dc_field(default_factory=list)

    def __post_init__(self):
        if not (0 < self.dt <= 0.05):
            raise ValueError("dt must be in (0, 0.05] a.u.")
        if self.switch_time < 0:
            raise ValueError("switch_time must be >= 0")
        self.gauge = Gauge(self.gauge)


def _field_value(run: TdseRun, t: float) -> float:
    if run.field is None or run.field.amplitude == 0.0:
        return 0.0
    return float(field_model(run.field).E(t).real)


def propagate(run: TdseRun, psi: Wavefunction, t_end: float, record: bool = True) -> Wavefunction:
    """Advance ``psi`` to ``t_end`` (returns a new wavefunction).

    The well-region norm ``N(t) = int_0^b |psi|^2 dx`` is appended to
    ``run.history`` as ``(t, N, total_norm)`` every ``sample_every`` a.u.

    Raises
    ------
    GridTooSmallError
        When ``|psi|`` near the right wall exceeds ``boundary_threshold``.
    """
    grid = run.grid
    dx, dt = grid.dx, run.dt
    x = grid.x
    d_fin, e = hamiltonian_bands(grid, build_potential(grid, run.barrier, False, run.sampling))
    d_inf, _ = hamiltonian_bands(grid, build_potential(grid, run.barrier, True, run.sampling))
    h = 0.5j * dt

    def factors(d):
        lhs = (1.0 + h * d).astype(complex)
        cp, inv = _kernels.factor_const_offdiag(lhs, complex(h * e))
        return (1.0 - h * d).astype(complex), complex(-h * e), complex(h * e), cp, inv

    fac = {False: factors(d_fin)}
    if psi.t < run.switch_time:
        fac[True] = factors(d_inf)
    nb = grid.index_at(run.barrier.b)
    values = psi.values.astype(complex).copy()
    t = psi.t
    n_steps = int(round((t_end - t) / dt))
    every = max(1, int(round(run.sample_every / dt)))
    scratch = np.empty(grid.n, complex)
    if record and not run.history:
        run.history.append((t, _kernels.norm_below(values, dx, nb), float(np.vdot(values, values).real * dx)))
    for k in range(n_steps):
        tm = t + 0.5 * dt
        c = 0.5 * dt * _field_value(run, tm)
        infinite = tm < run.switch_time
        _kernels.cn_step(values, x, c, scratch, *fac[infinite])
        t = psi.t + (k + 1) * dt
        if (k + 1) % every == 0 or k == n_steps - 1:
            edge = float(np.abs(values[-run.boundary_points:]).max())
            if edge > run.boundary_threshold:
                raise GridTooSmallError(t, edge, run.boundary_threshold)
            if record:
                run.history.append((t, _kernels.norm_below(values, dx, nb),
                                    float(np.vdot(values, values).real * dx)))
    return Wavefunction(values, t, grid)


def auto_run(barrier: BarrierSpec, field: FieldSpec | None, t_end: float, dx: float = 0.1,
             dt: float = 0.02, E0_guess: float | None = None, **kw) -> TdseRun:
    grid = Grid.for_run(barrier, field, t_end, dx=dx, E0=E0_guess)
    return TdseRun(barrier=barrier, field=field, grid=grid, dt=dt, **kw)


def pulse_end(field: FieldSpec | None) -> float:
    if field is None or field.envelope is Envelope.MONOCHROMATIC:
        return 0.0
    return field.duration
