"""Complex start times of the under-barrier trajectories.

A trajectory starts at ``t_s = t0 + i tau`` inside the well with velocity
``i kappa0`` and leaves the barrier at real time ``t0``.  Under the barrier

    v_I(t) = i kappa0 + P(t) - P(t_s)
    x_I(t) = (i kappa0 - P(t_s)) (t - t_s) + G(t) - G(t_s)

and the two conditions fixing ``(t0, tau)`` for a final momentum ``p`` are

    Re x_I(t0) = d                       (exit at the outer barrier edge)
    sqrt(2 U0 + Re v_I(t0)^2) - P(t0) = p

where ``d`` is the barrier thickness.  The square root is the exit velocity
``v0`` gained on the potential step.  For the monochromatic field these two
equations reduce to the familiar closed forms implemented in
:func:`exit_velocity` and :func:`xmatch_monochromatic`.

Roots are located from a dense map of ``p(t0)`` (``tau`` solved by a 1D
Newton at each ``t0``), split into monotone pieces at refined extrema, then
polished by a safeguarded Newton-bisection.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from ..field import FieldModel, field_model
from ..params import BarrierSpec, Envelope, FieldSpec, QSState

log = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-10


class SaddleError(RuntimeError):
    pass


class ExitVelocityError(ValueError):
    """No real exit velocity (negative radicand)."""


@dataclass
class SaddlePoint:
    alpha: int
    phi0: float
    psi0: float
    v0: float
    W: complex = complex("nan")
    dp_dt0: float = math.nan
    residual: float = math.nan
    t0: float = math.nan
    tau: float = math.nan


def exit_velocity(state: QSState, field: FieldSpec, phi0, psi0):
    """Exit velocity for the monochromatic field at start phase ``phi0 + i psi0``.

    ``v0^2 = p0^2 - 2 kappa0 pF cos(phi0) sinh(psi0)
    + pF^2 [(cosh(psi0) - 1)^2 sin(phi0)^2 - cos(phi0)^2 sinh(psi0)^2]``

    Raises :class:`ExitVelocityError` if the radicand is negative (scalar
    input) or returns NaN there (array input).
    """
    p0, k0, pF = state.p0, state.kappa0, field.pF
    c, s = np.cos(phi0), np.sin(phi0)
    sh, ch = np.sinh(psi0), np.cosh(psi0)
    rad = p0 ** 2 - 2.0 * k0 * pF * c * sh + pF ** 2 * ((ch - 1.0) ** 2 * s ** 2 - c ** 2 * sh ** 2)
    if np.ndim(rad) == 0:
        if rad < 0:
            raise ExitVelocityError(f"no real exit velocity (radicand {float(rad):.3e})")
        return math.sqrt(rad)
    with np.errstate(invalid="ignore"):
        return np.where(rad >= 0, np.sqrt(np.abs(rad)), np.nan)


def xmatch_monochromatic(state: QSState, field: FieldSpec, phi0, psi0, thickness):
    """Residual of the closed-form exit condition for the monochromatic field."""
    k0, w, pF = state.kappa0, field.omega, field.pF
    return ((k0 / w) * psi0
            - (pF / w) * np.cos(phi0) * (np.cosh(psi0) - 1.0 - psi0 * np.sinh(psi0))
            - thickness)


class SaddleSystem:
    """The two saddle equations and their derivatives for one parameter set."""

    def __init__(self, state: QSState, barrier: BarrierSpec, field: FieldSpec):
        self.state = state
        self.barrier = barrier
        self.field = field
        self.model: FieldModel = field_model(field)
        self.d = barrier.thickness
        self.tau00 = self.d / state.kappa0

    # -- building blocks -------------------------------------------------
    def _pieces(self, t0, tau):
        m, k0 = self.model, self.state.kappa0
        ts = t0 + 1j * tau
        Pts, Pt0 = m.P(ts), m.P(t0 + 0j)
        A = (1j * k0 - Pts) * (-1j * tau) + m.G(t0 + 0j) - m.G(ts)
        V = 1j * k0 + Pt0 - Pts
        return ts, Pts, Pt0, A, V

    def exit_position(self, t0, tau):
        """Complex ``x_I(t0)``; its real part equals the thickness on a saddle."""
        return self._pieces(np.asarray(t0, float), np.asarray(tau, float))[3]

    def velocities(self, t0, tau):
        """``(v_I(t0), v0)`` with NaN ``v0`` where the radicand is negative."""
        _, _, _, _, V = self._pieces(np.asarray(t0, float), np.asarray(tau, float))
        R = 2.0 * self.barrier.U0 + (V * V).real
        with np.errstate(invalid="ignore"):
            v0 = np.where(R >= 0, np.sqrt(np.abs(R)), np.nan)
        return V, v0

    def residuals(self, t0, tau, p):
        t0 = np.asarray(t0, float)
        tau = np.asarray(tau, float)
        _, _, Pt0, A, V = self._pieces(t0, tau)
        R = 2.0 * self.barrier.U0 + (V * V).real
        with np.errstate(invalid="ignore"):
            v0 = np.where(R >= 0, np.sqrt(np.abs(R)), np.nan)
        return A.real - self.d, v0 - Pt0.real - p

    # -- tau at fixed t0 ---------------------------------------------------
    def solve_tau(self, t0, tau_guess=None, maxiter=80):
        """Smallest positive ``tau`` with ``Re x_I(t0) = d``; NaN if none.

        Newton from ``d / kappa0`` converges monotonically: the exit condition
        is convex in ``tau`` when the field pushes outward and concave when it
        pushes back, and in the concave case a vanishing derivative signals
        that no root exists (escape through the tilted barrier instead).
        """
        t0 = np.atleast_1d(np.asarray(t0, float))
        m, k0 = self.model, self.state.kappa0
        tau = np.full(t0.shape, self.tau00) if tau_guess is None else np.array(tau_guess, float, copy=True)
        tau = np.broadcast_to(tau, t0.shape).copy()
        active = np.ones(t0.shape, bool)
        ok = np.zeros(t0.shape, bool)
        for _ in range(maxiter):
            if not active.any():
                break
            ta, ua = t0[active], tau[active]
            ts = ta + 1j * ua
            A = (1j * k0 - m.P(ts)) * (-1j * ua) + m.G(ta + 0j) - m.G(ts)
            f = A.real - self.d
            df = k0 + ua * m.E(ts).real
            bad = ~(df > 0)
            step = np.where(bad, 0.0, f / np.where(bad, 1.0, df))
            new = ua - step
            bad |= ~(new > 0) | ~np.isfinite(new)
            conv = ~bad & (np.abs(step) <= 1e-15 * np.maximum(1.0, np.abs(new)) + 1e-300)
            conv |= ~bad & (np.abs(f) < 1e-14 * max(1.0, self.d))
            idx = np.flatnonzero(active)
            tau[idx] = np.where(bad, np.nan, new)
            ok[idx[conv]] = True
            active[idx[bad | conv]] = False
        tau[~ok] = np.nan
        if active.any():
            tau[active] = np.nan
        return tau

    def p_of_t0(self, t0, tau=None):
        """Final momentum along the solution branch, with the matching ``tau``."""
        t0 = np.atleast_1d(np.asarray(t0, float))
        if tau is None:
            tau = self.solve_tau(t0)
        _, v0 = self.velocities(t0, np.nan_to_num(tau, nan=self.tau00))
        Pt0 = self.model.P(t0 + 0j).real
        p = v0 - Pt0
        p[~np.isfinite(tau)] = np.nan
        return p, tau

    def slope_analytic(self, t0, tau):
        """``dp/dt0`` along the branch from the implicit-function theorem."""
        t0 = np.asarray(t0, float)
        tau = np.asarray(tau, float)
        m, k0 = self.model, self.state.kappa0
        ts, Pts, Pt0, A, V = self._pieces(t0, tau)
        Ets, Et0 = m.E(ts), m.E(t0 + 0j)
        A_t = -1j * tau * Ets + Pt0 - Pts
        A_u = k0 + tau * Ets
        V_t = -Et0 + Ets
        V_u = 1j * Ets
        v0 = np.sqrt(2.0 * self.barrier.U0 + (V * V).real)
        F2_t = (V * V_t).real / v0 + Et0.real
        F2_u = (V * V_u).real / v0
        return F2_t - F2_u * A_t.real / A_u.real

    def slope_fd(self, t0, tau=None, h_phase=1e-4):
        """Central difference of ``p`` along the branch, step ``h_phase`` in ``omega t0``."""
        t0 = np.asarray(t0, float)
        h = h_phase / self.field.omega
        guess = None if tau is None else np.atleast_1d(tau)
        pp, _ = self.p_of_t0(t0 + h, None if guess is None else self.solve_tau(t0 + h, guess))
        pm, _ = self.p_of_t0(t0 - h, None if guess is None else self.solve_tau(t0 - h, guess))
        return (pp - pm) / (2.0 * h)

    # -- branch map ----------------------------------------------------------
    def window(self):
        m = self.model
        if m.pulsed:
            return 0.0, m.T, False
        return 0.0, m.period, True

    def branch_map(self, n_per_cycle=2000):
        """Dense samples of ``p(t0)`` over the reference window."""
        lo, hi, periodic = self.window()
        n_cyc = (hi - lo) / self.model.period
        n = max(int(math.ceil(n_per_cycle * n_cyc)), 64)
        if periodic:
            t = lo + (hi - lo) * np.arange(n) / n
        else:
            t = np.linspace(lo, hi, n + 1)
        p, tau = self.p_of_t0(t)
        return t, p, tau, periodic

    def _refine_extremum(self, a, b, sign):
        f = lambda x: sign * float(self.p_of_t0(np.array([x]))[0][0])
        try:
            r = minimize_scalar(lambda x: -f(x), bounds=(a, b), method="bounded",
                                options={"xatol": 1e-13 * max(1.0, abs(b)), "maxiter": 500})
            x = float(r.x)
            if np.isfinite(f(x)):
                return x
        except (ValueError, FloatingPointError):
            pass
        return 0.5 * (a + b)

    def segments(self, n_per_cycle=2000):
        """Monotone pieces ``[(ta, tb), ...]`` of the branch map.

        Breakpoints are the refined local extrema, the window edges (pulse)
        and the edges of any gap where no exit solution exists.
        """
        t, p, tau, periodic = self.branch_map(n_per_cycle)
        n = len(t)
        dt = t[1] - t[0]
        fin = np.isfinite(p)
        breaks = []
        idx = range(n) if periodic else range(1, n - 1)
        for i in idx:
            il, ir = (i - 1) % n, (i + 1) % n
            if not (fin[i] and fin[il] and fin[ir]):
                continue
            if (p[i] >= p[il] and p[i] > p[ir]) or (p[i] > p[il] and p[i] >= p[ir]):
                breaks.append(self._refine_extremum(t[i] - dt, t[i] + dt, +1.0))
            elif (p[i] <= p[il] and p[i] < p[ir]) or (p[i] < p[il] and p[i] <= p[ir]):
                breaks.append(self._refine_extremum(t[i] - dt, t[i] + dt, -1.0))
        gap_edges = []
        if not fin.all():
            for i in range(n):
                j = (i + 1) % n
                if not periodic and j == 0:
                    continue
                if fin[i] and not fin[j]:
                    gap_edges.append((t[i], "end"))
                elif not fin[i] and fin[j]:
                    gap_edges.append((t[j] if j else t[j], "start"))
        segs = []
        if periodic:
            period = self.model.period
            pts = sorted([(b % period, "x") for b in breaks] + [(g % period, k) for g, k in gap_edges])
            if not pts:
                return [(t[0], t[0] + period)]
            for (a, ka), (b, kb) in zip(pts, pts[1:] + [(pts[0][0] + period, pts[0][1])]):
                if ka == "end":  # gap follows
                    continue
                if b > a:
                    segs.append((a, b))
        else:
            lo, hi = t[0], t[-1]
            pts = [(lo, "start" if fin[0] else "end")] + sorted([(b, "x") for b in breaks] + gap_edges)
            pts.append((hi, "x"))
            for (a, ka), (b, kb) in zip(pts, pts[1:]):
                if ka == "end" or b <= a:
                    continue
                segs.append((a, b))
        return segs

    # -- root polishing --------------------------------------------------------
    def solve(self, p_targets, segs, maxiter=200):
        """All roots of ``p(t0) = p`` for every target in every monotone segment.

        Returns arrays ``(k, t0, tau)`` with ``k`` the index into ``p_targets``.
        """
        p_targets = np.atleast_1d(np.asarray(p_targets, float))
        if not segs:
            return np.array([], int), np.array([]), np.array([])
        a = np.array([s[0] for s in segs])
        b = np.array([s[1] for s in segs])
        pa, _ = self.p_of_t0(a)
        pb, _ = self.p_of_t0(b)
        K, S = np.meshgrid(np.arange(len(p_targets)), np.arange(len(segs)), indexing="ij")
        K, S = K.ravel(), S.ravel()
        P = p_targets[K]
        lo_p = np.minimum(pa[S], pb[S])
        hi_p = np.maximum(pa[S], pb[S])
        sel = np.isfinite(lo_p) & (P >= lo_p) & (P <= hi_p)
        K, S, P = K[sel], S[sel], P[sel]
        if K.size == 0:
            return np.array([], int), np.array([]), np.array([])
        lo, hi = a[S].copy(), b[S].copy()
        f_lo = pa[S] - P
        x = 0.5 * (lo + hi)
        tau = self.solve_tau(x)
        done = np.zeros(K.size, bool)
        for _ in range(maxiter):
            act = ~done
            if not act.any():
                break
            xa = x[act]
            ua = self.solve_tau(xa, np.nan_to_num(tau[act], nan=self.tau00))
            bad_tau = ~np.isfinite(ua)
            if bad_tau.any():
                ua[bad_tau] = self.solve_tau(xa[bad_tau])
            pa_, _ = self.p_of_t0(xa, ua)
            f = pa_ - P[act]
            d = self.slope_analytic(xa, np.nan_to_num(ua, nan=self.tau00))
            l, h, fl = lo[act], hi[act], f_lo[act]
            same = np.sign(f) == np.sign(fl)
            l = np.where(same, xa, l)
            fl = np.where(same, f, fl)
            h = np.where(same, h, xa)
            with np.errstate(divide="ignore", invalid="ignore"):
                xn = xa - f / d
            inside = np.isfinite(xn) & (xn > l) & (xn < h)
            xn = np.where(inside, xn, 0.5 * (l + h))
            xn = np.where(np.isfinite(f), xn, 0.5 * (l + h))
            conv = (np.abs(f) < 1e-14 * max(1.0, float(np.nanmax(np.abs(P))))) | (h - l < 4e-16 * np.maximum(1.0, np.abs(h)))
            idx = np.flatnonzero(act)
            x[idx] = np.where(conv, xa, xn)
            tau[idx] = ua
            lo[idx], hi[idx], f_lo[idx] = l, h, fl
            done[idx[conv]] = True
        tau = self.solve_tau(x, np.nan_to_num(tau, nan=self.tau00))
        return K, x, tau


def _dedupe(t0, tau, period):
    order = np.argsort(t0)
    keep = []
    for i in order:
        if keep:
            dj = abs(t0[i] - t0[keep[-1]])
            if period is not None:
                dj = min(dj, period - dj)
            if dj < 1e-9:
                continue
        keep.append(i)
    if period is not None and len(keep) > 1:
        dj = abs(t0[keep[0]] + period - t0[keep[-1]])
        if dj < 1e-9:
            keep.pop()
    return keep


def find_saddles(system: SaddleSystem, p_targets, n_per_cycle=2000, segs=None):
    """Saddle points for each target momentum: ``list[list[SaddlePoint]]``.

    ``segs`` may be passed to reuse the branch map across calls.
    """
    if segs is None:
        segs = system.segments(n_per_cycle)
    p_targets = np.atleast_1d(np.asarray(p_targets, float))
    K, t0, tau = system.solve(p_targets, segs)
    w = system.field.omega
    period = None if system.model.pulsed else system.model.period
    out = [[] for _ in p_targets]
    if K.size == 0:
        return out
    if period is not None:
        t0 = np.mod(t0, period)
    r1, r2 = system.residuals(t0, tau, p_targets[K])
    _, v0 = system.velocities(t0, tau)
    res = np.maximum(np.abs(r1), np.abs(r2))
    for k in np.unique(K):
        sel = np.flatnonzero(K == k)
        keep = _dedupe(t0[sel], tau[sel], period)
        alpha = 0
        for j in sorted(sel[keep], key=lambda j: t0[j]):
            if not (np.isfinite(res[j]) and res[j] < RESIDUAL_TOL and tau[j] > 0):
                log.info("dropping saddle at p=%.6g t0=%.6g (residual %.3e)", p_targets[k], t0[j], res[j])
                continue
            alpha += 1
            sp = SaddlePoint(alpha=alpha, phi0=float(w * t0[j]), psi0=float(w * tau[j]),
                             v0=float(v0[j]), residual=float(res[j]), t0=float(t0[j]),
                             tau=float(tau[j]))
            out[k].append(sp)
    return out


def solve_saddles_monochromatic(state: QSState, barrier: BarrierSpec, field: FieldSpec, p,
                                n_per_cycle=2000):
    """Both saddles of the reference period ``phi0 in [0, 2 pi)`` for momentum ``p``.

    Returns an empty list when ``p`` lies outside the classical boundaries.
    """
    if field.envelope is not Envelope.MONOCHROMATIC:
        raise ValueError("monochromatic field expected")
    if field.amplitude == 0.0:
        return []
    system = SaddleSystem(state, barrier, field)
    return find_saddles(system, [p], n_per_cycle)[0]


def solve_saddles_pulse(state: QSState, barrier: BarrierSpec, field: FieldSpec, p,
                        n_per_cycle=2000):
    """All saddles inside the sin^2 pulse window for momentum ``p``.

    Up to two per half-cycle.  With zero amplitude the trajectory family is
    degenerate; one representative per half-cycle is returned at ``p = p0``.
    """
    if field.envelope is not Envelope.SIN_SQUARED:
        raise ValueError("sin^2 pulse expected")
    if field.amplitude == 0.0:
        if not math.isclose(p, state.p0, rel_tol=1e-12):
            return []
        w = field.omega
        out = []
        for k in range(2 * field.n_cycles):
            tau = barrier.thickness / state.kappa0
            out.append(SaddlePoint(alpha=k + 1, phi0=(k + 0.5) * math.pi, psi0=w * tau, v0=state.p0,
                                   dp_dt0=0.0, residual=0.0, t0=(k + 0.5) * math.pi / w, tau=tau))
        return out
    system = SaddleSystem(state, barrier, field)
    found = find_saddles(system, [p], n_per_cycle)[0]
    if not found:
        log.warning("no pulse saddles found for p=%.6g", p)
    return found


def classical_boundaries(system: SaddleSystem, n_per_cycle=2000):
    """Extreme final momenta reachable along the branch map."""
    segs = system.segments(n_per_cycle)
    ends = np.array([s[0] for s in segs] + [s[1] for s in segs])
    p, _ = system.p_of_t0(ends)
    p = p[np.isfinite(p)]
    return float(p.min()), float(p.max()), segs
