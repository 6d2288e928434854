"""Tridiagonal kernels (numba) used by the propagator and the window operator."""

import numba
import numpy as np

TINY = 1e-150


@numba.njit(cache=True)
def thomas(sub, diag, sup, rhs):
    """Solve a general complex tridiagonal system (no pivoting)."""
    n = diag.shape[0]
    cp = np.empty(n, np.complex128)
    x = np.empty(n, np.complex128)
    den = diag[0]
    cp[0] = sup[0] / den
    x[0] = rhs[0] / den
    for i in range(1, n):
        den = diag[i] - sub[i] * cp[i - 1]
        if i < n - 1:
            cp[i] = sup[i] / den
        x[i] = (rhs[i] - sub[i] * x[i - 1]) / den
    for i in range(n - 2, -1, -1):
        x[i] -= cp[i] * x[i + 1]
    return x


@numba.njit(cache=True)
def factor_const_offdiag(diag, off):
    """Forward-sweep coefficients for a tridiagonal matrix with constant off-diagonal."""
    n = diag.shape[0]
    cp = np.empty(n, np.complex128)
    inv = np.empty(n, np.complex128)
    den = diag[0]
    inv[0] = 1.0 / den
    cp[0] = off * inv[0]
    for i in range(1, n):
        den = diag[i] - off * cp[i - 1]
        inv[i] = 1.0 / den
        cp[i] = off * inv[i]
    return cp, inv


@numba.njit(cache=True)
def cn_step(psi, x, c, ph, rdiag, roff, loff, cp, inv):
    """One split step ``exp(-i c x) CN(H0) exp(-i c x)`` applied in place.

    ``c = E(t + dt/2) dt / 2``.  ``rdiag``/``roff`` define ``1 - i dt/2 H0``
    and ``loff``/``cp``/``inv`` the pre-factorised ``1 + i dt/2 H0``; ``psi``
    vanishes beyond both ends.  ``ph`` is scratch space for the phase.
    """
    n = psi.shape[0]
    field_on = c != 0.0
    if field_on:
        for i in range(n):
            a = -c * x[i]
            ph[i] = complex(np.cos(a), np.sin(a))
            psi[i] *= ph[i]
    # rhs and forward sweep fused; psi[i-1] is overwritten once row i is built
    prev = 0j
    tmp = 0j
    for i in range(n):
        r = rdiag[i] * psi[i]
        if i > 0:
            r += roff * psi[i - 1]
        if i < n - 1:
            r += roff * psi[i + 1]
        if i > 0:
            r -= loff * prev
        prev = r * inv[i]
        if i > 0:
            psi[i - 1] = tmp
        tmp = prev
    psi[n - 1] = tmp
    for i in range(n - 2, -1, -1):
        psi[i] -= cp[i] * psi[i + 1]
    for i in range(n):
        v = psi[i]
        if field_on:
            v *= ph[i]
        # flush far tails before they become subnormal (which is very slow)
        if abs(v.real) < TINY and abs(v.imag) < TINY:
            v = 0j
        psi[i] = v


@numba.njit(cache=True)
def norm_below(psi, dx, nmax):
    s = 0.0
    for i in range(nmax):
        s += psi[i].real * psi[i].real + psi[i].imag * psi[i].imag
    return s * dx
