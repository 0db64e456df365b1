"""Compiled Yee-update kernels.

Arrays are padded by one ghost entry on each side of each axis (see
:mod:`nwcavity.scene.raster` for the staggering).  For an axis with ``n``
cells, node-type entries occupy padded indices ``1..n+1`` and half-type
entries ``1..n``; index 0 and ``n+1`` of half-type arrays are ghosts used by
mirror-symmetry faces.

E-update coefficients ``cb`` already contain ``dt / (eps0 * eps_inf * dx)``
and are zero wherever E must stay zero (perfect conductors and
absorber-backing walls), so the main loops carry no boundary branches.
The outer loops are ``prange`` over x; every write is to a distinct element,
so results do not depend on the thread count.
"""

import numba as nb
import numpy as np
from numba import prange

_opts = dict(cache=True, nogil=True)


@nb.njit(parallel=True, **_opts)
def update_h(ex, ey, ez, hx, hy, hz, ch, ikx, iky, ikz):
    """H <- H - dt/mu0 curl E with 1/kappa stretching; ``ik*`` are half-node profiles."""
    nx = ex.shape[0] - 2
    ny = ex.shape[1] - 2
    nz = ex.shape[2] - 2
    for i in prange(1, nx + 2):
        for j in range(1, ny + 1):
            for k in range(1, nz + 1):
                hx[i, j, k] -= ch * ((ez[i, j + 1, k] - ez[i, j, k]) * iky[j]
                                     - (ey[i, j, k + 1] - ey[i, j, k]) * ikz[k])
    for i in prange(1, nx + 1):
        for j in range(1, ny + 2):
            for k in range(1, nz + 1):
                hy[i, j, k] -= ch * ((ex[i, j, k + 1] - ex[i, j, k]) * ikz[k]
                                     - (ez[i + 1, j, k] - ez[i, j, k]) * ikx[i])
    for i in prange(1, nx + 1):
        for j in range(1, ny + 1):
            for k in range(1, nz + 2):
                hz[i, j, k] -= ch * ((ey[i + 1, j, k] - ey[i, j, k]) * ikx[i]
                                     - (ex[i, j + 1, k] - ex[i, j, k]) * iky[j])


@nb.njit(parallel=True, **_opts)
def update_e(ex, ey, ez, hx, hy, hz, cbx, cby, cbz, ikx, iky, ikz):
    """E <- E + dt/(eps0 eps) curl H; ``ik*`` are node profiles."""
    nx = ex.shape[0] - 2
    ny = ex.shape[1] - 2
    nz = ex.shape[2] - 2
    for i in prange(1, nx + 1):
        for j in range(1, ny + 2):
            for k in range(1, nz + 2):
                ex[i, j, k] += cbx[i, j, k] * ((hz[i, j, k] - hz[i, j - 1, k]) * iky[j]
                                               - (hy[i, j, k] - hy[i, j, k - 1]) * ikz[k])
    for i in prange(1, nx + 2):
        for j in range(1, ny + 1):
            for k in range(1, nz + 2):
                ey[i, j, k] += cby[i, j, k] * ((hx[i, j, k] - hx[i, j, k - 1]) * ikz[k]
                                               - (hz[i, j, k] - hz[i - 1, j, k]) * ikx[i])
    for i in prange(1, nx + 2):
        for j in range(1, ny + 2):
            for k in range(1, nz + 1):
                ez[i, j, k] += cbz[i, j, k] * ((hy[i, j, k] - hy[i - 1, j, k]) * ikx[i]
                                               - (hx[i, j, k] - hx[i, j - 1, k]) * iky[j])


@nb.njit(parallel=True, **_opts)
def psi_e(f, cb, g, psi, positions, b, c, axis, sign, lo, hi):
    """CPML auxiliary update for an E component along ``axis``.

    ``psi <- b psi + c (g[p] - g[p-1])`` and ``f += sign * cb * psi`` for
    every absorber position ``p``; ``lo``/``hi`` bound the loops over the
    two remaining axes (inclusive, padded indices).
    """
    npos = positions.shape[0]
    if axis == 0:
        for s in prange(npos):
            p = positions[s]
            for j in range(lo[1], hi[1] + 1):
                for k in range(lo[2], hi[2] + 1):
                    psi[s, j, k] = b[p] * psi[s, j, k] + c[p] * (g[p, j, k] - g[p - 1, j, k])
                    f[p, j, k] += sign * cb[p, j, k] * psi[s, j, k]
    elif axis == 1:
        for i in prange(lo[0], hi[0] + 1):
            for s in range(npos):
                p = positions[s]
                for k in range(lo[2], hi[2] + 1):
                    psi[i, s, k] = b[p] * psi[i, s, k] + c[p] * (g[i, p, k] - g[i, p - 1, k])
                    f[i, p, k] += sign * cb[i, p, k] * psi[i, s, k]
    else:
        for i in prange(lo[0], hi[0] + 1):
            for j in range(lo[1], hi[1] + 1):
                for s in range(npos):
                    p = positions[s]
                    psi[i, j, s] = b[p] * psi[i, j, s] + c[p] * (g[i, j, p] - g[i, j, p - 1])
                    f[i, j, p] += sign * cb[i, j, p] * psi[i, j, s]


@nb.njit(parallel=True, **_opts)
def psi_h(f, ch, g, psi, positions, b, c, axis, sign, lo, hi):
    """CPML auxiliary update for an H component: forward difference of ``g``."""
    npos = positions.shape[0]
    if axis == 0:
        for s in prange(npos):
            p = positions[s]
            for j in range(lo[1], hi[1] + 1):
                for k in range(lo[2], hi[2] + 1):
                    psi[s, j, k] = b[p] * psi[s, j, k] + c[p] * (g[p + 1, j, k] - g[p, j, k])
                    f[p, j, k] += sign * ch * psi[s, j, k]
    elif axis == 1:
        for i in prange(lo[0], hi[0] + 1):
            for s in range(npos):
                p = positions[s]
                for k in range(lo[2], hi[2] + 1):
                    psi[i, s, k] = b[p] * psi[i, s, k] + c[p] * (g[i, p + 1, k] - g[i, p, k])
                    f[i, p, k] += sign * ch * psi[i, s, k]
    else:
        for i in prange(lo[0], hi[0] + 1):
            for j in range(lo[1], hi[1] + 1):
                for s in range(npos):
                    p = positions[s]
                    psi[i, j, s] = b[p] * psi[i, j, s] + c[p] * (g[i, j, p + 1] - g[i, j, p])
                    f[i, j, p] += sign * ch * psi[i, j, s]


@nb.njit(**_opts)
def polarization_prepare(e_flat, idx, mat, coef, p_now, p_prev, e_prev, a_tmp):
    """Explicit part of the pole update, evaluated before the E update.

    The pole equation is discretized with time-averaged restoring and
    driving terms, ``w0^2 (P+ + P-)/2`` and ``eps0 sigma (E+ + E-)/2``, which
    keeps the scheme stable up to the vacuum Courant limit even for strong
    Drude poles.  With ``coef[m, q] = (c1, c2, c3)``::

        P+ = c1 P + c2 P- + c3 (E+ + E-) = A + c3 E+

    ``a_tmp`` receives ``A``; ``e_prev`` is advanced to the current E.
    """
    npole = p_now.shape[1]
    for e in range(idx.shape[0]):
        m = mat[e]
        ep = e_prev[e]
        for q in range(npole):
            a_tmp[e, q] = coef[m, q, 0] * p_now[e, q] + coef[m, q, 1] * p_prev[e, q] + coef[m, q, 2] * ep
        e_prev[e] = e_flat[idx[e]]


@nb.njit(**_opts)
def polarization_finish(e_flat, idx, mat, coef, p_now, p_prev, a_tmp, eps):
    """Solve for E+ on dispersive edges and advance the polarization.

    On entry ``e_flat`` holds ``E + dt/(eps0 eps_inf) (curl H - J)``;
    ``eps`` is ``eps0 * eps_inf`` per edge.
    """
    npole = p_now.shape[1]
    for e in range(idx.shape[0]):
        m = mat[e]
        num = eps[e] * e_flat[idx[e]]
        den = eps[e]
        for q in range(npole):
            num -= a_tmp[e, q] - p_now[e, q]
            den += coef[m, q, 2]
        en = num / den
        e_flat[idx[e]] = en
        for q in range(npole):
            p_prev[e, q] = p_now[e, q]
            p_now[e, q] = a_tmp[e, q] + coef[m, q, 2] * en


@nb.njit(**_opts)
def field_energy(ex, ey, ez, hx, hy, hz, epx, epy, epz, lo, hi):
    """Sum of eps E^2 + mu H^2 over nodes in ``[lo, hi)`` (relative units).

    ``ep*`` hold relative permittivities (0 for perfect conductors); the
    returned value is multiplied by eps0/mu0 and the cell volume by the
    caller.  Serial loop: the reduction order is fixed.
    """
    se = 0.0
    sh = 0.0
    for i in range(lo[0], hi[0]):
        for j in range(lo[1], hi[1]):
            for k in range(lo[2], hi[2]):
                se += (epx[i, j, k] * ex[i, j, k] ** 2 + epy[i, j, k] * ey[i, j, k] ** 2
                       + epz[i, j, k] * ez[i, j, k] ** 2)
                sh += hx[i, j, k] ** 2 + hy[i, j, k] ** 2 + hz[i, j, k] ** 2
    return se, sh


@nb.njit(**_opts)
def gather(flat, idx, w):
    s = 0.0
    for n in range(idx.shape[0]):
        s += w[n] * flat[idx[n]]
    return s


@nb.njit(**_opts)
def scatter_add(flat, idx, w):
    for n in range(idx.shape[0]):
        flat[idx[n]] += w[n]


@nb.njit(**_opts)
def dft_accumulate(acc, ph, f):
    """acc[q, k] += ph[q] * f[k] in place."""
    for q in range(acc.shape[0]):
        pr = ph[q]
        for k in range(f.shape[0]):
            acc[q, k] += pr * f[k]
