"""Convolutional PML profiles (Roden & Gedney CFS-CPML).

Profiles are graded polynomially with depth ``rho`` in ``[0, 1]``::

    sigma = sigma_max * rho**m
    kappa = 1 + (kappa_max - 1) * rho**m
    alpha = alpha_max * (1 - rho)

and the recursive-convolution coefficients are::

    b = exp(-(sigma / kappa + alpha) * dt / eps0)
    c = sigma / (sigma * kappa + kappa**2 * alpha) * (b - 1)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..constants import EPS0, ETA0


@dataclass
class AxisProfile:
    """CPML coefficients along one axis, on padded array indices.

    ``b``, ``c`` and ``inv_kappa`` have length ``n + 2`` (one ghost entry on
    each side).  ``positions`` lists the padded indices that lie inside an
    absorber and ``slot`` maps a padded index to its row in the auxiliary
    arrays (-1 outside).
    """

    b: np.ndarray
    c: np.ndarray
    inv_kappa: np.ndarray
    positions: np.ndarray
    slot: np.ndarray


def _depth(pos: np.ndarray, n: int, lo: int, hi: int) -> np.ndarray:
    rho = np.zeros_like(pos)
    if lo > 0:
        m = pos < lo
        rho[m] = (lo - pos[m]) / lo
    if hi > 0:
        m = pos > n - hi
        rho[m] = (pos[m] - (n - hi)) / hi
    return np.clip(rho, 0.0, 1.0)


def axis_profile(n: int, lo: int, hi: int, dx: float, dt: float, half: bool,
                 order: float = 3.0, kappa_max: float = 2.0, alpha_max: float = 0.0,
                 sigma_factor: float = 1.0) -> AxisProfile:
    """Profile for node (``half=False``) or half-node (``half=True``) positions.

    ``alpha_max`` is an absolute rate in units of 1/s times eps0 (S/m).
    """
    p = np.arange(n + 2, dtype=float)
    pos = p - 1.0 + (0.5 if half else 0.0)
    rho = _depth(pos, n, lo, hi)
    valid = (pos >= 0) & (pos <= n)
    rho[~valid] = 0.0
    sigma_max = sigma_factor * 0.8 * (order + 1.0) / (ETA0 * dx)
    sigma = sigma_max * rho**order
    kappa = 1.0 + (kappa_max - 1.0) * rho**order
    alpha = alpha_max * (1.0 - rho)
    alpha[rho == 0] = 0.0
    b = np.exp(-(sigma / kappa + alpha) * dt / EPS0)
    denom = sigma * kappa + kappa * kappa * alpha
    c = np.where(denom > 0, sigma / np.where(denom > 0, denom, 1.0) * (b - 1.0), 0.0)
    inside = rho > 0
    positions = np.nonzero(inside)[0].astype(np.int64)
    slot = np.full(n + 2, -1, dtype=np.int64)
    slot[positions] = np.arange(len(positions))
    return AxisProfile(b=b, c=c, inv_kappa=1.0 / kappa, positions=positions, slot=slot)
