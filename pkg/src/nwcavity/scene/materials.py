"""Material models: constant-index dielectrics and pole-expanded metals.

Pole convention (time dependence ``exp(-i omega t)``, lossy media have
``Im eps > 0``)::

    eps(w) = eps_inf + sum_p  sigma_p / (w0_p**2 - w**2 - 1j * gamma_p * w)

A pole with ``w0 = 0`` is a Drude term (``sigma = wp**2``); a pole with
``w0 > 0`` is a Lorentz oscillator of strength ``sigma / w0**2``.  The same
form drives the time-domain polarization update in :mod:`nwcavity.fdtd`.
"""

from __future__ import annotations

import functools
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import least_squares, nnls

from ..constants import EV_NM, HBAR, QE, omega_from_nm

EV_TO_RAD = QE / HBAR  # rad/s per eV


class MaterialFitError(RuntimeError):
    """A pole fit whose residual exceeds the requested tolerance."""

    def __init__(self, message, model):
        super().__init__(message)
        self.model = model


class OutOfBandError(ValueError):
    pass


@dataclass(frozen=True)
class MaterialModel:
    name: str
    kind: str = "constant"  # constant | poles | pec
    epsilon_infinity: float = 1.0
    poles: tuple[tuple[float, float, float], ...] = ()
    fit_band_nm: tuple[float, float] | None = None
    fit_residual: float = 0.0

    @property
    def dispersive(self) -> bool:
        return self.kind == "poles" and len(self.poles) > 0

    @property
    def is_pec(self) -> bool:
        return self.kind == "pec"


def constant_index(n: float, name: str = "dielectric") -> MaterialModel:
    return MaterialModel(name=name, kind="constant", epsilon_infinity=float(n) ** 2)


AIR = constant_index(1.0, "air")
PEC = MaterialModel(name="pec", kind="pec", epsilon_infinity=1.0)


def permittivity_at(model: MaterialModel, wavelength_nm, allow_out_of_band: bool = False):
    """Complex relative permittivity of ``model`` at vacuum wavelength(s) in nm."""
    wl = np.asarray(wavelength_nm, dtype=float)
    if model.is_pec:
        raise ValueError("a perfect conductor has no finite permittivity")
    if model.kind == "constant" or not model.poles:
        out = np.full(wl.shape, complex(model.epsilon_infinity))
        return out if out.ndim else complex(out)
    if model.fit_band_nm is not None and not allow_out_of_band:
        lo, hi = model.fit_band_nm
        if np.any(wl < lo - 1e-9) or np.any(wl > hi + 1e-9):
            raise OutOfBandError(
                f"{model.name}: wavelength outside fit band [{lo}, {hi}] nm")
    w = omega_from_nm(wl)
    eps = np.full(wl.shape, complex(model.epsilon_infinity))
    for sigma, w0, gamma in model.poles:
        eps = eps + sigma / (w0 * w0 - w * w - 1j * gamma * w)
    return eps if eps.ndim else complex(eps)


# ----------------------------------------------------------------------
# tabulated data

def read_permittivity_table(path) -> tuple[np.ndarray, np.ndarray]:
    """Read ``wavelength_nm, re_eps, im_eps`` delimited text (``#`` comments)."""
    data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    if data.shape[1] != 3:
        raise ValueError(f"{path}: expected 3 columns, found {data.shape[1]}")
    order = np.argsort(data[:, 0])
    data = data[order]
    return data[:, 0], data[:, 1] + 1j * data[:, 2]


def gold_table_path() -> Path:
    return Path(str(resources.files("nwcavity.scene") / "data" / "gold_johnson_christy.txt"))


@functools.lru_cache(maxsize=None)
def gold_table() -> tuple[np.ndarray, np.ndarray]:
    return read_permittivity_table(gold_table_path())


def interpolate_table(wl_tab, eps_tab, wavelength_nm):
    """Cubic-spline interpolation of a permittivity table in photon energy."""
    e_tab = EV_NM / np.asarray(wl_tab)
    order = np.argsort(e_tab)
    re = CubicSpline(e_tab[order], np.real(eps_tab)[order])
    im = CubicSpline(e_tab[order], np.imag(eps_tab)[order])
    e = EV_NM / np.asarray(wavelength_nm, dtype=float)
    return re(e) + 1j * im(e)


# ----------------------------------------------------------------------
# pole fitting

def _basis(e_ev, nonlin, n_poles):
    """Columns of the linear part: eps_inf - 1 and one column per pole strength."""
    cols = [np.ones_like(e_ev, dtype=complex)]
    gamma_d = nonlin[0]
    cols.append(1.0 / (-e_ev * e_ev - 1j * gamma_d * e_ev))
    for p in range(1, n_poles):
        w0, gamma = nonlin[2 * p - 1], nonlin[2 * p]
        cols.append(1.0 / (w0 * w0 - e_ev * e_ev - 1j * gamma * e_ev))
    return np.stack(cols, axis=1)


def _solve_linear(e_ev, target, scale, nonlin, n_poles):
    a = _basis(e_ev, nonlin, n_poles) / scale[:, None]
    b = (target - 1.0) / scale
    a_ri = np.concatenate([a.real, a.imag])
    b_ri = np.concatenate([b.real, b.imag])
    coef, _ = nnls(a_ri, b_ri, maxiter=50 * a_ri.shape[1])
    return coef, a_ri @ coef - b_ri


def fit_metal_poles(tabulated_permittivity, band_nm, n_poles: int = 2,
                    tolerance: float | None = 0.02, samples: int = 81,
                    name: str = "metal") -> MaterialModel:
    """Fit a Drude + (n_poles - 1) Lorentz model to tabulated permittivity.

    Pole strengths and ``eps_inf - 1`` enter linearly and are solved by
    non-negative least squares for every trial set of resonances and
    dampings (variable projection), so redundant poles collapse to zero
    strength instead of wandering.

    Parameters
    ----------
    tabulated_permittivity : sequence of (wavelength_nm, complex eps)
        Must cover ``band_nm``.  Between table points the data are
        interpolated with a cubic spline in photon energy.
    band_nm : (lo, hi)
        Fit band; the returned residual is the maximum relative error
        ``|eps_fit - eps_tab| / |eps_tab|`` over ``samples`` points in it.
    n_poles : int
        Total pole count; the first pole is a Drude term (zero resonance).
    tolerance : float or None
        Residual above this raises :class:`MaterialFitError` (which carries
        the fitted model).  ``None`` disables the check.
    """
    if n_poles < 1:
        raise ValueError("n_poles must be >= 1")
    tab = list(tabulated_permittivity)
    wl_tab = np.array([float(t[0]) for t in tab])
    eps_tab = np.array([complex(t[1]) for t in tab])
    lo, hi = sorted(float(b) for b in band_nm)
    if wl_tab.min() > lo + 1e-9 or wl_tab.max() < hi - 1e-9:
        raise ValueError(f"table [{wl_tab.min():g}, {wl_tab.max():g}] nm does not cover band [{lo}, {hi}]")

    wl = np.linspace(lo, hi, samples)
    if len(wl_tab) >= 4:
        target = interpolate_table(wl_tab, eps_tab, wl)
    else:
        target = np.interp(wl, wl_tab, eps_tab.real) + 1j * np.interp(wl, wl_tab, eps_tab.imag)
    inside = (wl_tab >= lo) & (wl_tab <= hi)
    wl = np.concatenate([wl, wl_tab[inside]])
    target = np.concatenate([target, eps_tab[inside]])
    e = EV_NM / wl
    scale = np.abs(target)
    e_mid = float(np.mean(e))

    def resid(log_nonlin):
        return _solve_linear(e, target, scale, np.exp(log_nonlin), n_poles)[1]

    starts = []
    for gd in (0.01, 0.1, 1.0):
        if n_poles == 1:
            starts.append([gd])
            continue
        for w0 in (0.3 * e_mid, 2.0 * e_mid, 5.0 * e_mid):
            for g in (0.1, 1.0):
                x = [gd]
                for p in range(1, n_poles):
                    x += [w0 * (1.0 + 0.5 * (p - 1)), g]
                starts.append(x)
    lower = np.log([1e-6] + [1e-3, 1e-6] * (n_poles - 1))
    upper = np.log([50.0] + [30.0, 50.0] * (n_poles - 1))

    best = None
    for x0 in starts:
        sol = least_squares(resid, np.clip(np.log(x0), lower, upper), bounds=(lower, upper),
                            xtol=1e-14, ftol=1e-14, gtol=1e-14, max_nfev=400)
        if best is None or sol.cost < best.cost:
            best = sol
    nonlin = np.exp(best.x)
    coef, _ = _solve_linear(e, target, scale, nonlin, n_poles)
    fitted = 1.0 + _basis(e, nonlin, n_poles) @ coef
    residual = float((np.abs(fitted - target) / scale).max())

    poles = []
    for p in range(n_poles):
        sigma = float(coef[1 + p])
        if p == 0:
            w0, gamma = 0.0, float(nonlin[0])
        else:
            w0, gamma = float(nonlin[2 * p - 1]), float(nonlin[2 * p])
        if sigma == 0.0:
            continue
        poles.append((sigma * EV_TO_RAD**2, w0 * EV_TO_RAD, gamma * EV_TO_RAD))
    model = MaterialModel(name=name, kind="poles", epsilon_infinity=1.0 + float(coef[0]),
                          poles=tuple(poles), fit_band_nm=(lo, hi), fit_residual=residual)
    if tolerance is not None and residual > tolerance:
        raise MaterialFitError(
            f"{name}: pole fit residual {residual:.3%} exceeds tolerance {tolerance:.3%}", model)
    return model


@functools.lru_cache(maxsize=None)
def gold_model(band_nm: tuple[float, float] = (800.0, 1000.0), n_poles: int = 2) -> MaterialModel:
    """Bundled gold table fitted over ``band_nm`` (cached)."""
    wl, eps = gold_table()
    return fit_metal_poles(list(zip(wl, eps)), band_nm, n_poles=n_poles, name="gold")


def drude_table(wavelengths_nm, eps_inf: float, omega_p: float, gamma: float):
    """Synthetic Drude permittivity table (angular frequencies in rad/s)."""
    w = omega_from_nm(np.asarray(wavelengths_nm, dtype=float))
    eps = eps_inf - omega_p**2 / (w * w + 1j * gamma * w)
    return list(zip(np.asarray(wavelengths_nm, float), eps))


def check_causality(model: MaterialModel) -> bool:
    """All damping rates non-negative and pole strengths non-negative."""
    return all(g >= 0 and s >= 0 for s, _, g in model.poles)


def warn_if_coarse(oxide_nm: float, dx_nm: float):
    if 0 < oxide_nm < dx_nm:
        warnings.warn(
            f"oxide layer ({oxide_nm} nm) thinner than the cell ({dx_nm} nm); "
            "rendered with sub-cell permittivity averaging", stacklevel=3)
