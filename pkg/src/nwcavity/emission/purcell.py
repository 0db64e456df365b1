"""Purcell spectra and resonance peak/width extraction."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class BandEdgeError(ValueError):
    """The spectral maximum sits on the first or last sample."""


@dataclass(frozen=True)
class Peak:
    wavelength_nm: float
    value: float
    fwhm_nm: float
    fwhm_is_lower_bound: bool = False


@dataclass(frozen=True)
class PurcellSpectrum:
    wavelengths_nm: np.ndarray
    factor: np.ndarray
    reference: dict = field(default_factory=dict)
    converged: bool = True
    peak: Peak | None = None

    def annotate(self) -> "PurcellSpectrum":
        """Copy with the peak filled in (left empty if the peak is at a band edge)."""
        try:
            pk = find_peak_fwhm(self.wavelengths_nm, self.factor)
        except BandEdgeError:
            pk = None
        return PurcellSpectrum(self.wavelengths_nm, self.factor, self.reference, self.converged, pk)


_MATCH_KEYS = ("tau", "t0", "omega_c", "orientation")


def purcell_spectrum(cavity_run, reference_run) -> PurcellSpectrum:
    """Ratio of dipole power spectra of a structure run and its reference run.

    Both runs must share the band, the time step, the cell size and the
    pulse.  An unconverged reference is refused; an unconverged structure
    run still yields a spectrum, marked ``converged=False``.
    """
    wl_c = np.asarray(cavity_run.wavelengths_nm)
    wl_r = np.asarray(reference_run.wavelengths_nm)
    if wl_c.shape != wl_r.shape or not np.allclose(wl_c, wl_r, rtol=0, atol=1e-9):
        raise ValueError("band mismatch between structure and reference runs")
    if cavity_run.dt != reference_run.dt:
        raise ValueError("time step differs between structure and reference runs")
    mc, mr = cavity_run.metadata, reference_run.metadata
    if "domain" in mc and "domain" in mr and mc["domain"]["dx_nm"] != mr["domain"]["dx_nm"]:
        raise ValueError("cell size differs between structure and reference runs")
    sc, sr = mc.get("source", {}), mr.get("source", {})
    for k in _MATCH_KEYS:
        if k in sc and k in sr and not np.allclose(sc[k], sr[k], rtol=1e-12, atol=0):
            raise ValueError(f"source {k} differs between structure and reference runs")
    if not reference_run.converged:
        raise ValueError("reference run did not converge")
    # normalize by the drive so that the source amplitude cancels exactly
    pc = cavity_run.dipole_power / np.abs(cavity_run.source_spectrum) ** 2
    pr = reference_run.dipole_power / np.abs(reference_run.source_spectrum) ** 2
    ref = {"index": mr.get("reference_index", 1.0), "steps": reference_run.steps}
    return PurcellSpectrum(wl_c.copy(), pc / pr, ref, bool(cavity_run.converged)).annotate()


def _vertex(x, y):
    """Vertex of the parabola through three points."""
    (x0, x1, x2), (y0, y1, y2) = x, y
    d0, d2 = x0 - x1, x2 - x1
    denom = d0 * d2 * (d0 - d2)
    a = (d2 * (y0 - y1) - d0 * (y2 - y1)) / denom
    b = (d0 * d0 * (y2 - y1) - d2 * d2 * (y0 - y1)) / denom
    if a >= 0:
        return x1, y1
    s = -b / (2 * a)
    return x1 + s, y1 + b * s + a * s * s


def find_peak_fwhm(wavelengths_nm, values) -> Peak:
    """Peak by a three-point parabola; width from linear half-maximum crossings.

    Raises :class:`BandEdgeError` when the largest sample is at either end.
    When the spectrum does not drop to half maximum inside the band the width
    is measured to the band edge and marked as a lower bound.
    """
    x = np.asarray(wavelengths_nm, dtype=float)
    y = np.asarray(values, dtype=float)
    if x.ndim != 1 or x.shape != y.shape or len(x) < 3:
        raise ValueError("need matching 1-D arrays with at least three samples")
    order = np.argsort(x)
    x, y = x[order], y[order]
    i = int(np.argmax(y))
    if i == 0 or i == len(x) - 1:
        raise BandEdgeError("spectral maximum at the band edge; widen the band")
    xp, yp = _vertex(x[i - 1:i + 2], y[i - 1:i + 2])
    half = 0.5 * yp
    bound = False
    j = i
    while j > 0 and y[j] >= half:
        j -= 1
    if y[j] >= half:
        left, bound = x[0], True
    else:
        left = x[j] + (half - y[j]) * (x[j + 1] - x[j]) / (y[j + 1] - y[j])
    j = i
    while j < len(x) - 1 and y[j] >= half:
        j += 1
    if y[j] >= half:
        right, bound = x[-1], True
    else:
        right = x[j - 1] + (y[j - 1] - half) * (x[j] - x[j - 1]) / (y[j - 1] - y[j])
    return Peak(float(xp), float(yp), float(right - left), bound)


def write_purcell(path, spectrum: PurcellSpectrum):
    header = "wavelength_nm\tpurcell_factor"
    if spectrum.peak is not None:
        p = spectrum.peak
        header = (f"peak_wavelength_nm={p.wavelength_nm:.4f} peak_purcell={p.value:.6g} "
                  f"fwhm_nm={p.fwhm_nm:.4f} converged={int(spectrum.converged)}\n" + header)
    np.savetxt(path, np.column_stack([spectrum.wavelengths_nm, spectrum.factor]),
               fmt="%.10g", delimiter="\t", header=header)


def read_purcell(path) -> PurcellSpectrum:
    data = np.loadtxt(path, ndmin=2)
    converged = True
    with open(path) as fh:
        first = fh.readline()
    if "converged=0" in first:
        converged = False
    return PurcellSpectrum(data[:, 0], data[:, 1], {}, converged).annotate()
