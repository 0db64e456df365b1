"""Purcell maps: one spectrum per swept parameter value."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

AXES = ("height_nm", "scale_factor", "crown_height_nm", "lateral_offset_nm")


@dataclass
class PurcellMap:
    axis: str
    values: np.ndarray  # (n,)
    wavelengths_nm: np.ndarray  # (m,)
    factor: np.ndarray  # (n, m), NaN rows for failed cells
    converged: np.ndarray  # (n,) bool
    failed: np.ndarray = None  # (n,) bool
    errors: dict = field(default_factory=dict)  # row index -> message

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.wavelengths_nm = np.asarray(self.wavelengths_nm, dtype=float)
        self.factor = np.asarray(self.factor, dtype=float)
        self.converged = np.asarray(self.converged, dtype=bool)
        if self.failed is None:
            self.failed = ~np.all(np.isfinite(self.factor), axis=1)
        self.failed = np.asarray(self.failed, dtype=bool)
        n, m = len(self.values), len(self.wavelengths_nm)
        if self.factor.shape != (n, m) or self.converged.shape != (n,) or self.failed.shape != (n,):
            raise ValueError("map arrays are not rectangular")

    def row(self, value: float) -> np.ndarray:
        i = int(np.argmin(np.abs(self.values - value)))
        return self.factor[i]

    def sorted(self) -> "PurcellMap":
        """Rows in ascending parameter order."""
        o = np.argsort(self.values, kind="stable")
        errs = {int(np.nonzero(o == i)[0][0]): e for i, e in self.errors.items()}
        return PurcellMap(self.axis, self.values[o], self.wavelengths_nm, self.factor[o],
                          self.converged[o], self.failed[o], errs)

    def window(self, lo_nm: float, hi_nm: float) -> "PurcellMap":
        keep = (self.wavelengths_nm >= lo_nm) & (self.wavelengths_nm <= hi_nm)
        return PurcellMap(self.axis, self.values, self.wavelengths_nm[keep], self.factor[:, keep],
                          self.converged, self.failed, dict(self.errors))

    def scaled(self, alpha: float) -> "PurcellMap":
        return PurcellMap(self.axis, self.values, self.wavelengths_nm, self.factor * alpha,
                          self.converged, self.failed, dict(self.errors))


def write_map(path, pmap: PurcellMap):
    """Gridded text: parameter, wavelength, Purcell factor, converged flag.

    Rows of one parameter value are contiguous and separated by a blank line,
    which gnuplot's ``splot ... with pm3d`` reads as a grid.
    """
    with open(path, "w") as fh:
        fh.write(f"# axis={pmap.axis}\n# {pmap.axis}\twavelength_nm\tpurcell\tconverged\n")
        for i, v in enumerate(pmap.values):
            flag = -1 if pmap.failed[i] else int(pmap.converged[i])
            for wl, f in zip(pmap.wavelengths_nm, pmap.factor[i]):
                fh.write(f"{v:.6g}\t{wl:.4f}\t{f:.8g}\t{flag}\n")
            fh.write("\n")


def read_map(path) -> PurcellMap:
    axis = "param"
    with open(path) as fh:
        first = fh.readline()
    if first.startswith("# axis="):
        axis = first.strip().split("=", 1)[1]
    data = np.loadtxt(path, ndmin=2)
    values = list(dict.fromkeys(data[:, 0].tolist()))
    wls = np.unique(data[:, 1])
    n, m = len(values), len(wls)
    factor = data[:, 2].reshape(n, m)
    flag = data[::m, 3]
    return PurcellMap(axis, np.array(values), wls, factor, flag == 1, flag == -1)
