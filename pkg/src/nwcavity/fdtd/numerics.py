"""Numerical settings for a time-domain run."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass

from ..constants import C0, NM


def stable_dt(resolution_nm: float, courant_fraction: float = 0.99) -> float:
    """Largest stable time step of the 3D Yee scheme times ``courant_fraction``.

    >>> round(stable_dt(10.0, 0.99) * 1e17, 3)
    1.906
    """
    if not 0.0 < courant_fraction <= 1.0:
        raise ValueError("courant_fraction must lie in (0, 1]")
    return courant_fraction * resolution_nm * NM / (C0 * math.sqrt(3.0))


@dataclass(frozen=True)
class Numerics:
    resolution_nm: float = 10.0
    courant_fraction: float = 0.99
    absorber_layers: int = 12
    decay_threshold: float = 1e-5
    max_steps: int = 1_000_000
    band_nm: tuple[float, float] = (850.0, 950.0)
    sample_nm: float = 0.5
    padding_nm: float = 500.0
    monitor_box_side_nm: float = 4000.0
    monitor_box_height_nm: float | None = None
    monitor_wavelengths_nm: tuple[float, ...] | None = None
    farfield: bool = True
    symmetry: bool = True
    supersample: int = 2
    pml_order: float = 3.0
    pml_kappa_max: float = 2.0
    pml_alpha_max: float = 0.1
    pml_sigma_factor: float = 1.0
    mirror_thickness_nm: float = 100.0
    gold_band_nm: tuple[float, float] = (800.0, 1000.0)
    gold_poles: int = 2
    energy_stride: int = 20
    dft_stride: int = 0  # 0 selects automatically
    source_bandwidth_factor: float = 1.0

    def __post_init__(self):
        if self.resolution_nm <= 0:
            raise ValueError("resolution_nm must be positive")
        stable_dt(self.resolution_nm, self.courant_fraction)
        lo, hi = self.band_nm
        if not 0 < lo < hi:
            raise ValueError("band_nm must be an ascending positive interval")
        if self.sample_nm <= 0:
            raise ValueError("sample_nm must be positive")
        object.__setattr__(self, "band_nm", (float(lo), float(hi)))
        if self.monitor_wavelengths_nm is not None:
            object.__setattr__(self, "monitor_wavelengths_nm",
                               tuple(float(w) for w in self.monitor_wavelengths_nm))

    @property
    def dt(self) -> float:
        return stable_dt(self.resolution_nm, self.courant_fraction)

    @property
    def wavelengths_nm(self):
        import numpy as np
        lo, hi = self.band_nm
        n = int(round((hi - lo) / self.sample_nm)) + 1
        return np.linspace(lo, hi, n)

    @property
    def box_height_nm(self) -> float:
        return self.monitor_box_side_nm if self.monitor_box_height_nm is None else self.monitor_box_height_nm

    def replace(self, **kw) -> "Numerics":
        return dataclasses.replace(self, **kw)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Numerics":
        d = dict(d)
        for k in ("band_nm", "gold_band_nm", "monitor_wavelengths_nm"):
            if d.get(k) is not None:
                d[k] = tuple(d[k])
        return cls(**d)

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]
