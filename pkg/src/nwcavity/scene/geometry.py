"""Parametric nanowire-on-mirror device description.

All lengths are in nanometres.  The coordinate frame puts the mirror
surface (top of the metal) at ``z = 0`` and the nanowire axis on the z-axis.
The hexagonal cross-section has two of its vertices on the x-axis; ``D`` is
the vertex-to-vertex span, so the hexagon side length is ``D / 2``.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

SQRT3 = math.sqrt(3.0)


class GeometryError(ValueError):
    """Raised when a scene description is physically or geometrically invalid."""


@dataclass(frozen=True)
class SceneSpec:
    """Full parametric description of one nanowire cavity.

    ``height_nm`` is the total wire height including the crown, measured from
    the top of the oxide buffer (or from ``z = 0`` when the mirror is off).
    The dipole sits ``dipole_offset_from_top_nm`` below the highest point of
    the wire and is displaced by ``dipole_lateral_offset_nm`` from the axis
    along its own polarization direction.
    """

    diameter_nm: float = 420.0
    height_nm: float = 1375.0
    crown_height_nm: float = 0.0
    oxide_thickness_nm: float = 12.0
    mirror_enabled: bool = True
    mirror_kind: str = "gold"
    dipole_offset_from_top_nm: float = 30.0
    dipole_lateral_offset_nm: float = 0.0
    dipole_orientation: tuple[float, float, float] = (1.0, 0.0, 0.0)
    nanowire_index: float = 3.44
    oxide_index: float = 1.45
    center_wavelength_nm: float = 900.0
    band_halfwidth_nm: float = 50.0

    def __post_init__(self):
        o = np.asarray(self.dipole_orientation, dtype=float)
        norm = float(np.linalg.norm(o))
        if o.shape != (3,) or norm == 0.0:
            raise GeometryError("dipole_orientation must be a non-zero 3-vector")
        object.__setattr__(self, "dipole_orientation", tuple(float(v) for v in o / norm))
        self.validate()

    # ------------------------------------------------------------------
    def validate(self):
        errors = self.errors()
        if errors:
            raise GeometryError("; ".join(errors))

    def errors(self) -> list[str]:
        errs = []
        if not self.diameter_nm > 0:
            errs.append("diameter_nm must be > 0")
        if not self.crown_height_nm >= 0:
            errs.append("crown_height_nm must be >= 0")
        if not self.height_nm > self.crown_height_nm:
            errs.append("height_nm must exceed crown_height_nm")
        if not self.oxide_thickness_nm >= 0:
            errs.append("oxide_thickness_nm must be >= 0")
        if self.mirror_kind not in ("gold", "pec"):
            errs.append("mirror_kind must be 'gold' or 'pec'")
        if not self.nanowire_index >= 1.0 or not self.oxide_index >= 1.0:
            errs.append("refractive indices must be >= 1")
        if not 0 < self.band_halfwidth_nm < self.center_wavelength_nm:
            errs.append("band_halfwidth_nm must lie in (0, center_wavelength_nm)")
        if errs:
            return errs
        x, y, z = self.dipole_position_nm
        if not self.contains_wire(np.array([x]), np.array([y]), np.array([z]), strict=True)[0]:
            errs.append(f"dipole at ({x:.1f}, {y:.1f}, {z:.1f}) nm lies outside the nanowire")
        return errs

    # ------------------------------------------------------------------
    @property
    def circumradius_nm(self) -> float:
        return 0.5 * self.diameter_nm

    @property
    def wire_base_nm(self) -> float:
        """z of the wire base (top of the oxide when the mirror is present)."""
        return self.oxide_thickness_nm if self.mirror_enabled else 0.0

    @property
    def wire_top_nm(self) -> float:
        return self.wire_base_nm + self.height_nm

    @property
    def effective_oxide_nm(self) -> float:
        return self.oxide_thickness_nm if self.mirror_enabled else 0.0

    @property
    def dipole_position_nm(self) -> tuple[float, float, float]:
        o = self.dipole_orientation
        # lateral displacement along the in-plane projection of the dipole axis
        inplane = math.hypot(o[0], o[1])
        if inplane > 0:
            ux, uy = o[0] / inplane, o[1] / inplane
        else:
            ux, uy = 1.0, 0.0
        d = self.dipole_lateral_offset_nm
        return (d * ux, d * uy, self.wire_top_nm - self.dipole_offset_from_top_nm)

    def half_width_at(self, z: np.ndarray) -> np.ndarray:
        """Hexagon circumradius of the wire cross-section at height ``z`` (0 outside)."""
        z = np.asarray(z, dtype=float)
        r = np.zeros_like(z)
        base, top = self.wire_base_nm, self.wire_top_nm
        prism_top = top - self.crown_height_nm
        body = (z >= base) & (z <= prism_top)
        r[body] = self.circumradius_nm
        if self.crown_height_nm > 0:
            crown = (z > prism_top) & (z <= top)
            r[crown] = self.circumradius_nm * (top - z[crown]) / self.crown_height_nm
        return r

    def contains_wire(self, x, y, z, strict: bool = False) -> np.ndarray:
        """Point-in-nanowire test, vectorized over broadcastable coordinates."""
        x, y, z = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float), np.asarray(z, float))
        r = self.half_width_at(z)
        ax, ay = np.abs(x), np.abs(y)
        if strict:
            inside = (ay < 0.5 * SQRT3 * r) & (SQRT3 * ax + ay < SQRT3 * r)
            inside &= (z > self.wire_base_nm) & (z < self.wire_top_nm)
        else:
            inside = (ay <= 0.5 * SQRT3 * r) & (SQRT3 * ax + ay <= SQRT3 * r) & (r > 0)
        return inside

    def hexagon_area_nm2(self) -> float:
        return 1.5 * SQRT3 * self.circumradius_nm**2

    def wire_volume_nm3(self) -> float:
        prism = self.hexagon_area_nm2() * (self.height_nm - self.crown_height_nm)
        return prism + self.hexagon_area_nm2() * self.crown_height_nm / 3.0

    # ------------------------------------------------------------------
    def replace(self, **changes) -> "SceneSpec":
        return dataclasses.replace(self, **changes)

    def scaled(self, s: float) -> "SceneSpec":
        """Scale diameter, height and crown by ``s`` at fixed aspect ratio."""
        return self.replace(
            diameter_nm=self.diameter_nm * s,
            height_nm=self.height_nm * s,
            crown_height_nm=self.crown_height_nm * s,
        )

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["dipole_orientation"] = list(self.dipole_orientation)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SceneSpec":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise GeometryError(f"unknown scene keys: {sorted(unknown)}")
        d = dict(d)
        if "dipole_orientation" in d:
            d["dipole_orientation"] = tuple(d["dipole_orientation"])
        return cls(**d)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def vacuum_scene(like: SceneSpec | None = None) -> SceneSpec:
    """Air-filled scene with the same dipole placement and band as ``like``.

    The wire is kept as a geometric placeholder (index 1) so that the dipole
    position validation still applies; the mirror is removed.
    """
    like = like or SceneSpec()
    return like.replace(nanowire_index=1.0, mirror_enabled=False, crown_height_nm=0.0,
                        oxide_thickness_nm=0.0)
