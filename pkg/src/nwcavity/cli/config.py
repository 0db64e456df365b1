"""Versioned job configuration (YAML or JSON), validated before any compute."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from ..fdtd.numerics import Numerics
from ..scene.geometry import SceneSpec

SCHEMA_VERSION = 1

#: keys people reach for that the solver deliberately does not offer
_UNSUPPORTED = {
    "mesh_order": "mesh_order is not supported: the solver uses one uniform cubic grid "
                  "(set numerics.resolution_nm instead; see README, 'Deviations')",
    "mesh_refinement": "mesh_refinement is not supported: the grid is uniform "
                       "(set numerics.resolution_nm instead)",
}


class _Block(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_assignment=True)

    @model_validator(mode="before")
    @classmethod
    def _explain_unsupported(cls, data):
        if isinstance(data, dict):
            for key, note in _UNSUPPORTED.items():
                if key in data:
                    raise ValueError(note)
        return data


class SceneBlock(_Block):
    diameter_nm: float = Field(420.0, gt=0)
    height_nm: float = Field(1375.0, gt=0)
    crown_height_nm: float = Field(0.0, ge=0)
    oxide_thickness_nm: float = Field(12.0, ge=0)
    mirror_enabled: bool = True
    mirror_kind: Literal["gold", "pec"] = "gold"
    dipole_offset_from_top_nm: float = Field(30.0, ge=0)
    dipole_lateral_offset_nm: float = 0.0
    dipole_orientation: tuple[float, float, float] = (1.0, 0.0, 0.0)
    nanowire_index: float = Field(3.44, ge=1)
    oxide_index: float = Field(1.45, ge=1)
    center_wavelength_nm: float = Field(900.0, gt=0)
    band_halfwidth_nm: float = Field(50.0, gt=0)

    @model_validator(mode="after")
    def _geometry(self):
        d = self.model_dump()
        try:
            SceneSpec.from_dict(d)
        except ValueError as exc:
            raise ValueError(str(exc)) from None
        return self

    def to_spec(self) -> SceneSpec:
        return SceneSpec.from_dict(self.model_dump())


class NumericsBlock(_Block):
    resolution_nm: float = Field(10.0, gt=0)
    courant_fraction: float = Field(0.99, gt=0, le=1)
    absorber_layers: int = Field(12, ge=4)
    decay_threshold: float = Field(1e-5, gt=0)
    max_steps: int = Field(1_000_000, gt=0)
    band_nm: Optional[tuple[float, float]] = None  # default: scene centre +- half-width
    sample_nm: float = Field(0.5, gt=0)
    padding_nm: float = Field(500.0, ge=0)
    monitor_box_side_nm: float = Field(4000.0, gt=0)
    monitor_box_height_nm: Optional[float] = Field(None, gt=0)
    farfield: bool = True
    symmetry: bool = True
    supersample: int = Field(2, ge=1)
    reference_medium: Literal["host", "vacuum"] = "host"
    checkpoint_every: int = Field(20000, ge=0)  # steps; 0 disables

    @field_validator("band_nm")
    @classmethod
    def _band(cls, v):
        if v is not None and not 0 < v[0] < v[1]:
            raise ValueError("band_nm must be an ascending positive interval")
        return v

    def to_numerics(self, scene: SceneBlock) -> Numerics:
        band = self.band_nm or (scene.center_wavelength_nm - scene.band_halfwidth_nm,
                                scene.center_wavelength_nm + scene.band_halfwidth_nm)
        return Numerics(resolution_nm=self.resolution_nm, courant_fraction=self.courant_fraction,
                        absorber_layers=self.absorber_layers, decay_threshold=self.decay_threshold,
                        max_steps=self.max_steps, band_nm=tuple(band), sample_nm=self.sample_nm,
                        padding_nm=self.padding_nm, monitor_box_side_nm=self.monitor_box_side_nm,
                        monitor_box_height_nm=self.monitor_box_height_nm, farfield=self.farfield,
                        symmetry=self.symmetry, supersample=self.supersample)


class AnalysisBlock(_Block):
    na: list[float] = Field(default_factory=lambda: [0.8])
    overlap_mode: Literal["field", "intensity"] = "field"
    overlap_theta0_max_deg: float = Field(60.0, gt=0, le=90)
    phase_center: Literal["search", "origin"] = "search"
    dtheta_deg: float = Field(0.5, gt=0, le=1)
    dphi_deg: float = Field(2.0, gt=0, le=10)
    farfield_wavelength_nm: Optional[float] = Field(None, gt=0)  # default: Purcell peak
    field_slice: bool = True
    field_slice_step_nm: float = Field(2.0, gt=0)

    @field_validator("na")
    @classmethod
    def _na(cls, v):
        if not v or any(not 0 < x <= 1 for x in v):
            raise ValueError("every NA must lie in (0, 1]")
        return v


class SweepBlock(_Block):
    axis: Literal["height_nm", "scale_factor", "crown_height_nm", "lateral_offset_nm"]
    values: Optional[list[float]] = None
    start: Optional[float] = None
    stop: Optional[float] = None
    step: Optional[float] = Field(None, gt=0)
    workers: int = Field(1, ge=1)
    window_nm: Optional[tuple[float, float]] = None
    threshold: float = Field(10.0, ge=0)
    min_separation: float = Field(50.0, ge=0)

    @model_validator(mode="after")
    def _one_form(self):
        rng = (self.start, self.stop, self.step)
        if self.values is None and None in rng:
            raise ValueError("give either values or start/stop/step")
        if self.values is not None and any(v is not None for v in rng):
            raise ValueError("give either values or start/stop/step, not both")
        if self.values is None and self.stop < self.start:
            raise ValueError("stop must not be below start")
        return self

    def resolved_values(self) -> list[float]:
        if self.values is not None:
            return [float(v) for v in self.values]
        n = int(round((self.stop - self.start) / self.step)) + 1
        return [round(self.start + i * self.step, 9) for i in range(n)]


class ModesBlock(_Block):
    core_index: float = Field(3.44, gt=1)
    clad_index: float = Field(1.0, ge=1)
    wavelength_nm: float = Field(900.0, gt=0)
    diameter_start_nm: float = Field(100.0, gt=0)
    diameter_stop_nm: float = Field(1000.0, gt=0)
    diameter_step_nm: float = Field(25.0, gt=0)
    hexagon: bool = False  # diameters are hexagon vertex-to-vertex spans
    operating_diameter_nm: Optional[float] = Field(None, gt=0)

    @model_validator(mode="after")
    def _indices(self):
        if self.core_index <= self.clad_index:
            raise ValueError("core_index must exceed clad_index")
        if self.diameter_stop_nm < self.diameter_start_nm:
            raise ValueError("diameter_stop_nm must not be below diameter_start_nm")
        return self


class MaterialBlock(_Block):
    table: Optional[str] = None  # two-column wavelength_nm, eps_re, eps_im; default built-in gold
    band_nm: tuple[float, float] = (800.0, 1000.0)
    poles: int = Field(2, ge=1, le=4)
    tolerance: float = Field(0.02, gt=0)


class JobConfig(_Block):
    schema_version: Literal[1]
    scene: SceneBlock = Field(default_factory=SceneBlock)
    numerics: NumericsBlock = Field(default_factory=NumericsBlock)
    analysis: AnalysisBlock = Field(default_factory=AnalysisBlock)
    sweep: Optional[SweepBlock] = None
    modes: Optional[ModesBlock] = None
    material: Optional[MaterialBlock] = None
    output_dir: str = "out"
    seed: int = 0  # reserved; the physics is deterministic

    def scene_spec(self) -> SceneSpec:
        return self.scene.to_spec()

    def numerics_obj(self) -> Numerics:
        return self.numerics.to_numerics(self.scene)

    def canonical(self) -> dict:
        return self.model_dump(mode="json")

    def digest(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def provenance(model: BaseModel, prefix: str = "") -> dict:
    """Dotted path -> ``"config"`` or ``"default"`` for every leaf field."""
    out = {}
    for name in type(model).model_fields:
        path = f"{prefix}{name}"
        value = getattr(model, name)
        if isinstance(value, BaseModel):
            sub = provenance(value, path + ".")
            if name not in model.model_fields_set:
                sub = {k: "default" for k in sub}
            out.update(sub)
        else:
            out[path] = "config" if name in model.model_fields_set else "default"
    return out


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        super().__init__("invalid configuration:\n  " + "\n  ".join(errors))
        self.errors = errors


def _format(err) -> str:
    loc = ".".join(str(p) for p in err["loc"]) or "<root>"
    msg = err["msg"]
    if msg.startswith("Value error, "):
        msg = msg[len("Value error, "):]
    return f"{loc}: {msg}"


def load_raw(path) -> dict:
    text = Path(path).read_text()
    data = yaml.safe_load(text) if text.strip() else {}
    if not isinstance(data, dict):
        raise ConfigError(["<root>: configuration must be a mapping"])
    return data


def parse(data: dict) -> JobConfig:
    """Validate a mapping; every problem is reported in one :class:`ConfigError`."""
    data = {k: v for k, v in data.items() if k != "provenance"}
    try:
        return JobConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError([_format(e) for e in exc.errors()]) from None


def validate(path) -> JobConfig:
    return parse(load_raw(path))


def dump(cfg: JobConfig, path):
    """Write the fully resolved configuration with per-field provenance."""
    doc = cfg.canonical()
    doc["provenance"] = provenance(cfg)
    Path(path).write_text(yaml.safe_dump(doc, sort_keys=True))
