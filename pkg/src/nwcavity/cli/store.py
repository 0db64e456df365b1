"""Job directories: lock, manifest, atomic writes, phasor files, plot scripts."""

from __future__ import annotations

import hashlib
import json
import os
import shutil
import tempfile
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .. import __version__
from ..fdtd.monitors import BoxData, Face, PlaneData

MANIFEST = "manifest.json"
LOCK = ".lock"
PHASOR_FORMAT = "nwcavity-phasors"
PHASOR_VERSION = 1


class JobLockedError(RuntimeError):
    pass


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def atomic_write(path, data: bytes | str):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    with os.fdopen(fd, "wb") as fh:
        fh.write(data.encode() if isinstance(data, str) else data)
    os.replace(tmp, path)


@dataclass
class RunManifest:
    command: str
    config_hash: str
    version: str = __version__
    status: str = "incomplete"
    files: dict = field(default_factory=dict)  # relative path -> sha256
    steps: dict = field(default_factory=dict)
    converged: dict = field(default_factory=dict)
    wall_clock_s: float = 0.0
    notes: list = field(default_factory=list)

    @property
    def all_converged(self) -> bool:
        return all(self.converged.values())

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def read(cls, path) -> "RunManifest":
        return cls(**json.loads(Path(path).read_text()))


class JobDir:
    """One job directory, held under a lock for the lifetime of the job.

    The manifest is written first (status ``incomplete``) and rewritten on
    every output, so an interrupted job is recognisable; :meth:`close` marks
    it complete.
    """

    def __init__(self, root, command: str, config_hash: str):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = self.root / LOCK
        try:
            fd = os.open(self._lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise JobLockedError(f"{self.root} is in use by another job (remove {self._lock} "
                                 "if that job is gone)") from None
        with os.fdopen(fd, "w") as fh:
            fh.write(str(os.getpid()))
        self._t0 = time.monotonic()
        self.manifest = RunManifest(command, config_hash)
        self._flush()

    def _flush(self):
        self.manifest.wall_clock_s = round(time.monotonic() - self._t0, 3)
        atomic_write(self.root / MANIFEST, self.manifest.to_json())

    def path(self, name: str) -> Path:
        return self.root / name

    def record(self, name: str):
        self.manifest.files[name] = sha256(self.root / name)
        self._flush()

    def write_text(self, name: str, text: str):
        atomic_write(self.root / name, text)
        self.record(name)

    def write_with(self, name: str, writer, *args):
        """Write through ``writer(path, *args)`` into a temporary file, then rename."""
        final = self.root / name
        fd, tmp = tempfile.mkstemp(dir=self.root, prefix=f".{name}.", suffix=".tmp")
        os.close(fd)
        writer(tmp, *args)
        os.replace(tmp, final)
        self.record(name)

    def converged(self, key: str, flag: bool, steps: int | None = None):
        self.manifest.converged[key] = bool(flag)
        if steps is not None:
            self.manifest.steps[key] = int(steps)
        self._flush()

    def note(self, text: str):
        self.manifest.notes.append(text)
        self._flush()

    def close(self, ok: bool = True):
        self.manifest.status = "complete" if ok else "incomplete"
        self._flush()
        self._lock.unlink(missing_ok=True)

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        self.close(ok=exc_type is None)
        return False


def check_disk(root, needed_bytes: int):
    free = shutil.disk_usage(Path(root)).free
    if free < needed_bytes:
        raise OSError(f"need {needed_bytes / 1e6:.1f} MB free in {root}, have {free / 1e6:.1f} MB")


# ----------------------------------------------------------------------
# phasor files (binary, versioned header)

def _header(kind: str, extra: dict) -> np.ndarray:
    return np.array(json.dumps({"format": PHASOR_FORMAT, "version": PHASOR_VERSION,
                                "kind": kind, **extra}, sort_keys=True))


def _check_header(z, kind: str) -> dict:
    if "header" not in z:
        raise ValueError("not a phasor file")
    h = json.loads(str(z["header"]))
    if h.get("format") != PHASOR_FORMAT:
        raise ValueError("not a phasor file")
    if h.get("version") != PHASOR_VERSION:
        raise ValueError(f"unsupported phasor file version {h.get('version')}")
    if h.get("kind") != kind:
        raise ValueError(f"phasor file holds a {h.get('kind')}, expected a {kind}")
    return h


_FACE_SCALARS = ("name", "axis", "side", "plane_nm", "k_plane", "a0", "b0", "na", "nb", "stride", "in_air")
_FACE_ARRAYS = ("u_nm", "v_nm", "du_nm", "dv_nm", "e", "h")


def write_box(path, box: BoxData):
    faces = [{k: (v.item() if isinstance(v, np.generic) else v)
              for k, v in ((k, getattr(f, k)) for k in _FACE_SCALARS)} for f in box.faces]
    extra = {"name": box.name, "symmetry": box.symmetry, "lo_nm": list(box.lo_nm),
             "hi_nm": list(box.hi_nm), "open_faces": list(box.open_faces), "faces": faces,
             "units": {"length": "nm", "E": "V s/m (DFT of E)", "H": "A s/m (DFT of H)",
                       "wavelength": "nm"}}
    arrays = {"header": _header("box", extra), "wavelengths_nm": np.asarray(box.wavelengths_nm)}
    for i, f in enumerate(box.faces):
        for k in _FACE_ARRAYS:
            arrays[f"f{i}_{k}"] = getattr(f, k)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def read_box(path) -> BoxData:
    with np.load(path) as z:
        h = _check_header(z, "box")
        faces = []
        for i, meta in enumerate(h["faces"]):
            arrs = {k: z[f"f{i}_{k}"] for k in _FACE_ARRAYS}
            faces.append(Face(**meta, **arrs))
        return BoxData(h["name"], z["wavelengths_nm"], faces, h["symmetry"], tuple(h["lo_nm"]),
                       tuple(h["hi_nm"]), tuple(h["open_faces"]))


def write_plane(path, plane: PlaneData):
    extra = {"name": plane.name, "axis": int(plane.axis), "position_nm": float(plane.position_nm),
             "units": {"length": "nm", "wavelength": "nm"}}
    with open(path, "wb") as fh:
        np.savez(fh, header=_header("plane", extra), wavelengths_nm=plane.wavelengths_nm,
                 u_nm=plane.u_nm, v_nm=plane.v_nm, e=plane.e)


def read_plane(path) -> PlaneData:
    with np.load(path) as z:
        h = _check_header(z, "plane")
        return PlaneData(h["name"], h["axis"], h["position_nm"], z["wavelengths_nm"], z["u_nm"],
                         z["v_nm"], z["e"])


def write_field_slice(path, plane: PlaneData, wavelength_nm: float):
    """Text slice: in-plane coordinates (nm) and |E| at the nearest stored wavelength."""
    q = int(np.argmin(np.abs(plane.wavelengths_nm - wavelength_nm)))
    mag = plane.magnitude(plane.wavelengths_nm[q])
    names = [c for c in "xyz" if "xyz".index(c) != plane.axis]
    U, V = np.meshgrid(plane.u_nm, plane.v_nm, indexing="ij")
    with open(path, "w") as fh:
        fh.write(f"# wavelength_nm={plane.wavelengths_nm[q]:.4f} "
                 f"{'xyz'[plane.axis]}_nm={plane.position_nm:g}\n")
        fh.write(f"# {names[0]}_nm\t{names[1]}_nm\tabs_E_V_per_m\n")
        for i in range(U.shape[0]):
            for j in range(U.shape[1]):
                fh.write(f"{U[i, j]:.3f}\t{V[i, j]:.3f}\t{mag[i, j]:.8g}\n")
            fh.write("\n")


def read_field_slice(path):
    data = np.loadtxt(path, ndmin=2)
    u = np.unique(data[:, 0])
    v = np.unique(data[:, 1])
    return u, v, data[:, 2].reshape(len(u), len(v))


# ----------------------------------------------------------------------
# gnuplot scripts

GNUPLOT = {
    "purcell": """set xlabel "wavelength (nm)"
set ylabel "Purcell factor"
set grid
plot "{data}" using 1:2 with lines lw 2 title "F_p"
""",
    "farfield": """set title "far-field power density (W/sr)"
set size ratio -1
set pm3d map
set xlabel "theta cos(phi) (deg)"
set ylabel "theta sin(phi) (deg)"
splot "{data}" using ($1*cos($2*pi/180)):($1*sin($2*pi/180)):3 with pm3d notitle
""",
    "map": """set xlabel "{axis}"
set ylabel "wavelength (nm)"
set cblabel "Purcell factor"
set pm3d map
splot "{data}" using 1:2:3 with pm3d notitle
""",
    "dispersion": """set xlabel "core diameter (nm)"
set ylabel "effective index"
set key outside
plot for [m in "{labels}"] "{data}" using (strcol(1) eq m ? $2 : NaN):3 with lines title m
""",
    "field": """set xlabel "{u} (nm)"
set ylabel "{v} (nm)"
set cblabel "|E| (V/m)"
set size ratio -1
set pm3d map
splot "{data}" using 1:2:3 with pm3d notitle
""",
}


def gnuplot_script(kind: str, data: str, **kw) -> str:
    return f"# gnuplot script for {data}\n" + GNUPLOT[kind].format(data=data, **kw)
