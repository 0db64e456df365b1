"""Families of cavity runs over one geometric parameter.

Each cell is one structure run plus its reference run, reduced to a Purcell
spectrum.  Cells are independent: they run inline or on a bounded process
pool, are written to ``store_dir`` as they finish, and a failing cell is
recorded without stopping the others.  Rerunning a sweep with the same
``store_dir`` reuses every finished cell.
"""

from __future__ import annotations

import json
import logging
import os
import re
import tempfile
from concurrent.futures import ProcessPoolExecutor, as_completed
from pathlib import Path

import numpy as np

from ..emission.purcell import PurcellSpectrum, purcell_spectrum
from ..fdtd.numerics import Numerics
from ..fdtd.runner import run_scene, scene_reference
from ..scene.geometry import SceneSpec
from .analysis import ScalingFit, scaling_from_map
from .maps import AXES, PurcellMap

log = logging.getLogger(__name__)


def apply_axis(base: SceneSpec, axis: str, value: float) -> SceneSpec:
    """``base`` with one swept parameter set to ``value``."""
    if axis == "height_nm":
        return base.replace(height_nm=float(value))
    if axis == "scale_factor":
        return base.scaled(float(value))
    if axis == "crown_height_nm":
        return base.replace(crown_height_nm=float(value))
    if axis == "lateral_offset_nm":
        return base.replace(dipole_lateral_offset_nm=float(value))
    raise ValueError(f"unknown sweep axis {axis!r}; expected one of {AXES}")


def fdtd_cell(spec: SceneSpec, numerics: Numerics, medium: str = "host",
              threads: int | None = None) -> PurcellSpectrum:
    """Purcell spectrum of one scene (structure run over reference run)."""
    run = run_scene(spec, numerics.replace(farfield=False), monitors=[], threads=threads)
    ref = scene_reference(spec, numerics.replace(farfield=False), medium)
    return purcell_spectrum(run, ref)


def _cell_name(axis: str, value: float) -> str:
    return re.sub(r"[^A-Za-z0-9_.=-]", "_", f"{axis}={value:.6g}") + ".npz"


def _save_cell(path: Path, key: dict, spectrum: PurcellSpectrum | None, error: str | None):
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    os.close(fd)
    arrays = {"key": np.array(json.dumps(key, sort_keys=True))}
    if spectrum is not None:
        arrays.update(wavelengths_nm=spectrum.wavelengths_nm, factor=spectrum.factor,
                      converged=np.array(spectrum.converged))
    if error is not None:
        arrays["error"] = np.array(error)
    with open(tmp, "wb") as fh:
        np.savez(fh, **arrays)
    os.replace(tmp, path)


def _load_cell(path: Path, key: dict):
    """(spectrum or None, error or None), or None when absent or stale."""
    if not path.exists():
        return None
    with np.load(path) as z:
        if json.loads(str(z["key"])) != key:
            return None
        if "error" in z:
            return None  # failed cells are retried
        return PurcellSpectrum(z["wavelengths_nm"], z["factor"], {}, bool(z["converged"])), None


def _work(cell_fn, spec_dict, num_dict, kwargs):
    spec = SceneSpec.from_dict(spec_dict)
    num = Numerics.from_dict(num_dict)
    return cell_fn(spec, num, **kwargs)


def sweep(base: SceneSpec, axis: str, values, numerics: Numerics, workers: int = 1,
          store_dir=None, cell_fn=fdtd_cell, cell_kwargs=None, progress=None) -> PurcellMap:
    """Run one cell per value of ``axis`` and assemble the map.

    Rows follow the order of ``values``.  ``cell_fn(spec, numerics, **cell_kwargs)``
    must return a :class:`PurcellSpectrum`; with ``workers > 1`` it has to be
    importable by the worker processes.
    """
    values = [float(v) for v in values]
    if not values:
        raise ValueError("nothing to sweep")
    if len(set(values)) != len(values):
        raise ValueError("duplicate sweep values")
    cell_kwargs = dict(cell_kwargs or {})
    store = Path(store_dir) if store_dir is not None else None
    if store is not None:
        store.mkdir(parents=True, exist_ok=True)
    specs = [apply_axis(base, axis, v) for v in values]
    results: dict[int, tuple] = {}
    todo = []
    for i, (v, spec) in enumerate(zip(values, specs)):
        key = {"scene": spec.digest(), "numerics": numerics.digest(), "kwargs": repr(sorted(cell_kwargs.items()))}
        if store is not None:
            hit = _load_cell(store / _cell_name(axis, v), key)
            if hit is not None:
                results[i] = hit
                continue
        todo.append((i, key))

    def finish(i, key, spectrum, error):
        results[i] = (spectrum, error)
        if store is not None:
            _save_cell(store / _cell_name(axis, values[i]), key, spectrum, error)
        if progress is not None:
            progress(values[i], spectrum, error)

    if workers <= 1:
        for i, key in todo:
            try:
                finish(i, key, cell_fn(specs[i], numerics, **cell_kwargs), None)
            except Exception as exc:  # one bad cell never stops the sweep
                log.warning("cell %s=%g failed: %s", axis, values[i], exc)
                finish(i, key, None, f"{type(exc).__name__}: {exc}")
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futs = {pool.submit(_work, cell_fn, specs[i].to_dict(), numerics.to_dict(), cell_kwargs): (i, key)
                    for i, key in todo}
            for fut in as_completed(futs):
                i, key = futs[fut]
                try:
                    finish(i, key, fut.result(), None)
                except Exception as exc:
                    log.warning("cell %s=%g failed: %s", axis, values[i], exc)
                    finish(i, key, None, f"{type(exc).__name__}: {exc}")
    return _assemble(axis, values, results)


def _assemble(axis, values, results) -> PurcellMap:
    good = [s for s, _ in results.values() if s is not None]
    if not good:
        errs = {i: e for i, (_, e) in results.items()}
        raise RuntimeError(f"every cell of the sweep failed: {errs}")
    wl = np.asarray(good[0].wavelengths_nm)
    n = len(values)
    factor = np.full((n, len(wl)), np.nan)
    conv = np.zeros(n, bool)
    failed = np.zeros(n, bool)
    errors = {}
    for i in range(n):
        spectrum, error = results[i]
        if spectrum is None or len(spectrum.wavelengths_nm) != len(wl):
            failed[i] = True
            errors[i] = error or "band mismatch"
            continue
        factor[i] = spectrum.factor
        conv[i] = spectrum.converged
    return PurcellMap(axis, np.array(values), wl, factor, conv, failed, errors)


def sweep_height(base: SceneSpec, heights, numerics: Numerics, **kw) -> PurcellMap:
    """Height sweep; the dipole stays at its fixed depth below the top facet."""
    h = np.asarray(heights, dtype=float)
    if h.size == 0 or np.any(np.diff(h) <= 0):
        raise ValueError("heights must be non-empty and ascending")
    return sweep(base, "height_nm", h, numerics, **kw)


def tolerance_sweep(base: SceneSpec, axis: str, values, numerics: Numerics, **kw) -> PurcellMap:
    """Purcell spectra versus a fabrication perturbation (``crown_height`` or
    ``lateral_offset``)."""
    names = {"crown_height": "crown_height_nm", "lateral_offset": "lateral_offset_nm"}
    axis = names.get(axis, axis)
    if axis not in ("crown_height_nm", "lateral_offset_nm"):
        raise ValueError("tolerance axis must be crown_height or lateral_offset")
    return sweep(base, axis, values, numerics, **kw)


def sweep_scale(base: SceneSpec, factors, numerics: Numerics, **kw) -> tuple[PurcellMap, ScalingFit]:
    """Scale diameter and height together (index held fixed) and fit the
    peak wavelength against the scale factor."""
    pmap = sweep(base, "scale_factor", factors, numerics, **kw)
    return pmap, scaling_from_map(pmap)
