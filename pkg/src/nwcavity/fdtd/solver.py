"""Leapfrog time stepping, termination, checkpointing and run results."""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import zipfile
from dataclasses import dataclass, field

import numba
import numpy as np

from ..constants import EPS0, MU0, NM, omega_from_nm
from . import kernels
from .cpml import axis_profile
from .monitors import build_monitor, spec_to_dict
from .numerics import Numerics
from .source import DipoleSource, edge_stencil

CHECKPOINT_FORMAT = "nwcavity-checkpoint"
CHECKPOINT_VERSION = 1
NAMES = ("ex", "ey", "ez", "hx", "hy", "hz")


class FieldDivergence(RuntimeError):
    def __init__(self, message, step=None, location=None):
        super().__init__(message)
        self.step = step
        self.location = location


class CheckpointError(RuntimeError):
    pass


def set_threads(n: int | None):
    """Set solver threads; ``None`` restores the maximum. Requests above what
    numba was started with are clamped, with a warning."""
    cap = numba.config.NUMBA_NUM_THREADS
    if not n:
        numba.set_num_threads(cap)
        return
    if int(n) > cap:
        logging.getLogger(__name__).warning("%d threads requested, %d available", n, cap)
    numba.set_num_threads(max(1, min(int(n), cap)))


@dataclass(frozen=True)
class RunResult:
    """Everything a finished run produced.

    ``dipole_power`` is the time-averaged power delivered by the dipole
    current at each wavelength (arbitrary overall scale, identical for every
    run with the same pulse), i.e. ``-1/2 Re[conj(J) . E]`` evaluated from the
    recorded drive and the field at the source edges.
    """

    wavelengths_nm: np.ndarray
    dipole_power: np.ndarray
    source_spectrum: np.ndarray
    dipole_field: np.ndarray
    monitors: dict
    termination: str
    steps: int
    converged: bool
    dt: float
    energy_trace: np.ndarray = field(repr=False)
    metadata: dict = field(default_factory=dict)

    @property
    def under_resolved(self) -> bool:
        return not self.converged

    def box(self, name: str = "box"):
        return self.monitors[name]

    def power_at(self, wavelengths_nm) -> np.ndarray:
        return np.interp(wavelengths_nm, self.wavelengths_nm, self.dipole_power)


def _pad(a: np.ndarray) -> np.ndarray:
    out = np.zeros(tuple(n + 1 for n in a.shape), dtype=a.dtype)
    out[1:, 1:, 1:] = a
    return out


def _sha(*arrays) -> str:
    h = hashlib.sha256()
    for a in arrays:
        h.update(np.ascontiguousarray(a).tobytes())
    return h.hexdigest()[:16]


class Simulation:
    """One exclusively owned time-domain simulation on a :class:`MaterialGrid`.

    Mirror planes are read from the domain: a lower x or y face of kind
    ``"pec"``/``"pmc"`` through the origin is a symmetry plane of the source.
    """

    def __init__(self, grid, numerics: Numerics, source: DipoleSource, monitors=()):
        self.grid = grid
        self.numerics = numerics
        self.source = source
        dom = grid.domain
        self.domain = dom
        self.dx_m = dom.dx_nm * NM
        self.dt = numerics.dt
        n = dom.shape
        shape = tuple(v + 2 for v in n)
        self.shape = shape
        self.fields = [np.zeros(shape) for _ in range(6)]
        self.symmetry = {ax: dom.boundaries[ax + "-"] for ax in "xy"
                         if dom.boundaries[ax + "-"] in ("pec", "pmc")
                         and dom.origin_nm["xy".index(ax)] == 0.0}
        self.sym_axes = tuple("xyz".index(a) for a in self.symmetry)

        # E coefficients, with tangential E pinned on conducting walls
        base = self.dt / (EPS0 * self.dx_m)
        self.cb = []
        self.eps_rel = []
        for c, name in enumerate(("ex", "ey", "ez")):
            inv = _pad(grid.inv_eps[name])
            cb = base * inv
            for a in range(3):
                if a == c:
                    continue
                for side, p in (("-", 1), ("+", n[a] + 1)):
                    if dom.boundaries["xyz"[a] + side] in ("pml", "pec"):
                        sl = [slice(None)] * 3
                        sl[a] = p
                        cb[tuple(sl)] = 0.0
            self.cb.append(np.ascontiguousarray(cb))
            self.eps_rel.append(np.where(inv > 0, 1.0 / np.where(inv > 0, inv, 1.0), 0.0))
        self.ch = self.dt / (MU0 * self.dx_m)
        self._grid_digest = _sha(*[grid.inv_eps[k] for k in ("ex", "ey", "ez")],
                                 *[grid.component_material[k] for k in ("ex", "ey", "ez")])

        self._setup_cpml()
        self._setup_dispersion()
        self._setup_source()

        self.monitor_specs = list(monitors)
        self.monitors = [build_monitor(m, dom, grid, self.symmetry) for m in self.monitor_specs]
        names = [m.name for m in self.monitors]
        if len(set(names)) != len(names):
            raise ValueError("monitor names must be unique")
        wl_max = numerics.band_nm[0]
        for m in self.monitors:
            wl_max = min(wl_max, float(np.min(m.wavelengths_nm)))
        stride = numerics.dft_stride
        if stride <= 0:
            stride = max(1, int((math.pi / 8.0) / (omega_from_nm(wl_max) * self.dt)))
        self.dft_stride = stride

        lo, hi = [], []
        for a, (l, h) in enumerate(dom.interior_slices()):
            lo.append(l + 1)
            hi.append(h + 1)
        self._elo = np.array(lo, dtype=np.int64)
        self._ehi = np.array(hi, dtype=np.int64)

        self.step_index = 0
        self.umax = 0.0
        self._edip = np.zeros(4096)
        self._energy = []
        self.termination = None

    # ------------------------------------------------------------------
    def _setup_cpml(self):
        dom, num = self.domain, self.numerics
        n = dom.shape
        prof = {}
        for a in range(3):
            lo = dom.pml_cells("xyz"[a] + "-")
            hi = dom.pml_cells("xyz"[a] + "+")
            for half in (False, True):
                prof[(a, half)] = axis_profile(
                    n[a], lo, hi, self.dx_m, self.dt, half, order=num.pml_order,
                    kappa_max=num.pml_kappa_max, alpha_max=num.pml_alpha_max,
                    sigma_factor=num.pml_sigma_factor)
        self.profiles = prof
        self.ik_e = [prof[(a, False)].inv_kappa for a in range(3)]
        self.ik_h = [prof[(a, True)].inv_kappa for a in range(3)]
        self.psi = []  # (is_e, f, d, sign, g, psi, positions, b, c, lo, hi)
        for f in range(3):
            for is_e in (True, False):
                for d, sign_e, sign_h, g in ((
                        (f + 1) % 3, 1.0, -1.0, (f + 2) % 3), ((f + 2) % 3, -1.0, 1.0, (f + 1) % 3)):
                    p = prof[(d, not is_e)]
                    if len(p.positions) == 0:
                        continue
                    lo = np.ones(3, dtype=np.int64)
                    hi = np.array([v + 1 for v in n], dtype=np.int64)
                    if is_e:
                        hi[f] = n[f]
                    else:
                        hi[:] = n
                        hi[f] = n[f] + 1
                    shp = list(self.shape)
                    shp[d] = len(p.positions)
                    self.psi.append((is_e, f, d, sign_e if is_e else sign_h,
                                     (3 + g) if is_e else g, np.zeros(shp), p.positions,
                                     p.b, p.c, lo, hi))

    def _setup_dispersion(self):
        grid = self.grid
        mats = grid.materials
        disp = [i for i, m in enumerate(mats) if m.dispersive]
        self.n_poles = max([len(mats[i].poles) for i in disp], default=0)
        self.disp = []
        if not disp:
            return
        dt = self.dt
        coef = np.zeros((len(mats), self.n_poles, 3))
        for i in disp:
            for q, (sigma, w0, gamma) in enumerate(mats[i].poles):
                h = 0.5 * w0 * w0 * dt * dt
                d = 1.0 + 0.5 * gamma * dt + h
                coef[i, q] = (2.0 / d, -(1.0 - 0.5 * gamma * dt + h) / d,
                              0.5 * EPS0 * sigma * dt * dt / d)
        self.disp_coef = coef
        for c, name in enumerate(("ex", "ey", "ez")):
            ids = _pad(grid.component_material[name].astype(np.int64))
            mask = np.isin(ids, disp) & (self.cb[c] > 0)
            idx = np.flatnonzero(mask).astype(np.int64)
            if len(idx) == 0:
                continue
            inv = _pad(grid.inv_eps[name]).reshape(-1)[idx]
            npl = (len(idx), self.n_poles)
            self.disp.append(dict(
                comp=c, idx=idx, mat=ids.reshape(-1)[idx].astype(np.int64),
                eps=EPS0 / inv, p_now=np.zeros(npl), p_prev=np.zeros(npl),
                e_prev=np.zeros(len(idx)), a_tmp=np.zeros(npl)))

    def _setup_source(self):
        o = np.asarray(self.source.orientation, dtype=float)
        self.stencils = []
        for c in range(3):
            if abs(o[c]) < 1e-15:
                continue
            st = edge_stencil(self.domain, c, self.source.position_nm, self.sym_axes)
            flat = self.cb[c].reshape(-1)
            inject = flat[st.index] * st.weight * o[c] / self.dx_m**2
            probe = st.multiplicity * st.weight * o[c]
            self.stencils.append((c, st.index, inject, probe))

    # ------------------------------------------------------------------
    @property
    def time(self) -> float:
        return self.step_index * self.dt

    def step(self):
        """Advance E^n, H^(n-1/2) to E^(n+1), H^(n+1/2)."""
        ex, ey, ez, hx, hy, hz = self.fields
        f = self.fields
        kernels.update_h(ex, ey, ez, hx, hy, hz, self.ch, *self.ik_h)
        for is_e, fc, d, sign, g, psi, pos, b, c, lo, hi in self.psi:
            if not is_e:
                kernels.psi_h(f[3 + fc], self.ch, f[g], psi, pos, b, c, d, sign, lo, hi)
        self._fill_ghosts()
        for dd in self.disp:
            kernels.polarization_prepare(f[dd["comp"]].reshape(-1), dd["idx"], dd["mat"],
                                         self.disp_coef, dd["p_now"], dd["p_prev"],
                                         dd["e_prev"], dd["a_tmp"])
        kernels.update_e(ex, ey, ez, hx, hy, hz, *self.cb, *self.ik_e)
        for is_e, fc, d, sign, g, psi, pos, b, c, lo, hi in self.psi:
            if is_e:
                kernels.psi_e(f[fc], self.cb[fc], f[g], psi, pos, b, c, d, sign, lo, hi)
        for dd in self.disp:
            kernels.polarization_finish(f[dd["comp"]].reshape(-1), dd["idx"], dd["mat"],
                                        self.disp_coef, dd["p_now"], dd["p_prev"],
                                        dd["a_tmp"], dd["eps"])
        n = self.step_index
        j = float(self.source.pulse.current((n + 0.5) * self.dt))
        edip = 0.0
        for c, idx, inject, probe in self.stencils:
            flat = f[c].reshape(-1)
            flat[idx] -= inject * j
            edip += float(np.dot(probe, flat[idx]))
        if n >= len(self._edip):
            self._edip = np.concatenate([self._edip, np.zeros(len(self._edip))])
        self._edip[n] = edip
        self.step_index = n + 1
        if self.monitors and self.step_index % self.dft_stride == 0:
            w = self.dft_stride * self.dt
            te = self.step_index * self.dt
            th = te - 0.5 * self.dt
            for m in self.monitors:
                m.accumulate_e(f, te, w)
                m.accumulate_h(f, th, w)

    def _fill_ghosts(self):
        for a in range(3):
            if self.domain.boundaries["xyz"[a] + "-"] != "pmc":
                continue
            for h in range(3):
                if h == a:
                    continue
                arr = self.fields[3 + h]
                dst = [slice(None)] * 3
                src = [slice(None)] * 3
                dst[a], src[a] = 0, 1
                arr[tuple(dst)] = -arr[tuple(src)]

    def energy(self) -> float:
        ex, ey, ez, hx, hy, hz = self.fields
        se, sh = kernels.field_energy(ex, ey, ez, hx, hy, hz, *self.eps_rel, self._elo, self._ehi)
        return 0.5 * (EPS0 * se + MU0 * sh) * self.dx_m**3

    def _diverged(self):
        for name, arr in zip(NAMES, self.fields):
            bad = ~np.isfinite(arr)
            if bad.any():
                p = np.argwhere(bad)[0]
                loc = tuple(float(self.domain.origin_nm[a] + (p[a] - 1) * self.domain.dx_nm)
                            for a in range(3))
                raise FieldDivergence(
                    f"non-finite {name} at padded index {tuple(int(v) for v in p)} "
                    f"(~{loc} nm) after step {self.step_index}", self.step_index, loc)
        raise FieldDivergence(f"field energy overflow after step {self.step_index}",
                              self.step_index)

    # ------------------------------------------------------------------
    def run(self, max_steps: int | None = None, checkpoint_path=None,
            checkpoint_every: int = 0, stop_after: int | None = None, progress=None) -> RunResult | None:
        """Step until the energy has decayed, ``max_steps`` is hit, or
        ``stop_after`` further steps were taken (then ``None`` is returned and
        the simulation can be continued or checkpointed)."""
        num = self.numerics
        max_steps = int(max_steps or num.max_steps)
        thr = num.decay_threshold
        t0 = self.source.pulse.t0
        t_off = self.source.pulse.duration
        stride = max(1, int(num.energy_stride))
        limit = None if stop_after is None else self.step_index + int(stop_after)
        while self.termination is None:
            if self.step_index >= max_steps:
                self.termination = "max_steps"
                break
            if limit is not None and self.step_index >= limit:
                return None
            self.step()
            if self.step_index % stride == 0:
                u = self.energy()
                if not math.isfinite(u):
                    self._diverged()
                self._energy.append((self.step_index, u))
                if self.time >= t0:
                    self.umax = max(self.umax, u)
                    # wait for the drive to end unless the threshold is degenerate
                    if u <= thr * self.umax and (self.time >= t_off or thr >= 1.0):
                        self.termination = "decayed"
                if progress is not None:
                    progress(self.step_index, u, self.umax)
            if checkpoint_path and checkpoint_every and self.step_index % checkpoint_every == 0:
                self.checkpoint(checkpoint_path)
        return self.result()

    def result(self) -> RunResult:
        n = self.step_index
        wl = self.numerics.wavelengths_nm
        w = omega_from_nm(wl)
        t_e = (np.arange(n) + 1.0) * self.dt
        t_j = (np.arange(n) + 0.5) * self.dt
        jt = self.source.pulse.current(t_j)
        et = self._edip[:n]
        jw = np.zeros(len(w), dtype=complex)
        ew = np.zeros(len(w), dtype=complex)
        chunk = 8192
        for s in range(0, n, chunk):
            e = slice(s, min(n, s + chunk))
            jw += np.exp(1j * np.outer(w, t_j[e])) @ jt[e]
            ew += np.exp(1j * np.outer(w, t_e[e])) @ et[e]
        jw *= self.dt
        ew *= self.dt
        power = -0.5 * np.real(np.conj(jw) * ew)
        converged = self.termination == "decayed" and self.time >= self.source.pulse.duration
        meta = {
            "domain": self.domain.signature(),
            "dt": self.dt,
            "dft_stride": self.dft_stride,
            "symmetry": dict(self.symmetry),
            "numerics": self.numerics.to_dict(),
            "source": {"position_nm": list(self.source.position_nm),
                       "orientation": list(self.source.orientation),
                       "tau": self.source.pulse.tau, "t0": self.source.pulse.t0,
                       "omega_c": self.source.pulse.omega_c,
                       "amplitude": self.source.pulse.amplitude},
            "grid_digest": self._grid_digest,
        }
        if self.grid.scene is not None:
            meta["scene"] = self.grid.scene.to_dict()
        mons = {m.name: m.data() for m in self.monitors}
        energy = np.array(self._energy, dtype=float).reshape(-1, 2)
        return RunResult(wavelengths_nm=wl, dipole_power=power, source_spectrum=jw,
                         dipole_field=ew, monitors=mons, termination=self.termination or "running",
                         steps=n, converged=bool(converged), dt=self.dt,
                         energy_trace=energy, metadata=meta)

    # ------------------------------------------------------------------
    def _header(self) -> dict:
        return {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "domain": self.domain.signature(),
            "dt": self.dt,
            "grid_digest": self._grid_digest,
            "scene_digest": self.grid.scene.digest() if self.grid.scene is not None else None,
            "numerics_digest": self.numerics.digest(),
            "source": [list(self.source.position_nm), list(self.source.orientation),
                       self.source.pulse.tau, self.source.pulse.t0, self.source.pulse.omega_c,
                       self.source.pulse.amplitude],
            "monitors": [spec_to_dict(m) for m in self.monitor_specs],
            "step": self.step_index,
        }

    def checkpoint(self, path):
        """Write the full state at the current step boundary (atomic rename)."""
        arrays = {f"field.{k}": v for k, v in zip(NAMES, self.fields)}
        for i, entry in enumerate(self.psi):
            arrays[f"psi.{i}"] = entry[5]
        for i, dd in enumerate(self.disp):
            arrays[f"disp.{i}.p_now"] = dd["p_now"]
            arrays[f"disp.{i}.p_prev"] = dd["p_prev"]
            arrays[f"disp.{i}.e_prev"] = dd["e_prev"]
        for m in self.monitors:
            arrays.update({f"mon.{k}": v for k, v in m.state().items()})
        arrays["edip"] = self._edip[:self.step_index]
        arrays["energy"] = np.array(self._energy, dtype=float).reshape(-1, 2)
        header = self._header()
        header["umax"] = self.umax
        header["termination"] = self.termination
        arrays["header"] = np.frombuffer(json.dumps(header, sort_keys=True).encode(), dtype=np.uint8)
        path = os.fspath(path)
        tmp = path + ".tmp"
        with open(tmp, "wb") as fh:
            np.savez(fh, **arrays)
        os.replace(tmp, path)

    @staticmethod
    def read_header(path) -> dict:
        try:
            with np.load(os.fspath(path), allow_pickle=False) as z:
                header = json.loads(bytes(z["header"]).decode())
        except (OSError, ValueError, KeyError, zipfile.BadZipFile, UnicodeDecodeError) as exc:
            raise CheckpointError(f"{path}: unreadable checkpoint ({exc})") from exc
        if not isinstance(header, dict) or header.get("format") != CHECKPOINT_FORMAT:
            raise CheckpointError(f"{path}: not a checkpoint file (bad header)")
        return header

    def resume(self, path):
        """Load a checkpoint written by an identically configured simulation."""
        header = self.read_header(path)
        if header.get("version") != CHECKPOINT_VERSION:
            raise CheckpointError(f"{path}: checkpoint version {header.get('version')} "
                                  f"!= supported {CHECKPOINT_VERSION}")
        mine = self._header()
        for key in ("domain", "dt", "grid_digest", "scene_digest", "numerics_digest", "source",
                    "monitors"):
            if json.dumps(header.get(key), sort_keys=True) != json.dumps(mine[key], sort_keys=True):
                raise CheckpointError(f"{path}: {key} mismatch; refusing to resume")
        try:
            with np.load(os.fspath(path), allow_pickle=False) as z:
                for k, arr in zip(NAMES, self.fields):
                    arr[...] = z[f"field.{k}"]
                for i, entry in enumerate(self.psi):
                    entry[5][...] = z[f"psi.{i}"]
                for i, dd in enumerate(self.disp):
                    dd["p_now"][...] = z[f"disp.{i}.p_now"]
                    dd["p_prev"][...] = z[f"disp.{i}.p_prev"]
                    dd["e_prev"][...] = z[f"disp.{i}.e_prev"]
                for m in self.monitors:
                    keys = m.state().keys()
                    m.load_state({k: z[f"mon.{k}"] for k in keys})
                edip = z["edip"]
                energy = z["energy"]
        except (KeyError, ValueError, zipfile.BadZipFile) as exc:
            raise CheckpointError(f"{path}: incomplete checkpoint ({exc})") from exc
        n = int(header["step"])
        self.step_index = n
        self._edip = np.zeros(max(4096, 2 * n))
        self._edip[:n] = edip
        self._energy = [tuple(r) for r in energy.tolist()]
        self.umax = float(header["umax"])
        self.termination = header.get("termination")
