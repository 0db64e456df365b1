"""Pipelines behind the command-line subcommands."""

from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np

from ..emission.farfield import (angular_grid, extraction_efficiency, gaussian_overlap, near_to_far,
                                 radiated_power, read_farfield, write_farfield, write_polar_grid)
from ..emission.purcell import purcell_spectrum, read_purcell, write_purcell
from ..fdtd.monitors import PlaneMonitorSpec
from ..fdtd.runner import default_box, run_scene, scene_reference
from ..modes import (GuideSpec, all_modes, dipole_coupled_modes, dispersion_sweep,
                     hexagon_equivalent_diameter, write_dispersion)
from ..scene.materials import fit_metal_poles, gold_table, permittivity_at, read_permittivity_table
from ..sweep import (NoAnticrossingError, count_quasi_bic, detect_avoided_crossing,
                     scaling_from_map, sweep, write_map)
from ..sweep.analysis import row_peaks
from .config import JobConfig, dump
from .store import (MANIFEST, JobDir, RunManifest, check_disk, gnuplot_script, read_box,
                    write_box, write_field_slice, write_plane)

log = logging.getLogger("nwcavity")


def _open(cfg: JobConfig, out, command: str) -> JobDir:
    job = JobDir(out, command, cfg.digest())
    job.write_with("config.resolved.yaml", lambda p, c: dump(c, p), cfg)
    return job


def _slice_wavelengths(num, step_nm: float):
    lo, hi = num.band_nm
    n = max(int(round((hi - lo) / step_nm)), 1) + 1
    return tuple(float(v) for v in np.linspace(lo, hi, n))


def farfield_figures(box, total_power: float, wavelength_nm: float, cfg: JobConfig,
                     phase_range_nm=None) -> tuple[object, dict]:
    """Far field at one wavelength and the numbers quoted for it."""
    a = cfg.analysis
    th, ph = angular_grid(90.0, a.dtheta_deg, a.dphi_deg)
    ff = near_to_far(box, wavelength_nm, th, ph)
    q = int(np.argmin(np.abs(np.asarray(box.wavelengths_nm) - wavelength_nm)))
    up = float(box.flux()[q])
    centre = phase_range_nm if (a.phase_center == "search" and a.overlap_mode == "field") else None
    ov, th0 = gaussian_overlap(ff, a.overlap_mode, a.overlap_theta0_max_deg, phase_center_nm=centre)
    U = ff.intensity
    nums = {
        "farfield_wavelength_nm": float(ff.wavelength_nm),
        "total_power_W": total_power,
        "upward_power_W": up,
        "farfield_power_W": radiated_power(ff),
        "efficiency": {f"{na:g}": extraction_efficiency(ff, total_power, na) for na in a.na},
        "efficiency_of_upward": {f"{na:g}": extraction_efficiency(ff, up, na) for na in a.na},
        "gaussian_overlap": ov,
        "gaussian_theta0_deg": th0,
        "overlap_mode": a.overlap_mode,
        "on_axis_is_maximum": bool(U[0].mean() >= 0.999 * U.max()),
    }
    return ff, nums


def _summary_text(d: dict) -> str:
    lines = []
    for k in sorted(d):
        v = d[k]
        if isinstance(v, dict):
            for kk in sorted(v):
                lines.append(f"{k}[NA={kk}]\t{v[kk]:.6g}" if isinstance(v[kk], float) else f"{k}[{kk}]\t{v[kk]}")
        elif isinstance(v, float):
            lines.append(f"{k}\t{v:.6g}")
        else:
            lines.append(f"{k}\t{v}")
    return "\n".join(lines) + "\n"


def cmd_run(cfg: JobConfig, out, threads=None, resume=None, quiet=False) -> int:
    spec, num = cfg.scene_spec(), cfg.numerics_obj()
    monitors = []
    box_spec = default_box(spec, num) if num.farfield else None
    if box_spec is not None:
        monitors.append(box_spec)
    if cfg.analysis.field_slice:
        wls = _slice_wavelengths(num, cfg.analysis.field_slice_step_nm)
        monitors.append(PlaneMonitorSpec(axis=1, position_nm=0.0, wavelengths_nm=wls, name="xz"))
    with _open(cfg, out, "run") as job:
        if cfg.analysis.field_slice:
            # rough size of the plane phasors: 3 components, complex128
            cells = (spec.diameter_nm + num.monitor_box_side_nm + 2 * num.padding_nm) ** 2
            check_disk(job.root, int(3 * 16 * len(monitors[-1].wavelengths_nm) * cells / num.resolution_nm ** 2))
        progress = None
        if not quiet:
            def progress(step, u, umax):
                if step % 5000 == 0:
                    log.info("step %d  energy/peak %.3e", step, u / umax if umax else 1.0)
        ckpt = job.path("checkpoint.npz")
        res = run_scene(spec, num, monitors, threads=threads, checkpoint_path=ckpt,
                        checkpoint_every=cfg.numerics.checkpoint_every, resume_from=resume,
                        progress=progress)
        job.converged("structure", res.converged, res.steps)
        ref = scene_reference(spec, num, cfg.numerics.reference_medium)
        job.converged("reference", ref.converged, ref.steps)
        ps = purcell_spectrum(res, ref)
        job.write_with("purcell.tsv", write_purcell, ps)
        job.write_text("purcell.gp", gnuplot_script("purcell", "purcell.tsv"))
        summary = {"converged": bool(res.converged and ref.converged), "steps": int(res.steps),
                   "reference_medium": cfg.numerics.reference_medium,
                   "reference_index": float(ref.metadata.get("reference_index", 1.0))}
        if ps.peak is not None:
            summary.update(peak_wavelength_nm=ps.peak.wavelength_nm, peak_purcell=ps.peak.value,
                           fwhm_nm=ps.peak.fwhm_nm, fwhm_is_lower_bound=ps.peak.fwhm_is_lower_bound)
        else:
            job.note("Purcell maximum at the band edge; widen the band")
        if box_spec is not None:
            box = res.box(box_spec.name)
            job.write_with("box_phasors.npz", write_box, box)
            lam = cfg.analysis.farfield_wavelength_nm or (ps.peak.wavelength_nm if ps.peak else
                                                          spec.center_wavelength_nm)
            q = int(np.argmin(np.abs(box.wavelengths_nm - lam)))
            total = res.power_at(float(box.wavelengths_nm[q]))
            ff, nums = farfield_figures(box, total, lam, cfg, (0.0, float(box.hi_nm[2])))
            summary.update(nums)
            job.write_with("farfield.tsv", write_farfield, ff)
            job.write_with("farfield_polar.tsv", write_polar_grid, ff)
            job.write_text("farfield.gp", gnuplot_script("farfield", "farfield.tsv"))
        if cfg.analysis.field_slice:
            plane = res.monitors["xz"]
            lam = summary.get("peak_wavelength_nm", spec.center_wavelength_nm)
            job.write_with("field_phasors.npz", write_plane, plane)
            job.write_with("field_slice.tsv", write_field_slice, plane, lam)
            job.write_text("field_slice.gp", gnuplot_script("field", "field_slice.tsv", u="z", v="x"))
        job.write_text("summary.tsv", _summary_text(summary))
        job.write_text("summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
        if ckpt.exists():
            ckpt.unlink()
        ok = job.manifest.all_converged
    if not quiet:
        print(_summary_text(summary), end="")
    return 0 if ok else 3


def cmd_sweep(cfg: JobConfig, out, threads=None, quiet=False) -> int:
    if cfg.sweep is None:
        raise ValueError("the configuration has no sweep block")
    spec, num = cfg.scene_spec(), cfg.numerics_obj().replace(farfield=False)
    sw = cfg.sweep
    values = sw.resolved_values()

    def progress(v, spectrum, error):
        if not quiet:
            state = "failed: " + error if error else ("ok" if spectrum.converged else "not converged")
            log.info("%s=%g %s", sw.axis, v, state)

    with _open(cfg, out, "sweep") as job:
        pmap = sweep(spec, sw.axis, values, num, workers=sw.workers, store_dir=job.path("cells"),
                     cell_kwargs={"medium": cfg.numerics.reference_medium, "threads": threads},
                     progress=progress)
        for i, v in enumerate(pmap.values):
            job.converged(f"{sw.axis}={v:g}", bool(pmap.converged[i] and not pmap.failed[i]))
        for i, err in pmap.errors.items():
            job.note(f"{sw.axis}={pmap.values[i]:g}: {err}")
        job.write_with("map.tsv", write_map, pmap)
        job.write_text("map.gp", gnuplot_script("map", "map.tsv", axis=sw.axis))
        lines = []
        if sw.axis == "scale_factor":
            fit = scaling_from_map(pmap)
            job.write_text("scaling_fit.txt", fit.summary())
        elif sw.axis == "height_nm":
            try:
                rep = detect_avoided_crossing(pmap)
                lines.append(rep.summary())
            except NoAnticrossingError as exc:
                lines.append(f"anticrossing: {exc}\n")
            window = sw.window_nm or tuple(num.band_nm)
            n, locs = count_quasi_bic(pmap, window, sw.threshold, sw.min_separation)
            lines.append(f"quasi_bic_count={n} window_nm={window[0]:g}-{window[1]:g} "
                         f"threshold={sw.threshold:g}\n")
            lines += [f"{p:g}\t{l:.3f}\t{f:.5g}\n" for p, l, f in locs]
        else:
            lines.append(f"# {sw.axis}\tpeak_wavelength_nm\tpeak_purcell\n")
            for v, row, bad in zip(pmap.values, pmap.factor, pmap.failed):
                pk = [] if bad else row_peaks(pmap.wavelengths_nm, row, 1.0)
                if pk:
                    l, f = max(pk, key=lambda t: t[1])
                    lines.append(f"{v:g}\t{l:.3f}\t{f:.5g}\n")
                else:
                    lines.append(f"{v:g}\tnan\tnan\n")
        if lines:
            job.write_text("analysis.txt", "".join(lines))
        ok = job.manifest.all_converged
    return 0 if ok else 3


def cmd_modes(cfg: JobConfig, out, quiet=False) -> int:
    m = cfg.modes
    if m is None:
        raise ValueError("the configuration has no modes block")
    conv = hexagon_equivalent_diameter if m.hexagon else (lambda d: d)
    n = int(round((m.diameter_stop_nm - m.diameter_start_nm) / m.diameter_step_nm)) + 1
    d_in = np.linspace(m.diameter_start_nm, m.diameter_stop_nm, n)
    guide = GuideSpec(m.core_index, m.clad_index, conv(float(d_in[0])), m.wavelength_nm)
    with _open(cfg, out, "modes") as job:
        disp = dispersion_sweep(guide, [conv(float(d)) for d in d_in])
        job.write_with("dispersion.tsv", write_dispersion, disp)
        job.write_text("dispersion.gp", gnuplot_script("dispersion", "dispersion.tsv",
                                                        labels=" ".join(disp.labels())))
        if m.operating_diameter_nm is not None:
            g = guide.with_diameter(conv(m.operating_diameter_nm))
            modes = all_modes(g)
            coupled = {c.mode.label: c.weight for c in dipole_coupled_modes(modes)}
            lines = [f"# core_diameter_nm={g.core_diameter_nm:.4f} V={g.v_number:.6f}",
                     "# mode\tn_eff\tresidual\tcoupling_weight_V2_per_m2_W"]
            for md in modes:
                lines.append(f"{md.label}\t{md.n_eff:.12f}\t{md.residual:.3e}\t"
                             f"{coupled.get(md.label, 0.0):.6e}")
            job.write_text("modes.tsv", "\n".join(lines) + "\n")
        job.converged("modes", True)
    return 0


def cmd_farfield(cfg: JobConfig, out, source_dir, quiet=False) -> int:
    """Recompute far-field numbers from the box phasors of an earlier run."""
    src = Path(source_dir)
    box = read_box(src / "box_phasors.npz")
    summ = json.loads((src / "summary.json").read_text())
    lam = (cfg.analysis.farfield_wavelength_nm or summ.get("farfield_wavelength_nm")
           or summ.get("peak_wavelength_nm"))
    if lam is None:
        raise ValueError("no far-field wavelength: set analysis.farfield_wavelength_nm")
    if abs(lam - summ.get("farfield_wavelength_nm", lam)) > 1e-9:
        raise ValueError("the run stores the total dipole power only at its own far-field "
                         "wavelength; rerun with that wavelength")
    with _open(cfg, out, "farfield") as job:
        ff, nums = farfield_figures(box, summ["total_power_W"], lam, cfg, (0.0, float(box.hi_nm[2])))
        job.write_with("farfield.tsv", write_farfield, ff)
        job.write_with("farfield_polar.tsv", write_polar_grid, ff)
        job.write_text("farfield.gp", gnuplot_script("farfield", "farfield.tsv"))
        job.write_text("summary.json", json.dumps(nums, indent=2, sort_keys=True) + "\n")
        job.converged("farfield", True)
    if not quiet:
        print(_summary_text(nums), end="")
    return 0


def cmd_fit_material(cfg: JobConfig, out, quiet=False) -> int:
    mb = cfg.material
    if mb is None:
        from .config import MaterialBlock
        mb = MaterialBlock()
    if mb.table:
        wl, eps = read_permittivity_table(mb.table)
    else:
        wl, eps = gold_table()
    with _open(cfg, out, "fit-material") as job:
        model = fit_metal_poles(list(zip(wl, eps)), tuple(mb.band_nm), mb.poles, tolerance=None,
                                name="table" if mb.table else "gold")
        fit = {"name": model.name, "epsilon_infinity": model.epsilon_infinity,
               "poles": [{"sigma_rad2_per_s2": p[0], "omega0_rad_per_s": p[1],
                          "gamma_rad_per_s": p[2]} for p in model.poles],
               "form": "eps_inf + sum sigma / (omega0^2 - omega^2 - i gamma omega)",
               "band_nm": list(mb.band_nm),
               "max_relative_error": model.fit_residual, "tolerance": mb.tolerance}
        job.write_text("material.json", json.dumps(fit, indent=2) + "\n")
        grid = np.linspace(mb.band_nm[0], mb.band_nm[1], 41)
        sel = (wl >= mb.band_nm[0]) & (wl <= mb.band_nm[1])
        em = permittivity_at(model, grid)
        rows = ["# wavelength_nm\teps_re_fit\teps_im_fit"]
        rows += [f"{w:.3f}\t{e.real:.8g}\t{e.imag:.8g}" for w, e in zip(grid, em)]
        rows += ["", "# wavelength_nm\teps_re_table\teps_im_table"]
        rows += [f"{w:.3f}\t{e.real:.8g}\t{e.imag:.8g}" for w, e in zip(wl[sel], eps[sel])]
        job.write_text("material_fit.tsv", "\n".join(rows) + "\n")
        ok = model.fit_residual <= mb.tolerance
        job.converged("fit", ok)
        if not ok:
            job.note(f"fit error {model.fit_residual:.3g} exceeds tolerance {mb.tolerance:g}")
    if not quiet:
        print(f"max relative error {model.fit_residual:.4g} over {mb.band_nm[0]:g}-{mb.band_nm[1]:g} nm")
    return 0 if ok else 3


def cmd_report(out, quiet=False) -> int:
    """Re-check a finished job directory and print its summary."""
    root = Path(out)
    mpath = root / MANIFEST
    if not root.is_dir() or not mpath.exists():
        raise FileNotFoundError(f"{root} holds no job manifest")
    man = RunManifest.read(mpath)
    from .store import sha256
    bad = [n for n, h in man.files.items() if not (root / n).exists() or sha256(root / n) != h]
    lines = [f"command\t{man.command}", f"status\t{man.status}", f"version\t{man.version}",
             f"config_hash\t{man.config_hash}", f"wall_clock_s\t{man.wall_clock_s:g}",
             f"files\t{len(man.files)}", f"checksum_mismatches\t{len(bad)}"]
    lines += [f"converged[{k}]\t{v}" for k, v in sorted(man.converged.items())]
    lines += [f"note\t{n}" for n in man.notes]
    if (root / "summary.tsv").exists():
        lines.append((root / "summary.tsv").read_text().rstrip("\n"))
    if (root / "purcell.tsv").exists():
        ps = read_purcell(root / "purcell.tsv")
        if ps.peak is not None:
            lines.append(f"purcell_peak\t{ps.peak.value:.5g} at {ps.peak.wavelength_nm:.3f} nm")
    if (root / "farfield.tsv").exists():
        ff = read_farfield(root / "farfield.tsv")
        lines.append(f"farfield_power_W\t{radiated_power(ff):.6g}")
    text = "\n".join(lines) + "\n"
    if not quiet:
        print(text, end="")
    ok = man.status == "complete" and not bad and man.all_converged
    return 0 if ok else 3
