"""Acceptance suite: one test per criterion.

Criteria 1-4, 6a and 10 run by default.  The long physical runs (5, 6b, 7,
8, 9) are marked ``extended``; run them with ``pytest -m extended``.
Each test collects its sub-checks and reports every failing part at once.
"""

import math

import numpy as np
import pytest

from nwcavity.cli import dump, parse, validate
from nwcavity.constants import ETA0
from nwcavity.emission import (angular_grid, extraction_efficiency, gaussian_overlap, near_to_far,
                              purcell_spectrum, radiated_power)
from nwcavity.fdtd import (BoxMonitorSpec, DipoleSource, GaussianPulse, Numerics, PlaneMonitorSpec,
                           Simulation, default_box, make_source, reference_run, run_scene, scene_grid,
                           scene_reference, vacuum_reference)
from nwcavity.modes import (GuideSpec, all_modes, characteristic_roots, dipole_coupled_modes,
                            hexagon_equivalent_diameter, lp_scalar_roots)
from nwcavity.scene import SceneSpec
from nwcavity.sweep import (PurcellMap, count_quasi_bic, detect_avoided_crossing, sweep_height,
                            sweep_scale, tolerance_sweep)

extended = pytest.mark.extended


class Checks:
    """Collects named pass/fail results so one assertion reports all of them."""

    def __init__(self):
        self.failed = []
        self.measured = {}

    def __call__(self, ok, what):
        if not ok:
            self.failed.append(what)

    def done(self):
        extra = ", ".join(f"{k}={v:.4g}" for k, v in self.measured.items())
        assert not self.failed, "; ".join(self.failed) + (f" [measured: {extra}]" if extra else "")


def image_dipole_factor(d_nm, wl_nm):
    """Power of a parallel dipole at height d over a perfect conductor, relative to free space."""
    x = 4 * np.pi * d_nm / np.asarray(wl_nm)
    return 1 - 1.5 * (np.sin(x) / x + np.cos(x) / x ** 2 - np.sin(x) / x ** 3)


# ---------------------------------------------------------------- 1

def test_criterion_01_vacuum_normalization():
    """Empty-space Purcell spectrum is 1 within 3% at 10 nm; the reference
    power itself matches the analytic dipole formula (second route)."""
    num = Numerics(resolution_nm=10.0, farfield=False)
    spec = SceneSpec(diameter_nm=100.0, height_nm=200.0, nanowire_index=1.0, oxide_thickness_nm=0.0,
                     mirror_enabled=False)
    run = run_scene(spec, num, threads=1)
    ref = scene_reference(spec, num, "vacuum")
    f = purcell_spectrum(run, ref).factor
    k = 2 * math.pi / (ref.wavelengths_nm * 1e-9)
    analytic = ETA0 * k ** 2 * np.abs(ref.source_spectrum) ** 2 / (12 * math.pi)
    c = Checks()
    c(run.converged and ref.converged, "runs did not converge")
    c(ref.wavelengths_nm.min() <= 850 and ref.wavelengths_nm.max() >= 950, "band does not cover 850-950 nm")
    c(np.abs(f - 1).max() <= 0.03, f"max |F-1| = {np.abs(f - 1).max():.4f}")
    c(np.abs(ref.dipole_power / analytic - 1).max() <= 0.03,
      f"reference vs analytic power off by {np.abs(ref.dipole_power / analytic - 1).max():.4f}")
    c.done()


# ---------------------------------------------------------------- 2

@pytest.mark.parametrize("d", [100.0, 200.0, 300.0])
def test_criterion_02_image_dipole(d):
    num = Numerics(resolution_nm=10.0, farfield=False)
    spec = SceneSpec(mirror_kind="pec", nanowire_index=1.0, oxide_thickness_nm=0.0, diameter_nm=200.0,
                     height_nm=d + 30.0, dipole_offset_from_top_nm=30.0)
    run = run_scene(spec, num, threads=1)
    ref = vacuum_reference(make_source(spec, num), num)
    f = purcell_spectrum(run, ref).factor
    err = np.abs(f / image_dipole_factor(d, run.wavelengths_nm) - 1).max()
    assert run.converged and err <= 0.05, f"max relative error {err:.4f}"


# ---------------------------------------------------------------- 3

def test_criterion_03_far_field_analytics():
    num = Numerics(resolution_nm=20.0, padding_nm=300.0)
    src = DipoleSource((0.0, 0.0, 0.0), (1.0, 0.0, 0.0), GaussianPulse.for_band(900.0, num.band_nm))
    box = BoxMonitorSpec((-600.0,) * 3, (600.0,) * 3, (850.0, 900.0, 950.0))
    r = reference_run(src, num, 1.0, [box], cache=False)
    b = r.box()
    up = b.flux(z_above_nm=0.0)
    c = Checks()
    for q, lam in enumerate(b.wavelengths_nm):
        ff = near_to_far(b, lam, *angular_grid(180.0))
        T, P = np.meshgrid(np.radians(ff.theta_deg), np.radians(ff.phi_deg), indexing="ij")
        pattern = 1 - np.sin(T) ** 2 * np.cos(P) ** 2
        u = ff.intensity
        scale = (u * pattern).sum() / (pattern * pattern).sum()
        rms = math.sqrt(np.mean((u / scale - pattern) ** 2))
        c(rms <= 0.01, f"{lam:g} nm: pattern RMS {rms:.4f}")
        hemi = radiated_power(ff, 90.0)
        c(abs(hemi / up[q] - 1) <= 0.03, f"{lam:g} nm: hemisphere/upward {hemi / up[q]:.4f}")
    c.done()


# ---------------------------------------------------------------- 4

def test_criterion_04_mode_solver_exactness():
    c = Checks()
    inp = lambda d: GuideSpec(3.44, 1.0, d, 900.0)

    def te_count(d):
        return sum(m.family == "TE" for m in characteristic_roots(inp(d), 0, profile_points=0))

    lo, hi = 100.0, 400.0
    while hi - lo > 1e-4:
        mid = 0.5 * (lo + hi)
        lo, hi = (lo, mid) if te_count(mid) else (mid, hi)
    v = inp(hi).v_number
    c(abs(v - 2.4048) <= 1e-3, f"TE01 cutoff at V={v:.5f}")

    worst = max(m.residual for d in (150.0, 372.8, 600.0, 1000.0) for m in all_modes(inp(d)))
    c(worst < 1e-10, f"largest residual {worst:.2e}")

    weak = GuideSpec(1.451, 1.450, 8000.0, 900.0)
    he11 = [m for m in characteristic_roots(weak, 1, profile_points=0) if m.label == "HE11"][0]
    gap = abs(he11.n_eff - lp_scalar_roots(weak, 0)[0])
    c(gap <= 1e-6, f"weak-guidance HE11 vs LP01 {gap:.2e}")

    guide = inp(hexagon_equivalent_diameter(425.0))
    coupled = dipole_coupled_modes(all_modes(guide))
    labels = {m.mode.label for m in coupled}
    weights = {m.mode.label: m.weight for m in coupled}
    c(labels == {"HE11", "EH11"},
      f"coupled set at V={guide.v_number:.3f} is {sorted(labels)} (relative weights "
      + ", ".join(f"{k}={w / weights['HE11']:.2e}" for k, w in sorted(weights.items())) + ")")
    c.done()


# ---------------------------------------------------------------- 5

@extended
def test_criterion_05_headline_design_point(tmp_path):
    # desk-size box: the collection figures barely move between 1.2 and 2.4 um boxes
    num = Numerics(resolution_nm=10.0, padding_nm=300.0, monitor_box_side_nm=1200.0,
                   monitor_box_height_nm=2000.0)
    spec = SceneSpec()  # D=420, H=1375, oxide 12 nm, dipole 30 nm below top, gold mirror
    box = default_box(spec, num)
    run = run_scene(spec, num, [box])
    ref = scene_reference(spec, num)
    ps = purcell_spectrum(run, ref)
    c = Checks()
    c(run.converged, "structure run did not converge")
    c(ps.peak is not None, "Purcell maximum at the band edge")
    if ps.peak is not None:
        p = ps.peak
        c(12 <= p.value <= 22, f"peak Purcell {p.value:.2f}")
        c(abs(p.wavelength_nm - 900) <= 10, f"peak at {p.wavelength_nm:.2f} nm")
        c(2.5 <= p.fwhm_nm <= 6, f"FWHM {p.fwhm_nm:.2f} nm")
        b = run.box(box.name)
        q = int(np.argmin(np.abs(b.wavelengths_nm - p.wavelength_nm)))
        lam = float(b.wavelengths_nm[q])
        ff = near_to_far(b, lam)
        eta = extraction_efficiency(ff, float(run.power_at(lam)), 0.8)
        c(abs(eta - 0.74) <= 0.10, f"efficiency at NA 0.8 {eta:.3f}")
        ov, th0 = gaussian_overlap(ff, phase_center_nm=(0.0, float(b.hi_nm[2])))
        c.measured.update(F=p.value, peak_nm=p.wavelength_nm, fwhm_nm=p.fwhm_nm, eta=eta, overlap=ov,
                          theta0_deg=th0, upward=float(b.flux()[q]) / float(run.power_at(lam)),
                          intensity_overlap=gaussian_overlap(ff, "intensity")[0],
                          on_axis_over_max=float(ff.intensity[0].mean() / ff.intensity.max()))
        c(abs(ov - 0.88) <= 0.08, f"Gaussian overlap {ov:.3f}")
    c.done()


# ---------------------------------------------------------------- 6

def test_criterion_06a_synthetic_anticrossing():
    wl = np.linspace(850.0, 970.0, 241)
    h = np.arange(1200.0, 1581.0, 5.0)
    c = Checks()
    for g in (6.0, 3.0):
        rows = []
        for H in h:
            s = math.hypot(0.4 * (H - 1390.0), g)
            bright = 8.0 + 30.0 * math.exp(-((H - 1390.0) / 40.0) ** 2)
            rows.append(1 + 8.0 / (1 + ((wl - 910 + s) / 1.5) ** 2) + bright / (1 + ((wl - 910 - s) / 1.5) ** 2))
        rep = detect_avoided_crossing(PurcellMap("height_nm", h, wl, np.array(rows), np.ones(len(h), bool)))
        c(abs(rep.center_param - 1390.0) <= 5.0, f"g={g}: centre {rep.center_param:.1f}")
        c(abs(rep.gap_nm / (2 * g) - 1) <= 0.05, f"g={g}: gap {rep.gap_nm:.3f}")
    c.done()


DESK = Numerics(resolution_nm=20.0, farfield=False)


@extended
def test_criterion_06b_height_sweep_anticrossing(tmp_path):
    pmap = sweep_height(SceneSpec(), np.arange(1200.0, 1501.0, 10.0), DESK, store_dir=tmp_path)
    rep = detect_avoided_crossing(pmap)
    c = Checks()
    c(not rep.is_crossing, "branches cross instead of repelling")
    c(abs(rep.center_param - 1390.0) <= 40.0, f"centre at H={rep.center_param:.1f}")
    c(abs(rep.center_wavelength_nm - 910.0) <= 20.0, f"centre at {rep.center_wavelength_nm:.1f} nm")
    c.done()


# ---------------------------------------------------------------- 7

@extended
def test_criterion_07_scaling_law(tmp_path):
    pmap, fit = sweep_scale(SceneSpec(), [0.965, 1.0, 1.035], DESK.replace(band_nm=(820.0, 980.0)),
                            store_dir=tmp_path)
    c = Checks()
    c(not fit.excluded, f"band-edge peaks for s={fit.excluded}")
    for s, target in ((0.965, 870.0), (1.0, 900.0), (1.035, 940.0)):
        if s in fit.factors:
            got = float(fit.peaks_nm[list(fit.factors).index(s)])
            c(abs(got - target) <= 10.0, f"s={s}: peak {got:.1f} nm")
    c(abs(fit.slope_nm / 873.66 - 1) <= 0.15, f"slope {fit.slope_nm:.1f} nm")
    c.done()


# ---------------------------------------------------------------- 8

@extended
@pytest.mark.parametrize("mirror,expected", [(True, 6), (False, 3)])
def test_criterion_08_quasi_bic_count(tmp_path, mirror, expected):
    base = SceneSpec(mirror_enabled=mirror)
    pmap = sweep_height(base, np.arange(350.0, 2101.0, 10.0), DESK, store_dir=tmp_path)
    n, found = count_quasi_bic(pmap, DESK.band_nm, threshold=10.0)
    assert n == expected, f"{n} maxima: {found}"


# ---------------------------------------------------------------- 9

@extended
def test_criterion_09_tolerance_trends(tmp_path):
    crowns = [0.0, 30.0, 60.0, 89.0, 120.0, 150.0]
    cm = tolerance_sweep(SceneSpec(), "crown_height", crowns, DESK, store_dir=tmp_path / "c")
    peaks = np.nanmax(cm.factor, axis=1)
    om = tolerance_sweep(SceneSpec(), "lateral_offset", [100.0], DESK, store_dir=tmp_path / "o")
    c = Checks()
    for h, p in zip(crowns, peaks):
        if h < 90:
            c(p > 10, f"crown {h:g} nm: peak {p:.2f}")
    best = int(np.argmax(peaks))
    c(np.all(np.diff(peaks[best:]) <= 0), f"peaks beyond the optimum {np.round(peaks[best:], 2)}")
    c(np.nanmax(om.factor) > 10, f"100 nm offset: peak {np.nanmax(om.factor):.2f}")
    c.done()


# ---------------------------------------------------------------- 10

def test_criterion_10_engineering_determinism(tmp_path):
    num = Numerics(resolution_nm=40.0, padding_nm=320.0, absorber_layers=6, sample_nm=2.0,
                   farfield=False, max_steps=2000)
    spec = SceneSpec(diameter_nm=320.0, height_nm=400.0, oxide_thickness_nm=0.0, mirror_kind="pec",
                     dipole_offset_from_top_nm=80.0)
    plane = PlaneMonitorSpec(axis=1, position_nm=0.0, wavelengths_nm=(870.0, 900.0, 930.0), name="xz")
    c = Checks()

    def sim(amplitude=1.0):
        return Simulation(scene_grid(spec, num), num, make_source(spec, num, amplitude), [plane])

    whole = sim()
    whole.run(stop_after=2000)
    first = sim()
    first.run(stop_after=1000)
    first.checkpoint(tmp_path / "k.npz")
    split = sim()
    split.resume(tmp_path / "k.npz")
    split.run(stop_after=1000)
    a, b = whole.result(), split.result()
    same = (all(np.array_equal(u, v) for u, v in zip(whole.fields, split.fields))
            and np.array_equal(a.monitors["xz"].e, b.monitors["xz"].e)
            and np.array_equal(a.dipole_power, b.dipole_power))
    c(same, "checkpoint/resume differs from the uninterrupted run")

    cfg = parse({"schema_version": 1, "scene": {"diameter_nm": 400}, "numerics": {"resolution_nm": 20}})
    dump(cfg, tmp_path / "c.yaml")
    back = validate(tmp_path / "c.yaml")
    c(back == cfg and back.digest() == cfg.digest(), "config round trip changed the job")

    scaled = sim(37.5)
    scaled.run(stop_after=2000)
    ref = 37.5 * a.monitors["xz"].e
    rel = np.abs(scaled.result().monitors["xz"].e - ref).max() / np.abs(ref).max()
    c(rel <= 1e-12, f"source linearity {rel:.2e}")
    c.done()
