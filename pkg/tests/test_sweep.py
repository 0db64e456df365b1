import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nwcavity.emission.purcell import PurcellSpectrum
from nwcavity.fdtd.numerics import Numerics
from nwcavity.scene import SceneSpec
from nwcavity.sweep import (NoAnticrossingError, PurcellMap, apply_axis, count_quasi_bic,
                            detect_avoided_crossing, fit_scaling, read_map, row_peaks,
                            scaling_from_map, sweep, sweep_height, sweep_scale, tolerance_sweep,
                            trace_ridges, write_map)

WL = np.linspace(850.0, 970.0, 241)  # 0.5 nm


def lorentz(x, x0, w, a):
    return a / (1 + ((x - x0) / (0.5 * w)) ** 2)


def two_oscillators(g, h0=1390.0, lam0=910.0, slope=0.4, heights=None, width=3.0):
    """Map with two coupled branches mean +- sqrt(delta^2 + g^2).  With coupling
    the upper branch brightens near the centre, as a quasi-bound state does."""
    h = np.arange(1200.0, 1581.0, 5.0) if heights is None else np.asarray(heights)
    rows = []
    for H in h:
        d = slope * (H - h0)
        s = np.sqrt(d * d + g * g)
        bright = 8.0 + (30.0 * np.exp(-((H - h0) / 40.0) ** 2) if g > 0 else 0.0)
        rows.append(1.0 + lorentz(WL, lam0 - s, width, 8.0) + lorentz(WL, lam0 + s, width, bright))
    return PurcellMap("height_nm", h, WL, np.array(rows), np.ones(len(h), bool))


# ---------------------------------------------------------------- anticrossing

@pytest.mark.parametrize("g", [6.0, 3.0])
def test_anticrossing_recovers_centre_and_gap(g):
    rep = detect_avoided_crossing(two_oscillators(g))
    assert abs(rep.center_param - 1390.0) <= 5.0
    assert abs(rep.center_wavelength_nm - 910.0) <= 1.0
    assert rep.gap_nm == pytest.approx(2 * g, rel=0.05)
    assert not rep.is_crossing
    lower, upper = rep.branches
    assert np.mean(lower.wavelengths) < np.mean(upper.wavelengths)


def test_quasi_bic_point_is_the_brightest_ridge_point_near_the_gap():
    rep = detect_avoided_crossing(two_oscillators(4.0))
    p, lam, f = rep.quasi_bic
    upper = rep.branches[1]
    assert p in upper.params and lam == upper.at(p)
    assert f == max(upper.values)
    assert abs(p - 1390.0) <= 10.0


def test_zero_coupling_is_flagged_as_a_crossing():
    rep = detect_avoided_crossing(two_oscillators(0.0))
    assert rep.is_crossing
    assert rep.gap_nm == pytest.approx(0.0, abs=1.0)
    assert abs(rep.center_param - 1390.0) <= 10.0


def test_single_ridge_has_no_anticrossing():
    h = np.arange(1200.0, 1400.0, 10.0)
    rows = [1.0 + lorentz(WL, 880.0 + 0.2 * (H - 1200), 3.0, 10.0) for H in h]
    pmap = PurcellMap("height_nm", h, WL, np.array(rows), np.ones(len(h), bool))
    with pytest.raises(NoAnticrossingError, match="no anticrossing in range"):
        detect_avoided_crossing(pmap)


def test_row_order_does_not_matter():
    m = two_oscillators(5.0)
    perm = np.random.default_rng(0).permutation(len(m.values))
    shuffled = PurcellMap(m.axis, m.values[perm], m.wavelengths_nm, m.factor[perm], m.converged[perm])
    a, b = detect_avoided_crossing(m), detect_avoided_crossing(shuffled)
    assert (a.center_param, a.gap_nm, a.quasi_bic) == (b.center_param, b.gap_nm, b.quasi_bic)


def test_ridges_skip_failed_rows():
    m = two_oscillators(6.0)
    m.factor[10] = np.nan
    m = PurcellMap(m.axis, m.values, m.wavelengths_nm, m.factor, m.converged)
    assert m.failed[10]
    ridges = trace_ridges(m)
    assert all(m.values[10] not in r.params for r in ridges)
    assert detect_avoided_crossing(m).gap_nm == pytest.approx(12.0, rel=0.05)


def test_row_peaks_refines_off_grid_maxima():
    row = 1.0 + lorentz(WL, 901.23, 4.0, 20.0)
    (x, y), = row_peaks(WL, row)
    assert x == pytest.approx(901.23, abs=0.02)
    assert row_peaks(WL, np.full_like(WL, np.nan)) == []


# ---------------------------------------------------------------- quasi-BIC count

def spots(points, h=np.arange(300.0, 2101.0, 10.0)):
    H, L = np.meshgrid(h, WL, indexing="ij")
    f = np.ones_like(H)
    for p, lam, a in points:
        f += a * np.exp(-((H - p) / 15.0) ** 2 - ((L - lam) / 3.0) ** 2)
    return PurcellMap("height_nm", h, WL, f, np.ones(len(h), bool))


def test_count_quasi_bic_finds_isolated_maxima():
    pts = [(500.0, 900.0, 20.0), (800.0, 905.0, 30.0), (1100.0, 895.0, 25.0),
           (1400.0, 910.0, 40.0), (1700.0, 900.0, 12.0), (2000.0, 902.0, 22.0)]
    n, found = count_quasi_bic(spots(pts), (880.0, 920.0), threshold=10.0)
    assert n == 6
    assert [p for p, _, _ in found] == [p for p, _, _ in pts]
    n_hi, _ = count_quasi_bic(spots(pts), (880.0, 920.0), threshold=28.0)
    assert n_hi == 2


def test_count_ignores_peaks_outside_the_window():
    m = spots([(500.0, 900.0, 20.0), (900.0, 960.0, 20.0)])
    assert count_quasi_bic(m, (880.0, 920.0), 5.0)[0] == 1


def test_close_maxima_are_merged():
    m = spots([(1000.0, 900.0, 20.0), (1030.0, 912.0, 15.0)])
    n, found = count_quasi_bic(m, (880.0, 920.0), 5.0)
    assert n == 1 and found[0][0] == 1000.0


def test_empty_or_flat_maps_count_zero():
    flat = spots([])
    assert count_quasi_bic(flat, (880.0, 920.0), 2.0) == (0, [])
    assert count_quasi_bic(flat, (990.0, 999.0), 0.0) == (0, [])


@settings(max_examples=15)
@given(st.floats(1.0, 50.0), st.floats(0.1, 100.0))
def test_count_is_scale_invariant_and_monotone(thr, alpha):
    m = spots([(500.0, 900.0, 20.0), (1100.0, 895.0, 35.0), (1700.0, 910.0, 8.0)])
    n = count_quasi_bic(m, (880.0, 920.0), thr)[0]
    assert count_quasi_bic(m.scaled(alpha), (880.0, 920.0), thr * alpha)[0] == n
    assert count_quasi_bic(m, (880.0, 920.0), thr * 1.5)[0] <= n


# ---------------------------------------------------------------- scaling fit

def test_exactly_linear_data_fits_exactly():
    s = np.array([0.95, 0.965, 1.0, 1.035, 1.05])
    fit = fit_scaling(s, 873.66 * s + 24.97)
    assert fit.slope_nm == pytest.approx(873.66, abs=1e-9)
    assert fit.intercept_nm == pytest.approx(24.97, abs=1e-9)
    assert fit.rms_nm < 1e-9
    assert fit.factor_for(fit.wavelength(1.02)) == pytest.approx(1.02, abs=1e-12)
    with pytest.raises(ValueError):
        fit_scaling([1.0], [900.0])


def test_scaling_from_map_excludes_band_edge_rows():
    s = np.array([0.9, 0.97, 1.0, 1.03, 1.2])
    rows = [1 + lorentz(WL, 873.66 * v + 24.97, 4.0, 10.0) for v in s]
    pmap = PurcellMap("scale_factor", s, WL, np.array(rows), np.ones(len(s), bool))
    fit = scaling_from_map(pmap)
    assert set(fit.excluded) == {0.9, 1.2}
    assert fit.slope_nm == pytest.approx(873.66, rel=1e-3)
    assert "excluded" in fit.summary()


def test_scaling_follows_one_resonance_when_a_neighbour_is_stronger():
    s = np.array([0.965, 1.0, 1.035])
    rows = []
    for v in s:
        main = 873.66 * v + 24.97
        strength = 15.0 if v == 1.0 else 4.0  # enhancement only at the design point
        rows.append(1 + lorentz(WL, main, 3.0, strength) + lorentz(WL, main + 60 * (1 - 2 * (v > 1)), 4.0, 8.0))
    fit = scaling_from_map(PurcellMap("scale_factor", s, WL, np.array(rows), np.ones(3, bool)))
    assert not fit.excluded
    assert fit.slope_nm == pytest.approx(873.66, rel=2e-3)


# ---------------------------------------------------------------- engine with a fake cell

BASE = SceneSpec()
NUM = Numerics(resolution_nm=40.0)


def fake_cell(spec, numerics, fail_above=None):
    """Resonance moving linearly with size, no FDTD involved."""
    s = spec.diameter_nm / BASE.diameter_nm
    if fail_above is not None and spec.height_nm > fail_above:
        raise RuntimeError("synthetic failure")
    lam = 873.66 * s + 24.97 + 0.05 * (spec.height_nm - BASE.height_nm)
    return PurcellSpectrum(WL, 1 + lorentz(WL, lam, 4.0, 12.0), {}, spec.height_nm < 1e4).annotate()


CALLS = []


def counting_cell(spec, numerics):
    CALLS.append(spec.height_nm)
    return fake_cell(spec, numerics)


def test_apply_axis():
    assert apply_axis(BASE, "height_nm", 1200.0).height_nm == 1200.0
    assert apply_axis(BASE, "scale_factor", 1.1).diameter_nm == pytest.approx(1.1 * BASE.diameter_nm)
    assert apply_axis(BASE, "crown_height_nm", 40.0).crown_height_nm == 40.0
    assert apply_axis(BASE, "lateral_offset_nm", 50.0).dipole_lateral_offset_nm == 50.0
    with pytest.raises(ValueError):
        apply_axis(BASE, "diameter", 1.0)


def test_rows_follow_values_regardless_of_workers():
    hs = [1400.0, 1300.0, 1350.0]
    a = sweep(BASE, "height_nm", hs, NUM, cell_fn=fake_cell)
    b = sweep(BASE, "height_nm", hs, NUM, cell_fn=fake_cell, workers=2)
    assert list(a.values) == hs
    assert np.array_equal(a.factor, b.factor)
    for v, row in zip(hs, a.factor):
        assert np.array_equal(row, fake_cell(apply_axis(BASE, "height_nm", v), NUM).factor)


def test_failed_cell_is_recorded_and_others_finish():
    m = sweep(BASE, "height_nm", [1300.0, 1400.0, 1500.0], NUM, cell_fn=fake_cell,
              cell_kwargs={"fail_above": 1450.0})
    assert list(m.failed) == [False, False, True]
    assert np.all(np.isnan(m.factor[2])) and np.all(np.isfinite(m.factor[:2]))
    assert "synthetic failure" in m.errors[2]


def test_all_cells_failing_is_an_error():
    with pytest.raises(RuntimeError, match="every cell"):
        sweep(BASE, "height_nm", [1300.0], NUM, cell_fn=fake_cell, cell_kwargs={"fail_above": 0.0})


def test_store_reuses_finished_cells(tmp_path):
    CALLS.clear()
    a = sweep(BASE, "height_nm", [1300.0, 1400.0], NUM, store_dir=tmp_path, cell_fn=counting_cell)
    b = sweep(BASE, "height_nm", [1300.0, 1400.0, 1500.0], NUM, store_dir=tmp_path,
              cell_fn=counting_cell)
    assert CALLS == [1300.0, 1400.0, 1500.0]
    assert np.array_equal(a.factor, b.factor[:2])
    sweep(BASE, "height_nm", [1300.0], NUM.replace(resolution_nm=20.0), store_dir=tmp_path,
          cell_fn=counting_cell)
    assert CALLS[-1] == 1300.0 and len(CALLS) == 4  # different numerics: recomputed


def test_bad_value_lists():
    with pytest.raises(ValueError):
        sweep(BASE, "height_nm", [], NUM, cell_fn=fake_cell)
    with pytest.raises(ValueError):
        sweep(BASE, "height_nm", [1300.0, 1300.0], NUM, cell_fn=fake_cell)
    with pytest.raises(ValueError):
        sweep_height(BASE, [1400.0, 1300.0], NUM, cell_fn=fake_cell)
    with pytest.raises(ValueError):
        tolerance_sweep(BASE, "height", [1.0], NUM, cell_fn=fake_cell)


def test_single_value_sweep_is_that_cell():
    m = sweep_height(BASE, [1375.0], NUM, cell_fn=fake_cell)
    assert m.factor.shape == (1, len(WL))
    assert np.array_equal(m.factor[0], fake_cell(BASE.replace(height_nm=1375.0), NUM).factor)


def test_sweep_scale_recovers_the_linear_law():
    pmap, fit = sweep_scale(BASE, [0.965, 1.0, 1.035], NUM, cell_fn=fake_cell)
    # scaling moves the height too, which the fake cell also responds to
    assert fit.slope_nm == pytest.approx(873.66 + 0.05 * BASE.height_nm, rel=0.01)
    assert fit.wavelength(1.0) == pytest.approx(873.66 + 24.97, abs=0.5)


def test_tolerance_sweep_accepts_short_axis_names():
    m = tolerance_sweep(BASE, "crown_height", [0.0, 50.0], NUM, cell_fn=fake_cell)
    assert m.axis == "crown_height_nm"


# ---------------------------------------------------------------- files

def test_map_file_round_trip(tmp_path):
    m = two_oscillators(5.0, heights=np.arange(1300.0, 1480.0, 20.0))
    m.converged[3] = False
    m.factor[5] = np.nan
    m = PurcellMap(m.axis, m.values, m.wavelengths_nm, m.factor, m.converged)
    write_map(tmp_path / "map.tsv", m)
    back = read_map(tmp_path / "map.tsv")
    assert back.axis == "height_nm"
    assert np.allclose(back.values, m.values) and np.allclose(back.wavelengths_nm, m.wavelengths_nm)
    assert np.allclose(back.factor, m.factor, rtol=1e-7, equal_nan=True)
    assert list(back.converged) == [i not in (3, 5) for i in range(len(m.values))]
    assert list(back.failed) == list(m.failed)
