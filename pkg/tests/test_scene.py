import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nwcavity.scene import (GeometryError, MaterialFitError, SceneSpec, constant_index,
                            fit_metal_poles, gold_model, gold_table, permittivity_at, rasterize)
from nwcavity.scene.materials import (OutOfBandError, check_causality, drude_table,
                                      interpolate_table, read_permittivity_table)
from nwcavity.scene.raster import MIRROR_ID, OXIDE_ID, WIRE_ID, build_domain


def wire_cells(grid):
    return grid.count(WIRE_ID)


# ---------------------------------------------------------------- geometry

def test_defaults_are_the_optimal_cavity():
    s = SceneSpec()
    assert (s.diameter_nm, s.height_nm, s.oxide_thickness_nm) == (420.0, 1375.0, 12.0)
    assert s.dipole_position_nm == (0.0, 0.0, 12.0 + 1375.0 - 30.0)
    assert s.nanowire_index == 3.44 and s.oxide_index == 1.45


@pytest.mark.parametrize("kw, msg", [
    (dict(diameter_nm=-1.0), "diameter"),
    (dict(height_nm=50.0, crown_height_nm=60.0), "crown"),
    (dict(oxide_thickness_nm=-2.0), "oxide"),
    (dict(mirror_kind="silver"), "mirror_kind"),
    (dict(nanowire_index=0.5), "indices"),
    (dict(dipole_offset_from_top_nm=2000.0), "outside"),
    (dict(dipole_lateral_offset_nm=300.0), "outside"),
])
def test_invalid_scenes_are_rejected(kw, msg):
    with pytest.raises(GeometryError, match=msg):
        SceneSpec(**kw)


def test_dipole_on_the_surface_is_not_strictly_inside():
    # offset 0 puts the dipole on the top facet
    with pytest.raises(GeometryError):
        SceneSpec(dipole_offset_from_top_nm=0.0)


def test_no_mirror_ignores_oxide():
    a = SceneSpec(mirror_enabled=False, oxide_thickness_nm=12.0)
    b = SceneSpec(mirror_enabled=False, oxide_thickness_nm=0.0)
    assert a.wire_base_nm == b.wire_base_nm == 0.0
    assert a.dipole_position_nm == b.dipole_position_nm


def test_crown_tapers_linearly():
    s = SceneSpec(crown_height_nm=100.0, height_nm=1000.0, oxide_thickness_nm=0.0,
                  dipole_offset_from_top_nm=150.0)
    z = np.array([500.0, 900.0, 950.0, 1000.0])
    assert np.allclose(s.half_width_at(z), [210.0, 210.0, 105.0, 0.0])
    assert math.isclose(s.wire_volume_nm3(),
                        s.hexagon_area_nm2() * 900.0 + s.hexagon_area_nm2() * 100.0 / 3.0)


def test_scaled_keeps_aspect_and_index():
    s = SceneSpec(crown_height_nm=50.0).scaled(1.035)
    assert math.isclose(s.diameter_nm, 420 * 1.035)
    assert math.isclose(s.height_nm, 1375 * 1.035)
    assert math.isclose(s.crown_height_nm, 50 * 1.035)
    assert s.nanowire_index == 3.44 and s.dipole_offset_from_top_nm == 30.0


def test_dict_round_trip_and_unknown_keys():
    s = SceneSpec(dipole_orientation=(0.0, 1.0, 0.0), crown_height_nm=20.0)
    assert SceneSpec.from_dict(s.to_dict()) == s
    with pytest.raises(GeometryError, match="unknown"):
        SceneSpec.from_dict({"mesh_order": 2})


def test_lateral_offset_follows_polarization():
    s = SceneSpec(dipole_lateral_offset_nm=100.0, dipole_orientation=(0.0, 1.0, 0.0))
    x, y, _ = s.dipole_position_nm
    assert (x, y) == (0.0, 100.0)


# ---------------------------------------------------------------- rasterization

def test_optimal_wire_cell_count_matches_prism_volume():
    # quarter domain by symmetry, so the count is a quarter of the prism
    s = SceneSpec()
    g = rasterize(s, 10.0, 60.0, absorber_layers=4)
    expected = 1.5 * math.sqrt(3) * 210.0 ** 2 * 1375.0 / 1000.0
    assert expected == pytest.approx(157_500, rel=0.02)
    assert 4 * wire_cells(g) == pytest.approx(expected, rel=0.02)


def test_flat_top_facet():
    s = SceneSpec(height_nm=400.0, oxide_thickness_nm=0.0, mirror_kind="pec")
    g = rasterize(s, 10.0, 60.0, absorber_layers=4)
    zc = g.domain.coords(2, 0.5)[: g.domain.shape[2]]
    wire_z = zc[np.any(g.cell_material == WIRE_ID, axis=(0, 1))]
    assert wire_z.max() == pytest.approx(395.0)
    # every column inside the hexagon reaches the same top cell
    top = g.cell_material[:, :, np.searchsorted(zc, 395.0)] == WIRE_ID
    below = g.cell_material[:, :, np.searchsorted(zc, 205.0)] == WIRE_ID
    assert np.array_equal(top, below)


def test_suspended_wire_has_no_gold_or_oxide():
    s = SceneSpec(mirror_enabled=False, oxide_thickness_nm=12.0, height_nm=400.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        g = rasterize(s, 20.0, 400.0)
    assert g.count(MIRROR_ID) == 0 and g.count(OXIDE_ID) == 0
    assert "gold" not in [m.name for m in g.materials] or g.count(MIRROR_ID) == 0


def test_thin_oxide_warns_and_is_averaged():
    s = SceneSpec(height_nm=400.0)
    with pytest.warns(UserWarning, match="thinner than the cell"):
        g = rasterize(s, 20.0, 400.0)
    # ex nodes beside the wire, just above the gold, see a partial oxide permittivity
    inv = g.inv_eps["ex"][g.domain.shape[0] - 3, g.domain.shape[1] - 3, :]
    vals = 1.0 / inv[inv > 0]
    assert np.any((vals > 1.0 + 1e-9) & (vals < 1.45 ** 2 - 1e-9))


def test_every_cell_has_one_declared_material():
    s = SceneSpec(height_nm=400.0, crown_height_nm=80.0, dipole_offset_from_top_nm=120.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        g = rasterize(s, 20.0, 400.0)
    ids = np.unique(g.cell_material)
    assert set(ids.tolist()) <= set(range(len(g.materials)))


def test_rasterization_is_deterministic():
    s = SceneSpec(height_nm=400.0, crown_height_nm=60.0, dipole_offset_from_top_nm=100.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        a = rasterize(s, 20.0, 400.0)
        b = rasterize(s, 20.0, 400.0)
    assert np.array_equal(a.cell_material, b.cell_material)
    for c in ("ex", "ey", "ez"):
        assert np.array_equal(a.inv_eps[c], b.inv_eps[c])


def test_full_domain_is_mirror_symmetric():
    s = SceneSpec(height_nm=400.0, oxide_thickness_nm=0.0, mirror_kind="pec")
    g = rasterize(s, 10.0, 150.0, absorber_layers=8, symmetry=False)
    m = g.cell_material
    assert np.array_equal(m, m[::-1, :, :])
    assert np.array_equal(m, m[:, ::-1, :])


def test_resolution_convergence_of_wire_volume():
    s = SceneSpec(height_nm=400.0, oxide_thickness_nm=0.0, mirror_kind="pec")
    exact = s.wire_volume_nm3()
    vols = []
    for dx in (20.0, 10.0):
        g = rasterize(s, dx, 12 * dx, absorber_layers=4)
        vols.append(4 * wire_cells(g) * dx ** 3)
    # one shell of surface cells at the coarse resolution
    perimeter = 6 * 210.0
    shell = (perimeter * 400.0 + 2 * s.hexagon_area_nm2()) * 20.0
    assert abs(vols[1] - vols[0]) < shell
    assert abs(vols[1] - exact) < abs(vols[0] - exact) + 0.5 * shell


def test_padding_must_fit_absorber():
    with pytest.raises(GeometryError, match="absorber"):
        build_domain(SceneSpec(), 10.0, 50.0, absorber_layers=12)


# ---------------------------------------------------------------- materials

@pytest.mark.parametrize("n, eps", [(3.44, 11.8336), (1.0, 1.0), (1.45, 2.1025)])
def test_constant_index_permittivity(n, eps):
    m = constant_index(n)
    assert m.poles == ()
    assert permittivity_at(m, 900.0) == pytest.approx(eps, abs=1e-12)
    assert np.allclose(permittivity_at(m, [850.0, 950.0]), eps)


def test_constant_table_fits_to_constant():
    wl = np.linspace(700, 1100, 41)
    m = fit_metal_poles([(w, 2.25 + 0j) for w in wl], (800, 1000), n_poles=1)
    assert m.epsilon_infinity == pytest.approx(2.25, abs=1e-6)
    assert sum(s for s, _, _ in m.poles) == pytest.approx(0.0, abs=1e-6 * 1e30)
    assert m.fit_residual < 1e-8


def test_drude_round_trip():
    wp, gamma = 1.37e16, 1.0e14
    table = drude_table(np.linspace(700, 1100, 81), 1.0, wp, gamma)
    m = fit_metal_poles(table, (800, 1000), n_poles=1)
    (sigma, w0, g), = m.poles
    assert w0 == 0.0
    assert math.sqrt(sigma) == pytest.approx(wp, rel=0.01)
    assert g == pytest.approx(gamma, rel=0.01)
    assert m.fit_residual < 1e-6


def test_bundled_gold_fit_quality():
    m = gold_model((800.0, 1000.0), 2)
    assert m.fit_residual <= 0.02
    assert check_causality(m)
    wl, eps = gold_table()
    e900 = interpolate_table(wl, eps, 900.0)
    assert abs(permittivity_at(m, 900.0) - e900) / abs(e900) <= m.fit_residual + 1e-12
    # exp(-i w t) convention: loss means Im eps > 0 across the band
    band = np.linspace(800, 1000, 101)
    assert np.all(permittivity_at(m, band).imag > 0)


def test_out_of_band_is_refused():
    m = gold_model()
    with pytest.raises(OutOfBandError):
        permittivity_at(m, 1200.0)
    permittivity_at(m, 1200.0, allow_out_of_band=True)


def test_fit_tolerance_violation_carries_model():
    wl, eps = gold_table()
    with pytest.raises(MaterialFitError) as info:
        fit_metal_poles(list(zip(wl, eps)), (450.0, 1000.0), n_poles=1, tolerance=1e-4)
    assert info.value.model.fit_residual > 1e-4


def test_table_must_cover_band():
    with pytest.raises(ValueError, match="cover"):
        fit_metal_poles([(850.0, -30 + 1j), (950.0, -35 + 1j)], (800, 1000))


def test_read_table(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("# wl, re, im\n900,-30.5,1.2\n800,-24,1.5\n")
    wl, eps = read_permittivity_table(p)
    assert list(wl) == [800.0, 900.0]
    assert eps[1] == -30.5 + 1.2j


@given(st.floats(1.0, 4.0), st.floats(400.0, 2000.0))
def test_dielectric_permittivity_real_and_at_least_one(n, wl):
    e = permittivity_at(constant_index(n), wl)
    assert e.imag == 0.0 and e.real >= 1.0


@given(st.floats(150.0, 600.0), st.floats(300.0, 2500.0), st.floats(0.0, 0.9),
       st.floats(0.0, 0.9))
def test_valid_scenes_contain_their_dipole(d, h, crown_frac, depth_frac):
    crown = crown_frac * 0.5 * h
    depth = crown + depth_frac * (h - crown) * 0.9 + 1.0
    try:
        s = SceneSpec(diameter_nm=d, height_nm=h, crown_height_nm=crown,
                      dipole_offset_from_top_nm=depth)
    except GeometryError:
        return
    x, y, z = s.dipole_position_nm
    assert s.contains_wire(np.array([x]), np.array([y]), np.array([z]), strict=True)[0]
