import json

import numpy as np
import pytest
import yaml

from nwcavity.cli import ConfigError, dump, main, parse, validate
from nwcavity.cli.store import (LOCK, MANIFEST, JobDir, JobLockedError, RunManifest, read_box,
                                read_field_slice, read_plane, sha256, write_box, write_field_slice,
                                write_plane)
from nwcavity.emission.farfield import read_farfield
from nwcavity.emission.purcell import read_purcell

SMALL = {
    "schema_version": 1,
    "scene": {"diameter_nm": 320, "height_nm": 400, "oxide_thickness_nm": 0, "mirror_kind": "pec",
              "dipole_offset_from_top_nm": 80},
    "numerics": {"resolution_nm": 40, "padding_nm": 320, "absorber_layers": 6, "sample_nm": 2,
                 "monitor_box_side_nm": 800, "checkpoint_every": 0},
    "analysis": {"dtheta_deg": 1, "dphi_deg": 4, "field_slice_step_nm": 25},
}


def write_cfg(path, data):
    path.write_text(yaml.safe_dump(data))
    return str(path)


# ---------------------------------------------------------------- configuration

def test_minimal_config_gets_the_documented_defaults():
    cfg = parse({"schema_version": 1, "scene": {"height_nm": 1400}})
    assert cfg.numerics.resolution_nm == 10.0
    assert cfg.numerics.monitor_box_side_nm == 4000.0
    assert cfg.scene.diameter_nm == 420.0 and cfg.scene.height_nm == 1400.0
    num = cfg.numerics_obj()
    assert num.band_nm == (850.0, 950.0)


def test_negative_diameter_is_one_clear_error():
    with pytest.raises(ConfigError) as err:
        parse({"schema_version": 1, "scene": {"diameter_nm": -5}})
    assert len(err.value.errors) == 1
    assert err.value.errors[0].startswith("scene.diameter_nm")


def test_mesh_order_is_rejected_with_a_note():
    with pytest.raises(ConfigError) as err:
        parse({"schema_version": 1, "numerics": {"mesh_order": 2}})
    assert "uniform cubic grid" in str(err.value) and "Deviations" in str(err.value)


def test_all_problems_reported_at_once():
    with pytest.raises(ConfigError) as err:
        parse({"schema_version": 1, "scene": {"height_nm": 0},
               "numerics": {"resolution_nm": -1, "bogus": 1}, "analysis": {"na": [1.5]}})
    locs = {e.split(":")[0] for e in err.value.errors}
    assert {"scene.height_nm", "numerics.resolution_nm", "numerics.bogus", "analysis.na"} <= locs


def test_schema_version_is_required():
    with pytest.raises(ConfigError, match="schema_version"):
        parse({"scene": {}})


def test_sweep_block_forms():
    cfg = parse({"schema_version": 1, "sweep": {"axis": "height_nm", "start": 1200, "stop": 1300,
                                                "step": 50}})
    assert cfg.sweep.resolved_values() == [1200.0, 1250.0, 1300.0]
    with pytest.raises(ConfigError):
        parse({"schema_version": 1, "sweep": {"axis": "height_nm", "values": [1], "start": 1}})
    with pytest.raises(ConfigError):
        parse({"schema_version": 1, "sweep": {"axis": "diameter", "values": [1]}})


def test_resolved_config_round_trip_with_provenance(tmp_path):
    cfg = parse(SMALL)
    dump(cfg, tmp_path / "r.yaml")
    doc = yaml.safe_load((tmp_path / "r.yaml").read_text())
    assert doc["provenance"]["scene.diameter_nm"] == "config"
    assert doc["provenance"]["scene.nanowire_index"] == "default"
    assert doc["provenance"]["modes"] == "default"
    back = validate(tmp_path / "r.yaml")
    assert back == cfg and back.digest() == cfg.digest()


def test_json_config_accepted(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps(SMALL))
    assert validate(p) == parse(SMALL)


# ---------------------------------------------------------------- job directories

def test_job_lock_refuses_a_second_job(tmp_path):
    with JobDir(tmp_path, "run", "h"):
        with pytest.raises(JobLockedError):
            JobDir(tmp_path, "run", "h")
    assert not (tmp_path / LOCK).exists()
    JobDir(tmp_path, "run", "h").close()


def test_interrupted_job_is_marked_incomplete(tmp_path):
    with pytest.raises(RuntimeError):
        with JobDir(tmp_path, "run", "h") as job:
            job.write_text("a.txt", "x\n")
            raise RuntimeError("boom")
    man = RunManifest.read(tmp_path / MANIFEST)
    assert man.status == "incomplete"
    assert man.files["a.txt"] == sha256(tmp_path / "a.txt")


def test_validate_command(tmp_path, capsys):
    assert main(["validate", "--config", write_cfg(tmp_path / "c.yaml", SMALL)]) == 0
    assert json.loads(capsys.readouterr().out)["scene"]["diameter_nm"] == 320.0
    bad = dict(SMALL, numerics={"mesh_order": 2})
    assert main(["validate", "--config", write_cfg(tmp_path / "b.yaml", bad)]) == 2


def test_report_on_an_empty_directory_writes_nothing(tmp_path, capsys):
    empty = tmp_path / "empty"
    empty.mkdir()
    assert main(["report", "--out", str(empty)]) == 1
    assert "no job manifest" in capsys.readouterr().err
    assert list(empty.iterdir()) == []


def test_resume_without_checkpoint_is_an_error(tmp_path):
    cfg = write_cfg(tmp_path / "c.yaml", SMALL)
    assert main(["--quiet", "run", "--config", cfg, "--out", str(tmp_path / "o"), "--resume"]) == 1


def test_locked_output_directory_is_an_error(tmp_path):
    out = tmp_path / "o"
    out.mkdir()
    (out / LOCK).write_text("1")
    cfg = write_cfg(tmp_path / "c.yaml", dict(SMALL, modes={"diameter_start_nm": 300,
                                                            "diameter_stop_nm": 320}))
    assert main(["--quiet", "modes", "--config", cfg, "--out", str(out)]) == 1


# ---------------------------------------------------------------- commands

@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("run")
    cfg = write_cfg(root / "c.yaml", SMALL)
    code = main(["--quiet", "run", "--config", cfg, "--out", str(root / "out"), "--threads", "1"])
    return root, code


def test_run_writes_a_complete_job(run_dir):
    root, code = run_dir
    out = root / "out"
    assert code == 0
    man = RunManifest.read(out / MANIFEST)
    assert man.status == "complete" and man.all_converged
    for name in ("purcell.tsv", "purcell.gp", "farfield.tsv", "farfield_polar.tsv", "box_phasors.npz",
                 "field_slice.tsv", "field_phasors.npz", "summary.json", "config.resolved.yaml"):
        assert man.files[name] == sha256(out / name)
    assert not (out / "checkpoint.npz").exists() and not (out / LOCK).exists()
    s = json.loads((out / "summary.json").read_text())
    for key in ("converged", "total_power_W", "upward_power_W", "farfield_power_W",
                "efficiency", "gaussian_overlap", "gaussian_theta0_deg"):
        assert key in s
    assert 0 < s["efficiency"]["0.8"] <= 1 and 0 <= s["gaussian_overlap"] <= 1
    assert s["farfield_power_W"] == pytest.approx(s["upward_power_W"], rel=0.05)
    assert np.all(read_purcell(out / "purcell.tsv").factor > 0)


def test_report_verifies_the_run(run_dir, capsys):
    root, _ = run_dir
    assert main(["report", "--out", str(root / "out")]) == 0
    text = capsys.readouterr().out
    assert "checksum_mismatches\t0" in text and "farfield_power_W" in text


def test_report_detects_a_modified_file(run_dir, tmp_path):
    import shutil
    root, _ = run_dir
    copy = tmp_path / "copy"
    shutil.copytree(root / "out", copy)
    with open(copy / "purcell.gp", "a") as fh:
        fh.write("# edited\n")
    assert main(["--quiet", "report", "--out", str(copy)]) == 3


def test_farfield_command_reproduces_the_run(run_dir, tmp_path):
    root, _ = run_dir
    code = main(["--quiet", "farfield", "--config", str(root / "c.yaml"), "--out", str(tmp_path / "ff"),
                 "--from", str(root / "out")])
    assert code == 0
    a = json.loads((root / "out" / "summary.json").read_text())
    b = json.loads((tmp_path / "ff" / "summary.json").read_text())
    assert b["efficiency"]["0.8"] == pytest.approx(a["efficiency"]["0.8"], rel=1e-9)
    for key in ("gaussian_overlap", "farfield_power_W"):
        assert b[key] == pytest.approx(a[key], rel=1e-9)


def test_phasor_files_round_trip(run_dir, tmp_path):
    root, _ = run_dir
    box = read_box(root / "out" / "box_phasors.npz")
    write_box(tmp_path / "b.npz", box)
    again = read_box(tmp_path / "b.npz")
    assert again.symmetry == box.symmetry and len(again.faces) == len(box.faces)
    for f, g in zip(box.faces, again.faces):
        assert np.array_equal(f.e, g.e) and np.array_equal(f.h, g.h) and f.axis == g.axis
    assert np.array_equal(again.flux(), box.flux())
    plane = read_plane(root / "out" / "field_phasors.npz")
    write_plane(tmp_path / "p.npz", plane)
    assert np.array_equal(read_plane(tmp_path / "p.npz").e, plane.e)
    write_field_slice(tmp_path / "s.tsv", plane, plane.wavelengths_nm[0])
    u, v, mag = read_field_slice(tmp_path / "s.tsv")
    assert np.allclose(u, plane.u_nm, atol=1e-3) and np.allclose(v, plane.v_nm, atol=1e-3)
    assert np.allclose(mag, plane.magnitude(plane.wavelengths_nm[0]), rtol=1e-7)
    ff = read_farfield(root / "out" / "farfield.tsv")
    assert ff.intensity.shape == (91, 90)


def test_phasor_reader_rejects_other_files(tmp_path):
    np.savez(tmp_path / "x.npz", a=np.zeros(3))
    with pytest.raises(ValueError, match="not a phasor file"):
        read_box(tmp_path / "x.npz")


def test_modes_command(tmp_path):
    data = dict(SMALL, modes={"diameter_start_nm": 400, "diameter_stop_nm": 500,
                              "diameter_step_nm": 50, "hexagon": True, "operating_diameter_nm": 425})
    out = tmp_path / "m"
    assert main(["--quiet", "modes", "--config", write_cfg(tmp_path / "c.yaml", data),
                 "--out", str(out)]) == 0
    rows = [line.split("\t") for line in (out / "modes.tsv").read_text().splitlines()
            if not line.startswith("#")]
    labels = [r[0] for r in rows]
    assert labels[0] == "HE11" and "EH11" in labels
    weights = {r[0]: float(r[3]) for r in rows}
    assert weights["TE01"] == 0.0 and weights["HE11"] > 0
    assert all(float(r[2]) < 1e-10 for r in rows)
    assert "HE11\t" in (out / "dispersion.tsv").read_text()


def test_modes_without_block_is_an_error(tmp_path):
    assert main(["--quiet", "modes", "--config", write_cfg(tmp_path / "c.yaml", SMALL),
                 "--out", str(tmp_path / "m")]) == 1


def test_fit_material_command(tmp_path):
    out = tmp_path / "f"
    assert main(["--quiet", "fit-material", "--config", write_cfg(tmp_path / "c.yaml", SMALL),
                 "--out", str(out)]) == 0
    fit = json.loads((out / "material.json").read_text())
    assert fit["max_relative_error"] <= 0.02 and len(fit["poles"]) == 2
    tight = dict(SMALL, material={"tolerance": 1e-6})
    assert main(["--quiet", "fit-material", "--config", write_cfg(tmp_path / "t.yaml", tight),
                 "--out", str(tmp_path / "t")]) == 3


def test_sweep_command(tmp_path):
    data = dict(SMALL, sweep={"axis": "crown_height_nm", "values": [0, 40]})
    data["numerics"] = dict(SMALL["numerics"], farfield=False)
    out = tmp_path / "s"
    assert main(["--quiet", "sweep", "--config", write_cfg(tmp_path / "c.yaml", data),
                 "--out", str(out), "--threads", "1"]) == 0
    text = (out / "map.tsv").read_text()
    assert text.startswith("# axis=crown_height_nm")
    assert len((out / "analysis.txt").read_text().splitlines()) == 3
    assert len(list((out / "cells").glob("*.npz"))) == 2
