import json
import os

import numpy as np
import pytest

from nanocasimir import calibration as C
from nanocasimir.cli import main
from nanocasimir.electrostatics import BetaCurve
from nanocasimir.pfa import CurveMode, ForceCurve
from nanocasimir.presets import TCELL_CAVEAT


@pytest.fixture(scope="module")
def plates_file(tmp_path_factory):
    out = tmp_path_factory.mktemp("geom")
    assert main(["geometry", "export", "plates", "--width-nm", "400", "--gap-nm", "100",
                 "--period-nm", "800", "--out", str(out), "--name", "plates.json"]) == 0
    return str(out / "plates.json")


@pytest.fixture(scope="module")
def precomputed(tmp_path_factory):
    # smooth stand-ins for beta(d) and F'(d) covering the synthetic preset range
    out = tmp_path_factory.mktemp("curves")
    d = np.arange(50, 101) * 10e-9
    beta = BetaCurve(d, -1.5e-3 + 2e-3 * ((d - 770e-9) / 300e-9) ** 2)
    dc = np.arange(100, 201) * 5e-9
    grad = 4e-8 * np.tanh((dc - 770e-9) / 80e-9)
    cas = ForceCurve(dc, np.zeros_like(dc), grad, CurveMode.COMBINED, {})
    (out / "beta.csv").write_text(beta.to_csv("x"))
    (out / "cas.csv").write_text(cas.to_csv("x"))
    return str(out / "beta.csv"), str(out / "cas.csv")


def fc_args(geom, out, *extra):
    return ["force-curve", "--geometry", geom, "--d-start-nm", "0", "--d-stop-nm", "40",
            "--d-step-nm", "5", "--out", str(out), *extra]


def read_all(path):
    return {n: (path / n).read_bytes() for n in sorted(os.listdir(path))}


def test_help_mentions_caveat(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--help"])
    assert info.value.code == 0
    assert TCELL_CAVEAT in " ".join(capsys.readouterr().out.split())


def test_force_curve_outputs_and_hash(plates_file, tmp_path):
    assert main(fc_args(plates_file, tmp_path)) == 0
    report = json.loads((tmp_path / "force_curve.json").read_text())
    csv = (tmp_path / "force_curve.csv").read_text()
    assert csv.startswith(f"# config_hash={report['config_hash']}\n")
    back = ForceCurve.from_csv(csv)
    assert np.all(back.force > 0)
    assert report["sign_changes_nm"] == []


def test_outputs_are_byte_identical_across_threads(plates_file, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(fc_args(plates_file, a, "--threads", "1", "--band")) == 0
    assert main(fc_args(plates_file, b, "--threads", "3", "--band")) == 0
    assert read_all(a) == read_all(b)
    assert set(read_all(a)) == {"force_curve.csv", "force_curve.json", "force_curve_band.csv"}


def test_flags_override_config_file(plates_file, tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"geometry": plates_file,
                               "force_curve": {"d_start_nm": 0, "d_stop_nm": 20, "d_step_nm": 5,
                                               "mode": "EnergyX"}}))
    assert main(["force-curve", "--config", str(cfg), "--mode", "ForceY", "--out", str(tmp_path / "o")]) == 0
    report = json.loads((tmp_path / "o" / "force_curve.json").read_text())
    assert report["config"]["force_curve"]["mode"] == "ForceY"  # flag beats file
    assert report["config"]["force_curve"]["d_stop_nm"] == 20  # file beats preset
    assert report["config"]["force_curve"]["resolution_nm"] == 1.0  # preset default


def test_configuration_errors_exit_1(plates_file, tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"colour": "blue"}))
    assert main(["force-curve", "--config", str(bad)]) == 1
    assert main(["force-curve", "--material", "unobtainium", "--out", str(tmp_path)]) == 1
    assert main(["force-curve", "--geometry", str(tmp_path / "missing.json")]) == 1
    assert main(fc_args(plates_file, tmp_path, "--threads", "0")) == 1
    assert main(["material", "unobtainium"]) == 1
    with pytest.raises(SystemExit) as info:
        main(["force-curve", "--mode", "Sideways"])
    assert info.value.code == 1
    assert not (tmp_path / "force_curve.csv").exists()
    capsys.readouterr()


def test_numerical_failure_exits_2(plates_file, tmp_path, capsys):
    code = main(["beta", "--geometry", plates_file, "--spacing-nm", "50", "--d-start-nm", "0",
                 "--d-stop-nm", "20", "--d-step-nm", "10", "--out", str(tmp_path)])
    assert code == 2
    assert "electrostatics" in capsys.readouterr().err
    assert not (tmp_path / "beta.csv").exists()


def test_beta_command(plates_file, tmp_path):
    args = ["beta", "--geometry", plates_file, "--d-start-nm", "0", "--d-stop-nm", "20",
            "--d-step-nm", "5", "--out"]
    assert main(args + [str(tmp_path / "a")]) == 0
    assert main(args + [str(tmp_path / "b"), "--threads", "2"]) == 0
    assert read_all(tmp_path / "a") == read_all(tmp_path / "b")
    h = json.loads((tmp_path / "a" / "beta.json").read_text())["config_hash"]
    curve = BetaCurve.from_csv((tmp_path / "a" / "beta.csv").read_text())
    assert (tmp_path / "a" / "beta.csv").read_text().startswith(f"# config_hash={h}")
    assert np.all(np.diff(curve.beta) > 0)


def test_synthetic_calibration_is_seeded(precomputed, tmp_path):
    beta_csv, cas_csv = precomputed
    base = ["calibrate", "--beta-csv", beta_csv, "--casimir-csv", cas_csv, "--noise", "0.05"]
    assert main(base + ["--seed", "5", "--out", str(tmp_path / "a")]) == 0
    assert main(base + ["--seed", "5", "--out", str(tmp_path / "b"), "--threads", "4"]) == 0
    assert main(base + ["--seed", "6", "--out", str(tmp_path / "c")]) == 0
    a, b, c = (read_all(tmp_path / n) for n in "abc")
    assert a == b
    assert a["grid.csv"] != c["grid.csv"]
    report = json.loads(a["calibration.json"])
    h = report["config_hash"]
    for name in ("grid.csv", "v0.csv", "casimir_residual.csv"):
        assert a[name].decode().startswith(f"# config_hash={h}\n")
    assert abs(report["recovery"]["alpha_rel_error"]) < 0.01
    assert abs(report["recovery"]["k_rel_error"]) < 0.01


def test_calibrate_from_grid_file(precomputed, tmp_path, capsys):
    beta_csv, _ = precomputed
    beta = BetaCurve.from_csv(open(beta_csv).read())
    d = np.arange(60, 91) * 10e-9
    grid = C.synthesize_grid(C.SyntheticTruth(), beta, lambda x: 4e-8 * np.tanh((x - 770e-9) / 80e-9),
                             np.sqrt(d / C.PAPER_ALPHA), np.linspace(-0.3, 0.3, 9))
    (tmp_path / "grid.csv").write_text(grid.to_csv())
    assert main(["calibrate", "--grid", str(tmp_path / "grid.csv"), "--beta-csv", beta_csv,
                 "--out", str(tmp_path / "o")]) == 0
    report = json.loads((tmp_path / "o" / "calibration.json").read_text())
    assert report["result"]["alpha_nm_per_V2"] == pytest.approx(5.48, rel=5e-3)

    narrow = C.CalibrationGrid(grid.v_comb, [0.1], grid.delta_omega[:, :1])
    (tmp_path / "narrow.csv").write_text(narrow.to_csv())
    assert main(["calibrate", "--grid", str(tmp_path / "narrow.csv"), "--beta-csv", beta_csv,
                 "--out", str(tmp_path / "n")]) == 1
    assert "insufficient V_e span" in capsys.readouterr().err


def test_material_and_geometry_commands(tmp_path, capsys):
    assert main(["material", "paper-silicon", "--points", "3"]) == 0
    assert "11.87" in capsys.readouterr().out
    assert main(["geometry", "check"]) == 0
    assert TCELL_CAVEAT in capsys.readouterr().out
    assert main(["geometry", "export", "paper-tcell", "--out", str(tmp_path), "--name", "t.json"]) == 0
    assert main(["geometry", "check", str(tmp_path / "t.json")]) == 0


def test_perfect_conductor_plates_match_ideal_law(plates_file, tmp_path):
    from scipy.constants import hbar, c, pi
    assert main(fc_args(plates_file, tmp_path, "--material", "perfect-conductor", "--mode", "ForceY")) == 0
    curve = ForceCurve.from_csv((tmp_path / "force_curve.csv").read_text())
    meta = json.loads((tmp_path / "force_curve.json").read_text())
    thickness = meta["metadata"]["thickness_m"]
    gap = 100e-9 - curve.displacements
    ideal = pi**2 * hbar * c / (240 * gap**4) * 400e-9 * thickness
    np.testing.assert_allclose(curve.force, ideal, rtol=5e-3)
