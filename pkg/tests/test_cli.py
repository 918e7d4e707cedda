import csv
import io
import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest

from phasecast import checks
from phasecast.cli import SCAN_COLUMNS, fmt, main

HEADER = "setting,N,phi,kappa,qfi,f_lower,sens_sigma_x,sens_bell,sens_opt,n_opt,seed"


def run(*argv):
    out = io.StringIO()
    code = main(list(argv), stdout=out)
    return code, out.getvalue()


def table(*argv):
    code, text = run(*argv)
    assert code == 0, text
    return list(csv.DictReader(io.StringIO(text)))


def column(rows, name):
    return np.array([float(r[name]) for r in rows])


# -- formatting -----------------------------------------------------------------

@pytest.mark.parametrize("value,text", [
    (None, "NA"), (math.nan, "NA"), (math.inf, "INF"), (85, "85"),
    (0.1, "0.1"), (1 / 3, "0.333333333333333"), (1.5e-20, "1.5e-20"), (2.5e21, "2.5e+21"),
])
def test_fmt(value, text):
    assert fmt(value) == text


def test_fmt_numpy_scalars():
    assert fmt(np.float64(2.0)) == "2"
    assert fmt(np.int64(7)) == "7"


# -- scan -----------------------------------------------------------------------

def test_scan_header_and_rows():
    code, text = run("scan", "--n-max", "5")
    assert code == 0
    lines = text.splitlines()
    assert lines[0] == HEADER
    assert ",".join(SCAN_COLUMNS) == HEADER
    assert len(lines) == 6
    assert [int(line.split(",")[1]) for line in lines[1:]] == [1, 2, 3, 4, 5]


def test_scan_sequential_peaks():
    rows = table("scan", "--setting", "sequential", "--phi", "0.1", "--kappa", "1", "--n-min", "1", "--n-max", "200")
    n = column(rows, "N")
    assert n[np.argmax(column(rows, "f_lower"))] == 85
    assert {r["n_opt"] for r in rows} == {"85"}
    # the QFI column peaks one round before the bound's maximum
    assert n[np.argmax(column(rows, "qfi"))] == 83


def test_scan_parallel_monotone_beyond_sequential_peak():
    seq = table("scan", "--n-max", "200")
    par = table("scan", "--setting", "parallel", "--n-max", "200")
    peak = int(column(seq, "N")[np.argmax(column(seq, "qfi"))])
    assert {r["f_lower"] for r in par} == {"NA"}
    # literal claim; the corner term's decay makes the GHZ curve dip (see the next test)
    q = column(par, "qfi")[peak - 1:]
    assert np.all(np.diff(q) > 0)


def test_scan_parallel_shape():
    seq = table("scan", "--n-max", "1600")
    par = table("scan", "--setting", "parallel", "--n-max", "1600")
    n, q = column(par, "N"), column(par, "qfi")
    peak = int(n[np.argmax(column(seq, "qfi"))])
    beyond = n > peak
    assert np.all(q[beyond] > column(seq, "qfi")[beyond])
    falling = np.flatnonzero(np.diff(q) < 0) + 1
    assert (falling.min(), falling.max()) == (143, 285)
    assert np.all(np.diff(q[285:]) > 0)          # minimum at N = 286
    assert abs(q[1599] / q[799] - 2) < 0.05


def test_scan_single_round_settings_agree():
    seq = table("scan", "--n-max", "1")[0]
    par = table("scan", "--setting", "parallel", "--n-max", "1")[0]
    anc = table("scan", "--setting", "ancilla", "--n-max", "1")[0]
    assert abs(float(seq["qfi"]) - float(par["qfi"])) <= 1e-9
    assert abs(float(seq["sens_sigma_x"]) - float(par["sens_sigma_x"])) <= 1e-9
    assert abs(float(seq["sens_sigma_x"]) - float(anc["sens_sigma_x"])) <= 1e-9
    # an entangled ancilla already gives 4 after a single use
    assert abs(float(anc["qfi"]) - 4) <= 1e-9


def test_scan_ancilla_columns():
    rows = table("scan", "--setting", "ancilla", "--n-max", "120")
    bell, sx, q = column(rows, "sens_bell"), column(rows, "sens_sigma_x"), column(rows, "qfi")
    assert np.all(sx <= bell + 1e-9) and np.all(bell <= q + 1e-9)


def test_scan_na_sentinels():
    rows = table("scan", "--n-max", "3", "--observables", "sld-optimal")
    assert all(r["sens_sigma_x"] == "NA" and r["sens_bell"] == "NA" for r in rows)
    assert all(r["sens_opt"] == r["qfi"] for r in rows)
    rows = table("scan", "--n-max", "3", "--observables", "sigma-x")
    assert all(r["sens_opt"] == "NA" and r["sens_sigma_x"] != "NA" for r in rows)


def test_scan_rows_respect_bound():
    rows = table("scan", "--n-max", "500", "--phi", "0.3", "--kappa", "2")
    assert np.all(column(rows, "f_lower") <= column(rows, "qfi") + 1e-9)


def test_scan_byte_identical():
    args = ("scan", "--n-max", "50", "--mc-samples", "2000", "--seed", "17")
    assert run(*args)[1] == run(*args)[1]


def test_scan_mc_seed_changes_output():
    a = run("scan", "--n-max", "3", "--mc-samples", "2000", "--seed", "1")[1]
    b = run("scan", "--n-max", "3", "--mc-samples", "2000", "--seed", "2")[1]
    assert a != b


def test_scan_mc_close_to_exact():
    exact = table("scan", "--n-max", "20")
    mc = table("scan", "--n-max", "20", "--mc-samples", "200000", "--seed", "3")
    assert np.allclose(column(mc, "qfi"), column(exact, "qfi"), rtol=0.05)


@pytest.mark.parametrize("setting", ["sequential", "ancilla", "parallel"])
def test_json_csv_round_trip(setting):
    csv_rows = table("scan", "--setting", setting, "--n-max", "12")
    code, text = run("scan", "--setting", setting, "--n-max", "12", "--format", "json")
    assert code == 0
    js = json.loads(text)
    assert len(js) == len(csv_rows)
    for a, b in zip(csv_rows, js):
        assert list(b) == list(SCAN_COLUMNS)
        for key in SCAN_COLUMNS:
            value = b[key]
            if isinstance(value, str) and value not in ("NA", "INF"):
                assert a[key] == value
            else:
                assert a[key] == fmt(value)


# -- config and seeds -----------------------------------------------------------

def test_config_file_and_override(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"setting": "ancilla", "phi": 0.3, "kappa": 2, "n_max": 4, "seed": 9}))
    rows = table("scan", "--config", str(path))
    assert len(rows) == 4 and rows[0]["setting"] == "ancilla" and rows[0]["phi"] == "0.3"
    assert rows[0]["seed"] == "9"
    rows = table("scan", "--config", str(path), "--n-max", "2", "--phi", "0.1", "--seed", "4")
    assert len(rows) == 2 and rows[0]["phi"] == "0.1" and rows[0]["seed"] == "4"


@pytest.mark.parametrize("payload", ['{"n_max": 3, "bogus": 1}', '{"phi": {"a": 1}}', "[1, 2]", "{nope"])
def test_config_rejects_bad_files(tmp_path, payload):
    path = tmp_path / "cfg.json"
    path.write_text(payload)
    assert run("scan", "--config", str(path))[0] == 1


def test_config_missing_file(tmp_path):
    assert run("scan", "--config", str(tmp_path / "absent.json"))[0] == 1


def test_seed_env_fallback(monkeypatch, tmp_path):
    monkeypatch.setenv("PHASECAST_SEED", "123")
    assert table("scan", "--n-max", "1")[0]["seed"] == "123"
    assert table("scan", "--n-max", "1", "--seed", "5")[0]["seed"] == "5"
    path = tmp_path / "cfg.json"
    path.write_text('{"seed": 77}')
    assert table("scan", "--n-max", "1", "--config", str(path))[0]["seed"] == "77"
    monkeypatch.delenv("PHASECAST_SEED")
    assert table("scan", "--n-max", "1")[0]["seed"] == "0"


def test_seed_env_invalid(monkeypatch):
    monkeypatch.setenv("PHASECAST_SEED", "abc")
    assert run("scan", "--n-max", "1")[0] == 1


def test_seed_range():
    assert run("scan", "--n-max", "1", "--seed", str(2**64 - 1))[0] == 0
    assert run("scan", "--n-max", "1", "--seed", str(2**64))[0] == 1
    assert run("scan", "--n-max", "1", "--seed", "-1")[0] == 1


# -- exit codes -----------------------------------------------------------------

@pytest.mark.parametrize("argv", [
    [], ["bogus"], ["scan", "--kappa", "-1"], ["scan", "--kappa", "x"], ["scan", "--n-min", "5", "--n-max", "2"],
    ["scan", "--n-min", "0"], ["scan", "--setting", "bogus"], ["scan", "--observables", "sigma-y"],
    ["scan", "--format", "xml"], ["scan", "--mc-samples", "-3"], ["trajectory", "--setting", "ancilla"],
    ["scan", "--phi", "nan"], ["nopt-contour", "--phi-grid", "0,0.1"], ["nopt-contour", "--kappa-grid", "1:2:0"],
    ["validate", "--inject-tolerance", "kraus-completeness=0"],
    ["validate", "--test-mode", "--inject-tolerance", "no-such-check=1"],
])
def test_usage_errors(argv, capsys):
    assert run(*argv)[0] == 1
    assert "phasecast" in capsys.readouterr().err or True


def test_numeric_domain_error(capsys):
    code, text = run("scan", "--phi", "0", "--n-max", "3")
    assert code == 3 and text == ""
    assert "numeric-domain" in capsys.readouterr().err


def test_parallel_small_phi_is_numeric_error():
    assert run("scan", "--setting", "parallel", "--phi", "1e-4", "--n-max", "3")[0] == 3


def test_parallel_cap():
    assert run("scan", "--setting", "parallel", "--n-min", "1000000", "--n-max", "1000001")[0] == 1


def test_console_script_exit_codes(tmp_path):
    env = dict(os.environ, PHASECAST_SEED="0")
    ok = subprocess.run([sys.executable, "-m", "phasecast", "channel-info"], capture_output=True, text=True, env=env)
    assert ok.returncode == 0 and ok.stdout.startswith("phi,kappa,")
    bad = subprocess.run([sys.executable, "-m", "phasecast", "scan", "--n-max", "x"], capture_output=True, text=True)
    assert bad.returncode == 1 and bad.stdout == ""


# -- nopt-contour ---------------------------------------------------------------

def contour(*argv):
    code, text = run("nopt-contour", *argv)
    assert code == 0
    lines = list(csv.reader(io.StringIO(text)))
    return lines[0], lines[1:]


def test_contour_reference_cell():
    header, body = contour("--phi-grid", "0.1", "--kappa-grid", "1")
    assert header == ["phi\\kappa", "1"]
    assert body == [["0.1", "85"]]


def test_contour_defaults_to_single_point():
    _, body = contour("--phi", "0.1", "--kappa", "1")
    assert body == [["0.1", "85"]]


def test_contour_small_corner_order_thousand():
    _, body = contour("--phi-grid", "0.01", "--kappa-grid", "0.1")
    assert 1e3 <= int(body[0][1]) < 1e4


def test_contour_monotone_in_kappa():
    _, body = contour("--phi-grid", "0.05:1.5:6", "--kappa-grid", "0.1,0.5,1,2,5,20,100")
    for row in body:
        vals = [int(v) for v in row[1:]]
        assert vals == sorted(vals)


def test_contour_inf_sentinel():
    _, body = contour("--phi-grid", "1e-20", "--kappa-grid", "1")
    assert body[0][1] == "INF"


def test_contour_json():
    code, text = run("nopt-contour", "--phi-grid", "0.1,0.2", "--kappa-grid", "1,2", "--format", "json")
    payload = json.loads(text)
    assert code == 0 and payload["phi"] == [0.1, 0.2] and payload["n_opt"][0][0] == 85
    assert len(payload["n_opt"]) == 2 and len(payload["n_opt"][0]) == 2


# -- trajectory and channel-info ------------------------------------------------

def test_trajectory_first_row():
    rows = table("trajectory", "--n-max", "4")
    assert len(rows) == 5
    first = rows[0]
    assert (first["N"], first["r_x"], first["r_y"], first["r_z"], first["sld_angle"]) == ("0", "1", "0", "0", "0")
    assert float(first["sens_sigma_x"]) == 0 and abs(float(first["qfi"])) <= 1e-12


def test_trajectory_sensitivity_tracks_angle():
    rows = table("trajectory", "--n-max", "120")[1:]
    angle = column(rows, "sld_angle")
    sx, q = column(rows, "sens_sigma_x"), column(rows, "qfi")
    folded = np.mod(angle, math.pi)
    perp = np.abs(folded - math.pi / 2) < 0.05
    along = np.minimum(folded, math.pi - folded) < 0.05
    assert perp.any() and along.any()
    # the SLD has an identity part, so the zero of F^sx trails the perpendicular angle slightly
    assert np.all(sx[perp] <= 0.1 * q[perp])
    assert np.all(sx[along] >= 0.95 * q[along])


def test_trajectory_matches_scan():
    traj = table("trajectory", "--n-max", "60")[1:]
    scan = table("scan", "--n-max", "60")
    assert np.allclose(column(traj, "qfi"), column(scan, "qfi"), atol=1e-6)
    assert np.allclose(column(traj, "sens_sigma_x"), column(scan, "sens_sigma_x"), atol=1e-6)


def test_channel_info_identity():
    row = table("channel-info", "--phi", "0", "--kappa", "1")[0]
    assert float(row["lambda_par"]) == pytest.approx(1, abs=1e-8)
    assert float(row["lambda_perp"]) == pytest.approx(1, abs=1e-8)
    assert float(row["g"]) == pytest.approx(0, abs=1e-8)
    assert row["n_opt"] == "INF"


def test_channel_info_reference():
    row = table("channel-info")[0]
    s = complex(float(row["S_re"]), float(row["S_im"]))
    assert abs(s) == pytest.approx(float(row["lambda_perp"]), rel=1e-14)
    assert float(row["mu"]) == pytest.approx(-float(row["g"]), abs=1e-15)
    assert row["n_opt"] == "85"


# -- validate -------------------------------------------------------------------

def test_validate_all_pass():
    code, text = run("validate")
    assert code == 0
    lines = text.splitlines()
    assert len(lines) == len(checks.REGISTRY)
    assert all(line.startswith("PASS  ") for line in lines)
    assert {line.split()[1] for line in lines} == {c.name for c in checks.REGISTRY}


def test_validate_injected_failure(capsys):
    code, text = run("validate", "--test-mode", "--inject-tolerance", "kraus-completeness=0")
    assert code == 2
    failing = [line for line in text.splitlines() if line.startswith("FAIL")]
    assert len(failing) == 1 and "kraus-completeness" in failing[0]
    assert "kraus-completeness" in capsys.readouterr().err


def test_validate_json():
    code, text = run("validate", "--format", "json")
    payload = json.loads(text)
    assert code == 0 and len(payload) == len(checks.REGISTRY)
    assert all(item["passed"] for item in payload)
