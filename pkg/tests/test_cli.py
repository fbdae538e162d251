import csv
import json
import subprocess
import sys

import numpy as np
import pytest
from conftest import W_CANON

from witnesskit import serialize
from witnesskit.cli import parse_float_list, run


def call(capsys, *argv):
    code = run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def wfile(tmp_path, capsys):
    path = tmp_path / "w.json"
    code, _, _ = call(capsys, "witness", "construct", "--state", "form1:p=1,a=0.7071067811865476",
                      "--out", str(path))
    assert code == 0
    return path


def test_witness_construct_matches_canonical(wfile):
    w = serialize.witness_from_json(serialize.read_json(wfile))
    assert w.kind == "npt_eigvec"
    assert np.allclose(w.op, W_CANON, atol=1e-12)
    assert w.provenance["pt_min_eigenvalue"] == pytest.approx(-0.5)


def test_witness_construct_rejects_ppt(capsys):
    code, out, err = call(capsys, "witness", "construct", "--state", "form1:p=0.2")
    assert code == 1 and out == ""
    msg = json.loads(err)
    assert msg["error"] == "NoWitnessError" and "no NPT witness" in msg["message"]


def test_witness_tau(capsys):
    code, out, _ = call(capsys, "witness", "tau", "--d", "0")
    assert code == 0 and json.loads(out) == {"d": 0.0, "tau": 0.0}
    code, _, err = call(capsys, "witness", "tau", "--d", "0.5")
    assert code == 1 and "1/sqrt(12)" in json.loads(err)["message"]


def test_witness_epsilon_needs_seed(wfile, capsys):
    code, _, err = call(capsys, "witness", "epsilon", "--operator", str(wfile))
    assert code == 2 and "--seed" in err


def test_witness_epsilon(wfile, capsys):
    code, out, _ = call(capsys, "witness", "epsilon", "--operator", str(wfile), "--seed", "1",
                        "--restarts", "10")
    res = json.loads(out)
    assert code == 0 and res["value"] == pytest.approx(0.0, abs=1e-9)
    assert len(serialize.ket_from_json(res["argmin"]["e"])) == 2


@pytest.mark.parametrize("mode,n_settings", [("onp", 4), ("ons", 3), ("generic", 3)])
def test_decompose_then_verify(wfile, tmp_path, capsys, mode, n_settings):
    dpath = tmp_path / f"{mode}.json"
    code, _, _ = call(capsys, "decompose", "--witness", str(wfile), "--mode", mode, "--out", str(dpath))
    assert code == 0
    code, out, _ = call(capsys, "verify", "--target", str(wfile), "--decomposition", str(dpath))
    rep = json.loads(out)
    assert code == 0 and rep["ok"] and rep["n_settings"] == n_settings
    assert rep["max_error"] <= 1e-10


def test_decompose_two_qubit_modes_refuse_other_dims(tmp_path, capsys):
    path = tmp_path / "w9.json"
    code, _, _ = call(capsys, "witness", "construct", "--state", "upb:p=1", "--out", str(path))
    # the bound entangled state is PPT, so there is no NPT witness to write
    assert code == 1
    m = np.kron(np.eye(3), np.eye(3))
    path.write_text(serialize.dumps(dict(serialize.matrix_to_json(m, (3, 3)), kind="prewitness")))
    code, _, err = call(capsys, "decompose", "--witness", str(path), "--mode", "onp")
    assert code == 1 and "generic" in json.loads(err)["message"]


def test_analyze_reports_p(wfile, capsys):
    code, out, _ = call(capsys, "analyze", "--witness", str(wfile), "--state", "form1:p=0.5,a=0.6,b=0.8")
    rep = json.loads(out)
    assert code == 0 and rep["verdict"] == "entangled"
    assert rep["p_estimate"] == pytest.approx(0.5, abs=1e-12)


def test_analyze_separable_certified(wfile, capsys):
    code, out, _ = call(capsys, "analyze", "--witness", str(wfile), "--state", "form1:p=0.1")
    assert json.loads(out)["verdict"] == "separable_certified"


def test_analyze_noisy_needs_seed(wfile, capsys):
    code, _, err = call(capsys, "analyze", "--witness", str(wfile), "--state", "form1:p=0.9,d=0.1")
    assert code == 1 and "--seed" in json.loads(err)["message"]


def test_measure_deterministic(wfile, tmp_path, capsys):
    dpath = tmp_path / "ons.json"
    call(capsys, "decompose", "--witness", str(wfile), "--mode", "ons", "--out", str(dpath))
    args = ["measure", "--decomposition", str(dpath), "--state", "form1:p=1", "--shots", "1000", "--seed", "5"]
    _, first, _ = call(capsys, *args)
    _, second, _ = call(capsys, *args)
    assert first == second
    est = json.loads(first)
    assert est["mean"] == pytest.approx(-0.5, abs=1e-12) and est["n_settings"] == 3


def test_measure_accepts_pseudomixture(wfile, tmp_path, capsys):
    dpath = tmp_path / "onp.json"
    call(capsys, "decompose", "--witness", str(wfile), "--mode", "onp", "--out", str(dpath))
    code, out, _ = call(capsys, "measure", "--decomposition", str(dpath), "--state", "form1:p=0",
                        "--shots", "20000", "--seed", "2")
    est = json.loads(out)
    assert code == 0 and abs(est["mean"] - 0.25) < 5 * est["std_error"]


def test_mc_study_csv_and_determinism(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    base = ["mc-study", "--d", "0.05,0.15", "--eps", "0:0.01:0.005", "--samples", "2000", "--bins", "10",
            "--seed", "4"]
    code, out, _ = call(capsys, *base, "--out", str(a))
    assert code == 0
    summary = json.loads(out)
    assert [row["d"] for row in summary["optimal_epsilon"]] == [0.05, 0.15]
    call(capsys, *base, "--out", str(b))
    assert a.read_bytes() == b.read_bytes()
    rows = list(csv.DictReader(a.open()))
    assert len(rows) == 2 * 3 * 10
    assert set(rows[0]) == {"d", "epsilon", "p_bin", "error_rate", "n_samples", "max_over_p"}


def test_upb_fixed_values(capsys):
    code, out, _ = call(capsys, "upb")
    res = json.loads(out)
    assert code == 0
    assert res["noise_threshold"] == pytest.approx(1 - 9 * 0.0284 / 5)
    assert res["above_terhal_bound"]
    assert (res["witness_decomposition"]["projectors"], res["witness_decomposition"]["settings"]) == (10, 6)
    assert (res["onp_decomposition"]["projectors"], res["onp_decomposition"]["settings"]) == (9, 5)
    assert res["expectation_rho_be"] == pytest.approx(-0.0284)
    pm = serialize.decomposition_from_json(res["witness_decomposition"]["pseudo_mixture"])
    assert len(pm) == 10


def test_upb_auto_needs_seed(capsys):
    code, _, err = call(capsys, "upb", "--epsilon", "auto")
    assert code == 1 and "--seed" in json.loads(err)["message"]


def test_bounds(capsys):
    code, out, _ = call(capsys, "bounds", "--n", "2", "--m", "2")
    assert json.loads(out) == {"n": 2, "m": 2, "onp_lower": 5, "onp_upper": 5, "ons_lower": 3, "ons_upper": 3}
    code, _, err = call(capsys, "bounds", "--n", "3", "--m", "2")
    assert code == 1


def test_pretty_format(capsys):
    code, out, _ = call(capsys, "bounds", "--n", "2", "--m", "3", "--format", "pretty")
    assert code == 0 and out.startswith("2x3: ONP")


def test_usage_errors_exit_2(capsys):
    assert call(capsys, "nonsense")[0] == 2
    assert call(capsys, "decompose", "--witness", "x.json", "--mode", "bad")[0] == 2
    assert call(capsys, "mc-study", "--d", "1:0:0.1", "--seed", "1")[0] == 2


def test_bad_state_spec(capsys):
    code, _, err = call(capsys, "witness", "construct", "--state", "ghz:p=1")
    assert code == 1 and "unknown state kind" in json.loads(err)["message"]
    code, _, err = call(capsys, "witness", "construct", "--state", "memory:a=0.5")
    assert code == 1 and "eta" in json.loads(err)["message"]


def test_missing_file(capsys, tmp_path):
    code, _, err = call(capsys, "decompose", "--witness", str(tmp_path / "none.json"), "--mode", "ons")
    assert code == 1 and json.loads(err)["error"] == "FileNotFoundError"


def test_state_file_round_trip(tmp_path, capsys):
    from witnesskit import states
    path = tmp_path / "rho.json"
    rho = states.memory_channel_state(states.MemoryChannelParams(0.5, 0.4, 0.3))
    path.write_text(serialize.dumps(serialize.state_to_json(rho)))
    code, out, _ = call(capsys, "witness", "construct", "--state", f"file:{path}")
    assert code == 0
    w = serialize.witness_from_json(json.loads(out))
    assert w.provenance["pt_min_eigenvalue"] == pytest.approx(rho.pt_min_eigenvalue())


@pytest.mark.parametrize("text,expected", [
    ("0.05,0.15", [0.05, 0.15]),
    ("0:0.01:0.005", [0.0, 0.005, 0.01]),
    ("0.1", [0.1]),
])
def test_parse_float_list(text, expected):
    assert parse_float_list(text) == expected


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "witnesskit", "witness", "tau", "--d", "0.2"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["tau"] == pytest.approx(0.0345957051, abs=1e-10)
