import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from imphy.cli import main, rationalize

from conftest import DATA


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


@pytest.mark.parametrize("z,s", [(1, "1"), (-1j, "-j"), ((1 + 1j) / np.sqrt(2), "(1+j)/√2"),
                                 ((-1 + 1j) / np.sqrt(2), "(-1+j)/√2"), (1j / np.sqrt(2), "j/√2"),
                                 (-1 / np.sqrt(2), "-1/√2"), (0, "0"), (0.3 + 0.1j, "0.3+0.1j")])
def test_rationalize(z, s):
    assert rationalize(complex(z)) == s


def test_codebook_qsm_matches_table(capsys):
    code, out, _ = run(capsys, "codebook", "--scheme", "qsm", "--nt", "2", "--m", "4")
    assert code == 0
    got = {r["bits"]: (r["x1"], r["x2"]) for r in rows(out)}
    with open(DATA / "golden_codebooks_2x4bpcu.csv", newline="") as fh:
        for r in csv.DictReader(fh):
            assert got[r["bits"]] == (r["qsm_x1"], r["qsm_x2"])


def test_codebook_numeric_columns(capsys):
    _, out, _ = run(capsys, "codebook", "--scheme", "sm", "--nt", "2", "--m", "8")
    table = rows(out)
    assert len(table) == 16
    r = table[1]
    assert float(r["x1_re"]) == pytest.approx(1 / np.sqrt(2), abs=1e-12)


def test_codebook_simo(capsys):
    _, out, _ = run(capsys, "codebook", "--scheme", "simo", "--m", "2")
    assert [r["x1"] for r in rows(out)] == ["1", "-1"]


def test_codebook_capacity_error(capsys):
    code, out, err = run(capsys, "codebook", "--scheme", "v-blast", "--nt", "8", "--m", "64")
    assert code != 0 and out == ""
    assert err.startswith("E_CAPACITY:")


def rate(capsys, *argv):
    code, out, _ = run(capsys, "rate", *argv)
    assert code == 0
    return {r["key"]: r["value"] for r in rows(out)}


def test_rate_ofdm_im(capsys):
    r = rate(capsys, "--scheme", "ofdm-im", "--nf", "512", "--n", "4", "--k", "2", "--m", "2", "--cp", "16")
    assert r["bits_per_frame"] == "512"
    assert r["cp_factor"] == "512/528"


def test_rate_gim(capsys):
    assert rate(capsys, "--scheme", "gim-i", "--n", "4", "--m", "2")["bits_per_subblock"] == "6"
    r = rate(capsys, "--scheme", "gim-ii", "--n", "16", "--k", "10", "--m", "4", "--nf", "16")
    assert r["bits_per_subblock"] == "44" and r["gain_over_im_percent"] == "37.5"


def test_rate_spatial(capsys):
    assert rate(capsys, "--scheme", "sm", "--nt", "8", "--m", "2")["bpcu"] == "4"
    assert rate(capsys, "--scheme", "gsm", "--nt", "8", "--na", "4", "--m", "2")["spatial_bits"] == "6"


def test_rate_binomial(capsys):
    r = rate(capsys, "--scheme", "binomial", "--n", "512", "--k", "256")
    assert r["leading"] == "4.7255e152"


def test_rate_invalid_spec_names_constraint(capsys):
    code, _, err = run(capsys, "rate", "--scheme", "ofdm-im", "--nf", "10", "--n", "4")
    assert code == 2 and err.startswith("E_USAGE:") and "multiple" in err


def test_unknown_key_rejected(capsys):
    code, _, err = run(capsys, "rate", "--scheme", "sm", "--colour", "red")
    assert code == 2 and "unknown key" in err


def test_dmin_preset(capsys, tmp_path):
    out_path = tmp_path / "d.csv"
    code, out, _ = run(capsys, "dmin", "--preset", "fig2", "--out", str(out_path))
    assert code == 0 and out == ""
    table = rows(out_path.read_text())
    assert len(table) == 16
    simo4 = [r for r in table if r["scheme"] == "simo" and r["bpcu"] == "4"][0]
    assert float(simo4["d_min"]) == pytest.approx(0.4)


def test_dmin_config(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"schemes": [{"scheme": "sm", "nt": 2, "m": 4},
                                           {"scheme": "qsm", "nt": 2, "m": 4}]}))
    code, out, _ = run(capsys, "dmin", "--config", str(cfg))
    assert code == 0
    assert [r["scheme"] for r in rows(out)] == ["sm", "qsm"]


def test_config_with_overrides(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"scheme": "sm", "nt": 4, "m": 4}))
    r = {x["key"]: x["value"] for x in rows(run(capsys, "rate", "--config", str(cfg), "--m", "16")[1])}
    assert r["bpcu"] == "6"
    cfg.write_text(json.dumps({"scheme": "sm", "bogus": 1}))
    code, _, err = run(capsys, "rate", "--config", str(cfg))
    assert code == 2 and "bogus" in err


def test_ber_deterministic_bytes(capsys, tmp_path):
    outs = []
    for i in range(2):
        p = tmp_path / f"b{i}.csv"
        code, _, _ = run(capsys, "ber", "--scheme", "sm", "--nt", "2", "--m", "4", "--snr", "0:10:5",
                         "--max_trials", "5000", "--seed", "7", "--out", str(p))
        assert code == 0
        outs.append(p.read_bytes())
    assert outs[0] == outs[1]
    manifest = json.loads((tmp_path / "b0.csv.manifest.json").read_text())
    assert manifest["seed"] == 7 and manifest["resolved_config"]["snr"] == "0:10:5"


def test_ber_fig6_preset_manifest(capsys, tmp_path):
    p = tmp_path / "f6.csv"
    code, _, _ = run(capsys, "ber", "--preset", "fig6", "--mimo", "2x2", "--frames", "2",
                     "--snr", "[0, 20]", "--out", str(p))
    assert code == 0
    table = rows(p.read_text())
    assert [r["scheme"] for r in table] == ["mimo-ofdm-im"] * 2 + ["v-blast-ofdm"] * 2
    doc = json.loads((tmp_path / "f6.csv.manifest.json").read_text())
    sch = doc["experiments"][0]["scheme"]
    assert (sch["n_f"], sch["cp"], sch["taps"]) == (512, 16, 10)
    assert doc["experiments"][0]["metadata"]["profile"] == "uniform"


def test_bad_preset(capsys):
    code, _, err = run(capsys, "ber", "--preset", "fig9")
    assert code == 2 and err.startswith("E_USAGE:")


def test_console_entry_point_exit_codes():
    ok = subprocess.run([sys.executable, "-m", "imphy", "rate", "--scheme", "qsm", "--nt", "2", "--m", "4"],
                        capture_output=True, text=True)
    assert ok.returncode == 0 and "bpcu,4" in ok.stdout
    bad = subprocess.run([sys.executable, "-m", "imphy", "rate", "--scheme", "nope"],
                         capture_output=True, text=True)
    assert bad.returncode != 0 and bad.stdout == "" and bad.stderr.startswith("E_USAGE:")
