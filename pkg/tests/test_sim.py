import json

import numpy as np
import pytest

from imphy import sim
from imphy.errors import UsageError
from imphy.ofdm import OfdmImConfig
from imphy.spatial import make_scheme


def rayleigh_bpsk(snr_db):
    g = 10 ** (snr_db / 10)
    return 0.5 * (1 - np.sqrt(g / (1 + g)))


NOISELESS_SPECS = [
    {"scheme": "sm", "nt": 4, "m": 4, "nr": 2},
    {"scheme": "sm", "nt": 2, "m": 8, "nr": 2, "detector": "two-stage"},
    {"scheme": "gsm", "nt": 4, "na": 2, "m": 4, "nr": 4},
    {"scheme": "ma-sm", "nt": 4, "na": 2, "m": 2, "nr": 4},
    {"scheme": "esm", "nt": 2, "m": 4, "nr": 2},
    {"scheme": "qsm", "nt": 2, "m": 4, "nr": 2},
    {"scheme": "simo", "m": 16, "nr": 2},
    {"scheme": "v-blast", "nt": 2, "m": 4, "nr": 2},
    {"scheme": "ofdm-im", "n_f": 64, "n": 4, "k": 2, "m": 2, "cp": 16},
    {"scheme": "ofdm-im", "n_f": 64, "n": 4, "k": 1, "m": 4, "cp": 16, "detector": "ml", "interleave": True},
    {"scheme": "ofdm-gim1", "n_f": 64, "n": 4, "m": 2, "cp": 16, "detector": "ml"},
    {"scheme": "ofdm-gim2", "n_f": 64, "n": 4, "k": 2, "m": 4, "cp": 16, "detector": "ml"},
    {"scheme": "ofdm", "n_f": 64, "m": 4, "cp": 16},
    {"scheme": "mimo-ofdm-im", "nt": 2, "nr": 2, "n_f": 64, "n": 4, "k": 2, "m": 2, "cp": 16},
    {"scheme": "mimo-ofdm", "nt": 2, "nr": 2, "n_f": 64, "m": 2, "cp": 16},
]


@pytest.mark.parametrize("spec", NOISELESS_SPECS, ids=lambda s: s["scheme"] + "-" + s.get("detector", ""))
def test_noiseless_limit_is_error_free(spec):
    exp = sim.Experiment(dict(spec, batch=200), [100.0], max_trials=1000, min_errors=1, seed=3)
    rec = sim.run_point(exp, 100.0, N0=1e-12)
    assert rec.trials == 1000
    assert rec.bit_errors == 0 and rec.ber == 0.0
    assert rec.below_resolution


def test_siso_bpsk_matches_closed_form():
    exp = sim.Experiment({"scheme": "simo", "m": 2, "nr": 1}, [10.0], max_trials=400_000,
                         min_errors=1000, seed=1)
    rec = sim.run_point(exp, 10.0)
    assert rec.bit_errors >= 1000
    assert abs(rec.ber - rayleigh_bpsk(10.0)) <= 3 * rec.stderr


def test_sweep_is_monotone_and_ordered():
    exp = sim.Experiment({"scheme": "simo", "m": 2}, [0, 5, 10, 15], max_trials=200_000, min_errors=200)
    recs = sim.run_sweep(exp)
    assert [r.snr_db for r in recs] == [0, 5, 10, 15]
    for a, b in zip(recs, recs[1:]):
        assert b.ber <= a.ber + 2 * np.hypot(a.stderr, b.stderr)


def test_empty_grid():
    assert sim.run_sweep(sim.Experiment({"scheme": "simo"}, [])) == []


@pytest.mark.parametrize("grid", [[0, 0], [5, 0]])
def test_grid_must_increase(grid):
    with pytest.raises(UsageError):
        sim.Experiment({"scheme": "simo"}, grid)


def test_max_trials_positive():
    with pytest.raises(UsageError):
        sim.Experiment({"scheme": "simo"}, [0], max_trials=0)


def test_unknown_scheme():
    with pytest.raises(UsageError):
        sim.make_link({"scheme": "cdma"})


def test_cp_must_cover_channel():
    with pytest.raises(UsageError):
        sim.make_link({"scheme": "ofdm-im", "n_f": 64, "cp": 4, "taps": 10})


def test_same_seed_same_record():
    exp = sim.Experiment({"scheme": "sm", "nt": 2, "m": 4}, [5.0], max_trials=30_000, seed=42)
    a, b = sim.run_point(exp, 5.0), sim.run_point(exp, 5.0)
    assert (a.trials, a.bit_errors, a.ber) == (b.trials, b.bit_errors, b.ber)
    c = sim.run_point(sim.Experiment(exp.scheme, [5.0], max_trials=30_000, seed=43), 5.0)
    assert c.bit_errors != a.bit_errors


def test_point_seed_independent_of_grid():
    spec = {"scheme": "sm", "nt": 2, "m": 4}
    a = sim.run_sweep(sim.Experiment(spec, [5.0, 10.0], max_trials=20_000, seed=9))
    b = sim.run_sweep(sim.Experiment(spec, [0.0, 5.0, 7.5, 10.0], max_trials=20_000, seed=9))
    assert a[0].bit_errors == b[1].bit_errors and a[1].bit_errors == b[3].bit_errors


def test_thread_count_does_not_change_results(monkeypatch):
    exp = sim.Experiment({"scheme": "sm", "nt": 2, "m": 4, "batch": 1000}, [0.0], max_trials=50_000,
                         min_errors=3000, seed=5)
    monkeypatch.setenv("IMPHY_THREADS", "1")
    a = sim.run_point(exp, 0.0)
    monkeypatch.setenv("IMPHY_THREADS", "4")
    b = sim.run_point(exp, 0.0)
    assert (a.trials, a.bit_errors) == (b.trials, b.bit_errors)


def test_stopping_rule():
    exp = sim.Experiment({"scheme": "simo", "m": 2, "batch": 500}, [0.0], max_trials=100_000, min_errors=100)
    rec = sim.run_point(exp, 0.0)
    assert rec.bit_errors >= 100 and rec.trials < 100_000
    exp = sim.Experiment({"scheme": "simo", "m": 2, "batch": 500}, [0.0], max_trials=100_000,
                         min_errors=100, min_trials=5000)
    assert sim.run_point(exp, 0.0).trials >= 5000


def test_ber_accounting():
    exp = sim.Experiment({"scheme": "qsm", "nt": 2, "m": 4}, [3.0], max_trials=7000)
    r = sim.run_point(exp, 3.0)
    assert r.bits == r.trials * 4
    assert r.ber == r.bit_errors / r.bits
    assert 0 <= r.ber <= 1


def test_bits_per_trial_consistency():
    link = sim.make_link({"scheme": "mimo-ofdm-im", "nt": 2, "nr": 2})
    cfg = OfdmImConfig(512, 4, 2, 2)
    assert link.bits_per_trial == 2 * cfg.frame_bits
    assert link.bpcu == pytest.approx(2 * 512 / 528)
    assert sim.make_link({"scheme": "gsm", "nt": 8, "na": 4, "m": 2}).bits_per_trial == \
        make_scheme("GSM", 8, 2, 4).bits_per_use


def test_ebn0_uses_rate():
    exp = sim.Experiment({"scheme": "sm", "nt": 2, "m": 8}, [10.0], max_trials=100)
    assert sim.run_point(exp, 10.0).ebn0_db == pytest.approx(10 - 10 * np.log10(4))


def test_csv_and_manifest(tmp_path):
    exp = sim.Experiment({"scheme": "sm", "nt": 2, "m": 4}, [0.0, 10.0], max_trials=5000)
    recs = sim.run_sweep(exp)
    text = sim.records_to_csv(recs)
    assert text.splitlines()[0] == ",".join(sim.CSV_HEADER)
    rows = sim.records_from_csv(text)
    assert [int(r["bit_errors"]) for r in rows] == [r.bit_errors for r in recs]
    assert rows[0]["seconds"] == ""
    assert sim.records_from_csv(sim.records_to_csv(recs, include_timing=True))[0]["seconds"] != ""
    path = tmp_path / "m.json"
    sim.write_manifest(path, sim.manifest([exp], recs))
    doc = json.loads(path.read_text())
    assert doc["experiments"][0]["metadata"]["bit_labeling"] == "natural"
    assert len(doc["records"]) == 2


def test_fig6_preset():
    exps = sim.fig6_experiments("2x2", [0, 10], frames=10)
    assert [e.label for e in exps] == ["mimo-ofdm-im", "v-blast-ofdm"]
    for e in exps:
        assert e.scheme["n_f"] == 512 and e.scheme["cp"] == 16 and e.scheme["taps"] == 10
        assert e.metadata["profile"] == "uniform"
        assert e.min_trials == 10 and e.max_trials == 100
    links = [sim.make_link(e.scheme) for e in exps]
    assert links[0].bpcu == links[1].bpcu   # equal-rate comparison
    with pytest.raises(UsageError):
        sim.fig6_experiments("2by2")


def test_harness_does_not_mutate_spec():
    spec = {"scheme": "ofdm-im", "n_f": 32, "cp": 10}
    before = dict(spec)
    sim.run_sweep(sim.Experiment(spec, [10.0], max_trials=20))
    assert spec == before
