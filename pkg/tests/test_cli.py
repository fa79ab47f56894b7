import json
import os
import subprocess
import sys

import numpy as np
import pytest

from risrcc import io
from risrcc.cli import main


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for k in list(os.environ):
        if k.startswith("RIS_SIM_"):
            monkeypatch.delenv(k)


@pytest.fixture
def fast_config(tmp_path):
    p = tmp_path / "fast.json"
    p.write_text(json.dumps({"seed": 4, "harden": {"speed_2m_mps": 1.5, "speed_4m_mps": 3.0, "n_subcarriers": 8}}))
    return str(p)


def _read(path):
    with open(path, "rb") as f:
        return f.read()


def test_codebook_outputs(tmp_path):
    out = str(tmp_path / "o")
    assert main(["codebook", "--out", out, "--pattern-step-deg", "5"]) == 0
    cb = io.read_codebook_csv(os.path.join(out, "codebook.csv"))
    assert cb.shape == (37, 50)
    meta = io.read_json(os.path.join(out, "codebook.meta.json"))
    assert meta["command"] == "codebook" and meta["shape"] == [37, 50] and meta["bits"] == 4
    assert abs(meta["peak_theta_deg"] - 40) <= 5
    pat = io.read_pattern_csv(os.path.join(out, "pattern.csv"))
    assert len(pat.theta) == 18 * 72


def test_codebook_ff_unquantized(tmp_path):
    out = str(tmp_path / "o")
    assert main(["codebook", "--out", out, "--regime", "ff", "--theta-deg", "30", "--phi-deg", "0",
                 "--no-quantize", "--pattern-step-deg", "5"]) == 0
    meta = io.read_json(os.path.join(out, "codebook.meta.json"))
    assert meta["bits"] is None and abs(meta["peak_theta_deg"] - 30) <= 5


def test_simulate_csv_and_json(tmp_path):
    out = str(tmp_path / "o")
    assert main(["simulate", "--out", out, "--angles", "20", "40", "--seed", "9"]) == 0
    rows = io.read_metrics_csv(os.path.join(out, "metrics.csv"))
    assert [r["angle_deg"] for r in rows] == [20.0, 40.0]
    _, pdp = io.read_table(os.path.join(out, "pdp.csv"), ["point", "delay_s", "power"])
    assert {r[0] for r in pdp} == {"20deg_2m", "40deg_2m"}
    assert io.read_json(os.path.join(out, "simulate.meta.json"))["seed"] == 9
    assert main(["simulate", "--out", out, "--angles", "40", "--format", "json", "--ris", "off"]) == 0
    doc = io.read_json(os.path.join(out, "metrics.json"))
    assert doc["points"][0]["ris"] == "off" and doc["meta"]["command"] == "simulate"


def test_simulate_deterministic(tmp_path):
    a, b = str(tmp_path / "a"), str(tmp_path / "b")
    for d in (a, b):
        assert main(["simulate", "--out", d, "--angles", "30", "--seed", "5"]) == 0
    for name in ("metrics.csv", "pdp.csv", "simulate.meta.json"):
        assert _read(os.path.join(a, name)) == _read(os.path.join(b, name))


def test_harden_outputs(tmp_path, fast_config, capsys):
    out = str(tmp_path / "o")
    assert main(["harden", "--config", fast_config, "--out", out]) == 0
    assert "phase updates" in capsys.readouterr().out
    header, rows = io.read_table(os.path.join(out, "harden.csv"))
    assert header[:2] == ["t_s", "throughput_mbps"] and rows
    h2, cdf = io.read_table(os.path.join(out, "harden_cdf.csv"))
    assert len(cdf) == len(rows) and h2[0] == "cdf_p"
    meta = io.read_json(os.path.join(out, "harden.meta.json"))
    assert meta["seed"] == 4 and "std_reduction" in meta["summary"]
    assert main(["harden", "--config", fast_config, "--out", out, "--format", "json", "--tracking", "off"]) == 0
    doc = io.read_json(os.path.join(out, "harden.json"))
    assert doc["summary"]["tracking"] is False


def test_crlb_outputs(tmp_path):
    out = str(tmp_path / "o")
    assert main(["crlb", "--out", out, "--x-range", "-0.5", "0.5", "3", "--y-range", "1", "2", "2"]) == 0
    rows = io.read_crlb_csv(os.path.join(out, "crlb.csv"))
    assert len(rows) == 6 and all(np.isfinite(r["crlb_m2"]) and r["crlb_m2"] > 0 for r in rows)
    meta = io.read_json(os.path.join(out, "crlb.meta.json"))
    assert meta["singular_points"] == 0


def test_crlb_singular_points_logged(tmp_path, caplog):
    out = str(tmp_path / "o")
    assert main(["crlb", "--out", out, "--n-tx", "1", "--n-rx", "1", "--x-range", "0", "0", "1",
                 "--y-range", "1", "2", "2"]) == 0
    assert io.read_json(os.path.join(out, "crlb.meta.json"))["singular_points"] == 2
    assert "singular" in caplog.text


def test_track_synth_and_replay(tmp_path, fast_config):
    out = str(tmp_path / "o")
    assert main(["track", "--config", fast_config, "--out", out]) == 0
    track = io.read_track_csv(os.path.join(out, "track.csv"))
    frames = os.path.join(out, "frames.jsonl")
    assert len(track) == len(io.read_frames_jsonl(frames))
    out2 = str(tmp_path / "o2")
    assert main(["track", "--config", fast_config, "--out", out2, "--frames", frames]) == 0
    assert _read(os.path.join(out, "track.csv")) == _read(os.path.join(out2, "track.csv"))


def test_fit_commands(tmp_path):
    out = str(tmp_path / "o")
    rng = np.random.default_rng(0)
    env = tmp_path / "env.csv"
    io.write_table(str(env), ["envelope"], ([v] for v in np.abs(3 + rng.normal(size=4000) + 1j * rng.normal(size=4000))))
    assert main(["fit", "kfactor", "--input", str(env), "--out", out]) == 0
    k = io.read_json(os.path.join(out, "fit_kfactor.json"))["result"]["k_dB"]
    assert k == pytest.approx(10 * np.log10(9 / 2), abs=0.5)

    val = tmp_path / "val.csv"
    io.write_table(str(val), ["value"], ([v] for v in rng.rayleigh(1.0, 2000)))
    assert main(["fit", "distribution", "--input", str(val), "--out", out]) == 0
    fits = io.read_json(os.path.join(out, "fit_distribution.json"))["result"]["fits"]
    assert len(fits) == 3
    assert main(["fit", "distribution", "--family", "weibull", "--input", str(val), "--out", out]) == 0

    dec = tmp_path / "pdp.csv"
    t = np.arange(0, 100e-9, 1.25e-9)
    io.write_table(str(dec), ["delay_s", "power"], zip(t, 0.5 * np.exp(-0.1 * t * 1e9) + 1e-4))
    assert main(["fit", "decay", "--input", str(dec), "--out", out]) == 0
    res = io.read_json(os.path.join(out, "fit_decay.json"))["result"]
    assert res["b_per_ns"] == pytest.approx(0.1, rel=0.05)

    ple = tmp_path / "ple.csv"
    io.write_table(str(ple), ["d1_m", "d2_m", "pl_dB"], [[10, 2, 80.0], [10, 3, 83.0], [10, 4, 85.5]])
    assert main(["fit", "ple", "--input", str(ple), "--out", out]) == 0
    assert "gamma2" in io.read_json(os.path.join(out, "fit_ple.json"))["result"]


def test_exit_codes(tmp_path):
    out = str(tmp_path / "o")
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"nonsense": 1}))
    assert main(["simulate", "--config", str(bad), "--out", out]) == 2
    assert main(["simulate", "--config", str(tmp_path / "missing.json"), "--out", out]) == 4
    assert main(["fit", "kfactor", "--input", str(tmp_path / "missing.csv"), "--out", out]) == 4
    col = tmp_path / "c.csv"
    col.write_text("other\n1\n")
    assert main(["fit", "kfactor", "--input", str(col), "--out", out]) == 2
    flat = tmp_path / "flat.csv"
    io.write_table(str(flat), ["d1_m", "d2_m", "pl_dB"], [[5, 2, 80.0]] * 4)
    assert main(["fit", "ple", "--input", str(flat), "--out", out]) == 3
    with pytest.raises(SystemExit) as exc:
        main(["codebook", "--regime", "xx"])
    assert exc.value.code == 2


def test_env_override_reaches_cli(tmp_path, monkeypatch):
    out = str(tmp_path / "o")
    monkeypatch.setenv("RIS_SIM_SEED", "77")
    assert main(["crlb", "--out", out, "--x-range", "0", "0", "1", "--y-range", "2", "2", "1"]) == 0
    assert io.read_json(os.path.join(out, "crlb.meta.json"))["seed"] == 77
    monkeypatch.setenv("RIS_SIM_BOGUS", "1")
    assert main(["crlb", "--out", out]) == 2


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "risrcc", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "codebook" in r.stdout
