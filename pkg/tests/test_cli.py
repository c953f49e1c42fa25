import json
from pathlib import Path

import pytest

from quadbraid.cli import main, strip_timestamp

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
GL2 = str(CONFIGS / "gl2.json")
SIX = str(CONFIGS / "sixvertex.json")


def run(tmp_path, *argv, name="out.json"):
    out = tmp_path / name
    code = main(list(argv) + ["--out", str(out)])
    return code, out


def test_verify_passes(tmp_path):
    code, out = run(tmp_path, "verify", "--model", GL2, "--samples", "4")
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["schema"] == 1 and len(doc["report"]["identities"]) == 8


def test_verify_perturbed_fails(tmp_path):
    code, _ = run(tmp_path, "verify", "--model", GL2, "--samples", "4", "--perturb", "1e-3")
    assert code == 1


def test_missing_model_is_usage_error(tmp_path):
    assert main(["verify", "--model", str(tmp_path / "nope.json")]) == 2


def test_unknown_model_key_is_usage_error(tmp_path):
    p = tmp_path / "m.json"
    p.write_text(json.dumps({"schema": 1, "name": "gl2", "bogus": 1}))
    assert main(["verify", "--model", str(p)]) == 2


def test_bad_flag_is_usage_error():
    assert main(["verify", "--no-such-flag"]) == 2
    assert main([]) == 2


def test_oversized_chain_is_usage_error():
    assert main(["commute", "--model", GL2, "-N", "20"]) == 2


def test_commute(tmp_path):
    code, out = run(tmp_path, "commute", "--model", GL2, "-N", "2", "--samples", "2")
    assert code == 0
    assert json.loads(out.read_text())["report"]["max_residual"] < 1e-8


def test_hamiltonian_sixvertex_locality(tmp_path):
    code, out = run(tmp_path, "hamiltonian", "--model", SIX, "-N", "3", "--samples", "2")
    assert code == 0
    rep = json.loads(out.read_text())["report"]
    assert rep["locality"]["passed"] and rep["locality"]["window_size"] == 2


def test_example(tmp_path, capsys):
    code, out = run(tmp_path, "example", "-N", "2", "--gamma", "0.2", "--xi", "1.1", "--samples", "2")
    assert code == 0
    assert "bulk residual" in capsys.readouterr().out
    assert json.loads(out.read_text())["report"]["residuals"]["bulk"] < 1e-6


def test_spectrum_csv(tmp_path):
    code, out = run(tmp_path, "spectrum", "--model", GL2, "-N", "2", "--format", "csv", name="s.csv")
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "re,im,index,lambda1,lambda2" and len(lines) == 5


def test_csv_only_for_spectrum():
    assert main(["verify", "--model", GL2, "--format", "csv"]) == 2


def test_run_config_file(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"schema": 1, "model": GL2, "N": 2, "samples": 2}))
    code, _ = run(tmp_path, "commute", "--config", str(cfg))
    assert code == 0
    cfg.write_text(json.dumps({"schema": 1, "model": GL2, "unknown": 2}))
    assert main(["commute", "--config", str(cfg)]) == 2


def test_seed_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("QUADBRAID_SEED", "11")
    _, a = run(tmp_path, "hamiltonian", "--model", SIX, "-N", "2", "--samples", "2", name="a.json")
    _, b = run(tmp_path, "hamiltonian", "--model", SIX, "-N", "2", "--samples", "2", "--seed", "11",
               name="b.json")
    _, c = run(tmp_path, "hamiltonian", "--model", SIX, "-N", "2", "--samples", "2", "--seed", "12",
               name="c.json")
    load = lambda p: strip_timestamp(json.loads(p.read_text()))
    assert load(a) == load(b) and load(a) != load(c)


def test_no_timestamp_gives_identical_bytes(tmp_path):
    args = ["hamiltonian", "--model", GL2, "-N", "2", "--samples", "2", "--no-timestamp"]
    _, a = run(tmp_path, *args, name="a.json")
    _, b = run(tmp_path, *args, name="b.json")
    assert a.read_bytes() == b.read_bytes()
