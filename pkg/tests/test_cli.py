from __future__ import annotations

import csv
import io
import json

import numpy as np
import pytest

from haarqec import cli
from haarqec.codes import CodeSample, write_code
from haarqec.errorsets import from_operators, gen_erasure_set, write_errorset


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def exact_files(tmp_path):
    bell = np.array([1, 0, 0, 1]) / np.sqrt(2)
    V = np.stack([np.kron(bell, [1, 0, 0, 0]), np.kron(bell, [0, 0, 1, 0])], axis=1).astype(complex)
    write_code(CodeSample(16, 2, V), tmp_path / "exact.bin")
    write_errorset(gen_erasure_set(4, [0]), tmp_path / "q0.json")
    return tmp_path / "exact.bin", tmp_path / "q0.json"


def test_errorset_gen_and_validate(tmp_path, capsys):
    p = tmp_path / "w.json"
    code, _, err = run(capsys, "errorset", "gen", "--kind", "weight", "--n", 3, "--t", 1, "-o", p)
    assert code == 0 and "wrote 10 operators" in err
    assert len(json.loads(p.read_text())["ops"]) == 10
    code, out, _ = run(capsys, "errorset", "validate", p)
    rep = json.loads(out)
    assert code == 0 and rep["passed"] and rep["m"] == 10
    code, _, _ = run(capsys, "errorset", "gen", "--kind", "erasure", "--n", 3, "--sites", "0,2", "--q", 3, "-o", p)
    assert code == 0 and json.loads(p.read_text())["dim"] == 27


def test_errorset_gen_usage_errors(tmp_path, capsys):
    assert run(capsys, "errorset", "gen", "--kind", "weight", "--n", 3, "-o", tmp_path / "x.json")[0] == 2
    assert run(capsys, "errorset", "gen", "--kind", "erasure", "--n", 3, "-o", tmp_path / "x.json")[0] == 2
    with pytest.raises(SystemExit) as info:
        cli.main(["errorset", "gen", "--kind", "erasure", "--n", "3", "--sites", "a,b", "-o", "x"])
    assert info.value.code == 2


def test_validate_duplicate_reports_pair(tmp_path, capsys):
    p = tmp_path / "dup.json"
    write_errorset(from_operators([np.eye(2), np.diag([1, -1]), np.eye(2)]), p)
    code, out, err = run(capsys, "errorset", "validate", p)
    assert code == 1
    assert json.loads(out)["worst_pair"] == [0, 2]
    assert "worst pair (0, 2)" in err


def test_missing_file_is_usage_error(tmp_path, capsys):
    code, _, err = run(capsys, "errorset", "validate", tmp_path / "nope.json")
    assert code == 2 and "error:" in err


def test_code_sample_and_certify(tmp_path, capsys):
    code_path, set_path = tmp_path / "c.bin", tmp_path / "s.json"
    assert run(capsys, "code", "sample", "--N", 64, "--K", 2, "--seed", 3, "-o", code_path)[0] == 0
    assert json.loads((tmp_path / "c.bin.json").read_text())["seed"] == 3
    write_errorset(gen_erasure_set(6, [0]), set_path)
    code, out, err = run(capsys, "code", "certify", code_path, set_path)
    rep = json.loads(out)
    assert code == 0 and 0 < rep["delta_emp"] < 1 and "delta_emp" in err
    write_errorset(from_operators([np.eye(64)]), set_path)
    code, out, _ = run(capsys, "code", "certify", code_path, set_path)
    assert code == 0 and json.loads(out)["delta_emp"] <= 1e-14


def test_certify_hamming_violation(tmp_path, capsys):
    run(capsys, "code", "sample", "--N", 8, "--K", 3, "--seed", 0, "-o", tmp_path / "c.bin")
    write_errorset(gen_erasure_set(3, [0]), tmp_path / "s.json")
    code, out, err = run(capsys, "code", "certify", tmp_path / "c.bin", tmp_path / "s.json")
    assert code == 1
    assert json.loads(out)["delta_emp"] >= 1
    assert "HammingBoundWarning" in err


def test_seed_printed_when_omitted(tmp_path, capsys):
    code, _, err = run(capsys, "code", "sample", "--N", 8, "--K", 1, "-o", tmp_path / "c.bin")
    assert code == 0
    seed = int(err.split("seed: ")[1].split()[0])
    assert json.loads((tmp_path / "c.bin.json").read_text())["seed"] == seed


@pytest.mark.parametrize("kind", ["identity", "mixture"])
def test_decode_sim_exact_code(exact_files, capsys, kind):
    code_path, set_path = exact_files
    code, out, _ = run(capsys, "decode-sim", code_path, set_path, "--channel-kind", kind, "--states", 10, "--seed", 1)
    rep = json.loads(out)
    assert code == 0
    assert rep["lemma_residual_max"] <= 1e-10
    assert rep["entangled_trace_dist"] <= 1e-10
    assert rep["upper_bound"] <= 1e-15
    assert rep["provenance"]["seed"] == 1


def test_decode_sim_haar_random_local(tmp_path, capsys):
    run(capsys, "code", "sample", "--N", 256, "--K", 2, "--seed", 9, "-o", tmp_path / "c.bin")
    write_errorset(gen_erasure_set(8, [0, 1]), tmp_path / "s.json")
    code, out, err = run(
        capsys, "decode-sim", tmp_path / "c.bin", tmp_path / "s.json",
        "--channel-kind", "random-local", "--sites", "0,1", "--states", 100, "--seed", 4,
    )
    rep = json.loads(out)
    assert code == 0 and "ok" in err
    assert rep["num_states"] == 101
    assert rep["lemma_residual_max"] <= rep["upper_bound"] + 1e-8
    assert rep["entangled_trace_dist"] <= rep["upper_bound"] + 1e-8
    bad = run(capsys, "decode-sim", tmp_path / "c.bin", tmp_path / "s.json", "--channel-kind", "random-local", "--seed", 0)
    assert bad[0] == 2


def test_decode_sim_degenerate_code_fails(tmp_path, capsys):
    run(capsys, "code", "sample", "--N", 8, "--K", 3, "--seed", 0, "-o", tmp_path / "c.bin")
    write_errorset(gen_erasure_set(3, [0]), tmp_path / "s.json")
    code, _, err = run(capsys, "decode-sim", tmp_path / "c.bin", tmp_path / "s.json", "--seed", 0)
    assert code == 1 and "NondegenerateRankError" in err


def write_config(path, **over):
    cfg = {
        "grid": [{"N": 64, "K": 2, "errorset": {"kind": "erasure", "params": {"t": 1}}}],
        "seeds_per_point": 1,
        "master_seed": 5,
    }
    cfg.update(over)
    path.write_text(json.dumps(cfg))
    return path


def test_sweep_single_row(tmp_path, capsys):
    code, out, err = run(capsys, "sweep", write_config(tmp_path / "c.json"))
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and len(rows) == 1
    assert rows[0]["N"] == "64" and rows[0]["m"] == "4"
    assert 0 < float(rows[0]["delta_emp"]) < 1
    assert "no scaling fit" in err


def test_sweep_fit_summary(tmp_path, capsys):
    grid = [{"N": 2**n, "K": 2, "errorset": {"kind": "erasure", "params": {"t": 1}}} for n in range(7, 12)]
    cfg = write_config(tmp_path / "c.json", grid=grid, seeds_per_point=2)
    code, out, _ = run(capsys, "sweep", cfg, "-o", tmp_path / "r.csv", "--plot", tmp_path / "fit.svg")
    summary = json.loads(out)
    assert code == 0 and summary["points"] == 5
    assert 0.3 <= summary["slope"] <= 0.7
    assert len((tmp_path / "r.csv").read_text().splitlines()) == 11
    assert (tmp_path / "fit.svg").exists()


def test_sweep_malformed_config(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"grid": [{"N": 64, "errorset": {"kind": "erasure"}}], "seeds_per_point": 1, "master_seed": 0}))
    code, out, err = run(capsys, "sweep", bad)
    assert code == 2 and out == "" and "grid[0].K" in err
    bad.write_text("{")
    assert run(capsys, "sweep", bad)[0] == 2


def test_experiment_commands(tmp_path, capsys):
    code, out, _ = run(capsys, "experiment", "moments", "--N", 16, "--K", 1, "--m", 4, "--samples", 200, "--seed", 0)
    assert code == 0 and json.loads(out)["m"] == 4
    code, out, _ = run(capsys, "experiment", "lemma", "--point", "64,2,4", "--trials", 5, "--seed", 0)
    assert code == 0 and json.loads(out)["violations"] == 0
    code, out, _ = run(capsys, "experiment", "erasure", "--n", 6, "--k", 1, "--t", 1, "--trials", 2, "--seed", 0)
    assert code == 0 and len(json.loads(out)["trials"]) == 2
    assert run(capsys, "experiment", "moments", "--N", 12, "--K", 1, "--m", 4, "--samples", 200)[0] == 2


def test_element_cap_flag(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("HAARQEC_ELEMENT_CAP", "")  # restored after the CLI overwrites it
    code, _, err = run(capsys, "--element-cap", 10, "code", "sample", "--N", 64, "--K", 2, "--seed", 0, "-o", tmp_path / "c.bin")
    assert code == 2 and "error:" in err
