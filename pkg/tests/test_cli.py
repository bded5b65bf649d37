import json
import subprocess
import sys

import numpy as np
import pytest

from hdxlab.cli import main


def run_cli(args):
    return main(args)


@pytest.fixture
def complex_file(tmp_path):
    path = tmp_path / "c.json"
    assert run_cli(["build", "--complete", "9", "5", "-o", str(path)]) == 0
    return str(path)


def test_build_and_spectrum(tmp_path, complex_file, capsys):
    out = tmp_path / "spec.json"
    code = run_cli(["spectrum", complex_file, "--walk", "complement",
                    "--l1", "1", "--l2", "1", "-o", str(out)])
    assert code == 0
    data = json.loads(out.read_text())
    assert "lambda_bip" in data["report"]["spectrum"]
    assert data["manifest"]["command"] == "spectrum"
    assert complex_file in data["manifest"]["input_hashes"]


def test_spectrum_csv_export(tmp_path, complex_file):
    csv_path = tmp_path / "walk.csv"
    out = tmp_path / "spec.json"
    assert run_cli(["spectrum", complex_file, "--walk", "up", "--k", "0",
                    "--export-csv", str(csv_path), "-o", str(out)]) == 0
    lines = csv_path.read_text().strip().splitlines()
    assert lines[0] == "row_face,col_face,prob"
    assert len(lines) > 1


def test_verify_all(tmp_path, complex_file):
    out = tmp_path / "verify.json"
    assert run_cli(["verify", complex_file, "--all", "-o", str(out)]) == 0
    rows = json.loads(out.read_text())["report"]["checks"]
    assert rows and all(r.get("passed") or "skipped" in r for r in rows)


def test_mixing_random(tmp_path, complex_file):
    out = tmp_path / "mix.json"
    assert run_cli(["mixing", complex_file, "--random-vertex-sets", "2",
                    "--density", "0.3", "--seed", "3", "-o", str(out)]) == 0
    rep = json.loads(out.read_text())["report"]
    assert rep["deviation"] >= 0
    # seed is mandatory for random sets
    assert run_cli(["mixing", complex_file, "--random-vertex-sets", "2"]) == 1


def test_grassmann_subcommand(tmp_path):
    out = tmp_path / "g.json"
    assert run_cli(["grassmann", "--q", "2", "--n", "5", "--d", "3",
                    "--flavor", "linear", "--walk", "complement",
                    "--l1", "0", "--l2", "0", "--cond-dim", "1",
                    "-o", str(out)]) == 0
    rep = json.loads(out.read_text())["report"]
    assert rep["level_counts"] == [31, 155, 155, 31]
    assert rep["walk"]["within_bound"]


def test_stav_check(tmp_path, complex_file):
    out = tmp_path / "sc.json"
    assert run_cli(["stav-check", "--complex", complex_file, "--stav", "hdx",
                    "--l", "1", "--gamma", "0.5", "-o", str(out)]) == 0
    rep = json.loads(out.read_text())["report"]
    assert rep["goodness"]["overall_pass"]


def test_agree_run_exact_and_mc(tmp_path, complex_file):
    out = tmp_path / "a.json"
    assert run_cli(["agree-run", "--complex", complex_file, "--stav", "hdx",
                    "--l", "1", "--plant-seed", "5", "--alpha", "0.1",
                    "-o", str(out)]) == 0
    rep = json.loads(out.read_text())["report"]
    assert 0 <= rep["rejection"]["epsilon"] <= 1
    # Monte Carlo without a seed is refused (no silent entropy)
    assert run_cli(["agree-run", "--complex", complex_file, "--stav", "hdx",
                    "--l", "1", "--plant-seed", "5", "--mode", "mc"]) == 1


def test_decode_deterministic(tmp_path, complex_file):
    from hdxlab.agreement import corrupt, perfect_ensemble, save_ensemble
    from hdxlab.stav import hdx_stav
    from hdxlab.complexes import load_complex
    c = load_complex(complex_file)
    x = hdx_stav(c, 5, 1)
    plant = np.arange(9) % 2
    f = corrupt(perfect_ensemble(x, plant, alphabet=2), 0.1,
                "resample_set", seed=3)
    ens = tmp_path / "f.json"
    save_ensemble(f, str(ens))
    r1, r2 = tmp_path / "d1.json", tmp_path / "d2.json"
    base = ["decode", "--complex", complex_file, "--stav", "hdx", "--l", "1",
            "--ensemble", str(ens)]
    assert run_cli(base + ["--report", str(r1)]) == 0
    assert run_cli(base + ["--report", str(r2)]) == 0
    rep1 = json.dumps(json.loads(r1.read_text())["report"], sort_keys=True)
    rep2 = json.dumps(json.loads(r2.read_text())["report"], sort_keys=True)
    assert rep1 == rep2


def test_malformed_input_exit_code(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"n_vertices": 3, "d": 1, "coloring": None,
                               "top_faces": [{"verts": [0, 1], "weight": -1.0}]}))
    assert run_cli(["spectrum", str(bad), "--walk", "underlying"]) == 1


def test_size_cap_exit_code(tmp_path):
    out = tmp_path / "huge.json"
    assert run_cli(["build", "--complete", "40", "12", "-o", str(out)]) == 2


def test_usage_error_exit_code():
    assert run_cli(["verify", "/nonexistent-dir/nothing.json"]) == 1
    assert run_cli(["build", "-o", "/tmp/x.json"]) == 1


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "hdxlab.cli", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "hdxlab" in proc.stdout


def test_verify_all_partite(tmp_path):
    cpath = tmp_path / "p.json"
    assert run_cli(["build", "--partite", "3,3,3", "-o", str(cpath)]) == 0
    out = tmp_path / "v.json"
    assert run_cli(["verify", str(cpath), "--all", "-o", str(out)]) == 0
    rows = json.loads(out.read_text())["report"]["checks"]
    names = {r.get("name") for r in rows}
    assert "colored_walk" in names and "trickling" in names
