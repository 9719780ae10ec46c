import json
from pathlib import Path

import pytest

from calogero_susy.cli import main


def run(tmp_path, *argv):
    return main(list(argv) + ["--out", str(tmp_path)])


def only_dir(root, prefix):
    dirs = [d for d in Path(root).iterdir() if d.is_dir() and d.name.startswith(prefix)]
    assert len(dirs) == 1
    return dirs[0]


def test_spectrum_writes_outputs(tmp_path):
    code = run(tmp_path, "spectrum", "--n", "32", "--k", "4", "--sector", "1")
    d = only_dir(tmp_path, "spectrum-")
    assert code == 0
    for name in ("eigenvalues.csv", "eigenvectors.bin", "eigenvectors.bin.json", "summary.json", "config.ini", "manifest.json"):
        assert (d / name).exists()
    man = json.loads((d / "manifest.json").read_text())
    assert set(man["files"]) >= {"eigenvalues.csv", "eigenvectors.bin", "summary.json", "config.ini"}
    assert json.loads((d / "summary.json").read_text())["block_count"] == 2


def test_zero_mode_check_reports_failure_at_positive_coupling(tmp_path):
    assert run(tmp_path, "spectrum", "--n", "32", "--k", "4") == 1
    man = json.loads((only_dir(tmp_path, "spectrum-") / "manifest.json").read_text())
    assert man["checks"]["zero_mode_residual_ok"] is False


def test_zero_mode_check_passes_at_negative_coupling(tmp_path):
    assert run(tmp_path, "spectrum", "--n", "32", "--k", "8", "--gamma", "-1.5") == 0


@pytest.mark.parametrize("argv", [["spectrum", "--sector", "5"], ["spectrum", "--n", "15"], ["spectrum", "--gamma", "0.1"],
                                  ["spectrum", "--k", "0"], ["frobnicate"]])
def test_usage_errors_exit_2(tmp_path, argv):
    with pytest.raises(SystemExit) as exc:
        run(tmp_path, *argv)
    assert exc.value.code == 2


def test_identical_runs_are_bit_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for root in (a, b):
        main(["spectrum", "--n", "40", "--k", "5", "--sector", "2", "--out", str(root)])
    da, db = only_dir(a, "spectrum-"), only_dir(b, "spectrum-")
    assert da.name == db.name
    for name in ("eigenvalues.csv", "eigenvectors.bin"):
        assert (da / name).read_bytes() == (db / name).read_bytes()


def test_pair_and_degenerate_tolerance(tmp_path):
    assert run(tmp_path / "x", "pair", "--n", "48", "--k", "6") == 0
    assert run(tmp_path / "y", "pair", "--n", "48", "--k", "6", "--tol", "0") == 1
    assert run(tmp_path / "z", "pair", "--n", "48", "--k", "6", "--shift", "100") == 0
    base = (only_dir(tmp_path / "x", "pair-") / "matched.csv").read_text().splitlines()
    shifted = (only_dir(tmp_path / "z", "pair-") / "matched.csv").read_text().splitlines()
    assert [r.split(",")[1] for r in base] == [r.split(",")[1] for r in shifted]


def test_intertwine(tmp_path):
    code = run(tmp_path, "intertwine", "--n", "32", "--k", "8", "--gamma", "-1.5")
    d = only_dir(tmp_path, "intertwine-")
    man = json.loads((d / "manifest.json").read_text())
    assert man["checks"]["ground_state_annihilated"] is True
    assert man["checks"]["intertwine_residual_ok"] is True
    assert code == 0


def test_evolve_constrained_profile(tmp_path):
    code = run(tmp_path, "evolve", "--n", "32", "--profile", "constrained-exp", "--dt", "0.01", "--t-end", "0.1")
    d = only_dir(tmp_path, "evolve-")
    summary = json.loads((d / "summary.json").read_text())
    assert summary["momentum_term_zero"] is True
    assert (d / "trajectory.csv").read_text().startswith("t,norm,energy,invariant")
    assert code in (0, 1)


def test_evolve_stationary_profile(tmp_path):
    run(tmp_path, "evolve", "--n", "32", "--profile", "stationary", "--dt", "0.001", "--t-end", "0.05")
    summary = json.loads((only_dir(tmp_path, "evolve-") / "summary.json").read_text())
    assert summary["stationary_overlap_ok"] is True


def test_invariant_comoving(tmp_path):
    assert run(tmp_path, "invariant", "--n", "32", "--k", "4") == 0


def test_ode_runs_are_keyed_by_extra_flags(tmp_path):
    assert run(tmp_path, "ode", "--b0", "0.05") == 0
    assert run(tmp_path, "ode", "--b0", "0.1") == 0
    assert len([d for d in tmp_path.iterdir() if d.name.startswith("ode-")]) == 2


def test_report(tmp_path, capsys):
    assert run(tmp_path / "empty", "report") == 0
    assert "no runs found" in capsys.readouterr().out
    run(tmp_path, "ode")
    run(tmp_path, "spectrum", "--n", "32", "--k", "3", "--sector", "2")
    (only_dir(tmp_path, "spectrum-") / "eigenvalues.csv").write_text("tampered\n")
    capsys.readouterr()
    assert run(tmp_path, "report") == 0
    out = capsys.readouterr().out
    assert "CORRUPTED" in out
    assert "| 8 | PASS |" in out
    assert "| 1 | not run |" in out
    assert (tmp_path / "REPORT.md").exists()
