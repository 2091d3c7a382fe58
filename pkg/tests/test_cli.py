import json
from pathlib import Path

import numpy as np
import pytest

from artifact.cli import main
from artifact.io import emit_plot_data

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
ACS = str(CONFIGS / "acs.toml")
LINEAR = str(CONFIGS / "linear.toml")
THREE = str(CONFIGS / "three-disc.toml")
TWO = str(CONFIGS / "two-disc.toml")


def run(tmp, *args, seed=0, workers=1):
    return main(["--seed", str(seed), "--workers", str(workers), "--out-dir", str(tmp), *args])


def snapshot(root):
    return {p.relative_to(root): p.read_bytes() for p in sorted(Path(root).rglob("*"))
            if p.is_file() and p.name != "timing.json"}


def seq_file(tmp_path):
    path = tmp_path / "seq.txt"
    np.savetxt(path, np.random.default_rng(1).normal(-0.2, 0.5, 200))
    return str(path)


def invocations(tmp_path):
    return [
        ["lyapunov", "--map", LINEAR, "--steps", "10000"],
        ["lyapunov", "--table", THREE, "--steps", "5000"],
        ["preimage-condition", "--map", ACS, "--N", "2", "--grid", "4", "--directions", "4"],
        ["angle-tail", "--map", ACS, "--samples", "2000", "--depth", "20"],
        ["moment-check", "--map", ACS, "--N-list", "1,2,3"],
        ["hyperbolic-times", "--map", ACS, "--samples", "2000", "--depth", "15"],
        ["billiard-run", "--table", THREE, "--steps", "2000"],
        ["billiard-orbits", "--table", TWO],
        ["mme-report", "--table", THREE, "--max-period", "3"],
        ["pressure-check", "--table", THREE, "--steps", "100000"],
        ["pliss", "--input", seq_file(tmp_path), "--alpha1", "-5", "--alpha2", "0", "--epsilon", "0.1"],
        ["tms", "--graph", str(CONFIGS / "graphs" / "mixed.txt")],
        ["validate-acs", "--matrix", "6,1,1,1"],
    ]


def test_every_subcommand_is_deterministic(tmp_path):
    cmds = invocations(tmp_path)
    assert {c[0] for c in cmds} | {"tms"} >= {
        "lyapunov", "preimage-condition", "angle-tail", "moment-check", "hyperbolic-times",
        "billiard-run", "billiard-orbits", "mme-report", "pressure-check", "pliss", "tms", "validate-acs"}
    for i, c in enumerate(cmds):
        assert run(tmp_path / f"a{i}", *c, seed=5) == 0
        assert run(tmp_path / f"b{i}", *c, seed=5) == 0
        assert snapshot(tmp_path / f"a{i}") == snapshot(tmp_path / f"b{i}")


@pytest.mark.parametrize("cmd", [
    ["angle-tail", "--map", ACS, "--samples", "2500", "--depth", "20"],
    ["hyperbolic-times", "--map", ACS, "--samples", "2500", "--depth", "15"],
])
def test_worker_count_does_not_change_outputs(tmp_path, cmd):
    assert run(tmp_path / "w1", *cmd, workers=1) == 0
    assert run(tmp_path / "w3", *cmd, workers=3) == 0
    assert snapshot(tmp_path / "w1") == snapshot(tmp_path / "w3")


def test_report_contents(tmp_path):
    assert run(tmp_path, "preimage-condition", "--map", ACS, "--N", "1", "--grid", "3") == 0
    rep = json.loads((tmp_path / "preimage-condition" / "report.json").read_text())
    assert rep["subcommand"] == "preimage-condition" and rep["seed"] == 0
    assert rep["config"]["map"]["family"] == "sheared"
    assert "c_sample_inf" in rep["result"]
    timing = json.loads((tmp_path / "preimage-condition" / "timing.json").read_text())
    assert timing["wall_seconds"] >= 0


def test_orbit_csv(tmp_path):
    assert run(tmp_path, "mme-report", "--table", THREE, "--max-period", "2") == 0
    lines = (tmp_path / "mme-report" / "orbits.csv").read_text().splitlines()
    assert lines[0] == "itinerary,p,expansion_rate,min_angle_gap" and len(lines) == 8


def test_angle_tail_plot_file_monotone(tmp_path):
    assert run(tmp_path, "angle-tail", "--map", ACS, "--samples", "2000", "--depth", "20") == 0
    data = np.loadtxt(tmp_path / "angle-tail" / "angle_tail_loglog.txt")
    assert np.all(np.diff(data[:, 1]) >= 0)


def test_ladder_plot_file(tmp_path):
    assert run(tmp_path, "tms", "--ladder", "renewal:6") == 0
    data = np.loadtxt(tmp_path / "tms" / "ladder.txt")
    assert data.shape == (6, 2) and np.all(np.diff(data[:, 1]) >= 0)


def test_empty_plot_file(tmp_path):
    path = emit_plot_data(tmp_path / "empty.txt", ["x", "y"], [])
    assert path.read_text() == "# x y\n"


def test_exit_codes(tmp_path, capsys):
    assert run(tmp_path, "lyapunov", "--map", str(tmp_path / "missing.toml")) == 2
    bad = tmp_path / "bad.toml"
    bad.write_text('[map]\nfamily = "linear"\nE = [[6, 1], [1, 1]]\ncolour = 3\n')
    assert run(tmp_path, "lyapunov", "--map", str(bad)) == 2
    bad.write_text('[map]\nfamily = "linear"\nE = [[6, 1], [1, 1]]\n[experiment]\nwho = 1\n')
    assert run(tmp_path, "lyapunov", "--map", str(bad)) == 2
    assert run(tmp_path, "no-such-command") == 2
    assert run(tmp_path, "lyapunov", "--map", LINEAR, "--table", THREE) == 2
    assert run(tmp_path, "lyapunov", "--map", LINEAR, workers=0) == 2
    # a linear map has one unstable direction: a computation error, not a config error
    assert run(tmp_path, "angle-tail", "--map", LINEAR, "--samples", "1000") == 1
    err = capsys.readouterr().err
    assert "DegenerateTail" in err


def test_validate_acs_from_config(tmp_path):
    assert run(tmp_path, "validate-acs", "--map", ACS) == 0
    rep = json.loads((tmp_path / "validate-acs" / "report.json").read_text())
    assert rep["result"]["all_pass"] is True
