import csv
import json
import math
import subprocess
import sys

import pytest

from msdp.cli import build_parser, replay_manifest, run

LN2 = math.log(2.0)
SUBCOMMANDS = {
    "line": ["--eps", "--k", "--h", "--method", "--out"],
    "ring-local": ["--eps", "--k", "--out"],
    "ring-geo": ["--eps", "--grid", "--out"],
    "mhr": ["--dist", "--eps", "--kmax", "--out"],
    "dual": ["--eps", "--zeta", "--lambda", "--v", "--r-max", "--step", "--every", "--out"],
    "verify": ["--target", "--eps", "--k", "--budget", "--n", "--out"],
    "simulate": ["--mech", "--eps", "--k", "--n", "--log", "--out"],
    "repro": ["--figure", "--every", "--out"],
}
COMMON_FLAGS = ["--seed", "--threads", "--manifest"]


def read_csv(path):
    with open(path) as f:
        return list(csv.reader(f))


def test_line_k7(tmp_path):
    out = tmp_path / "o.json"
    assert run(["line", "--eps", "1", "--k", "7", "--out", str(out)]) == 0
    res = json.loads(out.read_text())
    expected = [-2 * math.log(4), -2 * LN2, -2 * math.log(4 / 3), 0.0, 2 * math.log(4 / 3), 2 * LN2,
                2 * math.log(4)]
    assert res["k"] == 7 and res["method"] == "closed"
    assert max(abs(a - b) for a, b in zip(res["offsets"], expected)) < 1e-12
    assert res["cost"] == 0.25
    assert res["median_residual_max"] < 1e-12


def test_line_recurrence_sqrt(tmp_path):
    out = tmp_path / "o.json"
    assert run(["line", "--k", "3", "--h", "sqrt", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["method"] == "recurrence"


@pytest.mark.parametrize("argv", [
    ["line", "--k", "0"],
    ["line", "--eps", "-1", "--k", "3"],
    ["line"],
    ["ring-geo", "--grid", "abc"],
    ["dual", "--lambda", "0.4", "--v", "a,b"],
    ["nonsense"],
    ["line", "--k", "3", "--h", "sqrt", "--method", "closed"],
])
def test_usage_errors_exit_2(argv, capsys):
    assert run(argv) == 2
    assert capsys.readouterr().err


@pytest.mark.parametrize("cmd", sorted(SUBCOMMANDS))
def test_help_lists_flags(cmd, capsys):
    with pytest.raises(SystemExit) as e:
        build_parser().parse_args([cmd, "--help"])
    assert e.value.code == 0
    text = capsys.readouterr().out
    for flag in SUBCOMMANDS[cmd] + COMMON_FLAGS:
        assert flag in text


def test_ring_local_writes_json_and_density(tmp_path):
    out = tmp_path / "r.json"
    assert run(["ring-local", "--eps", "1", "--k", "5", "--out", str(out)]) == 0
    res = json.loads(out.read_text())
    assert res["cost"] == pytest.approx(0.2372158, abs=1e-7)
    rows = read_csv(tmp_path / "r.csv")
    assert rows[0] == ["x", "rho"] and len(rows) == 1025


def test_ring_geo(tmp_path):
    out = tmp_path / "g.json"
    assert run(["ring-geo", "--eps", "0.375", "--grid", "128", "--out", str(out)]) == 0
    res = json.loads(out.read_text())
    assert abs(res["t_star"] - math.pi / 2) < 0.01
    assert abs(res["cost"] - 0.72) < 0.02


def test_mhr_table(tmp_path):
    out = tmp_path / "m.csv"
    assert run(["mhr", "--dist", "halfnormal", "--kmax", "16", "--out", str(out)]) == 0
    rows = read_csv(out)
    assert rows[0] == ["K", "phi", "bound", "ratio"]
    assert [int(r[0]) for r in rows[1:]] == [1, 2, 4, 8, 16]
    assert all(float(r[1]) <= float(r[2]) for r in rows[1:])


def test_dual_trace(tmp_path):
    out = tmp_path / "d.csv"
    assert run(["dual", "--lambda", "0.4", f"--v={-math.log(4)},0,{math.log(4)}", "--out", str(out)]) == 0
    rows = read_csv(out)
    assert rows[0] == ["r", "nu"]
    assert float(rows[-1][1]) >= 0


def test_repro_dual46_has_negative_tail(tmp_path):
    out = tmp_path / "d.csv"
    assert run(["repro", "--figure", "dual46", "--out", str(out)]) == 0
    nu = [float(r[1]) for r in read_csv(out)[1:]]
    assert nu[-1] < -1e6
    assert all(b <= a for a, b in zip(nu[-100:-1], nu[-99:]))


def test_repro_intro1_offsets(tmp_path):
    out = tmp_path / "i.csv"
    assert run(["repro", "--figure", "intro1", "--out", str(out)]) == 0
    rows = read_csv(out)
    assert rows[0] == ["x", "rho", "offset"]
    marks = sorted(float(r[0]) for r in rows[1:] if r[2] == "1")
    assert len(marks) == 7 and marks[3] == 0.0


def test_verify_passes(tmp_path):
    out = tmp_path / "v.json"
    assert run(["verify", "--target", "line", "--k", "3", "--budget", "16,20,1", "--n", "20000",
                "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["ok"] and all(rep["checks"].values())


def test_same_seed_same_bytes(tmp_path):
    outs = []
    for i in range(2):
        out = tmp_path / f"s{i}.json"
        log = tmp_path / f"s{i}.ndjson"
        assert run(["simulate", "--mech", "ring-local", "--k", "5", "--n", "2000", "--seed", "7",
                    "--log", str(log), "--out", str(out)]) == 0
        outs.append((out.read_bytes(), log.read_bytes()))
    assert outs[0] == outs[1]


def test_seed_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("MSDP_SEED", "123")
    a = tmp_path / "a.json"
    assert run(["simulate", "--n", "1000", "--out", str(a)]) == 0
    b = tmp_path / "b.json"
    assert run(["simulate", "--n", "1000", "--seed", "123", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_manifest_replays(tmp_path):
    out = tmp_path / "s.json"
    man = tmp_path / "m.json"
    assert run(["simulate", "--n", "1000", "--seed", "3", "--out", str(out), "--manifest", str(man)]) == 0
    m = json.loads(man.read_text())
    assert m["seed"] == 3 and m["outputs"][0]["path"] == str(out)
    assert replay_manifest(str(man))
    # replay rewrites the output, so a damaged file is regenerated byte for byte
    out.write_text("tampered")
    assert replay_manifest(str(man))


def test_module_entry_point(tmp_path):
    out = tmp_path / "o.json"
    proc = subprocess.run([sys.executable, "-m", "msdp", "line", "--k", "3", "--out", str(out)],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(out.read_text())["cost"] == 0.5
    proc = subprocess.run([sys.executable, "-m", "msdp", "line", "--k", "0"], capture_output=True, text=True)
    assert proc.returncode == 2 and "k" in proc.stderr
