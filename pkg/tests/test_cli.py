import csv
import io
import json
import subprocess
import sys

import pytest

from reflex.cli import CSV_HEADER, main
from reflex.simbench import EpisodeReport, generate_scenario


def run_cli(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def read_csv(path):
    return list(csv.DictReader(io.StringIO(path.read_text())))


def test_run_is_byte_identical(tmp_path, capsys):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    args = ["run", "--family", "fdo", "--episodes", 4, "--seed", 7, "--policy", "interpolator", "--dcp-rmp"]
    assert run_cli(capsys, *args, "--out-jsonl", a)[0] == 0
    assert run_cli(capsys, *args, "--out-jsonl", b)[0] == 0
    assert a.read_bytes() == b.read_bytes()
    lines = a.read_text().splitlines()
    assert [json.loads(s)["seed"] for s in lines] == [7, 8, 9, 10]
    assert all(EpisodeReport.from_json(s).to_json() == s for s in lines)


def test_run_all_families_csv(tmp_path, capsys):
    out = tmp_path / "s.csv"
    code, table, _ = run_cli(capsys, "run", "--family", "all", "--episodes", 1, "--out-csv", out, "--horizon", 200)
    assert code == 0
    assert out.read_text().splitlines()[0] == ",".join(CSV_HEADER)
    rows = read_csv(out)
    assert sorted(r["family"] for r in rows) == sorted(["SE", "SAO", "FDO", "GB", "DGB"])
    for name in ("SE", "SAO", "FDO", "GB", "DGB"):
        assert name in table


def test_ablation_pair_rows_differ_only_in_flag_and_metrics(tmp_path, capsys):
    on, off = tmp_path / "on.csv", tmp_path / "off.csv"
    base = ["run", "--family", "dgb", "--episodes", 3, "--seed", 2, "--policy", "interpolator"]
    assert run_cli(capsys, *base, "--dcp-rmp", "--out-csv", on)[0] == 0
    assert run_cli(capsys, *base, "--no-dcp-rmp", "--out-csv", off)[0] == 0
    (r_on,), (r_off,) = read_csv(on), read_csv(off)
    assert (r_on["dcp_rmp"], r_off["dcp_rmp"]) == ("1", "0")
    for key in ("family", "policy", "episodes"):
        assert r_on[key] == r_off[key]


def test_ablate_runs_both_arms(tmp_path, capsys):
    out = tmp_path / "s.csv"
    code, table, _ = run_cli(capsys, "run", "--family", "se", "--episodes", 1, "--policy", "interpolator,repulsive", "--ablate", "--out-csv", out)
    assert code == 0
    rows = read_csv(out)
    assert {(r["policy"], r["dcp_rmp"]) for r in rows} == {
        ("interpolator", "1"),
        ("interpolator", "0"),
        ("repulsive", "1"),
        ("repulsive", "0"),
    }


@pytest.mark.parametrize(
    "argv",
    [
        ["run", "--family", "warehouse"],
        ["run", "--policy", "transformer"],
        ["run", "--episodes", "0"],
        ["run", "--param", "k_q=3"],
        ["run", "--param", "k_g"],
        ["run", "--no-such-flag"],
        ["frobnicate"],
    ],
)
def test_usage_errors_exit_2(capsys, argv):
    assert run_cli(capsys, *argv)[0] == 2


def test_unwritable_output_exits_1(tmp_path, capsys):
    target = tmp_path / "missing_dir" / "x.jsonl"
    code, _, err = run_cli(capsys, "run", "--family", "se", "--episodes", 1, "--out-jsonl", target)
    assert code == 1 and "error" in err
    assert not target.exists()


def test_replay_errors(tmp_path, capsys):
    assert run_cli(capsys, "replay", tmp_path / "absent.json")[0] == 1
    bad = tmp_path / "bad.json"
    bad.write_text("{ this is not json")
    assert run_cli(capsys, "replay", bad)[0] == 2
    bad.write_text(json.dumps({"family": "SE"}))
    assert run_cli(capsys, "replay", bad)[0] == 2


def test_replay_reproduces_run_report(tmp_path, capsys, model):
    runs = tmp_path / "r.jsonl"
    assert run_cli(capsys, "run", "--family", "dgb", "--episodes", 1, "--seed", 3, "--policy", "repulsive", "--out-jsonl", runs)[0] == 0
    scene = tmp_path / "dgb_3.json"
    assert run_cli(capsys, "gen", "--family", "dgb", "--seed", 3, "--out-dir", tmp_path)[0] == 0
    assert scene.exists()
    before = scene.read_bytes()
    code, out, _ = run_cli(capsys, "replay", scene, "--policy", "repulsive")
    assert code == 0
    lines = out.splitlines()
    assert lines[-1] == runs.read_text().strip()
    ticks = [json.loads(s) for s in lines[:-1]]
    assert len(ticks) == json.loads(lines[-1])["ticks"]
    assert any(t["x_r"] is not None for t in ticks)
    assert scene.read_bytes() == before  # input never modified


def test_replay_dgb_ablation_collides_without_dcp(tmp_path, capsys):
    scene = tmp_path / "dgb_0.json"
    assert run_cli(capsys, "gen", "--family", "dgb", "--seed", 0, "--out-dir", tmp_path)[0] == 0
    on = json.loads(run_cli(capsys, "replay", scene, "--policy", "interpolator", "--dcp-rmp")[1].splitlines()[-1])
    off = json.loads(run_cli(capsys, "replay", scene, "--policy", "interpolator", "--no-dcp-rmp")[1].splitlines()[-1])
    assert not on["collided"] and off["collided"]


def test_replay_empty_scene_has_no_x_r(tmp_path, capsys, model):
    spec = generate_scenario("SE", 0, model=model).to_dict()
    spec["static_obstacles"] = []
    path = tmp_path / "empty.json"
    path.write_text(json.dumps(spec))
    code, out, _ = run_cli(capsys, "replay", path, "--dcp-rmp")
    assert code == 0
    lines = out.splitlines()
    ticks = [json.loads(s) for s in lines[:-1]]
    assert ticks and all(t.get("x_r") is None for t in ticks)
    rep = json.loads(lines[-1])
    assert rep["reached"] and not rep["collided"] and rep["min_clearance"] is None


def test_config_precedence(tmp_path, capsys, monkeypatch):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"family": "gb", "episodes": 2, "seed": 5, "policy": "repulsive", "dcp_rmp": False}))
    out = tmp_path / "o.jsonl"
    assert run_cli(capsys, "run", "--config", cfg, "--episodes", 1, "--out-jsonl", out)[0] == 0
    (rep,) = [json.loads(s) for s in out.read_text().splitlines()]
    assert (rep["family"], rep["seed"], rep["policy"], rep["dcp_rmp"]) == ("GB", 5, "repulsive", False)
    # the environment seed is used only when neither the file nor a flag sets one
    monkeypatch.setenv("REFLEX_SEED", "9")
    assert run_cli(capsys, "run", "--family", "se", "--episodes", 1, "--out-jsonl", out)[0] == 0
    assert json.loads(out.read_text())["seed"] == 9
    assert run_cli(capsys, "run", "--family", "se", "--episodes", 1, "--seed", 1, "--out-jsonl", out)[0] == 0
    assert json.loads(out.read_text())["seed"] == 1
    cfg.write_text(json.dumps({"episodez": 2}))
    assert run_cli(capsys, "run", "--config", cfg)[0] == 2


def test_gen_stdout_and_trajectory(tmp_path, capsys):
    code, out, _ = run_cli(capsys, "gen", "--family", "sao", "--seed", 4)
    assert code == 0 and json.loads(out)["family"] == "SAO"
    assert run_cli(capsys, "gen", "--family", "all")[0] == 2  # several scenes need --out-dir
    out_file = tmp_path / "t.jsonl"
    assert run_cli(capsys, "run", "--family", "se", "--episodes", 1, "--trajectory", "--out-jsonl", out_file)[0] == 0
    rep = json.loads(out_file.read_text())
    assert len(rep["trajectory"]) == rep["ticks"] and len(rep["trajectory"][0]) == 7


def test_help_documents_every_flag():
    res = subprocess.run([sys.executable, "-m", "reflex.cli", "run", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for flag in ("--family", "--episodes", "--seed", "--policy", "--ablate", "--config", "--out-jsonl", "--out-csv", "--jobs", "--strict", "--param", "--rate", "--horizon", "--noise", "--dcp-rmp", "--trajectory"):
        assert flag in res.stdout
    res = subprocess.run([sys.executable, "-m", "reflex.cli", "replay", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "--no-dcp-rmp" in res.stdout

