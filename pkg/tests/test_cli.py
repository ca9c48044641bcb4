import json
from pathlib import Path

import pytest

from anderson2p.cli import main, replay
from anderson2p.config import ConfigError, ExperimentConfig, parse_config_text

FAST = [
    "--set", "msa.L0=3",
    "--set", "msa.K=2",
    "--set", "cube.radius=2",
    "--set", "run.n_samples=30",
    "--set", "msa.grid_points=6",
    "--set", "model.dist=bernoulli",
]


def run_cmd(tmp_path, command, extra=(), name="run"):
    out = tmp_path / name
    rc = main([command, "--out", str(out), *FAST, *extra])
    assert rc == 0, f"{command} failed"
    return out


def test_parse_config_text():
    cfg = parse_config_text("a.b = 1\n# comment\nc = x, y  # trailing\n\n")
    assert cfg == {"a.b": "1", "c": "x, y"}
    with pytest.raises(ConfigError):
        parse_config_text("not a key value line")


def test_config_defaults_and_validation():
    cfg = ExperimentConfig.from_sources()
    assert cfg.get_int("msa.L0") == 5
    assert cfg.schedule().lengths == (5, 11, 36, 216)
    with pytest.raises(ConfigError, match="L0"):
        ExperimentConfig.from_sources(overrides=["msa.L0=2"])
    with pytest.raises(ConfigError, match="q"):
        ExperimentConfig.from_sources(overrides=["msa.q=10"])
    with pytest.raises(ConfigError, match="n_samples"):
        ExperimentConfig.from_sources(overrides=["run.n_samples=0"])


def test_config_hash_ignores_volatile_keys():
    a = ExperimentConfig.from_sources()
    b = ExperimentConfig.from_sources(workers=8, outdir="/elsewhere")
    assert a.config_hash() == b.config_hash()
    c = ExperimentConfig.from_sources(seed=99)
    assert a.config_hash() != c.config_hash()


def test_unknown_command_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2
    assert main([]) == 2


def test_config_error_exit_code(tmp_path):
    rc = main(["schedule", "--out", str(tmp_path), "--set", "msa.L0=1"])
    assert rc == 2


def test_schedule_command_outputs(tmp_path):
    out = run_cmd(tmp_path, "schedule")
    manifest = json.loads((out / "manifest.json").read_text())
    assert {r["file"] for r in manifest["results"]} == {"schedule.jsonl", "schedule.csv"}
    assert manifest["figures"] == ["schedule.png"]
    assert (out / "schedule.png").exists()
    lines = (out / "schedule.csv").read_text().splitlines()
    assert lines[0].startswith("# manifest=")
    assert lines[1] == "k,L,m"
    assert lines[2].startswith("0,3,")
    first = json.loads((out / "schedule.jsonl").read_text().splitlines()[0])
    assert first["manifest"].split(":")[0] == manifest["config_hash"]


def test_spectrum_green_classify_decay(tmp_path):
    out = run_cmd(tmp_path, "spectrum", ["--set", "spectrum.dump_matrix=true"], "sp")
    assert (out / "spectrum.mtx").exists()
    out = run_cmd(tmp_path, "green", name="gr")
    assert (out / "green.csv").exists()
    out = run_cmd(tmp_path, "classify", name="cl")
    rec = json.loads((out / "classify.jsonl").read_text().splitlines()[1])
    assert set(rec["flags"]) == {"R", "CNR", "S", "T", "interactive"}
    out = run_cmd(tmp_path, "decay", ["--set", "interval.e_high=8.0"], "dc")
    lines = (out / "decay.csv").read_text().splitlines()
    assert lines[1] == "sample,eigenvalue,m_hat,C_hat,r2,center"
    assert len(lines) > 2


def test_estimators_and_verify_ct(tmp_path):
    for cmd in ("estimate-w1", "estimate-s0"):
        out = run_cmd(tmp_path, cmd, name=cmd)
        lines = (out / f"{cmd}.csv").read_text().splitlines()
        assert lines[1].startswith("event,L,k,estimate")
    out = run_cmd(
        tmp_path, "verify-ct",
        ["--set", "ct.instances=5", "--set", "ct.energies=2"], "ct",
    )
    rec = json.loads((out / "verify-ct.jsonl").read_text().splitlines()[1])
    assert rec["violations"] == 0


def test_lifshitz_series(tmp_path):
    out = run_cmd(
        tmp_path, "estimate-lifshitz",
        ["--set", "lifshitz.lengths=4, 6", "--set", "lifshitz.n_samples=20"], "lf",
    )
    lines = (out / "estimate-lifshitz.csv").read_text().splitlines()
    assert len(lines) == 4  # manifest comment + header + 2 rows


def test_exhaustive_flag(tmp_path):
    out = run_cmd(tmp_path, "estimate-w1", ["--exhaustive"], "ex")
    rec = json.loads((out / "estimate-w1.jsonl").read_text().splitlines()[1])
    assert rec["mode"] == "exhaustive"


def test_replay_matches_and_detects_tampering(tmp_path):
    out = run_cmd(tmp_path, "estimate-w1", ["--seed", "7"], "rp")
    manifest = out / "manifest.json"
    assert replay(str(manifest)) == 0
    assert replay(str(manifest), workers=2) == 0
    target = out / "estimate-w1.csv"
    target.write_text(target.read_text().replace("estimate", "ESTIMATE"))
    assert replay(str(manifest)) == 1
    assert replay(str(tmp_path / "nope" / "manifest.json")) == 2


def test_replay_missing_result_file(tmp_path):
    out = run_cmd(tmp_path, "schedule", name="mv")
    (out / "schedule.csv").unlink()
    assert replay(str(out / "manifest.json")) == 2


def test_env_var_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("ANDERSON2P_OUT", str(tmp_path / "envout"))
    rc = main(["schedule", *FAST])
    assert rc == 0
    assert (tmp_path / "envout" / "schedule.csv").exists()


def test_example_config_parses_and_runs(tmp_path):
    example = Path(__file__).resolve().parents[1] / "docs" / "example.cfg"
    cfg = ExperimentConfig.from_sources(config_path=str(example))
    assert cfg.get_int("msa.L0") == 5
    rc = main([
        "schedule", "--config", str(example), "--out", str(tmp_path / "ex"),
    ])
    assert rc == 0


def test_runtime_failure_flushes_partial_results(tmp_path):
    # the second length is invalid; the first result must still be on disk
    out = tmp_path / "partial"
    rc = main([
        "estimate-lifshitz", "--out", str(out), *FAST,
        "--set", "lifshitz.lengths=4, -3",
        "--set", "lifshitz.n_samples=10",
    ])
    assert rc == 3
    lines = (out / "estimate-lifshitz.csv").read_text().splitlines()
    assert len(lines) == 3  # manifest comment + header + the L=4 row
    assert not (out / "manifest.json").exists()
