from __future__ import annotations

import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from catbn.cli import cli, main
from catbn.network import load_network, save_network
from catbn.zoo import save_blueprint

from .test_evaluation import boolean_truth

GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """Blueprint + truth net + generated dataset shared by CLI tests."""
    root = tmp_path_factory.mktemp("cliwork")
    truth, bp = boolean_truth(6, 3, seed=31)
    save_blueprint(bp, root / "bp.json")
    save_network(truth, root / "truth.json")
    runner = CliRunner()
    result = runner.invoke(
        cli,
        [
            "generate", "--blueprint", str(root / "bp.json"),
            "--truth", str(root / "truth.json"),
            "--students", "30", "--seed", "4",
            "--out", str(root / "data.csv"),
            "--sidecar", str(root / "skills.csv"),
        ],
    )
    assert result.exit_code == 0, result.output
    return root


def test_help_matches_golden():
    runner = CliRunner()
    result = runner.invoke(cli, ["--help"])
    assert result.exit_code == 0
    want = (GOLDEN / "cli_help.txt").read_text()
    assert result.output == want


@pytest.mark.parametrize("command", ["generate", "train", "evaluate", "simulate", "serve"])
def test_subcommand_flags_pinned(command):
    result = CliRunner().invoke(cli, [command, "--help"])
    assert result.exit_code == 0
    want = (GOLDEN / f"cli_help_{command}.txt").read_text()
    assert result.output == want


def test_generate_outputs(workdir):
    data = (workdir / "data.csv").read_text().splitlines()
    assert data[0].startswith("student_id,")
    assert len(data) == 31
    skills = (workdir / "skills.csv").read_text().splitlines()
    assert skills[0] == "student_id,S1"


def test_generate_determinism(workdir, tmp_path):
    runner = CliRunner()
    for name in ("x1.csv", "x2.csv"):
        r = runner.invoke(
            cli,
            [
                "generate", "--blueprint", str(workdir / "bp.json"),
                "--truth", str(workdir / "truth.json"),
                "--students", "15", "--seed", "9", "--out", str(tmp_path / name),
            ],
        )
        assert r.exit_code == 0, r.output
    assert (tmp_path / "x1.csv").read_bytes() == (tmp_path / "x2.csv").read_bytes()


def test_train_deterministic_network(workdir, tmp_path):
    runner = CliRunner()
    args = [
        "train", "--model", "b3",
        "--data", str(workdir / "data.csv"),
        "--blueprint", str(workdir / "bp.json"),
        "--scale", "boolean",
        "--max-iterations", "15", "--seed", "2",
    ]
    r1 = runner.invoke(cli, args + ["--out", str(tmp_path / "n1.json")])
    r2 = runner.invoke(cli, args + ["--out", str(tmp_path / "n2.json")])
    assert r1.exit_code == 0, r1.output
    assert r2.exit_code == 0
    assert (tmp_path / "n1.json").read_bytes() == (tmp_path / "n2.json").read_bytes()
    net = load_network(tmp_path / "n1.json")
    assert net.skill_ids == ("S1",)


def test_train_scale_mismatch_rejected(workdir, tmp_path):
    r = CliRunner().invoke(
        cli,
        [
            "train", "--model", "n3",
            "--data", str(workdir / "data.csv"),
            "--blueprint", str(workdir / "bp.json"),
            "--scale", "boolean", "--out", str(tmp_path / "n.json"),
        ],
    )
    assert r.exit_code != 0


def test_evaluate_writes_reports(workdir, tmp_path):
    out = tmp_path / "rep"
    r = CliRunner().invoke(
        cli,
        [
            "evaluate",
            "--data", str(workdir / "data.csv"),
            "--blueprint", str(workdir / "bp.json"),
            "--models", "b2,b3", "--folds", "3", "--seed", "7",
            "--scale", "boolean", "--max-iterations", "15",
            "--out", str(out),
        ],
    )
    assert r.exit_code == 0, r.output
    for name in ("sr_curves.csv", "sr_curves_conditional.csv", "sparsity.csv",
                 "occurrence_b2.csv", "occurrence_b3.csv", "manifest.json"):
        assert (out / name).exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["models"] == ["b2", "b3"]
    assert manifest["folds"] == 3


def test_simulate_transcript_schema(workdir, tmp_path):
    runner = CliRunner()
    net_path = tmp_path / "net.json"
    r = runner.invoke(
        cli,
        [
            "train", "--model", "b3", "--data", str(workdir / "data.csv"),
            "--blueprint", str(workdir / "bp.json"), "--scale", "boolean",
            "--max-iterations", "15", "--seed", "2", "--out", str(net_path),
        ],
    )
    assert r.exit_code == 0, r.output
    sid = (workdir / "data.csv").read_text().splitlines()[1].split(",")[0]
    r = runner.invoke(
        cli,
        [
            "simulate", "--network", str(net_path),
            "--blueprint", str(workdir / "bp.json"),
            "--data", str(workdir / "data.csv"),
            "--student", sid, "--scale", "boolean",
        ],
    )
    assert r.exit_code == 0, r.output
    lines = [json.loads(line) for line in r.output.strip().splitlines()]
    assert len(lines) == 6
    for step, rec in enumerate(lines, start=1):
        assert rec["step"] == step
        assert set(rec) == {"step", "asked", "answer", "ig", "entropy_after", "skill_posteriors"}
        assert rec["answer"] in (1, 2)  # 1-based on the wire
        assert "S1" in rec["skill_posteriors"]


def test_unknown_student_exits_nonzero(workdir, tmp_path):
    code = main(
        [
            "simulate", "--network", str(workdir / "truth.json"),
            "--blueprint", str(workdir / "bp.json"),
            "--data", str(workdir / "data.csv"),
            "--student", "nobody", "--scale", "boolean",
        ]
    )
    assert code == 1


def test_unknown_flag_exits_nonzero():
    assert main(["evaluate", "--frobnicate"]) == 2


def test_config_file_provides_defaults(workdir, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"students": 5, "seed": 11}))
    r = CliRunner().invoke(
        cli,
        [
            "generate", "--config", str(cfg),
            "--blueprint", str(workdir / "bp.json"),
            "--truth", str(workdir / "truth.json"),
            "--out", str(tmp_path / "five.csv"),
        ],
    )
    assert r.exit_code == 0, r.output
    assert len((tmp_path / "five.csv").read_text().splitlines()) == 6


def test_env_variable_beats_config(workdir, tmp_path, monkeypatch):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"students": 5}))
    r = CliRunner().invoke(
        cli,
        [
            "generate", "--config", str(cfg),
            "--blueprint", str(workdir / "bp.json"),
            "--truth", str(workdir / "truth.json"),
            "--out", str(tmp_path / "env.csv"),
        ],
        env={"CATBN_GENERATE_STUDENTS": "8"},
    )
    assert r.exit_code == 0, r.output
    assert len((tmp_path / "env.csv").read_text().splitlines()) == 9
