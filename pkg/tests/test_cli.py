import json

import numpy as np
import pandas as pd
import pytest

from app.cli import build_parser, main

SMALL_RUN = {
    "env": {"grid_size": 8, "n_vehicles": 2, "n_obstacles": 1, "n_lights": 2},
    "dataset": {
        "trajectory_length": 12, "test_trajectories": 10000, "validation_trajectories": 5000, "nstep_values": [1, 2], "episodes_per_n": 5,
        "planning_n_values": [1], "tasks_per_n": 4, "icl_pool_size": 2, "self_eval_count": 4,
    },
    "train": {
        "epochs": 1, "batch_size": 64, "hidden_dim": 16, "flow_layers": 2, "flow_hidden": 16,
        "action_dim": 8, "token_dim": 8, "gate_hidden": 16,
    },
    "decoder": {"assign_epochs": 3, "causal_epochs": 3, "hidden_dim": 8, "max_labels": 60},
    "planner": {"rollouts": 10},
}


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps(SMALL_RUN))
    return path


def _run(capsys, *argv):
    code = main([str(a) for a in argv])
    captured = capsys.readouterr()
    lines = [line for line in captured.out.splitlines() if line.strip()]
    return code, (json.loads(lines[-1]) if lines else None), captured.err


def _last_error(err):
    return json.loads([line for line in err.splitlines() if line.strip()][-1])


@pytest.fixture
def bundle_args(tmp_path, config_file, capsys):
    args = ["--config", config_file, "--data", tmp_path / "data", "--out", tmp_path / "out", "--scale", 0.001, "--seed", 7]
    code, summary, _ = _run(capsys, *args, "gen-data")
    assert code == 0
    assert summary["seed_disjoint"]
    return args


def test_gen_data_is_deterministic(tmp_path, config_file, capsys):
    hashes = []
    for name, seed in (("a", 7), ("b", 7), ("c", 8)):
        code, summary, _ = _run(
            capsys, "--config", config_file, "--data", tmp_path / name, "--scale", 0.001, "--seed", seed, "gen-data",
        )
        assert code == 0
        hashes.append(summary["files"])
    assert hashes[0] == hashes[1]
    assert hashes[0]["train.jsonl"] != hashes[2]["train.jsonl"]


def test_seed_flag_wins_over_env_seed(tmp_path, config_file, capsys, monkeypatch):
    args = ["--config", config_file, "--scale", 0.001]
    _, plain, _ = _run(capsys, *args, "--data", tmp_path / "plain", "--seed", 7, "gen-data")
    monkeypatch.setenv("CWM_SEED", "8")
    _, flagged, _ = _run(capsys, *args, "--data", tmp_path / "flagged", "--seed", 7, "gen-data")
    _, from_env, _ = _run(capsys, *args, "--data", tmp_path / "env", "gen-data")
    assert flagged["files"] == plain["files"]
    assert from_env["files"]["train.jsonl"] != plain["files"]["train.jsonl"]


def test_eval_inference_with_oracle(tmp_path, bundle_args, capsys):
    code, summary, _ = _run(capsys, *bundle_args, "eval-inference", "--oracle")
    assert code == 0
    assert summary["model"] == "OracleWorldModel"
    assert summary["accuracy"] == {"1": 1.0, "2": 1.0}

    table = pd.read_csv(tmp_path / "out" / "inference_accuracy.csv")
    assert list(table["N"]) == [1, 2]
    assert (tmp_path / "out" / "inference_accuracy.txt").exists()
    assert (tmp_path / "out" / "inference_categories.csv").exists()


def test_plan_with_oracle_and_goal_scorer(tmp_path, bundle_args, capsys):
    code, summary, _ = _run(capsys, *bundle_args, "plan", "--oracle", "--scorer", "goal")
    assert code == 0
    assert summary["success_rate"] == {"1": 1.0}
    frame = pd.read_csv(tmp_path / "out" / "planning_tasks.csv")
    assert len(frame) == 4
    assert frame["success"].all()


def test_train_fit_and_evaluate_learned_model(tmp_path, bundle_args, capsys):
    code, summary, _ = _run(capsys, *bundle_args, "train-cwm", "--modality", "TB")
    assert code == 0
    assert summary["modality"] == "TB"
    assert np.isfinite(summary["final_loss"])
    assert len(set(summary["permutation"])) == 8

    code, summary, _ = _run(capsys, *bundle_args, "fit-decoder", "--labels", 40)
    assert code == 0
    assert summary["labels"] == 40
    assert summary["assigned_latents"] >= 8

    code, summary, _ = _run(capsys, *bundle_args, "eval-inference", "--n", 1)
    assert code == 0
    assert summary["model"] == "CausalWorldModel"
    assert 0.0 <= summary["accuracy"]["1"] <= 1.0


def test_compare_modalities_emits_every_modality(tmp_path, bundle_args, capsys):
    code, summary, _ = _run(capsys, *bundle_args, "compare-modalities", "--fractions", 0.5)
    assert code == 0
    assert summary["modalities"] == ["CB", "HB", "TB"]
    assert summary["rows"] == 3
    table = pd.read_csv(tmp_path / "out" / "modality_comparison.csv")
    assert set(table["modality"]) == {"CB", "HB", "TB"}


def test_missing_bundle_is_a_data_error(tmp_path, capsys):
    code, summary, err = _run(capsys, "--data", tmp_path / "nowhere", "eval-inference", "--oracle")
    assert code == 3
    assert summary is None
    error = _last_error(err)
    assert error["error"] == "data_error"
    assert error["exit_code"] == 3


def test_unknown_config_key_is_a_config_error(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"env": {"grid_size": 8, "wheels": 4}}))
    code, _, err = _run(capsys, "--config", path, "--data", tmp_path / "data", "gen-data")
    assert code == 2
    assert _last_error(err)["exit_code"] == 2


def test_unknown_scorer_is_a_config_error(bundle_args, capsys):
    code, _, err = _run(capsys, *bundle_args, "plan", "--oracle", "--scorer", "telepathy")
    assert code == 2
    assert _last_error(err)["error"] == "config_error"


def test_learned_model_needs_a_checkpoint(bundle_args, capsys):
    code, _, err = _run(capsys, *bundle_args, "eval-inference")
    assert code == 3
    assert _last_error(err)["exit_code"] == 3


def test_parser_lists_every_subcommand():
    parser = build_parser()
    choices = parser._subparsers._group_actions[0].choices
    assert set(choices) == {
        "gen-data", "train-cwm", "fit-decoder", "eval-inference", "plan",
        "compare-modalities", "serve-stdio", "serve",
    }
    with pytest.raises(SystemExit):
        parser.parse_args(["plan", "--rollouts", "many"])
