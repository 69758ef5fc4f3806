import json
from dataclasses import replace

import pandas as pd
import pytest

from app.config import (
    DatasetConfig,
    DecoderConfig,
    EnvConfig,
    PlannerConfig,
    RunConfig,
    TrainConfig,
    load_section,
)
from app.crl import compare as compare_module
from app.errors import ConfigError


@pytest.mark.parametrize("cls", [EnvConfig, DatasetConfig, TrainConfig, DecoderConfig, PlannerConfig])
def test_replace_keeps_explicit_seed_when_env_seed_is_set(cls, monkeypatch):
    monkeypatch.setenv("CWM_SEED", "5")
    base = cls()
    assert [replace(base, seed=s).seed for s in (1, 2, 3)] == [1, 2, 3]
    assert cls(seed=9).seed == 9
    assert cls().seed == 0


def test_compare_modalities_trains_each_seed(monkeypatch):
    monkeypatch.setenv("CWM_SEED", "5")
    seen = []

    class _Params:
        def encode(self, E):
            return E

    def fake_train(subset, config, vocab_size, validation=None):
        seen.append((config.modality, config.seed))
        return _Params()

    monkeypatch.setattr(compare_module, "train_cwm", fake_train)
    monkeypatch.setattr(compare_module, "subsample_transitions", lambda train, fraction, rng: train)
    monkeypatch.setattr(compare_module, "r2_permutation_score", lambda z, c: (0.5, [0]))

    results = compare_module.compare_modalities(
        train=[0, 1], test=type("T", (), {"E_prev": None, "causal_prev": None})(),
        base_config=TrainConfig(), vocab_size=4, seeds=(1, 2, 3), modalities=("CB",),
    )
    assert seen == [("CB", 1), ("CB", 2), ("CB", 3)]
    assert isinstance(results, pd.DataFrame)
    assert list(results["seed"]) == [1, 2, 3]


def test_run_config_explicit_values_win_over_environment(monkeypatch):
    monkeypatch.setenv("CWM_SEED", "5")
    monkeypatch.setenv("CWM_DATA_DIR", "/env/data")
    monkeypatch.setenv("CWM_OUTPUT_DIR", "/env/out")
    monkeypatch.setenv("CWM_CHECKPOINT", "/env/cwm")
    run = RunConfig("plan", seed=1, data_dir="mine", output_dir="out", checkpoint="ckpt")
    assert (run.seed, run.data_dir, run.output_dir, run.checkpoint) == (1, "mine", "out", "ckpt")
    assert RunConfig("plan", seed=0).seed == 0


def test_run_config_environment_fills_unset_fields(monkeypatch):
    monkeypatch.setenv("CWM_SEED", "5")
    monkeypatch.setenv("CWM_DATA_DIR", "/env/data")
    run = RunConfig("plan")
    assert run.seed == 5
    assert run.data_dir == "/env/data"
    assert run.output_dir == "runs"
    assert run.checkpoint is None


def test_run_config_defaults_without_environment():
    run = RunConfig("gen-data")
    assert run.seed is None
    assert (run.data_dir, run.output_dir) == ("data", "runs")


def test_bad_env_seed_is_a_config_error(monkeypatch):
    monkeypatch.setenv("CWM_SEED", "seven")
    with pytest.raises(ConfigError):
        RunConfig("plan")


def test_unset_seed_falls_back_to_config_file(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"train": {"seed": 11, "epochs": 2}}))
    run = RunConfig("train-cwm", config_path=str(path))
    config = load_section(TrainConfig, run.config_path, "train", {"seed": run.seed})
    assert config.seed == 11
    config = load_section(TrainConfig, run.config_path, "train", {"seed": 4})
    assert config.seed == 4
