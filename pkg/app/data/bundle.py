"""
Dataset bundle directory

    manifest.json            split seeds, disjointness flag, hashes, catalog
    grammar.json             action grammar
    vocabulary.txt           token list (one per line)
    observation_map.json     shared observation map
    train.jsonl validation.jsonl test.jsonl icl.jsonl
    episodes_n{N}.jsonl      N-step evaluation episodes (spliced from test)
    tasks_n{N}.jsonl         planning tasks
    icl_pool.jsonl self_eval.jsonl
"""
import hashlib
import json
import logging
from functools import cached_property
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from app.config import DatasetConfig, EnvConfig
from app.data.generation import (
    GenerationContext,
    build_icl_pool,
    build_self_eval_samples,
    generate_planning_tasks,
    generate_split,
    splice_nstep,
)
from app.data.jsonl import (
    load_episodes,
    load_icl_pool,
    load_self_eval,
    load_tasks,
    load_trajectories,
    make_header,
    save_episodes,
    save_icl_pool,
    save_self_eval,
    save_tasks,
    save_trajectories,
)
from app.data.records import Episode, IclPool, PlanningTask, SelfEvalSample, Trajectory
from app.env import EntityCatalog, random_init
from app.errors import DataError
from app.observation import ObservationMap, make_mixing
from app.text import Pcfg, Vocabulary

logger = logging.getLogger(__name__)

MANIFEST = "manifest.json"
SPLITS = ("train", "validation", "test", "icl")
SPLIT_STRIDE = 10 ** 6
SEED_STRIDE = 10 ** 7


def split_seed_base(seed: int, split: str) -> int:
    """First trajectory seed of a split; splits are SPLIT_STRIDE apart"""
    return seed * SEED_STRIDE + (SPLITS.index(split) + 1) * SPLIT_STRIDE


def _sub_rng(seed: int, *tags: int) -> np.random.Generator:
    return np.random.default_rng([seed, *tags])


def _file_hash(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def split_counts(config: DatasetConfig) -> Dict[str, int]:
    return {
        "train": config.scaled(config.train_trajectories),
        "validation": config.scaled(config.validation_trajectories),
        "test": config.scaled(config.test_trajectories),
        "icl": config.scaled(config.icl_trajectories),
    }


def generate_datasets(env: EnvConfig, config: DatasetConfig, out_dir, pcfg: Optional[Pcfg] = None) -> "DatasetBundle":
    """
    Generate every dataset of a run into ``out_dir``

    Counts are the full-scale defaults times ``config.scale``; splits use
    disjoint seed ranges. Episodes are spliced from the test split, the ICL
    pool and self-eval samples from the ICL split.

    Returns:
        DatasetBundle over the written directory
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    pcfg = pcfg or Pcfg()
    vocabulary = Vocabulary.from_grammar(pcfg)
    catalog = EntityCatalog.from_state(random_init(env, _sub_rng(config.seed, 0)))
    obs_map = make_mixing(
        catalog.K, config.observation_dim, _sub_rng(config.seed, 1),
        M=config.latent_dim, nonlinearity=config.nonlinearity,
    )
    pcfg.to_json(out / "grammar.json")
    vocabulary.save(out / "vocabulary.txt")
    obs_map.save(out / "observation_map.json")

    ctx = GenerationContext(env, obs_map, pcfg, vocabulary, config.padding_length)
    header_fields = {
        "env": env.to_dict(),
        "catalog": catalog.to_dict(),
        "vocabulary_hash": vocabulary.content_hash(),
        "padding_length": config.padding_length,
    }

    counts = split_counts(config)
    seed_ranges: Dict[str, List[int]] = {}
    trajectories: Dict[str, List[Trajectory]] = {}
    for split in SPLITS:
        base = split_seed_base(config.seed, split)
        seeds = list(range(base, base + counts[split]))
        seed_ranges[split] = [seeds[0], seeds[-1]]
        logger.info(f"[data] {split}: {len(seeds)} trajectories x {config.trajectory_length} steps")
        trajectories[split] = generate_split(ctx, seeds, config.trajectory_length, config.workers)
        save_trajectories(out / f"{split}.jsonl", trajectories[split], make_header(split, **header_fields))

    all_seeds = [set(range(a, b + 1)) for a, b in seed_ranges.values()]
    disjoint = all(not (all_seeds[i] & all_seeds[j]) for i in range(len(all_seeds)) for j in range(i + 1, len(all_seeds)))

    episode_files = {}
    for n in config.nstep_values:
        path = out / f"episodes_n{n}.jsonl"
        episodes = splice_nstep(trajectories["test"], n, config.episodes_per_n, _sub_rng(config.seed, 2, n))
        save_episodes(path, episodes, make_header("episodes", n_steps=n, **header_fields))
        episode_files[str(n)] = path.name

    task_files = {}
    for n in config.planning_n_values:
        path = out / f"tasks_n{n}.jsonl"
        tasks = generate_planning_tasks(env, n, config.tasks_per_n, _sub_rng(config.seed, 3, n))
        save_tasks(path, tasks, make_header("tasks", n_steps=n, **header_fields))
        task_files[str(n)] = path.name

    pool = build_icl_pool(trajectories["icl"], config.icl_pool_size, _sub_rng(config.seed, 4), catalog, config.icl_window)
    save_icl_pool(out / "icl_pool.jsonl", pool, make_header("icl_pool", **header_fields))
    samples = build_self_eval_samples(trajectories["icl"], config.self_eval_count, _sub_rng(config.seed, 5), catalog, pcfg)
    save_self_eval(out / "self_eval.jsonl", samples, make_header("self_eval", **header_fields))

    files = sorted(p for p in out.iterdir() if p.is_file() and p.name != MANIFEST)
    manifest = {
        "format": "cwm-bundle",
        "version": 1,
        "seed": config.seed,
        "scale": config.scale,
        "env": env.to_dict(),
        "dataset": config.to_dict(),
        "catalog": catalog.to_dict(),
        "splits": {s: {"count": counts[s], "seeds": seed_ranges[s], "file": f"{s}.jsonl"} for s in SPLITS},
        "seed_disjoint": disjoint,
        "vocabulary_hash": vocabulary.content_hash(),
        "episodes": episode_files,
        "tasks": task_files,
        "files": {p.name: _file_hash(p) for p in files},
    }
    (out / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8")
    logger.info(f"[data] bundle written to {out} ({len(files)} files, seed-disjoint={disjoint})")
    return DatasetBundle(out)


class DatasetBundle:
    """Read access to a generated bundle directory"""

    def __init__(self, path):
        self.path = Path(path)
        manifest_path = self.path / MANIFEST
        if not manifest_path.exists():
            raise DataError(f"no dataset bundle at {self.path} (missing {MANIFEST})")
        self.manifest = json.loads(manifest_path.read_text(encoding="utf-8"))

    @cached_property
    def env(self) -> EnvConfig:
        return EnvConfig.from_dict(self.manifest["env"])

    @cached_property
    def dataset_config(self) -> DatasetConfig:
        return DatasetConfig.from_dict(self.manifest["dataset"])

    @cached_property
    def catalog(self) -> EntityCatalog:
        return EntityCatalog.from_dict(self.manifest["catalog"])

    @cached_property
    def pcfg(self) -> Pcfg:
        return Pcfg.from_json(self.path / "grammar.json")

    @cached_property
    def vocabulary(self) -> Vocabulary:
        vocabulary = Vocabulary.load(self.path / "vocabulary.txt")
        if vocabulary.content_hash() != self.manifest["vocabulary_hash"]:
            raise DataError("vocabulary file does not match the manifest hash")
        return vocabulary

    @cached_property
    def obs_map(self) -> ObservationMap:
        return ObservationMap.load(self.path / "observation_map.json")

    @property
    def padding_length(self) -> int:
        return int(self.manifest["dataset"]["padding_length"])

    @property
    def seed_disjoint(self) -> bool:
        return bool(self.manifest["seed_disjoint"])

    def verify(self) -> bool:
        """Recompute every file hash against the manifest"""
        for name, expected in self.manifest["files"].items():
            if _file_hash(self.path / name) != expected:
                raise DataError(f"{name} does not match its manifest hash")
        return True

    def trajectories(self, split: str) -> List[Trajectory]:
        if split not in SPLITS:
            raise DataError(f"unknown split {split!r}; expected one of {SPLITS}")
        return load_trajectories(self.path / f"{split}.jsonl")[1]

    def episodes(self, n_steps: int) -> List[Episode]:
        name = self.manifest["episodes"].get(str(n_steps))
        if name is None:
            raise DataError(f"bundle has no {n_steps}-step episodes")
        return load_episodes(self.path / name)[1]

    def tasks(self, n_steps: int) -> List[PlanningTask]:
        name = self.manifest["tasks"].get(str(n_steps))
        if name is None:
            raise DataError(f"bundle has no {n_steps}-step planning tasks")
        return load_tasks(self.path / name)[1]

    @property
    def episode_lengths(self) -> List[int]:
        return sorted(int(n) for n in self.manifest["episodes"])

    @property
    def task_lengths(self) -> List[int]:
        return sorted(int(n) for n in self.manifest["tasks"])

    def icl_pool(self) -> IclPool:
        return load_icl_pool(self.path / "icl_pool.jsonl")[1]

    def self_eval(self) -> List[SelfEvalSample]:
        return load_self_eval(self.path / "self_eval.jsonl")[1]
