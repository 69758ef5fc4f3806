"""
Command-line entry point

Every sub-command reads the dataset bundle under ``--data`` (written by
``gen-data``), writes artifacts under ``--out`` and prints one JSON summary
line on stdout. Failures print one JSON error line on stderr and exit with
the error's code: 2 config, 3 data, 4 numerical or internal.
"""
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np
import uvicorn

from app.config import DatasetConfig, DecoderConfig, EnvConfig, PlannerConfig, RunConfig, TrainConfig, load_section
from app.crl import (
    TransitionSet,
    compare_modalities,
    r2_permutation_score,
    subsample_transitions,
    summarize_comparison,
    train_cwm,
)
from app.data import DatasetBundle, generate_datasets
from app.decoder import fit_causal_mapper
from app.env import GridState
from app.errors import CwmError, DataError
from app.evaluation import eval_inference_lengths, eval_planning, report_render
from app.planning import ScorerFactory, ScorerPools
from app.runtime import (
    OracleWorldModel,
    RuntimeService,
    WorldModel,
    load_model_parts,
    load_world_model,
    save_world_model,
    serve_stdio,
)
from app.web import create_app

logger = logging.getLogger(__name__)

DEFAULT_FRACTIONS = (0.005, 0.01, 0.015)


def _emit(summary: dict) -> None:
    sys.stdout.write(json.dumps(summary, sort_keys=True) + "\n")
    sys.stdout.flush()


def _bundle(run: RunConfig) -> DatasetBundle:
    return DatasetBundle(run.data_path)


def _checkpoint_path(run: RunConfig) -> Path:
    return Path(run.checkpoint) if run.checkpoint else run.output_path / "cwm"


def _template(bundle: DatasetBundle) -> Optional[GridState]:
    """Start state of the first stored episode; it fixes the grid layout"""
    for n in bundle.episode_lengths:
        episodes = bundle.episodes(n)
        if episodes:
            return episodes[0].start_state
    return None


def _world_model(run: RunConfig, bundle: DatasetBundle, oracle: bool) -> WorldModel:
    """Learned model from the checkpoint, or the simulator with ``--oracle``"""
    template = _template(bundle)
    if oracle:
        if template is None:
            raise DataError("the simulator needs a stored episode for its grid layout")
        return OracleWorldModel(template, bundle.obs_map)
    return load_world_model(_checkpoint_path(run), bundle, template=template)


def _transitions(bundle: DatasetBundle, split: str) -> TransitionSet:
    return TransitionSet.from_trajectories(bundle.trajectories(split), bundle.obs_map)


# ----- sub-commands -----

def cmd_gen_data(run: RunConfig, args: argparse.Namespace) -> dict:
    env = load_section(EnvConfig, run.config_path, "env", {"seed": run.seed})
    dataset = load_section(
        DatasetConfig, run.config_path, "dataset",
        {"seed": run.seed, "scale": run.scale, "workers": args.workers},
    )
    bundle = generate_datasets(env, dataset, run.data_path)
    return {
        "bundle": str(bundle.path),
        "seed_disjoint": bundle.seed_disjoint,
        "files": bundle.manifest["files"],
    }


def cmd_train_cwm(run: RunConfig, args: argparse.Namespace) -> dict:
    bundle = _bundle(run)
    config = load_section(TrainConfig, run.config_path, "train", {
        "seed": run.seed, "modality": args.modality, "epochs": args.epochs, "subsample": args.subsample,
    })
    train = _transitions(bundle, "train")
    if config.subsample < 1.0:
        train = subsample_transitions(train, config.subsample, np.random.default_rng([config.seed, 17]))
    validation = _transitions(bundle, "validation")
    params = train_cwm(
        train, config, bundle.vocabulary.size,
        validation=validation, dataset_hash=bundle.manifest["files"].get("train.jsonl"),
    )
    test = _transitions(bundle, "test")
    score, perm = r2_permutation_score(params.encode(test.E_prev), test.causal_prev)
    path = save_world_model(_checkpoint_path(run), params)
    history = params.metadata["history"]
    final_loss = history[-1]["train_loss"] if history else None
    logger.info(f"[train] {config.modality}: final loss {final_loss}, permutation R2 {score:.3f}")
    return {
        "checkpoint": str(path),
        "modality": config.modality,
        "final_loss": final_loss,
        "r2": score,
        "permutation": list(perm),
    }


def cmd_fit_decoder(run: RunConfig, args: argparse.Namespace) -> dict:
    bundle = _bundle(run)
    config = load_section(DecoderConfig, run.config_path, "decoder", {"seed": run.seed, "max_labels": args.labels})
    source = _checkpoint_path(run)
    params, _ = load_model_parts(source)
    labeled = _transitions(bundle, args.split)
    n = min(len(labeled), config.max_labels)
    labeled = labeled.subset(np.sort(np.random.default_rng(config.seed).choice(len(labeled), n, replace=False)))
    mapper = fit_causal_mapper(params.encode(labeled.E_prev), labeled.causal_prev, bundle.catalog, config)
    path = save_world_model(Path(args.output) if args.output else source, params, mapper)
    return {
        "checkpoint": str(path),
        "labels": n,
        "assigned_latents": int(mapper.assignment.masks.sum()),
    }


def cmd_eval_inference(run: RunConfig, args: argparse.Namespace) -> dict:
    bundle = _bundle(run)
    model = _world_model(run, bundle, args.oracle)
    lengths = args.n or bundle.episode_lengths
    report = eval_inference_lengths(model, {n: bundle.episodes(n) for n in lengths}, bundle.catalog)
    tables = {"inference_accuracy": report.table()}
    if report.per_category:
        tables["inference_categories"] = report.category_table()
    report_render(tables, run.output_path)
    return {
        "model": type(model).__name__,
        "accuracy": {str(n): report.accuracy(n) for n in sorted(report.per_n)},
        "reports": sorted(f"{name}.csv" for name in tables),
    }


def cmd_plan(run: RunConfig, args: argparse.Namespace) -> dict:
    bundle = _bundle(run)
    config = load_section(PlannerConfig, run.config_path, "planner", {
        "seed": run.seed, "scorer": args.scorer, "rollouts": args.rollouts, "depth": args.depth,
    })
    model = _world_model(run, bundle, args.oracle)
    lengths = args.n or bundle.task_lengths
    tasks = [task for n in lengths for task in bundle.tasks(n)]
    scorers = ScorerFactory(config.scorer, config)
    try:
        report = eval_planning(model, tasks, config, scorers, ScorerPools.from_bundle(bundle))
    finally:
        scorers.close()
    report_render({"planning": report.table(), "planning_tasks": report.frame()}, run.output_path)
    return {
        "model": type(model).__name__,
        "scorer": config.scorer,
        "success_rate": {str(n): report.success_rate(n) for n in lengths},
    }


def cmd_compare_modalities(run: RunConfig, args: argparse.Namespace) -> dict:
    bundle = _bundle(run)
    config = load_section(TrainConfig, run.config_path, "train", {"seed": run.seed, "epochs": args.epochs})
    seeds = args.seeds or [config.seed]
    results = compare_modalities(
        _transitions(bundle, "train"), _transitions(bundle, "test"), config, bundle.vocabulary.size,
        fractions=args.fractions, seeds=seeds, modalities=args.modalities,
    )
    summary = summarize_comparison(results)
    report_render(
        {"modality_comparison": summary, "modality_runs": results},
        run.output_path,
        {"modality_comparison": "Permutation R2 by modality and data fraction"},
    )
    return {
        "rows": len(results),
        "modalities": sorted(results["modality"].unique().tolist()),
        "fractions": sorted(float(f) for f in results["fraction"].unique()),
    }


def cmd_serve_stdio(run: RunConfig, args: argparse.Namespace) -> Optional[dict]:
    bundle = _bundle(run)
    handled = serve_stdio(RuntimeService(_world_model(run, bundle, args.oracle)))
    logger.info(f"[serve] stdin closed after {handled} requests")
    return None


def cmd_serve(run: RunConfig, args: argparse.Namespace) -> Optional[dict]:
    bundle = _bundle(run)
    app = create_app(RuntimeService(_world_model(run, bundle, args.oracle)))
    uvicorn.run(app, host=args.host, port=args.port, log_level=args.log_level.lower())
    return None


COMMANDS: Dict[str, Callable[[RunConfig, argparse.Namespace], Optional[dict]]] = {
    "gen-data": cmd_gen_data,
    "train-cwm": cmd_train_cwm,
    "fit-decoder": cmd_fit_decoder,
    "eval-inference": cmd_eval_inference,
    "plan": cmd_plan,
    "compare-modalities": cmd_compare_modalities,
    "serve-stdio": cmd_serve_stdio,
    "serve": cmd_serve,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cwm",
        description="Causal world model pipeline: data, training, decoding, evaluation and planning",
    )
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    parser.add_argument("--config", help="JSON config file (sections: env, dataset, train, decoder, planner)")
    parser.add_argument("--seed", type=int, default=None, help="master seed (default: CWM_SEED, then the config file, then 0)")
    parser.add_argument("--out", default=None, help="output directory (default: CWM_OUTPUT_DIR or runs)")
    parser.add_argument("--data", default=None, help="dataset bundle directory (default: CWM_DATA_DIR or data)")
    parser.add_argument("--checkpoint", help="model checkpoint (default: CWM_CHECKPOINT or <out>/cwm)")
    parser.add_argument("--scale", type=float, default=None, help="dataset size relative to full scale")

    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-data", help="generate trajectories, episodes, tasks and scorer pools")
    gen.add_argument("--workers", type=int, default=None, help="trajectory generation processes")

    train = sub.add_parser("train-cwm", help="train the world model on the bundle's train split")
    train.add_argument("--modality", choices=["CB", "TB", "HB"], default=None)
    train.add_argument("--epochs", type=int, default=None)
    train.add_argument("--subsample", type=float, default=None, help="fraction of training transitions")

    dec = sub.add_parser("fit-decoder", help="fit the latent-to-causal mapper on labeled transitions")
    dec.add_argument("--labels", type=int, default=None, help="labeled transitions to use")
    dec.add_argument("--split", default="train", choices=["train", "validation", "test"], help="split the labels are drawn from")
    dec.add_argument("--output", help="write the augmented checkpoint here instead of in place")

    inf = sub.add_parser("eval-inference", help="N-step causal inference accuracy")
    inf.add_argument("--n", type=int, nargs="+", help="episode lengths (default: all in the bundle)")
    inf.add_argument("--oracle", action="store_true", help="evaluate the simulator instead of the checkpoint")

    plan = sub.add_parser("plan", help="MCTS planning success on the bundle's tasks")
    plan.add_argument("--n", type=int, nargs="+", help="task lengths (default: all in the bundle)")
    plan.add_argument("--scorer", help="goal | uniform | external:<command> | http:<url>")
    plan.add_argument("--rollouts", type=int, default=None)
    plan.add_argument("--depth", type=int, default=None, help="search depth (default N+2)")
    plan.add_argument("--oracle", action="store_true", help="plan with the simulator as world model")

    cmp_ = sub.add_parser("compare-modalities", help="permutation R2 of CB/TB/HB over data fractions")
    cmp_.add_argument("--fractions", type=float, nargs="+", default=list(DEFAULT_FRACTIONS))
    cmp_.add_argument("--seeds", type=int, nargs="+", default=None)
    cmp_.add_argument("--modalities", nargs="+", choices=["CB", "TB", "HB"], default=["CB", "TB", "HB"])
    cmp_.add_argument("--epochs", type=int, default=None)

    for name, help_text in (("serve-stdio", "runtime protocol over stdin/stdout"), ("serve", "runtime protocol over HTTP")):
        srv = sub.add_parser(name, help=help_text)
        srv.add_argument("--oracle", action="store_true", help="serve the simulator instead of the checkpoint")
        if name == "serve":
            srv.add_argument("--host", default="127.0.0.1")
            srv.add_argument("--port", type=int, default=8000)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.getLogger().setLevel(args.log_level)
    try:
        run = RunConfig(
            subcommand=args.command,
            config_path=args.config,
            seed=args.seed,
            output_dir=args.out,
            data_dir=args.data,
            checkpoint=args.checkpoint,
            scale=args.scale if args.scale is not None else RunConfig.scale,
        )
        if args.command != "gen-data" and not run.data_path.exists():
            raise DataError(f"dataset bundle {run.data_path} does not exist; run gen-data first")
        summary = COMMANDS[args.command](run, args)
        if summary is not None:
            _emit(summary)
        return 0
    except CwmError as e:
        logger.error(f"[cli] {args.command} failed: {e.message}")
        sys.stderr.write(json.dumps(e.to_dict()) + "\n")
        return e.exit_code
    except Exception as e:
        logger.error(f"[cli] {args.command} crashed: {e}", exc_info=True)
        sys.stderr.write(json.dumps({"error": "internal_error", "message": str(e), "exit_code": 4}) + "\n")
        return 4
