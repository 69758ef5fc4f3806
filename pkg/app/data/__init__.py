from app.data.records import (
    Episode,
    IclExample,
    IclPool,
    PlanningTask,
    SelfEvalSample,
    StepRecord,
    Trajectory,
)
from app.data.jsonl import (
    load_episodes,
    load_icl_pool,
    load_self_eval,
    load_tasks,
    load_trajectories,
    make_header,
    read_records,
    save_episodes,
    save_icl_pool,
    save_self_eval,
    save_tasks,
    save_trajectories,
    write_records,
)
from app.data.generation import (
    GenerationContext,
    build_icl_pool,
    build_self_eval_samples,
    generate_planning_tasks,
    generate_split,
    generate_trajectory,
    goal_variables,
    replay_trajectory,
    splice_nstep,
)
from app.data.bundle import DatasetBundle, generate_datasets, split_counts, split_seed_base

__all__ = [
    'Episode', 'IclExample', 'IclPool', 'PlanningTask', 'SelfEvalSample', 'StepRecord', 'Trajectory',
    'load_episodes', 'load_icl_pool', 'load_self_eval', 'load_tasks', 'load_trajectories',
    'make_header', 'read_records', 'save_episodes', 'save_icl_pool', 'save_self_eval', 'save_tasks',
    'save_trajectories', 'write_records',
    'GenerationContext', 'build_icl_pool', 'build_self_eval_samples', 'generate_planning_tasks',
    'generate_split', 'generate_trajectory', 'goal_variables', 'replay_trajectory', 'splice_nstep',
    'DatasetBundle', 'generate_datasets', 'split_counts', 'split_seed_base',
]
