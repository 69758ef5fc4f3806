"""
Trajectory, episode, ICL-pool, self-eval and planning-task generation

Trajectories start from ``random_init`` and take a uniformly random
full-mode valid intervention per step, applied through the canonical
dynamics-then-intervention cycle. Obstacle directions are drawn up front and
stored with the intervention so replays are exact.
"""
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from app.config import EnvConfig
from app.data.records import (
    Episode,
    IclExample,
    IclPool,
    PlanningTask,
    SelfEvalSample,
    StepRecord,
    Trajectory,
)
from app.decoder.descriptor import describe_state
from app.env import (
    EntityCatalog,
    apply_intervention,
    causal_vector,
    dynamics_step,
    intervention_cycle,
    random_init,
    resolve_intervention,
    unresolved,
    valid_interventions,
)
from app.errors import DataError, EmptyDataset, WindowTooLong
from app.observation import ObservationMap
from app.text import Pcfg, Vocabulary, action_coordinates, canonical_describe, tokenize_pad

logger = logging.getLogger(__name__)


@dataclass
class GenerationContext:
    """Everything a worker needs to produce trajectories (picklable)"""
    env: EnvConfig
    obs_map: ObservationMap
    pcfg: Pcfg
    vocabulary: Vocabulary
    padding_length: int = 32


def generate_trajectory(ctx: GenerationContext, length: int, rng: np.random.Generator, seed: int = -1) -> Trajectory:
    """
    Roll one trajectory of ``length`` steps

    Args:
        ctx: Environment, observation map, grammar and vocabulary
        length: Number of steps T (>= 1)
        rng: numpy Generator driving placement, actions, texts and obstacle draws
        seed: Seed recorded with the trajectory

    Returns:
        Trajectory whose steps chain (post of step t equals pre of step t+1)

    Raises:
        InfeasibleConfig: the environment cannot be initialised
    """
    if length < 1:
        raise DataError(f"trajectory length must be >= 1, got {length}")
    state = random_init(ctx.env, rng)
    trajectory = Trajectory(seed=seed, initial_state=state)
    causal = causal_vector(state)
    observation = ctx.obs_map.observe(causal)

    for t in range(length):
        mid = dynamics_step(state)
        options = valid_interventions(mid, full=True)
        iv = resolve_intervention(mid, options[int(rng.integers(len(options)))], rng)
        nxt = apply_intervention(mid, iv)
        text = ctx.pcfg.describe_action(iv, mid, rng)
        next_causal = causal_vector(nxt)
        next_observation = ctx.obs_map.observe(next_causal)
        trajectory.steps.append(StepRecord(
            t=t,
            pre_state_causal=causal,
            intervention=iv,
            action_text=text,
            action_tokens=tokenize_pad(text, ctx.vocabulary, ctx.padding_length),
            action_coords=action_coordinates(iv, mid),
            observation=observation,
            next_observation=next_observation,
            post_state_causal=next_causal,
        ))
        state, causal, observation = nxt, next_causal, next_observation
    return trajectory


def _trajectory_job(args: Tuple[GenerationContext, int, int]) -> Trajectory:
    ctx, length, seed = args
    return generate_trajectory(ctx, length, np.random.default_rng(seed), seed)


def generate_split(
    ctx: GenerationContext,
    seeds: Sequence[int],
    length: int,
    workers: int = 1,
) -> List[Trajectory]:
    """
    One trajectory per seed, returned in seed order

    With ``workers > 1`` trajectories are produced in a process pool; the
    result is identical to the sequential run.
    """
    jobs = [(ctx, length, int(seed)) for seed in seeds]
    if workers <= 1 or len(jobs) < 2:
        return [_trajectory_job(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_trajectory_job, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


def replay_trajectory(trajectory: Trajectory) -> List[np.ndarray]:
    """Re-run the recorded interventions from the initial state; returns every post-state vector"""
    state = trajectory.initial_state
    out = []
    for step in trajectory.steps:
        state = intervention_cycle(state, step.intervention)
        out.append(causal_vector(state))
    return out


# ----- episodes -----

def splice_nstep(
    trajectories: Sequence[Trajectory],
    n_steps: int,
    count: int,
    rng: np.random.Generator,
) -> List[Episode]:
    """
    Sample ``count`` windows of ``n_steps`` consecutive steps

    Trajectory and window start are drawn uniformly.

    Raises:
        EmptyDataset: no trajectories
        WindowTooLong: ``n_steps`` exceeds the shortest trajectory
    """
    if not trajectories:
        raise EmptyDataset("cannot splice episodes from zero trajectories")
    if n_steps < 1:
        raise DataError(f"episode length must be >= 1, got {n_steps}")
    shortest = min(len(t) for t in trajectories)
    if n_steps > shortest:
        raise WindowTooLong(f"N={n_steps} exceeds trajectory length {shortest}")

    episodes: List[Episode] = []
    for _ in range(count):
        trajectory = trajectories[int(rng.integers(len(trajectories)))]
        start = int(rng.integers(len(trajectory) - n_steps + 1))
        window = trajectory.steps[start:start + n_steps]
        episodes.append(Episode(
            n_steps=n_steps,
            start_state=trajectory.state_at(start),
            start_state_causal=window[0].pre_state_causal,
            start_observation=window[0].observation,
            actions=[step.action_text for step in window],
            interventions=[step.intervention for step in window],
            end_state_causal=window[-1].post_state_causal,
            source_seed=trajectory.seed,
            source_t=start,
        ))
    return episodes


# ----- scorer pools -----

def build_icl_pool(
    trajectories: Sequence[Trajectory],
    size: int,
    rng: np.random.Generator,
    catalog: EntityCatalog,
    window: int = 2,
) -> IclPool:
    """
    Pool of (start variables, actions, end variables) examples for scorers

    Each example is a spliced window of ``window`` steps, rendered with the
    rule-based state descriptor.
    """
    if size <= 0:
        return IclPool([])
    episodes = splice_nstep(trajectories, window, size, rng)
    return IclPool([
        IclExample(
            start_state_causal=e.start_state_causal,
            actions=e.actions,
            end_state_causal=e.end_state_causal,
            start_text=describe_state(e.start_state_causal, catalog),
            end_text=describe_state(e.end_state_causal, catalog),
        )
        for e in episodes
    ])


def build_self_eval_samples(
    trajectories: Sequence[Trajectory],
    count: int,
    rng: np.random.Generator,
    catalog: EntityCatalog,
    pcfg: Pcfg,
) -> List[SelfEvalSample]:
    """
    Good/bad action examples from 1-step windows

    For each of ``count`` draws the actually taken action is labelled good and a
    uniformly drawn different valid action is labelled bad. Draws where no
    other action is valid are skipped, so up to ``2 * count`` samples come back.
    """
    if not trajectories:
        raise EmptyDataset("cannot build self-eval samples from zero trajectories")
    samples: List[SelfEvalSample] = []
    skipped = 0
    for _ in range(count):
        trajectory = trajectories[int(rng.integers(len(trajectories)))]
        t = int(rng.integers(len(trajectory)))
        step = trajectory.steps[t]
        mid = dynamics_step(trajectory.state_at(t))
        taken = unresolved(step.intervention)
        others = [iv for iv in valid_interventions(mid, full=True) if unresolved(iv) != taken]
        if not others:
            skipped += 1
            continue
        bad = others[int(rng.integers(len(others)))]
        state_text = describe_state(step.pre_state_causal, catalog)
        samples.append(SelfEvalSample(state_text, step.action_text, "good"))
        samples.append(SelfEvalSample(state_text, pcfg.describe_action(bad, mid, rng), "bad"))
    if skipped:
        logger.info(f"[data] self-eval: skipped {skipped} draws with a single valid action")
    return samples


# ----- planning tasks -----

def goal_variables(causal: np.ndarray, catalog: EntityCatalog) -> dict:
    """Light states and vehicle positions of a causal vector, keyed by variable name"""
    return {
        var.name: float(causal[i])
        for i, var in enumerate(catalog.variables)
        if var.kind in ("light", "vehicle")
    }


def generate_planning_tasks(
    env: EnvConfig,
    n_steps: int,
    count: int,
    rng: np.random.Generator,
    first_id: int = 0,
) -> List[PlanningTask]:
    """
    Planning problems reachable in ``n_steps`` planner actions

    From a random start, ``n_steps`` uniformly drawn planner-mode actions
    (toggles and Noop) are rolled through the dynamics-then-intervention cycle;
    the goal is the end state's light states and vehicle positions.
    """
    tasks: List[PlanningTask] = []
    for k in range(count):
        state = random_init(env, rng)
        catalog = EntityCatalog.from_state(state)
        current = state
        reference: List[str] = []
        for _ in range(n_steps):
            options = valid_interventions(current)
            iv = options[int(rng.integers(len(options)))]
            reference.append(canonical_describe(iv, current))
            current = intervention_cycle(current, iv)
        tasks.append(PlanningTask(
            task_id=first_id + k,
            n_steps=n_steps,
            start_state=state.to_dict(),
            goal_variables=goal_variables(causal_vector(current), catalog),
            reference_actions=reference,
        ))
    return tasks

