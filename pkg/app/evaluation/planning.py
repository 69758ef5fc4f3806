"""
Planning success and efficiency

Plans come from the world model; execution and the success decision use
only the simulator. Unparseable plan steps become Noop, and a plan shorter
than the N+2 budget is padded with Noop.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from app.config import PlannerConfig
from app.data import PlanningTask
from app.env import EntityCatalog, causal_vector, intervention_cycle
from app.errors import CwmError
from app.planning import MctsPlanner, ScorerFactory, ScorerPools
from app.runtime import WorldModel
from app.text import NOOP_SENTENCE, parse_action

logger = logging.getLogger(__name__)


@dataclass
class TaskOutcome:
    task_id: int
    n_steps: int
    success: bool
    steps: int
    plan_length: int


@dataclass
class PlanningReport:
    outcomes: List[TaskOutcome] = field(default_factory=list)

    def success_rate(self, n_steps: Optional[int] = None) -> float:
        rows = [o for o in self.outcomes if n_steps is None or o.n_steps == n_steps]
        return sum(o.success for o in rows) / len(rows) if rows else 0.0

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [vars(o) for o in self.outcomes],
            columns=["task_id", "n_steps", "success", "steps", "plan_length"],
        )

    def table(self) -> pd.DataFrame:
        """Per N: task count, success rate, mean executed steps on success and on failure"""
        columns = ["N", "tasks", "success_rate", "avg_steps_success", "avg_steps_failure"]
        df = self.frame()
        if df.empty:
            return pd.DataFrame(columns=columns)
        rows = []
        for n, group in df.groupby("n_steps", sort=True):
            won = group[group["success"]]
            lost = group[~group["success"]]
            rows.append({
                "N": int(n),
                "tasks": len(group),
                "success_rate": float(group["success"].mean()),
                "avg_steps_success": float(won["steps"].mean()) if len(won) else np.nan,
                "avg_steps_failure": float(lost["steps"].mean()) if len(lost) else np.nan,
            })
        return pd.DataFrame(rows, columns=columns)


def execute_plan(task: PlanningTask, actions: Sequence[str], catalog: Optional[EntityCatalog] = None,
                 rng: Optional[np.random.Generator] = None) -> Tuple[bool, int]:
    """
    Run action sentences in the simulator for at most N+2 steps

    Returns:
        (success, executed steps); a failure reports the full budget
    """
    state = task.grid_state()
    catalog = catalog or EntityCatalog.from_state(state)
    rng = rng if rng is not None else np.random.default_rng(task.task_id)
    if task.goal_reached(causal_vector(state), catalog):
        return True, 0
    budget = task.n_steps + 2
    texts = list(actions[:budget]) + [NOOP_SENTENCE] * max(0, budget - len(actions))
    for i, text in enumerate(texts):
        state = intervention_cycle(state, parse_action(text, state), rng)
        if task.goal_reached(causal_vector(state), catalog):
            return True, i + 1
    return False, budget


def eval_planning(
    model: WorldModel,
    tasks: Sequence[PlanningTask],
    config: Optional[PlannerConfig] = None,
    scorers: Optional[ScorerFactory] = None,
    pools: Optional[ScorerPools] = None,
) -> PlanningReport:
    config = config or PlannerConfig()
    scorers = scorers or ScorerFactory(config.scorer, config)
    report = PlanningReport()
    for task in tasks:
        template = task.grid_state()
        catalog = EntityCatalog.from_state(template)
        model.template = template
        try:
            planner = MctsPlanner(model, scorers.for_task(task, template, catalog), config, template, pools)
            actions = planner.plan(template, lambda c: task.goal_reached(c, catalog), task.n_steps)
        except CwmError as e:
            logger.warning(f"[eval] task {task.task_id}: planning failed ({e.message}); executing no actions")
            actions = []
        success, steps = execute_plan(task, actions, catalog)
        report.outcomes.append(TaskOutcome(task.task_id, task.n_steps, success, steps, len(actions)))
    for n in sorted({t.n_steps for t in tasks}):
        logger.info(f"[eval] [N={n}] planning success {report.success_rate(n):.3f}")
    return report
