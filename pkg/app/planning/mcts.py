"""
Causally-aware MCTS over a world model

Each iteration walks the tree with UCT, expands the first unexpanded node
through the world model (children for every planner action, rewards from the
scorer), rolls greedily on immediate rewards down to the depth limit, and
backs the per-position mean returns up the path.
"""
import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple, Union

import numpy as np

from app.config import PlannerConfig
from app.decoder import parse_state
from app.env import EntityCatalog, GridState, valid_interventions
from app.errors import DataError
from app.planning.scorers import ActionScorer, ScorerPools
from app.planning.tree import PlanNode, backpropagate, simulate_greedy, uct_select
from app.runtime import LatentState, WorldModel
from app.text import canonical_describe

logger = logging.getLogger(__name__)

GoalPredicate = Callable[[np.ndarray], bool]
PlanStart = Union[LatentState, GridState, np.ndarray]


@dataclass
class PlanResult:
    actions: List[str]
    root: PlanNode
    iterations: int
    depth_limit: int


class MctsPlanner:
    """
    Args:
        model: World model (learned or oracle) that steps the tree
        scorer: Intuition and self-evaluation rewards
        config: Planner settings
        template: Layout used to parse decoded state texts back into states
        pools: In-context material passed to the scorer
    """

    def __init__(
        self,
        model: WorldModel,
        scorer: ActionScorer,
        config: Optional[PlannerConfig] = None,
        template: Optional[GridState] = None,
        pools: Optional[ScorerPools] = None,
    ):
        self.model = model
        self.scorer = scorer
        self.config = config or PlannerConfig()
        self.config.validate()
        self.template = template if template is not None else model.template
        if self.template is None:
            raise DataError("the planner needs a template state to read decoded states")
        self.catalog = EntityCatalog.from_state(self.template)
        self.pools = pools or ScorerPools()
        self.rng = np.random.default_rng(self.config.seed)

    def root_latent(self, start: PlanStart) -> LatentState:
        if isinstance(start, LatentState):
            return start
        if isinstance(start, GridState):
            return self.model.initial_state(start)
        return self.model.encode_obs(np.asarray(start, dtype=np.float64))

    def _node(self, latent: LatentState, text: str, depth: int, goal: GoalPredicate, depth_limit: int) -> PlanNode:
        reached = bool(goal(self.model.decode_causal(latent)))
        return PlanNode(latent, text, depth, terminal=reached or depth >= depth_limit)

    def expand(self, node: PlanNode, goal: GoalPredicate, depth_limit: int) -> PlanNode:
        """
        Add one child per planner action of the node's decoded state

        Actions come from parsing the node text back into a state; every
        child is a world-model step and every reward is intuition plus
        self-evaluation.
        """
        state = parse_state(node.text, self.template, self.catalog)
        mode = self.config.sampling_mode
        for iv in valid_interventions(state):
            text = canonical_describe(iv, state)
            step = self.model.step(node.latent, text, mode, self.rng if mode == "sample" else None, hint=iv)
            child = self._node(step.z_next, step.text_next, node.depth + 1, goal, depth_limit)
            reward = (
                self.scorer.intuition(node.text, text, self.pools.draw_icl(self.rng))
                + self.scorer.self_eval(node.text, text, self.pools.self_eval)
            )
            node.add_child(text, iv, child, reward)
        logger.debug(f"[mcts] expanded depth {node.depth}: {len(node.actions)} actions, rewards {node.rewards}")
        return node

    def _iterate(self, root: PlanNode, goal: GoalPredicate, depth_limit: int):
        path: List[Tuple[PlanNode, int, float]] = []
        node = root
        node.visits += 1
        while node.expanded and not node.terminal:
            a = uct_select(node, self.config.exploration_weight)
            path.append((node, a, node.rewards[a]))
            node = node.children[a]
            node.visits += 1
        while not node.terminal:
            if not node.expanded:
                self.expand(node, goal, depth_limit)
            a = simulate_greedy(node)
            path.append((node, a, node.rewards[a]))
            node = node.children[a]
            node.visits += 1
        if path:
            backpropagate(path, self.config.q_aggregation)

    def extract(self, root: PlanNode) -> List[str]:
        """Follow the best-Q action from the root until a terminal or unscored node"""
        actions: List[str] = []
        node = root
        while not node.terminal:
            a = node.best_action()
            if a is None:
                break
            actions.append(node.actions[a])
            node = node.children[a]
        return actions

    def search(self, start: PlanStart, goal: GoalPredicate, n_steps: int) -> PlanResult:
        depth_limit = self.config.depth_for(n_steps)
        latent = self.root_latent(start)
        root = self._node(latent, self.model.describe(latent), 0, goal, depth_limit)
        if root.terminal:
            logger.info("[mcts] goal already satisfied at the root")
            return PlanResult([], root, 0, depth_limit)
        for _ in range(self.config.rollouts):
            self._iterate(root, goal, depth_limit)
        actions = self.extract(root)
        logger.info(f"[mcts] [N={n_steps}] {self.config.rollouts} rollouts, depth {depth_limit}: {len(actions)}-step plan")
        return PlanResult(actions, root, self.config.rollouts, depth_limit)

    def plan(self, start: PlanStart, goal: GoalPredicate, n_steps: int) -> List[str]:
        return self.search(start, goal, n_steps).actions


def plan(
    start: PlanStart,
    goal: GoalPredicate,
    config: PlannerConfig,
    model: WorldModel,
    scorer: ActionScorer,
    n_steps: int,
    template: Optional[GridState] = None,
    pools: Optional[ScorerPools] = None,
) -> List[str]:
    return MctsPlanner(model, scorer, config, template, pools).plan(start, goal, n_steps)
