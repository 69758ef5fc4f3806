"""
Search-tree bookkeeping for the planner

A node stores, per available action, the action text, the child reached
through the world model, the immediate reward and the running value Q.
Visit counts live on the nodes: N(c(z, a)) is the child's own counter.
"""
import math
from dataclasses import dataclass, field
from typing import List, Literal, Optional, Sequence, Tuple

import numpy as np

from app.env import Intervention
from app.errors import NotExpanded
from app.runtime import LatentState

QAggregation = Literal["max", "mean"]


@dataclass
class PlanNode:
    latent: LatentState
    text: str
    depth: int = 0
    terminal: bool = False
    actions: List[str] = field(default_factory=list)
    interventions: List[Intervention] = field(default_factory=list)
    children: List["PlanNode"] = field(default_factory=list)
    rewards: List[float] = field(default_factory=list)
    q: List[float] = field(default_factory=list)
    q_updates: List[int] = field(default_factory=list)
    visits: int = 0

    @property
    def expanded(self) -> bool:
        return bool(self.actions)

    def add_child(self, action: str, intervention: Intervention, child: "PlanNode", reward: float):
        if not math.isfinite(reward):
            raise ValueError(f"non-finite reward {reward} for {action!r}")
        self.actions.append(action)
        self.interventions.append(intervention)
        self.children.append(child)
        self.rewards.append(float(reward))
        self.q.append(0.0)
        self.q_updates.append(0)

    def best_action(self) -> Optional[int]:
        """Index of the highest Q among actions that received a return (ties by index)"""
        scored = [i for i, n in enumerate(self.q_updates) if n > 0]
        if not scored:
            return None
        return max(scored, key=lambda i: (self.q[i], -i))


def _require_expanded(node: PlanNode):
    if not node.expanded:
        raise NotExpanded(f"node at depth {node.depth} has not been expanded")


def uct_select(node: PlanNode, exploration_weight: float) -> int:
    """
    UCT action choice

    Unvisited children score +inf and the first of them wins; otherwise
    ``Q + w * sqrt(ln N(parent) / N(child))`` with ties broken by index.
    """
    _require_expanded(node)
    for i, child in enumerate(node.children):
        if child.visits == 0:
            return i
    log_n = math.log(max(node.visits, 1))
    scores = [
        q + exploration_weight * math.sqrt(log_n / child.visits)
        for q, child in zip(node.q, node.children)
    ]
    return int(np.argmax(scores))


def simulate_greedy(node: PlanNode) -> int:
    """Argmax of the stored immediate rewards, ties by index"""
    _require_expanded(node)
    return int(np.argmax(node.rewards))


def backpropagate(path: Sequence[Tuple[PlanNode, int, float]], aggregation: QAggregation = "max"):
    """
    Push the returns of one rollout into Q

    The return at position t is the mean of the rewards from t to the end of
    the path. ``max`` keeps the best return seen for each (node, action);
    ``mean`` keeps their running average.
    """
    rewards = [r for _, _, r in path]
    for t, (node, action, _) in enumerate(path):
        ret = float(np.mean(rewards[t:]))
        seen = node.q_updates[action]
        if seen == 0:
            node.q[action] = ret
        elif aggregation == "max":
            node.q[action] = max(node.q[action], ret)
        else:
            node.q[action] += (ret - node.q[action]) / (seen + 1)
        node.q_updates[action] = seen + 1
