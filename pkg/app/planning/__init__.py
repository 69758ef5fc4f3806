"""Planning over a world model: search tree, MCTS loop and action scorers"""
from app.planning.tree import PlanNode, backpropagate, simulate_greedy, uct_select
from app.planning.scorers import (
    ActionScorer,
    ExternalScorer,
    GoalDistanceScorer,
    HttpScorer,
    ScoreQuery,
    ScoreReply,
    ScorerFactory,
    ScorerPools,
    UniformScorer,
)
from app.planning.mcts import GoalPredicate, MctsPlanner, PlanResult, plan

__all__ = [
    'PlanNode', 'backpropagate', 'simulate_greedy', 'uct_select',
    'ActionScorer', 'ExternalScorer', 'GoalDistanceScorer', 'HttpScorer', 'ScoreQuery', 'ScoreReply',
    'ScorerFactory', 'ScorerPools', 'UniformScorer',
    'GoalPredicate', 'MctsPlanner', 'PlanResult', 'plan',
]
