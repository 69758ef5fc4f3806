"""Evaluation harness: state matching, causal inference accuracy, planning success, report tables"""
from app.evaluation.matching import CATEGORIES, MatchPolicy, categorize_coordinates, category_of, states_match
from app.evaluation.inference import (
    InferenceReport,
    eval_causal_inference,
    eval_inference_lengths,
    rollout_episode,
)
from app.evaluation.planning import PlanningReport, TaskOutcome, eval_planning, execute_plan
from app.evaluation.report import render_text_table, report_render, write_csv

__all__ = [
    'CATEGORIES', 'MatchPolicy', 'categorize_coordinates', 'category_of', 'states_match',
    'InferenceReport', 'eval_causal_inference', 'eval_inference_lengths', 'rollout_episode',
    'PlanningReport', 'TaskOutcome', 'eval_planning', 'execute_plan',
    'render_text_table', 'report_render', 'write_csv',
]
