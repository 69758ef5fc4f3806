"""Causal representation learning: embedder, gated transition prior, flow training"""
from app.crl.embedder import MODALITIES, ActionEmbedder, embed_action
from app.crl.transition import TransitionModel, interaction_gates, transition_loglik
from app.crl.model import CwmParams
from app.crl.loss import TransitionSet, cwm_loss, evaluate_loss, subsample_transitions
from app.crl.metrics import assign_from_r2, r2_matrix, r2_permutation_score
from app.crl.train import load_cwm, save_cwm, train_cwm
from app.crl.compare import compare_modalities, summarize_comparison

__all__ = [
    "MODALITIES",
    "ActionEmbedder",
    "embed_action",
    "TransitionModel",
    "interaction_gates",
    "transition_loglik",
    "CwmParams",
    "TransitionSet",
    "cwm_loss",
    "evaluate_loss",
    "subsample_transitions",
    "assign_from_r2",
    "r2_matrix",
    "r2_permutation_score",
    "load_cwm",
    "save_cwm",
    "train_cwm",
    "compare_modalities",
    "summarize_comparison",
]
