"""
Action-modality comparison

Trains one model per (modality, data fraction, seed) and scores the test
latents with the permutation R^2. Results come back as a tidy pandas table;
``summarize_comparison`` pivots it to mean/std per modality and fraction.
"""
import logging
from dataclasses import replace
from typing import Iterable, Optional, Sequence

import numpy as np
import pandas as pd

from app.config import TrainConfig
from app.crl.embedder import MODALITIES
from app.crl.loss import TransitionSet, subsample_transitions
from app.crl.metrics import r2_permutation_score
from app.crl.train import train_cwm

logger = logging.getLogger(__name__)


def compare_modalities(
    train: TransitionSet,
    test: TransitionSet,
    base_config: TrainConfig,
    vocab_size: int,
    fractions: Iterable[float] = (1.0,),
    seeds: Iterable[int] = (0,),
    modalities: Sequence[str] = MODALITIES,
    validation: Optional[TransitionSet] = None,
) -> pd.DataFrame:
    rows = []
    for fraction in fractions:
        for seed in seeds:
            subset = subsample_transitions(train, fraction, np.random.default_rng([seed, 17]))
            for modality in modalities:
                config = replace(base_config, modality=modality, seed=seed)
                params = train_cwm(subset, config, vocab_size, validation=validation)
                score, perm = r2_permutation_score(params.encode(test.E_prev), test.causal_prev)
                logger.info(f"[compare] {modality} fraction={fraction} seed={seed}: R2={score:.3f}")
                rows.append({
                    "modality": modality,
                    "fraction": fraction,
                    "n_transitions": len(subset),
                    "seed": seed,
                    "r2": score,
                    "permutation": " ".join(map(str, perm)),
                })
    return pd.DataFrame(rows)


def summarize_comparison(results: pd.DataFrame) -> pd.DataFrame:
    """Mean, std and run count of R^2 per (fraction, modality)"""
    summary = (
        results.groupby(["fraction", "modality"])["r2"]
        .agg(["mean", "std", "count"])
        .reset_index()
    )
    summary["std"] = summary["std"].fillna(0.0)
    return summary
