import logging
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from app.config import TrainConfig
from app.crl.loss import TransitionSet, cwm_loss, evaluate_loss
from app.crl.model import CwmParams
from app.errors import EmptyDataset, NumericalError
from app.nn import Adam, ParamGroup, load_checkpoint, save_checkpoint

logger = logging.getLogger(__name__)


def _optimizer(params: CwmParams, config: TrainConfig) -> Adam:
    groups = [ParamGroup(params.main_parameters(), config.lr)]
    text = params.text_parameters()
    if text:
        groups.append(ParamGroup(text, config.text_lr))
    return Adam(groups, warmup_steps=config.warmup_steps)


def train_cwm(
    dataset: TransitionSet,
    config: TrainConfig,
    vocab_size: int,
    rng: Optional[np.random.Generator] = None,
    validation: Optional[TransitionSet] = None,
    dataset_hash: Optional[str] = None,
) -> CwmParams:
    """
    Fit flow, embedder and transition prior on consecutive pairs

    Minibatches are drawn without replacement each epoch. Training batches
    get Gaussian dequantization noise on both encoder outputs (grid states are
    discrete and E spans only K of M dimensions); gates are sampled
    (straight-through) during training and thresholded for validation.

    Args:
        dataset: Training transitions
        config: Training settings (modality, epochs, lrs, dimensions, seed)
        vocab_size: Token id range of the action embedder
        rng: numpy Generator; defaults to ``config.seed``
        validation: Optional held-out transitions scored after every epoch
        dataset_hash: Recorded in the checkpoint metadata

    Returns:
        Trained CwmParams with the loss history in ``metadata``

    Raises:
        EmptyDataset: no transitions
        NumericalError: the loss became non-finite
    """
    config.validate()
    if len(dataset) == 0:
        raise EmptyDataset("train_cwm needs at least one transition")
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    params = CwmParams(config, vocab_size, rng)
    optimizer = _optimizer(params, config)

    history: List[Dict] = []
    n = len(dataset)
    for epoch in range(1, config.epochs + 1):
        params.train()
        losses = []
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            batch = dataset.subset(order[start:start + config.batch_size])
            if config.dequantization_noise > 0:
                batch.E_prev = batch.E_prev + rng.normal(0.0, config.dequantization_noise, batch.E_prev.shape)
                batch.E_next = batch.E_next + rng.normal(0.0, config.dequantization_noise, batch.E_next.shape)
            optimizer.zero_grad()
            loss, stats = cwm_loss(params, batch, training=True, rng=rng)
            if not np.isfinite(loss.item()):
                raise NumericalError(f"non-finite training loss at epoch {epoch}")
            loss.backward()
            optimizer.step()
            losses.append(stats["nll"])
        params.eval()
        record = {"epoch": epoch, "train_loss": float(np.mean(losses))}
        if validation is not None and len(validation):
            record["validation_loss"] = evaluate_loss(params, validation)
        history.append(record)
        logger.info(
            f"[train] {config.modality} epoch {epoch}/{config.epochs} loss {record['train_loss']:.4f}"
            + (f" val {record['validation_loss']:.4f}" if "validation_loss" in record else "")
        )

    params.eval()
    params.metadata.update({
        "history": history,
        "n_transitions": n,
        "dataset_hash": dataset_hash,
        "steps": optimizer.state.step,
    })
    return params


def save_cwm(path, params: CwmParams, extra_tensors: Optional[Dict[str, np.ndarray]] = None, extra_meta: Optional[dict] = None) -> Path:
    tensors = params.state_dict()
    tensors.update(extra_tensors or {})
    return save_checkpoint(path, tensors, {**params.checkpoint_metadata(), **(extra_meta or {})})


def load_cwm(path):
    """(CwmParams, tensors, metadata) from a checkpoint"""
    tensors, metadata = load_checkpoint(path)
    return CwmParams.from_checkpoint(tensors, metadata), tensors, metadata
