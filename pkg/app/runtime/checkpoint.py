"""Model checkpoints: CWM core tensors plus the causal mapper under a ``mapper.`` prefix"""
import logging
from pathlib import Path
from typing import Optional, Tuple

from app.crl import CwmParams, load_cwm, save_cwm
from app.data import DatasetBundle
from app.decoder import CausalMapper
from app.env import GridState
from app.errors import DataError
from app.runtime.world_model import CausalWorldModel

logger = logging.getLogger(__name__)

MAPPER_PREFIX = "mapper."


def save_world_model(path, params: CwmParams, mapper: Optional[CausalMapper] = None) -> Path:
    extra_tensors, extra_meta = {}, {}
    if mapper is not None:
        extra_tensors = {f"{MAPPER_PREFIX}{k}": v for k, v in mapper.state_dict().items()}
        extra_meta = {"mapper": mapper.to_meta()}
    out = save_cwm(path, params, extra_tensors, extra_meta)
    logger.info(f"[checkpoint] saved {out} (mapper={'yes' if mapper else 'no'})")
    return out


def load_model_parts(path) -> Tuple[CwmParams, Optional[CausalMapper]]:
    params, tensors, metadata = load_cwm(path)
    mapper = None
    if "mapper" in metadata:
        state = {k[len(MAPPER_PREFIX):]: v for k, v in tensors.items() if k.startswith(MAPPER_PREFIX)}
        mapper = CausalMapper.from_meta(metadata["mapper"], state)
    return params, mapper


def load_world_model(path, bundle: DatasetBundle, template: Optional[GridState] = None) -> CausalWorldModel:
    """
    Learned world model from a checkpoint and the dataset bundle it was trained on

    ``template`` supplies the immutable layout (bindings, colours) used to turn
    decoded causal vectors into states, e.g. for action coordinates. Without it
    CB/HB models embed every action at the no-op coordinates until a caller
    sets ``model.template``.

    Raises:
        DataError: the checkpoint has no fitted mapper
    """
    params, mapper = load_model_parts(path)
    if mapper is None:
        raise DataError(f"checkpoint {path} has no causal mapper; run fit-decoder first")
    return CausalWorldModel(
        params, mapper, bundle.obs_map, bundle.catalog, bundle.vocabulary, bundle.padding_length,
        template=template,
    )
