"""
Parameter checkpoints: flat binary blob + JSON manifest

``<stem>.bin`` holds every tensor back to back (little-endian float64);
``<stem>.json`` lists name, shape, dtype, byte offset and element count per
tensor, plus free-form metadata.
"""
import json
import logging
from pathlib import Path
from typing import Dict, Tuple

import numpy as np

from app.errors import DataError

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "cwm-checkpoint"
CHECKPOINT_VERSION = 1
_DTYPE = "<f8"


def _paths(path) -> Tuple[Path, Path]:
    stem = Path(path)
    if stem.suffix in (".bin", ".json"):
        stem = stem.with_suffix("")
    return stem.with_suffix(".bin"), stem.with_suffix(".json")


def save_checkpoint(path, tensors: Dict[str, np.ndarray], metadata: dict = None) -> Path:
    """
    Write ``tensors`` (name -> array) and ``metadata`` next to each other

    Returns:
        Path of the JSON manifest
    """
    bin_path, json_path = _paths(path)
    bin_path.parent.mkdir(parents=True, exist_ok=True)
    entries = []
    offset = 0
    with open(bin_path, "wb") as fh:
        for name, value in tensors.items():
            array = np.ascontiguousarray(value, dtype=_DTYPE)
            fh.write(array.tobytes())
            entries.append({
                "name": name,
                "shape": list(array.shape),
                "dtype": _DTYPE,
                "offset": offset,
                "count": int(array.size),
            })
            offset += array.nbytes
    manifest = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "tensors": entries,
        "metadata": metadata or {},
    }
    json_path.write_text(json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8")
    logger.info(f"[ckpt] saved {len(entries)} tensors ({offset} bytes) to {bin_path}")
    return json_path


def load_checkpoint(path) -> Tuple[Dict[str, np.ndarray], dict]:
    """
    Read a checkpoint written by ``save_checkpoint``

    Raises:
        DataError: Missing files, unknown format/version, or a truncated blob
    """
    bin_path, json_path = _paths(path)
    if not json_path.exists() or not bin_path.exists():
        raise DataError(f"checkpoint not found: {json_path.with_suffix('')}")
    try:
        manifest = json.loads(json_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise DataError(f"corrupt checkpoint manifest {json_path}: {e}")
    if manifest.get("format") != CHECKPOINT_FORMAT:
        raise DataError(f"{json_path} is not a {CHECKPOINT_FORMAT} manifest")
    if manifest.get("version") != CHECKPOINT_VERSION:
        raise DataError(f"unsupported checkpoint version {manifest.get('version')}")

    blob = bin_path.read_bytes()
    tensors: Dict[str, np.ndarray] = {}
    for entry in manifest["tensors"]:
        dtype = np.dtype(entry["dtype"])
        end = entry["offset"] + entry["count"] * dtype.itemsize
        if end > len(blob):
            raise DataError(f"checkpoint blob truncated at tensor {entry['name']}")
        array = np.frombuffer(blob, dtype=dtype, count=entry["count"], offset=entry["offset"])
        tensors[entry["name"]] = array.reshape(entry["shape"]).astype(np.float64)
    return tensors, manifest.get("metadata", {})
