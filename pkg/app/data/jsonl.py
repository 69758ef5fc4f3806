"""
Newline-delimited JSON files

Every file starts with one header object (``"type": "header"``) followed by
record lines. Trajectory files interleave a ``trajectory`` line with the
``step`` lines that belong to it.
"""
import json
import logging
from pathlib import Path
from typing import Callable, Iterable, Iterator, List, Tuple, TypeVar

from app.data.records import (
    Episode,
    IclExample,
    IclPool,
    PlanningTask,
    SelfEvalSample,
    StepRecord,
    Trajectory,
)
from app.env.entities import GridState
from app.errors import DataError

logger = logging.getLogger(__name__)

DATASET_FORMAT = "cwm-dataset"
DATASET_VERSION = 1

T = TypeVar("T")


def write_json_line(fh, obj: dict) -> None:
    fh.write(json.dumps(obj, separators=(",", ":")))
    fh.write("\n")


def iter_json_lines(path) -> Iterator[dict]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"dataset file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError as e:
                raise DataError(f"{path}:{lineno}: invalid JSON ({e})")


def make_header(kind: str, **fields) -> dict:
    return {"type": "header", "format": DATASET_FORMAT, "version": DATASET_VERSION, "kind": kind, **fields}


def write_records(path, header: dict, records: Iterable[dict]) -> int:
    """Write a header and one line per record; returns the record count"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        write_json_line(fh, header)
        for record in records:
            write_json_line(fh, record)
            count += 1
    logger.debug(f"[data] wrote {count} records to {path}")
    return count


def read_records(path) -> Tuple[dict, List[dict]]:
    lines = iter_json_lines(path)
    header = next(lines, None)
    if header is None or header.get("type") != "header":
        raise DataError(f"{path} does not start with a header line")
    if header.get("format") != DATASET_FORMAT or header.get("version") != DATASET_VERSION:
        raise DataError(f"{path}: unsupported format {header.get('format')} v{header.get('version')}")
    return header, list(lines)


def _load(path, parse: Callable[[dict], T]) -> Tuple[dict, List[T]]:
    header, rows = read_records(path)
    return header, [parse(row) for row in rows]


# ----- trajectories -----

def _trajectory_lines(trajectories: Iterable[Trajectory]) -> Iterator[dict]:
    for index, trajectory in enumerate(trajectories):
        yield {**trajectory.header(), "index": index}
        for step in trajectory.steps:
            yield {"type": "step", "trajectory": index, **step.to_dict()}


def save_trajectories(path, trajectories: List[Trajectory], header: dict) -> None:
    write_records(path, header, _trajectory_lines(trajectories))


def load_trajectories(path) -> Tuple[dict, List[Trajectory]]:
    header, rows = read_records(path)
    trajectories: List[Trajectory] = []
    for row in rows:
        kind = row.get("type")
        if kind == "trajectory":
            trajectories.append(Trajectory(int(row["seed"]), GridState.from_dict(row["initial_state"])))
        elif kind == "step":
            if not trajectories or row.get("trajectory") != len(trajectories) - 1:
                raise DataError(f"{path}: step line outside its trajectory block")
            trajectories[-1].steps.append(StepRecord.from_dict(row))
        else:
            raise DataError(f"{path}: unexpected line type {kind!r}")
    return header, trajectories


# ----- derived datasets -----

def save_episodes(path, episodes: List[Episode], header: dict) -> None:
    write_records(path, header, (e.to_dict() for e in episodes))


def load_episodes(path) -> Tuple[dict, List[Episode]]:
    return _load(path, Episode.from_dict)


def save_icl_pool(path, pool: IclPool, header: dict) -> None:
    write_records(path, header, (e.to_dict() for e in pool.examples))


def load_icl_pool(path) -> Tuple[dict, IclPool]:
    header, examples = _load(path, IclExample.from_dict)
    return header, IclPool(examples)


def save_self_eval(path, samples: List[SelfEvalSample], header: dict) -> None:
    write_records(path, header, (s.to_dict() for s in samples))


def load_self_eval(path) -> Tuple[dict, List[SelfEvalSample]]:
    return _load(path, SelfEvalSample.from_dict)


def save_tasks(path, tasks: List[PlanningTask], header: dict) -> None:
    write_records(path, header, (t.model_dump() for t in tasks))


def load_tasks(path) -> Tuple[dict, List[PlanningTask]]:
    return _load(path, PlanningTask.model_validate)
