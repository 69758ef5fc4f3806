import json
import os
from dataclasses import dataclass, field, asdict, fields
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from app.errors import ConfigError

RGB = Tuple[int, int, int]

# Default colours, one palette entry per entity; names must stay distinct within a class
DEFAULT_VEHICLE_COLORS: List[RGB] = [(0, 0, 255), (255, 165, 0), (128, 0, 128), (255, 192, 203)]
DEFAULT_OBSTACLE_COLORS: List[RGB] = [(128, 128, 128), (139, 69, 19), (0, 0, 0)]
DEFAULT_LIGHT_COLORS: List[RGB] = [(0, 255, 255), (255, 0, 255), (255, 255, 0), (128, 0, 128)]


def _env_int(name: str, default: Optional[int]) -> Optional[int]:
    value = os.getenv(name)
    if value is None or value == "":
        return default
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"{name} must be an integer, got {value!r}")


def _load_json(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {path} is not valid JSON: {e}")


class _ConfigMixin:
    """from_dict / from_json_file / to_dict shared by every config dataclass"""

    @classmethod
    def from_dict(cls, data: Optional[dict]):
        data = dict(data or {})
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"{cls.__name__}: unknown keys {sorted(unknown)}")
        obj = cls(**data)
        obj.validate()
        return obj

    @classmethod
    def from_json_file(cls, path):
        return cls.from_dict(_load_json(path))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class EnvConfig(_ConfigMixin):
    grid_size: int = 8
    n_vehicles: int = 2
    n_obstacles: int = 1
    n_lights: int = 2
    vehicle_colors: List[RGB] = None
    obstacle_colors: List[RGB] = None
    light_colors: List[RGB] = None
    seed: int = 0

    def __post_init__(self):
        if self.vehicle_colors is None:
            self.vehicle_colors = DEFAULT_VEHICLE_COLORS[: self.n_vehicles]
        if self.obstacle_colors is None:
            self.obstacle_colors = DEFAULT_OBSTACLE_COLORS[: self.n_obstacles]
        if self.light_colors is None:
            self.light_colors = DEFAULT_LIGHT_COLORS[: self.n_lights]
        self.vehicle_colors = [tuple(int(c) for c in rgb) for rgb in self.vehicle_colors]
        self.obstacle_colors = [tuple(int(c) for c in rgb) for rgb in self.obstacle_colors]
        self.light_colors = [tuple(int(c) for c in rgb) for rgb in self.light_colors]

    def validate(self):
        """Validate entity counts and colour tables"""
        if self.grid_size < 1:
            raise ConfigError(f"grid_size must be positive, got {self.grid_size}")
        for name in ("n_vehicles", "n_obstacles", "n_lights"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        for kind, colors, count in (
            ("vehicle", self.vehicle_colors, self.n_vehicles),
            ("obstacle", self.obstacle_colors, self.n_obstacles),
            ("light", self.light_colors, self.n_lights),
        ):
            if len(colors) != count:
                raise ConfigError(f"need {count} {kind} colours, got {len(colors)}")
            for rgb in colors:
                if len(rgb) != 3 or any(c < 0 or c > 255 for c in rgb):
                    raise ConfigError(f"invalid RGB colour {rgb} for {kind}")
        return True


@dataclass
class DatasetConfig(_ConfigMixin):
    """Dataset counts; full-scale values are multiplied by ``scale``"""
    train_trajectories: int = 10000
    validation_trajectories: int = 1000
    test_trajectories: int = 1000
    icl_trajectories: int = 100
    trajectory_length: int = 100
    scale: float = 0.05
    nstep_values: List[int] = field(default_factory=lambda: [1, 2, 4, 6, 8])
    episodes_per_n: int = 100
    planning_n_values: List[int] = field(default_factory=lambda: [2, 4, 6, 8])
    tasks_per_n: int = 100
    icl_pool_size: int = 10
    icl_window: int = 2
    self_eval_count: int = 100
    observation_dim: int = 16
    latent_dim: int = 16
    nonlinearity: str = "sinh"
    padding_length: int = 32
    workers: int = 1
    seed: int = 0

    def scaled(self, count: int) -> int:
        return max(1, int(round(count * self.scale)))

    def validate(self):
        if self.scale <= 0:
            raise ConfigError(f"scale must be positive, got {self.scale}")
        if self.trajectory_length < 1:
            raise ConfigError("trajectory_length must be >= 1")
        if self.nonlinearity not in ("linear", "sinh"):
            raise ConfigError(f"nonlinearity must be 'linear' or 'sinh', got {self.nonlinearity}")
        if self.padding_length < 1:
            raise ConfigError("padding_length must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        return True


@dataclass
class TrainConfig(_ConfigMixin):
    modality: str = "TB"
    epochs: int = 40
    batch_size: int = 384
    lr: float = 3e-3
    text_lr: float = 3e-3
    warmup_steps: int = 100
    latent_dim: int = 16
    hidden_dim: int = 64
    flow_layers: int = 4
    flow_hidden: int = 64
    flow_linear: bool = True
    action_dim: int = 32
    token_dim: int = 32
    gate_hidden: int = 64
    gate_penalty: float = 1e-3
    dequantization_noise: float = 0.02
    subsample: float = 1.0
    validation_fraction: float = 0.05
    seed: int = 0

    def __post_init__(self):
        self.modality = self.modality.upper()

    def validate(self):
        if self.modality not in ("CB", "TB", "HB"):
            raise ConfigError(f"modality must be CB, TB or HB, got {self.modality}")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.lr <= 0 or self.text_lr <= 0:
            raise ConfigError("learning rates must be positive")
        if not 0 < self.subsample <= 1:
            raise ConfigError("subsample must be in (0, 1]")
        if self.flow_layers < 0:
            raise ConfigError("flow_layers must be >= 0")
        if self.dequantization_noise < 0:
            raise ConfigError("dequantization_noise must be >= 0")
        return True


@dataclass
class DecoderConfig(_ConfigMixin):
    threshold: float = 0.1
    hidden_dim: int = 32
    assign_epochs: int = 200
    causal_epochs: int = 300
    batch_size: int = 128
    lr: float = 3e-3
    max_labels: int = 500
    fallback_top_k: int = 3
    seed: int = 0

    def validate(self):
        if not 0 < self.threshold < 1:
            raise ConfigError(f"threshold must be in (0, 1), got {self.threshold}")
        if self.max_labels < 2:
            raise ConfigError("max_labels must be >= 2")
        return True


@dataclass
class PlannerConfig(_ConfigMixin):
    rollouts: int = 50
    depth: Optional[int] = None
    exploration_weight: float = 1.0
    scorer: str = "goal"
    sampling_mode: str = "mean"
    q_aggregation: str = "max"
    scorer_timeout: float = 10.0
    scorer_retries: int = 3
    retry_backoff: float = 1.0
    seed: int = 0

    def depth_for(self, n_steps: int) -> int:
        """Search depth: explicit value or N+2"""
        return self.depth if self.depth is not None else n_steps + 2

    def validate(self):
        if self.rollouts < 1:
            raise ConfigError("rollouts must be >= 1")
        if self.depth is not None and self.depth < 1:
            raise ConfigError("depth must be >= 1")
        if self.exploration_weight < 0:
            raise ConfigError("exploration_weight must be >= 0")
        if self.sampling_mode not in ("mean", "sample"):
            raise ConfigError("sampling_mode must be 'mean' or 'sample'")
        if self.q_aggregation not in ("max", "mean"):
            raise ConfigError("q_aggregation must be 'max' or 'mean'")
        if self.scorer_timeout <= 0:
            raise ConfigError("scorer_timeout must be > 0")
        if self.scorer_retries < 1:
            raise ConfigError("scorer_retries must be >= 1")
        return True


@dataclass
class RunConfig:
    """Resolved settings of one CLI invocation"""
    subcommand: str
    config_path: Optional[str] = None
    seed: Optional[int] = None
    output_dir: Optional[str] = None
    data_dir: Optional[str] = None
    checkpoint: Optional[str] = None
    scale: float = 0.05

    def __post_init__(self):
        # explicit values win; environment fills only what was left unset
        if self.seed is None:
            self.seed = _env_int("CWM_SEED", None)
        if self.output_dir is None:
            self.output_dir = os.getenv("CWM_OUTPUT_DIR") or "runs"
        if self.data_dir is None:
            self.data_dir = os.getenv("CWM_DATA_DIR") or "data"
        if self.checkpoint is None:
            self.checkpoint = os.getenv("CWM_CHECKPOINT") or None

    @property
    def output_path(self) -> Path:
        return Path(self.output_dir)

    @property
    def data_path(self) -> Path:
        return Path(self.data_dir)


def load_section(cls, path: Optional[str], section: str, overrides: Optional[Dict] = None):
    """
    Build one config dataclass from an optional JSON file

    The file may either hold the section directly or a mapping of sections
    (``{"env": {...}, "train": {...}}``).

    Args:
        cls: Config dataclass
        path: JSON file path or None for defaults
        section: Section name inside a combined file
        overrides: Values applied on top (CLI flags)

    Returns:
        Validated config instance
    """
    data: Dict = {}
    if path:
        raw = _load_json(path)
        if section in raw and isinstance(raw[section], dict):
            data = dict(raw[section])
        elif all(k in {f.name for f in fields(cls)} for k in raw):
            data = dict(raw)
    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value
    return cls.from_dict(data)
