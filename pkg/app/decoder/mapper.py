"""
Two-stage causal mapper: latents -> causal variables

Stage one trains a shared assignment net on single-latent inputs (z masked to
one coordinate, all M masks batched) and thresholds the |correlation| between
each latent's predictions and each causal variable into relevance masks.
Stage two fits one predictor per causal variable that only sees the latents
of its mask, with a head matching the variable type.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from app.config import DecoderConfig
from app.env.catalog import EntityCatalog, VariableType
from app.errors import DegenerateData, DimensionError, EmptyMask
from app.nn import Adam, Mlp, Module, Tensor

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class VariableSpec:
    var_type: VariableType
    n_classes: int = 0

    @property
    def out_dim(self) -> int:
        if self.var_type == "categorical":
            return self.n_classes
        return 2 if self.var_type == "angle" else 1


def variable_specs(catalog: EntityCatalog) -> List[VariableSpec]:
    return [VariableSpec(v.var_type, v.n_classes) for v in catalog.variables]


@dataclass
class AssignmentResult:
    """
    correlation[i, j]: |correlation| between latent i's predictions and variable j.
    masks[i, j] is True iff correlation[i, j] >= threshold, unless variable j
    fell back to its top latents (listed in ``fallback``).
    """
    correlation: np.ndarray
    masks: np.ndarray
    threshold: float
    fallback: List[int] = field(default_factory=list)

    @property
    def M(self) -> int:
        return self.correlation.shape[0]

    @property
    def K(self) -> int:
        return self.correlation.shape[1]

    def mask_for(self, j: int) -> np.ndarray:
        return self.masks[:, j].astype(np.float64)

    def to_dict(self) -> dict:
        return {
            "correlation": self.correlation.tolist(),
            "masks": self.masks.astype(int).tolist(),
            "threshold": self.threshold,
            "fallback": list(self.fallback),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AssignmentResult":
        return cls(
            correlation=np.asarray(data["correlation"], dtype=np.float64),
            masks=np.asarray(data["masks"], dtype=bool),
            threshold=float(data["threshold"]),
            fallback=list(data.get("fallback", [])),
        )


def _check_labels(latents, causal):
    latents = np.asarray(latents, dtype=np.float64)
    causal = np.asarray(causal, dtype=np.float64)
    if latents.ndim != 2 or causal.ndim != 2 or len(latents) != len(causal):
        raise DimensionError(f"labels must be (n, M) and (n, K), got {latents.shape} and {causal.shape}")
    if len(latents) < 2:
        raise DegenerateData(f"need at least 2 labelled samples, got {len(latents)}")
    constant = np.flatnonzero(causal.std(axis=0) == 0)
    if constant.size:
        raise DegenerateData(f"causal variable(s) {constant.tolist()} are constant over the labelled set")
    return latents, causal


def _standardize(latents: np.ndarray):
    mean = latents.mean(axis=0)
    std = latents.std(axis=0)
    std[std == 0] = 1.0
    return mean, std


def _abs_pearson(predictions: np.ndarray, target: np.ndarray) -> float:
    p = predictions - predictions.mean()
    t = target - target.mean()
    denom = np.sqrt((p ** 2).sum() * (t ** 2).sum())
    if denom == 0:
        return 0.0
    return float(abs((p * t).sum()) / denom)


def _batches(n: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


def fit_target_assignment(
    latents,
    true_causal,
    threshold: Optional[float] = None,
    config: Optional[DecoderConfig] = None,
    rng: Optional[np.random.Generator] = None,
) -> AssignmentResult:
    """
    Learn which latents carry information about which causal variable

    Args:
        latents: (n, M) labelled latents
        true_causal: (n, K) ground-truth causal vectors
        threshold: Relevance threshold in (0, 1); defaults to ``config.threshold``
        config: Decoder settings (epochs, lr, hidden size, fallback width)
        rng: numpy Generator (defaults to ``config.seed``)

    Returns:
        AssignmentResult; variables without any latent above threshold fall
        back to their ``config.fallback_top_k`` best latents

    Raises:
        DegenerateData: fewer than 2 samples or a constant causal variable
    """
    config = config or DecoderConfig()
    threshold = config.threshold if threshold is None else threshold
    if not 0 < threshold < 1:
        raise DegenerateData(f"threshold must be in (0, 1), got {threshold}")
    rng = rng or np.random.default_rng(config.seed)
    latents, causal = _check_labels(latents, true_causal)
    n, M = latents.shape
    K = causal.shape[1]

    z_mean, z_std = _standardize(latents)
    z = (latents - z_mean) / z_std
    c_mean, c_std = causal.mean(axis=0), causal.std(axis=0)
    targets = (causal - c_mean) / c_std

    net = Mlp([M, config.hidden_dim, K], rng)
    optimizer = Adam(net.parameters(), lr=config.lr)
    eye = np.eye(M)
    for _ in range(config.assign_epochs):
        for idx in _batches(n, config.batch_size, rng):
            # (batch, M masks, M) -> rows of single-latent inputs
            masked = (z[idx, None, :] * eye[None]).reshape(-1, M)
            expected = np.repeat(targets[idx], M, axis=0)
            optimizer.zero_grad()
            loss = ((net(masked) - expected) ** 2).mean()
            loss.backward()
            optimizer.step()

    masked = (z[:, None, :] * eye[None]).reshape(-1, M)
    predictions = net(masked).data.reshape(n, M, K)
    correlation = np.array([
        [_abs_pearson(predictions[:, i, j], causal[:, j]) for j in range(K)]
        for i in range(M)
    ])
    masks = correlation >= threshold

    fallback = []
    for j in range(K):
        if not masks[:, j].any() and config.fallback_top_k > 0:
            top = np.argsort(-correlation[:, j], kind="stable")[:config.fallback_top_k]
            masks[top, j] = True
            fallback.append(j)
            logger.warning(
                f"[decoder] variable {j}: no latent reaches correlation {threshold}; "
                f"falling back to latents {sorted(top.tolist())}"
            )
    logger.info(f"[decoder] assignment: {int(masks.sum())} relevant (latent, variable) pairs over K={K}")
    return AssignmentResult(correlation, masks, float(threshold), fallback)


class CausalMapper(Module):
    """
    Per-variable predictors over masked, standardised latents

    Heads: categorical -> class logits (argmax decode); numerical -> sigmoid
    scalar in [0, 1]; angle -> (sin, cos) decoded with atan2 into [0, 2*pi).
    """

    def __init__(
        self,
        assignment: AssignmentResult,
        specs: Sequence[VariableSpec],
        hidden: int,
        rng: np.random.Generator,
        z_mean: Optional[np.ndarray] = None,
        z_std: Optional[np.ndarray] = None,
    ):
        if len(specs) != assignment.K:
            raise DimensionError(f"{len(specs)} variable specs for an assignment over K={assignment.K}")
        self.assignment = assignment
        self.specs = list(specs)
        M = assignment.M
        self.z_mean = np.zeros(M) if z_mean is None else np.asarray(z_mean, dtype=np.float64)
        self.z_std = np.ones(M) if z_std is None else np.asarray(z_std, dtype=np.float64)
        self.predictors = [Mlp([M, hidden, hidden, spec.out_dim], rng) for spec in self.specs]

    @property
    def M(self) -> int:
        return self.assignment.M

    @property
    def K(self) -> int:
        return self.assignment.K

    def _inputs(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=np.float64)
        if z.shape[-1] != self.M:
            raise DimensionError(f"mapper expects {self.M} latents, got {z.shape[-1]}")
        return (np.atleast_2d(z) - self.z_mean) / self.z_std

    def head_outputs(self, z) -> List[Tensor]:
        """Raw head output of every predictor (taped)"""
        x = self._inputs(z)
        return [net(x * self.assignment.mask_for(j)) for j, net in enumerate(self.predictors)]

    def head_loss(self, outputs: List[Tensor], causal: np.ndarray) -> Tensor:
        total = None
        for j, (out, spec) in enumerate(zip(outputs, self.specs)):
            target = causal[:, j]
            if spec.var_type == "categorical":
                labels = target.astype(np.int64)
                log_probs = out.log_softmax(axis=-1)
                term = -log_probs[np.arange(len(labels)), labels].mean()
            elif spec.var_type == "angle":
                trig = np.stack([np.sin(target), np.cos(target)], axis=-1)
                term = ((out - trig) ** 2).mean()
            else:
                term = ((out[:, 0].sigmoid() - target) ** 2).mean()
            total = term if total is None else total + term
        return total

    def decode(self, outputs: List[Tensor]) -> np.ndarray:
        columns = []
        for out, spec in zip(outputs, self.specs):
            raw = out.data
            if spec.var_type == "categorical":
                columns.append(raw.argmax(axis=-1).astype(np.float64))
            elif spec.var_type == "angle":
                columns.append(np.mod(np.arctan2(raw[:, 0], raw[:, 1]), TWO_PI))
            else:
                columns.append(np.clip(0.5 * (1.0 + np.tanh(0.5 * raw[:, 0])), 0.0, 1.0))
        return np.stack(columns, axis=-1) if columns else np.zeros((len(outputs), 0))

    def to_meta(self) -> dict:
        return {
            "assignment": self.assignment.to_dict(),
            "specs": [{"var_type": s.var_type, "n_classes": s.n_classes} for s in self.specs],
            "hidden": self.predictors[0].sizes[1] if self.predictors else 0,
            "z_mean": self.z_mean.tolist(),
            "z_std": self.z_std.tolist(),
        }

    @classmethod
    def from_meta(cls, meta: dict, state: Dict[str, np.ndarray]) -> "CausalMapper":
        mapper = cls(
            AssignmentResult.from_dict(meta["assignment"]),
            [VariableSpec(s["var_type"], int(s["n_classes"])) for s in meta["specs"]],
            int(meta["hidden"]) or 1,
            np.random.default_rng(0),
            np.asarray(meta["z_mean"]),
            np.asarray(meta["z_std"]),
        )
        mapper.load_state_dict(state)
        return mapper


def fit_causal_predictors(
    latents,
    true_causal,
    assignment: AssignmentResult,
    specs: Sequence[VariableSpec],
    config: Optional[DecoderConfig] = None,
    rng: Optional[np.random.Generator] = None,
) -> CausalMapper:
    """
    Train the per-variable predictors

    Raises:
        EmptyMask: a variable has no relevant latent
        DegenerateData: categorical labels outside their class range
    """
    config = config or DecoderConfig()
    rng = rng or np.random.default_rng(config.seed + 1)
    latents = np.asarray(latents, dtype=np.float64)
    causal = np.asarray(true_causal, dtype=np.float64)
    if latents.shape[1] != assignment.M or causal.shape[1] != assignment.K:
        raise DimensionError(
            f"labels {latents.shape}/{causal.shape} do not match assignment M={assignment.M}, K={assignment.K}"
        )
    for j in range(assignment.K):
        if not assignment.masks[:, j].any():
            raise EmptyMask(j)
    for j, spec in enumerate(specs):
        if spec.var_type == "categorical":
            labels = causal[:, j]
            if np.any(labels < 0) or np.any(labels >= spec.n_classes) or np.any(labels != np.round(labels)):
                raise DegenerateData(f"variable {j}: labels are not classes 0..{spec.n_classes - 1}")

    z_mean, z_std = _standardize(latents)
    mapper = CausalMapper(assignment, specs, config.hidden_dim, rng, z_mean, z_std)
    optimizer = Adam(mapper.parameters(), lr=config.lr)
    n = len(latents)
    last = float("nan")
    for epoch in range(config.causal_epochs):
        for idx in _batches(n, config.batch_size, rng):
            optimizer.zero_grad()
            loss = mapper.head_loss(mapper.head_outputs(latents[idx]), causal[idx])
            loss.backward()
            optimizer.step()
            last = loss.item()
    logger.info(f"[decoder] causal predictors trained on {n} labels, final loss {last:.4f}")
    return mapper


def map_latents(mapper: CausalMapper, z) -> np.ndarray:
    """Causal estimate for one latent vector (K,) or a batch (n, K)"""
    z = np.asarray(z, dtype=np.float64)
    single = z.ndim == 1
    estimate = mapper.decode(mapper.head_outputs(z))
    return estimate[0] if single else estimate


def fit_causal_mapper(
    latents,
    true_causal,
    catalog: EntityCatalog,
    config: Optional[DecoderConfig] = None,
) -> CausalMapper:
    """Both stages with the catalog's variable types"""
    config = config or DecoderConfig()
    latents = np.asarray(latents, dtype=np.float64)[:config.max_labels]
    true_causal = np.asarray(true_causal, dtype=np.float64)[:config.max_labels]
    assignment = fit_target_assignment(latents, true_causal, config=config)
    return fit_causal_predictors(latents, true_causal, assignment, variable_specs(catalog), config)
