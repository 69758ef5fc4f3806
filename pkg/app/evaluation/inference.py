"""
N-step causal inference accuracy

Given only the start observation and the N action sentences, the world model
rolls forward in latent space (mean mode); the decoded end state is compared
with the simulator's end state under a MatchPolicy.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Tuple

import pandas as pd

from app.data import Episode
from app.env import EntityCatalog
from app.evaluation.matching import CATEGORIES, MatchPolicy, category_of, states_match
from app.runtime import LatentState, WorldModel

logger = logging.getLogger(__name__)


@dataclass
class InferenceReport:
    """Correct/total counts per episode length and, for 1-step episodes, per action category"""
    per_n: Dict[int, Tuple[int, int]] = field(default_factory=dict)
    per_category: Dict[str, Tuple[int, int]] = field(default_factory=dict)

    def accuracy(self, n_steps: int) -> float:
        correct, total = self.per_n[n_steps]
        return correct / total if total else 0.0

    def merge(self, other: "InferenceReport") -> "InferenceReport":
        def add(a: Dict, b: Dict) -> Dict:
            out = dict(a)
            for key, (c, t) in b.items():
                c0, t0 = out.get(key, (0, 0))
                out[key] = (c0 + c, t0 + t)
            return out
        return InferenceReport(add(self.per_n, other.per_n), add(self.per_category, other.per_category))

    def table(self) -> pd.DataFrame:
        rows = [
            {"N": n, "episodes": t, "correct": c, "accuracy": c / t if t else 0.0}
            for n, (c, t) in sorted(self.per_n.items())
        ]
        return pd.DataFrame(rows, columns=["N", "episodes", "correct", "accuracy"])

    def category_table(self) -> pd.DataFrame:
        rows = []
        for name in CATEGORIES:
            c, t = self.per_category.get(name, (0, 0))
            if t:
                rows.append({"category": name, "count": t, "correct": c, "accuracy": c / t})
        return pd.DataFrame(rows, columns=["category", "count", "correct", "accuracy"])


def rollout_episode(model: WorldModel, episode: Episode) -> LatentState:
    """End latent of an episode; recorded interventions are passed as hints (used by the oracle only)"""
    model.template = episode.start_state
    latent = model.encode_obs(episode.start_observation)
    for text, iv in zip(episode.actions, episode.interventions):
        latent = model.step(latent, text, "mean", None, hint=iv).z_next
    return latent


def eval_causal_inference(
    model: WorldModel,
    episodes: Iterable[Episode],
    n_steps: int,
    catalog: EntityCatalog,
    policy: MatchPolicy = MatchPolicy(),
) -> InferenceReport:
    correct = total = 0
    categories: Dict[str, List[int]] = {}
    for episode in episodes:
        if episode.n_steps != n_steps or len(episode.actions) != n_steps:
            logger.warning(f"[eval] [N={n_steps}] skipping a {len(episode.actions)}-action episode")
            continue
        pred = model.decode_causal(rollout_episode(model, episode))
        hit = states_match(pred, episode.end_state_causal, catalog, policy)
        correct += hit
        total += 1
        if n_steps == 1:
            bucket = categories.setdefault(category_of(episode.interventions[0]), [0, 0])
            bucket[0] += hit
            bucket[1] += 1
    if total:
        logger.info(f"[eval] [N={n_steps}] accuracy {correct / total:.3f} over {total} episodes")
    return InferenceReport(
        {n_steps: (int(correct), total)},
        {name: (int(c), t) for name, (c, t) in categories.items()},
    )


def eval_inference_lengths(
    model: WorldModel,
    episodes_by_n: Dict[int, List[Episode]],
    catalog: EntityCatalog,
    policy: MatchPolicy = MatchPolicy(),
) -> InferenceReport:
    report = InferenceReport()
    for n_steps in sorted(episodes_by_n):
        report = report.merge(eval_causal_inference(model, episodes_by_n[n_steps], n_steps, catalog, policy))
    return report
