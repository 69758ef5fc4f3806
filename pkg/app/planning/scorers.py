"""
Action scorers: the intuition and self-evaluation rewards of the planner

Scores follow "higher = better". The external scorers speak one JSON object
per line:

    request  {"id": 3, "kind": "intuition", "state_text": "...", "action_text": "...", "icl": [...]}
    response {"id": 3, "value": -1.25}

``icl`` carries the in-context material for the query kind (two ICL examples
drawn per query for ``intuition``, the labelled samples for ``self_eval``). A failed or late reply is
scored 0 for that query, the same as the uniform scorer.
"""
import asyncio
import json
import logging
import queue
import shlex
import subprocess
import threading
from dataclasses import dataclass, field
from typing import List, Literal, Optional, Protocol, Sequence

import aiohttp
import numpy as np
from pydantic import BaseModel, Field, ValidationError

from app.config import PlannerConfig
from app.data import DatasetBundle, IclExample, IclPool, PlanningTask, SelfEvalSample
from app.decoder import parse_state
from app.env import EntityCatalog, GridState, causal_vector, intervention_cycle
from app.errors import ConfigError, ScorerError
from app.text import parse_action

logger = logging.getLogger(__name__)

ScoreKind = Literal["intuition", "self_eval"]


class ScoreQuery(BaseModel):
    id: int = 0
    kind: ScoreKind
    state_text: str
    action_text: str
    icl: List[dict] = Field(default_factory=list)


class ScoreReply(BaseModel):
    id: Optional[int] = None
    value: float = Field(allow_inf_nan=False)


@dataclass
class ScorerPools:
    """In-context material handed to the scorer with every query"""
    icl: List[IclExample] = field(default_factory=list)
    self_eval: List[SelfEvalSample] = field(default_factory=list)

    @classmethod
    def from_bundle(cls, bundle: DatasetBundle) -> "ScorerPools":
        return cls(bundle.icl_pool().examples, bundle.self_eval())

    def draw_icl(self, rng: np.random.Generator, k: int = 2) -> List[IclExample]:
        """``k`` distinct ICL examples for one intuition query; a smaller pool goes whole"""
        if len(self.icl) <= k:
            return list(self.icl)
        return IclPool(list(self.icl)).sample(rng, k)


class ActionScorer(Protocol):
    def intuition(self, state_text: str, action_text: str, pool: Sequence) -> float: ...

    def self_eval(self, state_text: str, action_text: str, pool: Sequence) -> float: ...

    def close(self) -> None: ...


class UniformScorer:
    def intuition(self, state_text: str, action_text: str, pool: Sequence = ()) -> float:
        return 0.0

    def self_eval(self, state_text: str, action_text: str, pool: Sequence = ()) -> float:
        return 0.0

    def close(self) -> None:
        pass


class GoalDistanceScorer:
    """
    Intuition = minus the number of goal variables still wrong after one
    simulator step; self-evaluation is always 0
    """

    def __init__(self, task: PlanningTask, template: GridState, catalog: Optional[EntityCatalog] = None, seed: int = 0):
        self.task = task
        self.template = template
        self.catalog = catalog or EntityCatalog.from_state(template)
        self.seed = seed

    def lookahead(self, state_text: str, action_text: str) -> GridState:
        state = parse_state(state_text, self.template, self.catalog)
        iv = parse_action(action_text, state)
        return intervention_cycle(state, iv, np.random.default_rng(self.seed))

    def intuition(self, state_text: str, action_text: str, pool: Sequence = ()) -> float:
        nxt = self.lookahead(state_text, action_text)
        return -float(self.task.goal_mismatches(causal_vector(nxt), self.catalog))

    def self_eval(self, state_text: str, action_text: str, pool: Sequence = ()) -> float:
        return 0.0

    def close(self) -> None:
        pass


def _pool_payload(pool: Sequence) -> List[dict]:
    return [item.to_dict() if hasattr(item, "to_dict") else dict(item) for item in pool]


class _QueryScorer:
    """Shared plumbing of the out-of-process scorers"""

    def __init__(self):
        self._next_id = 0
        self.fallbacks = 0

    def _query(self, kind: ScoreKind, state_text: str, action_text: str, pool: Sequence) -> ScoreQuery:
        self._next_id += 1
        return ScoreQuery(id=self._next_id, kind=kind, state_text=state_text, action_text=action_text,
                          icl=_pool_payload(pool))

    def _request(self, query: ScoreQuery) -> float:
        raise NotImplementedError

    def _score(self, query: ScoreQuery) -> float:
        try:
            return self._request(query)
        except ScorerError as e:
            self.fallbacks += 1
            logger.warning(f"[scorer] {query.kind} query {query.id} failed ({e.message}); scoring 0")
            return 0.0

    def intuition(self, state_text: str, action_text: str, pool: Sequence = ()) -> float:
        return self._score(self._query("intuition", state_text, action_text, pool))

    def self_eval(self, state_text: str, action_text: str, pool: Sequence = ()) -> float:
        return self._score(self._query("self_eval", state_text, action_text, pool))


class ExternalScorer(_QueryScorer):
    """
    Scorer process driven over stdin/stdout JSON lines

    Args:
        command: Command line (string or argv list) of the scorer process
        timeout: Seconds to wait for each reply
    """

    def __init__(self, command, timeout: float = 10.0):
        super().__init__()
        self.argv = shlex.split(command) if isinstance(command, str) else list(command)
        if not self.argv:
            raise ConfigError("external scorer needs a command")
        self.timeout = timeout
        self._proc: Optional[subprocess.Popen] = None
        self._lines: "queue.Queue[str]" = queue.Queue()

    @staticmethod
    def _reader(stream, lines: "queue.Queue[str]"):
        # each process owns its queue so a dead reader cannot feed its successor
        for line in iter(stream.readline, ""):
            lines.put(line)
        lines.put("")

    def _process(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            try:
                self._proc = subprocess.Popen(
                    self.argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True, bufsize=1,
                )
            except OSError as e:
                raise ScorerError(f"cannot start {self.argv[0]}: {e}")
            self._lines = queue.Queue()
            threading.Thread(target=self._reader, args=(self._proc.stdout, self._lines), daemon=True).start()
            logger.info(f"[scorer] started external scorer pid={self._proc.pid}: {' '.join(self.argv)}")
        return self._proc

    def _request(self, query: ScoreQuery) -> float:
        proc = self._process()
        lines = self._lines
        try:
            proc.stdin.write(query.model_dump_json() + "\n")
            proc.stdin.flush()
        except (BrokenPipeError, OSError) as e:
            raise ScorerError(f"scorer process closed its input: {e}")
        while True:
            try:
                line = lines.get(timeout=self.timeout)
            except queue.Empty:
                raise ScorerError(f"no reply within {self.timeout}s")
            if not line:
                raise ScorerError(f"scorer process exited with {proc.poll()}")
            try:
                reply = ScoreReply.model_validate(json.loads(line))
            except (json.JSONDecodeError, ValidationError) as e:
                raise ScorerError(f"malformed reply {line.strip()!r}: {e}")
            if reply.id is not None and reply.id != query.id:
                logger.debug(f"[scorer] dropping stale reply {reply.id} while waiting for {query.id}")
                continue
            return reply.value

    def close(self) -> None:
        if self._proc is not None and self._proc.poll() is None:
            self._proc.stdin.close()
            try:
                self._proc.wait(timeout=self.timeout)
            except subprocess.TimeoutExpired:
                self._proc.kill()
        self._proc = None


class HttpScorer(_QueryScorer):
    """
    Scorer behind an HTTP endpoint: POST a query, read ``{"value": x}``

    Timeouts, connection errors and 429/5xx answers are retried with
    exponential back-off before the query falls back to 0.
    """

    RETRY_STATUSES = {429, 500, 502, 503, 504}

    def __init__(self, url: str, timeout: float = 10.0, max_retries: int = 3, backoff: float = 1.0):
        super().__init__()
        self.url = url
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff = backoff
        self._loop: Optional[asyncio.AbstractEventLoop] = None
        self._session: Optional[aiohttp.ClientSession] = None

    @property
    def loop(self) -> asyncio.AbstractEventLoop:
        if self._loop is None or self._loop.is_closed():
            self._loop = asyncio.new_event_loop()
        return self._loop

    async def _get_session(self) -> aiohttp.ClientSession:
        if self._session is None or self._session.closed:
            self._session = aiohttp.ClientSession(timeout=aiohttp.ClientTimeout(total=self.timeout))
        return self._session

    async def _post(self, query: ScoreQuery) -> float:
        session = await self._get_session()
        for attempt in range(self.max_retries):
            last = attempt == self.max_retries - 1
            try:
                async with session.post(self.url, json=query.model_dump()) as response:
                    if response.status in self.RETRY_STATUSES and not last:
                        wait_time = self.backoff * 2 ** attempt
                        logger.warning(f"[scorer] HTTP {response.status}, retrying in {wait_time}s...")
                        await asyncio.sleep(wait_time)
                        continue
                    if response.status != 200:
                        raise ScorerError(f"HTTP {response.status} from {self.url}")
                    data = await response.json(content_type=None)
                return ScoreReply.model_validate(data).value

            except ValidationError as e:
                raise ScorerError(f"malformed reply from {self.url}: {e}")

            except asyncio.TimeoutError:
                if last:
                    raise ScorerError(f"request timeout after {self.max_retries} attempts")
                wait_time = self.backoff * 2 ** attempt
                logger.warning(f"[scorer] request timeout, retry {attempt + 1}/{self.max_retries} in {wait_time}s")
                await asyncio.sleep(wait_time)

            except aiohttp.ClientError as e:
                if last:
                    raise ScorerError(f"request failed after {self.max_retries} attempts: {e}")
                wait_time = self.backoff * 2 ** attempt
                logger.warning(f"[scorer] request error: {e}, retry {attempt + 1}/{self.max_retries} in {wait_time}s")
                await asyncio.sleep(wait_time)
        raise ScorerError(f"no answer from {self.url}")

    def _request(self, query: ScoreQuery) -> float:
        return self.loop.run_until_complete(self._post(query))

    def close(self) -> None:
        if self._loop is None or self._loop.is_closed():
            return
        if self._session is not None and not self._session.closed:
            self._loop.run_until_complete(self._session.close())
        self._loop.close()
        self._session = None


class ScorerFactory:
    """
    Builds the scorer for each planning task from a scorer spec

    Specs: ``goal`` (GoalDistanceScorer, one per task), ``uniform``,
    ``external:<command>``, ``http:<url>``. Process and HTTP scorers are
    shared across tasks; call ``close()`` when done.
    """

    def __init__(self, spec: str, config: Optional[PlannerConfig] = None):
        self.spec = spec
        self.config = config or PlannerConfig()
        self._shared: Optional[ActionScorer] = None
        kind, _, arg = spec.partition(":")
        if kind in ("goal", "uniform") and not arg:
            self.kind = kind
        elif kind == "external" and arg.strip():
            self.kind = kind
            self._shared = ExternalScorer(arg, self.config.scorer_timeout)
        elif kind == "http" and arg.strip():
            self.kind = kind
            self._shared = HttpScorer(
                arg, self.config.scorer_timeout, self.config.scorer_retries, self.config.retry_backoff,
            )
        else:
            raise ConfigError(f"unknown scorer spec {spec!r}; expected goal, uniform, external:<cmd> or http:<url>")
        if kind == "uniform":
            self._shared = UniformScorer()

    def for_task(self, task: PlanningTask, template: GridState, catalog: Optional[EntityCatalog] = None) -> ActionScorer:
        if self.kind == "goal":
            return GoalDistanceScorer(task, template, catalog)
        return self._shared

    def close(self) -> None:
        if self._shared is not None:
            self._shared.close()
