import math
import sys
import textwrap

import numpy as np
import pytest
from aiohttp import web
from aiohttp.test_utils import TestServer

from app.config import PlannerConfig
from app.data import IclExample, PlanningTask, SelfEvalSample, generate_planning_tasks, goal_variables
from app.env import EntityCatalog, Noop, ToggleLight, causal_vector, intervention_cycle, random_init
from app.errors import ConfigError, NotExpanded
from app.planning import (
    ExternalScorer,
    GoalDistanceScorer,
    HttpScorer,
    MctsPlanner,
    PlanNode,
    ScorerFactory,
    ScorerPools,
    UniformScorer,
    backpropagate,
    simulate_greedy,
    uct_select,
)
from app.runtime import LatentState, OracleWorldModel
from app.text import canonical_describe
from tests.conftest import make_state, make_world_model


def _leaf(visits=0):
    return PlanNode(LatentState(np.zeros(2)), "", 1, visits=visits)


def _parent(q=(), rewards=None, child_visits=(), visits=0):
    node = PlanNode(LatentState(np.zeros(2)), "", 0, visits=visits)
    rewards = rewards if rewards is not None else [0.0] * len(child_visits)
    for i, (r, n) in enumerate(zip(rewards, child_visits)):
        node.add_child(f"a{i}", Noop(), _leaf(n), r)
    for i, value in enumerate(q):
        node.q[i] = value
    return node


def _task(state, iv=None, n_steps=1):
    catalog = EntityCatalog.from_state(state)
    end = intervention_cycle(state, iv) if iv is not None else state
    return PlanningTask(
        task_id=0, n_steps=n_steps, start_state=state.to_dict(),
        goal_variables=goal_variables(causal_vector(end), catalog),
    )


def _goal(task, state):
    catalog = EntityCatalog.from_state(state)
    return lambda causal: task.goal_reached(causal, catalog)


class ShiftedScorer:
    def __init__(self, inner, shift):
        self.inner = inner
        self.shift = shift

    def intuition(self, state_text, action_text, pool=()):
        return self.inner.intuition(state_text, action_text, pool) + self.shift

    def self_eval(self, state_text, action_text, pool=()):
        return self.inner.self_eval(state_text, action_text, pool)

    def close(self):
        pass


class LeafScorer:
    """Rewards one (state, action) pair and nothing else"""

    def __init__(self, state_text, action_text):
        self.target = (state_text, action_text)

    def intuition(self, state_text, action_text, pool=()):
        return 1.0 if (state_text, action_text) == self.target else 0.0

    def self_eval(self, state_text, action_text, pool=()):
        return 0.0

    def close(self):
        pass


# ----- tree primitives -----

def test_uct_equal_visits_reduces_to_argmax_q():
    node = _parent(q=[0.2, 0.5], child_visits=[3, 3], visits=6)
    assert uct_select(node, 1.0) == 1


def test_uct_picks_unvisited_child_first():
    node = _parent(q=[5.0, 0.0, 0.0], child_visits=[2, 0, 0], visits=2)
    assert uct_select(node, 1.0) == 1


def test_uct_hand_computed_scores():
    node = _parent(q=[1.0, 0.0], child_visits=[4, 1], visits=5)
    scores = [1.0 + math.sqrt(math.log(5) / 4), math.sqrt(math.log(5))]
    assert scores[0] == pytest.approx(1.634, abs=1e-3)
    assert scores[1] == pytest.approx(1.269, abs=1e-3)
    assert uct_select(node, 1.0) == 0


def test_uct_ties_break_by_index():
    node = _parent(q=[0.3, 0.3], child_visits=[2, 2], visits=4)
    assert uct_select(node, 1.0) == 0


def test_unexpanded_node_raises():
    with pytest.raises(NotExpanded):
        uct_select(_leaf(), 1.0)
    with pytest.raises(NotExpanded):
        simulate_greedy(_leaf())


def test_simulate_greedy():
    assert simulate_greedy(_parent(rewards=[0.1, 0.9], child_visits=[0, 0])) == 1
    assert simulate_greedy(_parent(rewards=[0.4, 0.4, 0.4], child_visits=[0, 0, 0])) == 0
    assert simulate_greedy(_parent(rewards=[-3.0], child_visits=[0])) == 0


def test_backpropagate_first_visit_sets_q_to_reward():
    node = _parent(rewards=[0.7], child_visits=[0])
    backpropagate([(node, 0, 0.7)])
    assert node.q[0] == pytest.approx(0.7)


def test_backpropagate_uses_mean_returns():
    root = _parent(rewards=[1.0], child_visits=[0])
    child = _parent(rewards=[0.0], child_visits=[0])
    backpropagate([(root, 0, 1.0), (child, 0, 0.0)])
    assert root.q[0] == pytest.approx(0.5)
    assert child.q[0] == pytest.approx(0.0)


def test_backpropagate_keeps_the_best_return():
    node = _parent(rewards=[1.0], child_visits=[0])
    backpropagate([(node, 0, 1.0)])
    backpropagate([(node, 0, 0.2)])
    assert node.q[0] == pytest.approx(1.0)
    assert node.q_updates[0] == 2


def test_backpropagate_mean_aggregation():
    node = _parent(rewards=[1.0], child_visits=[0])
    backpropagate([(node, 0, 1.0)], "mean")
    backpropagate([(node, 0, 0.2)], "mean")
    assert node.q[0] == pytest.approx(0.6)


def test_non_finite_reward_is_rejected():
    with pytest.raises(ValueError):
        _parent(rewards=[float("nan")], child_visits=[0])


# ----- expansion -----

def test_three_light_node_has_four_children(three_light_config):
    state = random_init(three_light_config, np.random.default_rng(3))
    oracle = OracleWorldModel(state)
    planner = MctsPlanner(oracle, UniformScorer(), PlannerConfig(rollouts=1))
    latent = oracle.initial_state(state)
    node = planner.expand(PlanNode(latent, oracle.describe(latent)), lambda c: False, 4)
    assert len(node.children) == len(node.actions) == len(node.rewards) == 4
    assert node.rewards == [0.0] * 4
    assert isinstance(node.interventions[-1], Noop)
    assert simulate_greedy(node) == 0


def test_children_are_world_model_steps():
    state = make_state()
    model = make_world_model(state)
    planner = MctsPlanner(model, UniformScorer(), PlannerConfig(rollouts=1))
    latent = model.initial_state(state)
    node = planner.expand(PlanNode(latent, model.describe(latent)), lambda c: False, 3)
    for text, child in zip(node.actions, node.children):
        direct = model.sample_next_state(latent, model.encode_action(text, latent))
        assert np.array_equal(child.latent.z, direct.z_next.z)
        assert child.text == direct.text_next
        assert child.depth == 1


# ----- planning -----

def test_depth_limit_is_n_plus_two(env_config):
    state = random_init(env_config, np.random.default_rng(5))
    planner = MctsPlanner(OracleWorldModel(state), UniformScorer(), PlannerConfig(rollouts=3))
    result = planner.search(state, lambda c: False, 2)
    assert result.depth_limit == 4
    assert len(result.actions) == 4


def test_goal_at_root_gives_empty_plan(env_config):
    state = random_init(env_config, np.random.default_rng(5))
    task = _task(state)
    planner = MctsPlanner(OracleWorldModel(state), GoalDistanceScorer(task, state), PlannerConfig(rollouts=5))
    result = planner.search(state, _goal(task, state), 1)
    assert result.actions == []
    assert result.iterations == 0


def test_oracle_plans_the_single_toggle(default_state):
    state = default_state
    task = _task(state, ToggleLight(1))
    planner = MctsPlanner(OracleWorldModel(state), GoalDistanceScorer(task, state), PlannerConfig(rollouts=50))
    assert planner.plan(state, _goal(task, state), 1) == [canonical_describe(ToggleLight(1), state)]


def test_root_visits_equal_rollouts(default_state):
    planner = MctsPlanner(OracleWorldModel(default_state), UniformScorer(), PlannerConfig(rollouts=17))
    result = planner.search(default_state, lambda c: False, 2)
    assert result.root.visits == 17


def test_uniform_scorer_follows_index_order():
    state = make_state()
    planner = MctsPlanner(OracleWorldModel(state), UniformScorer(), PlannerConfig(rollouts=8, depth=3))
    assert planner.plan(state, lambda c: False, 1) == [canonical_describe(ToggleLight(0), state)] * 3


def test_search_finds_the_single_rewarded_leaf():
    state = make_state()
    oracle = OracleWorldModel(state)
    noop_text = canonical_describe(Noop(), state)
    toggle_text = canonical_describe(ToggleLight(0), state)
    after_noop = oracle.step(oracle.initial_state(state), noop_text, hint=Noop()).text_next
    planner = MctsPlanner(oracle, LeafScorer(after_noop, toggle_text), PlannerConfig(rollouts=20, depth=2))
    assert planner.plan(state, lambda c: False, 0) == [noop_text, toggle_text]


def test_shifting_every_reward_keeps_the_plan(env_config):
    for seed in range(4):
        task = generate_planning_tasks(env_config, 2, 1, np.random.default_rng(seed))[0]
        state = task.grid_state()
        goal = _goal(task, state)
        config = PlannerConfig(rollouts=30)
        base = MctsPlanner(OracleWorldModel(state), GoalDistanceScorer(task, state), config).plan(state, goal, 2)
        shifted = MctsPlanner(
            OracleWorldModel(state), ShiftedScorer(GoalDistanceScorer(task, state), 3.0), config,
        ).plan(state, goal, 2)
        assert base == shifted


def test_oracle_solves_two_step_tasks(env_config):
    tasks = generate_planning_tasks(env_config, 2, 10, np.random.default_rng(11))
    solved = 0
    for task in tasks:
        state = task.grid_state()
        planner = MctsPlanner(OracleWorldModel(state), GoalDistanceScorer(task, state), PlannerConfig(rollouts=50))
        current = state
        for text in planner.plan(state, _goal(task, state), 2):
            current = intervention_cycle(current, next(
                iv for iv in [ToggleLight(l.id) for l in current.lights] + [Noop()]
                if canonical_describe(iv, current) == text
            ))
        solved += task.goal_reached(causal_vector(current), EntityCatalog.from_state(state))
    assert solved >= 8


# ----- scorers -----

def test_goal_distance_prefers_the_goal_reaching_action(default_state):
    task = _task(default_state, ToggleLight(0))
    oracle = OracleWorldModel(default_state)
    text = oracle.describe(oracle.initial_state(default_state))
    scorer = GoalDistanceScorer(task, default_state)
    best = scorer.intuition(text, canonical_describe(ToggleLight(0), default_state))
    assert best == 0.0
    for iv in (ToggleLight(1), Noop()):
        assert scorer.intuition(text, canonical_describe(iv, default_state)) < best
    assert scorer.self_eval(text, "anything") == 0.0


def _script(tmp_path, body):
    path = tmp_path / "scorer.py"
    path.write_text(textwrap.dedent(body))
    return [sys.executable, str(path)]


def test_external_scorer_round_trip(tmp_path):
    argv = _script(tmp_path, """
        import json, sys
        for line in sys.stdin:
            q = json.loads(line)
            value = 1.5 if q["kind"] == "intuition" else -0.25
            sys.stdout.write(json.dumps({"id": q["id"] + 1000, "value": 99.0}) + "\\n")
            sys.stdout.write(json.dumps({"id": q["id"], "value": value + len(q["icl"])}) + "\\n")
            sys.stdout.flush()
    """)
    scorer = ExternalScorer(argv, timeout=10.0)
    try:
        assert scorer.intuition("state", "action", [{"k": 1}]) == 2.5
        assert scorer.self_eval("state", "action", []) == -0.25
        assert scorer.fallbacks == 0
    finally:
        scorer.close()


def test_external_scorer_timeout_falls_back_to_uniform(tmp_path):
    argv = _script(tmp_path, """
        import sys
        for line in sys.stdin:
            pass
    """)
    scorer = ExternalScorer(argv, timeout=0.2)
    try:
        assert scorer.intuition("state", "action") == 0.0
        assert scorer.fallbacks == 1
    finally:
        scorer.close()


def test_external_scorer_malformed_reply_falls_back(tmp_path):
    argv = _script(tmp_path, """
        import sys
        for line in sys.stdin:
            sys.stdout.write("not json\\n")
            sys.stdout.flush()
    """)
    scorer = ExternalScorer(argv, timeout=5.0)
    try:
        assert scorer.self_eval("state", "action") == 0.0
        assert scorer.fallbacks == 1
    finally:
        scorer.close()


def test_http_scorer_round_trip_with_retry():
    calls = []

    async def handle(request):
        body = await request.json()
        calls.append(body["kind"])
        if len(calls) == 1:
            return web.json_response({"error": "busy"}, status=503)
        return web.json_response({"id": body["id"], "value": 0.75 if body["kind"] == "intuition" else 0.5})

    app = web.Application()
    app.router.add_post("/score", handle)
    scorer = HttpScorer("http://127.0.0.1/unused", timeout=5.0, max_retries=3, backoff=0.0)
    server = TestServer(app)
    scorer.loop.run_until_complete(server.start_server())
    try:
        scorer.url = str(server.make_url("/score"))
        assert scorer.intuition("state", "action") == 0.75
        assert scorer.self_eval("state", "action") == 0.5
        assert calls == ["intuition", "intuition", "self_eval"]
        assert scorer.fallbacks == 0
    finally:
        scorer.loop.run_until_complete(server.close())
        scorer.close()


def test_http_scorer_unreachable_falls_back():
    scorer = HttpScorer("http://127.0.0.1:9/score", timeout=2.0, max_retries=2, backoff=0.0)
    try:
        assert scorer.intuition("state", "action") == 0.0
        assert scorer.fallbacks == 1
    finally:
        scorer.close()


def test_scorer_factory_specs(default_state):
    task = _task(default_state)
    assert isinstance(ScorerFactory("goal").for_task(task, default_state), GoalDistanceScorer)
    uniform = ScorerFactory("uniform")
    assert uniform.for_task(task, default_state) is uniform.for_task(task, default_state)
    assert isinstance(ScorerFactory("external:some-command --flag").for_task(task, default_state), ExternalScorer)
    assert isinstance(ScorerFactory("http:http://localhost:1/score").for_task(task, default_state), HttpScorer)
    for bad in ("llm", "external:", "http:", "goal:x"):
        with pytest.raises(ConfigError):
            ScorerFactory(bad)


def test_planner_config_validation():
    with pytest.raises(ConfigError):
        MctsPlanner(OracleWorldModel(make_state()), UniformScorer(), PlannerConfig(rollouts=0))
    with pytest.raises(ConfigError):
        PlannerConfig(q_aggregation="median").validate()


# ----- in-context material -----
def _icl_examples(count):
    return [
        IclExample(np.full(3, i / 10), [f"action {i}"], np.full(3, i / 10 + 0.05), f"start {i}", f"end {i}")
        for i in range(count)
    ]


class RecordingScorer(UniformScorer):
    def __init__(self):
        self.icl_sizes = []
        self.icl_ids = set()
        self.self_eval_sizes = []

    def intuition(self, state_text, action_text, pool=()):
        self.icl_sizes.append(len(pool))
        self.icl_ids.update(item.actions[0] for item in pool)
        assert len({item.actions[0] for item in pool}) == len(pool)
        return 0.0

    def self_eval(self, state_text, action_text, pool=()):
        self.self_eval_sizes.append(len(pool))
        return 0.0


def test_draw_icl_takes_two_distinct_examples():
    pools = ScorerPools(_icl_examples(10))
    rng = np.random.default_rng(3)
    draws = [pools.draw_icl(rng) for _ in range(20)]
    assert all(len(d) == 2 and d[0] is not d[1] for d in draws)
    assert len({tuple(e.actions[0] for e in d) for d in draws}) > 1
    again = [ScorerPools(_icl_examples(10)).draw_icl(np.random.default_rng(3)) for _ in range(2)]
    assert [e.actions for e in again[0]] == [e.actions for e in again[1]]


def test_draw_icl_small_pool_goes_whole():
    assert ScorerPools().draw_icl(np.random.default_rng(0)) == []
    assert len(ScorerPools(_icl_examples(1)).draw_icl(np.random.default_rng(0))) == 1


def test_planner_sends_two_icl_examples_per_query():
    state = make_state()
    scorer = RecordingScorer()
    labelled = [SelfEvalSample("s", "a", "good"), SelfEvalSample("s", "b", "bad")]
    pools = ScorerPools(_icl_examples(10), labelled)
    planner = MctsPlanner(OracleWorldModel(state), scorer, PlannerConfig(rollouts=6, depth=2), pools=pools)
    planner.search(state, lambda c: False, 0)
    assert scorer.icl_sizes
    assert set(scorer.icl_sizes) == {2}
    assert len(scorer.icl_ids) > 2
    assert set(scorer.self_eval_sizes) == {2}


def test_external_scorer_query_carries_two_icl_examples(tmp_path):
    argv = _script(tmp_path, """
        import json, sys
        for line in sys.stdin:
            q = json.loads(line)
            sys.stdout.write(json.dumps({"id": q["id"], "value": float(len(q["icl"]))}) + "\\n")
            sys.stdout.flush()
    """)
    state = make_state()
    scorer = ExternalScorer(argv, timeout=10.0)
    pools = ScorerPools(_icl_examples(10))
    try:
        planner = MctsPlanner(OracleWorldModel(state), scorer, PlannerConfig(rollouts=1, depth=1), pools=pools)
        result = planner.search(state, lambda c: False, 0)
        assert result.root.rewards
        assert set(result.root.rewards) == {2.0}
        assert scorer.fallbacks == 0
    finally:
        scorer.close()


def test_external_scorer_restarts_after_exit(tmp_path):
    argv = _script(tmp_path, """
        import json, sys
        q = json.loads(sys.stdin.readline())
        sys.stdout.write(json.dumps({"id": q["id"], "value": 1.0}) + "\\n")
        sys.stdout.flush()
    """)
    scorer = ExternalScorer(argv, timeout=5.0)
    try:
        values, pids = [], []
        for _ in range(3):
            values.append(scorer.intuition("state", "action"))
            pids.append(scorer._proc.pid)
            finished = scorer._lines
            scorer._proc.wait(timeout=5)
            # the end-of-stream marker stays with the exited process
            assert finished.get(timeout=5) == ""
        assert values == [1.0, 1.0, 1.0]
        assert scorer.fallbacks == 0
        assert len(set(pids)) == 3
    finally:
        scorer.close()
