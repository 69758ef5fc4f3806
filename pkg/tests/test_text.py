import numpy as np
import pytest

from app.config import EnvConfig
from app.env import (
    MoveObstacle,
    MoveVehicleForward,
    Noop,
    ToggleLight,
    random_init,
    valid_interventions,
)
from app.errors import ConfigError
from app.text import (
    PAD_ID,
    Pcfg,
    Vocabulary,
    action_coordinates,
    canonical_describe,
    color_name,
    describe_action,
    parse_action,
    tokenize_pad,
)
from tests.conftest import make_state


@pytest.fixture
def pcfg():
    return Pcfg()


@pytest.fixture
def vocabulary(pcfg):
    return Vocabulary.from_grammar(pcfg)


def _states(count, seed=0):
    rng = np.random.default_rng(seed)
    configs = [
        EnvConfig(grid_size=8, n_vehicles=2, n_obstacles=1, n_lights=2),
        EnvConfig(grid_size=8, n_vehicles=3, n_obstacles=2, n_lights=3),
    ]
    return [random_init(configs[i % 2], rng) for i in range(count)]


def test_color_name():
    assert color_name((0, 0, 255)) == "blue"
    assert color_name((255, 0, 0)) == "red"
    assert color_name((10, 10, 250)) == "blue"
    assert color_name((0, 250, 250)) == "cyan"


def test_describe_action_vehicle_example(pcfg):
    state = make_state(vehicle=((1, 3), "right"), light_pos=(5, 3), light_state="red")
    sentence = pcfg._render(MoveVehicleForward(0), state, "skillfully", "moved", "sleek", "blue")
    assert sentence == "You skillfully moved the sleek, blue car to the right."
    sampled = describe_action(MoveVehicleForward(0), state, pcfg, np.random.default_rng(3))
    assert sampled.startswith("You ") and sampled.endswith("blue car to the right.")


def test_describe_action_noop_and_determinism(pcfg, simple_state):
    assert describe_action(Noop(), simple_state, pcfg, np.random.default_rng(0)) == "You did nothing."
    a = describe_action(ToggleLight(0), simple_state, pcfg, np.random.default_rng(9))
    b = describe_action(ToggleLight(0), simple_state, pcfg, np.random.default_rng(9))
    assert a == b


def test_canonical_describe(simple_state):
    assert canonical_describe(ToggleLight(0), simple_state) == "you toggled the cyan traffic light"
    assert canonical_describe(MoveObstacle(0), simple_state) == "you moved the gray obstacle"
    assert canonical_describe(MoveVehicleForward(0), simple_state) == "you moved the blue car"
    assert canonical_describe(Noop(), simple_state) == "you did nothing"


def test_canonical_describe_injective():
    for state in _states(50):
        actions = valid_interventions(state, full=True)
        texts = [canonical_describe(iv, state) for iv in actions]
        assert len(set(texts)) == len(texts)


def test_tokenize_pad_contract(vocabulary):
    empty = tokenize_pad("", vocabulary, 32)
    assert len(empty) == 32 and empty.attention_len == 0
    assert all(i == PAD_ID for i in empty.ids)

    long_text = " ".join(["word"] * 50)
    assert len(tokenize_pad(long_text, vocabulary, 32)) == 32
    assert tokenize_pad(long_text, vocabulary, 32).attention_len == 32

    a = tokenize_pad("You skillfully moved the sleek, blue car.", vocabulary, 8)
    b = tokenize_pad("you skillfully moved the sleek blue car", vocabulary, 8)
    assert a == b
    assert a.attention_len == 7
    assert a.ids[7] == PAD_ID
    with pytest.raises(ValueError):
        tokenize_pad("x", vocabulary, 0)


def test_unknown_tokens_hash_into_buckets(vocabulary):
    seq = tokenize_pad("zeppelin", vocabulary, 4)
    token = seq.ids[0]
    assert len(vocabulary.words) < token < vocabulary.size
    assert tokenize_pad("zeppelin", vocabulary, 4).ids[0] == token


def test_vocabulary_persistence(vocabulary, tmp_path):
    path = tmp_path / "vocabulary.txt"
    vocabulary.save(path)
    loaded = Vocabulary.load(path)
    assert loaded.words == vocabulary.words
    assert loaded.content_hash() == vocabulary.content_hash()


def test_parse_canonical_round_trip():
    for state in _states(100, seed=1):
        for iv in valid_interventions(state, full=True):
            assert parse_action(canonical_describe(iv, state), state) == iv


def test_parse_every_grammar_expansion(pcfg):
    for state in _states(10, seed=2):
        for iv in valid_interventions(state, full=True):
            for sentence in pcfg.expansions(iv, state):
                assert parse_action(sentence, state, pcfg) == iv


def test_parse_fallbacks(simple_state):
    assert parse_action("fly to the moon", simple_state) == Noop()
    assert parse_action("You skillfully toggled the bright cyan traffic light", simple_state) == ToggleLight(0)
    # wrong verb class for the noun
    assert parse_action("you moved the cyan traffic light", simple_state) == Noop()
    # colour of no entity
    assert parse_action("you toggled the purple traffic light", simple_state) == Noop()
    # two nouns
    assert parse_action("you moved the blue car and the gray obstacle", simple_state) == Noop()
    # illegal in this state: the car's light is green
    assert parse_action("you moved the blue car", simple_state) == Noop()


def test_grammar_validation_and_persistence(pcfg, tmp_path):
    path = tmp_path / "grammar.json"
    pcfg.to_json(path)
    assert Pcfg.from_json(path) == pcfg
    with pytest.raises(ConfigError):
        Pcfg(modifiers={"blue": 1.0})
    with pytest.raises(ConfigError):
        Pcfg(modifiers={"gently": 0.0})
    with pytest.raises(ConfigError):
        Pcfg(verbs={"toggle_light": {"moved": 1.0}, "move_obstacle": {"moved": 1.0},
                    "move_vehicle": {"drove": 1.0}})


def test_action_coordinates(simple_state):
    assert np.allclose(action_coordinates(ToggleLight(0), simple_state), [2 / 7, 1 / 7])
    assert np.allclose(action_coordinates(MoveObstacle(0), simple_state), [6 / 7, 6 / 7])
    assert np.allclose(action_coordinates(Noop(), simple_state), [-1, -1])
