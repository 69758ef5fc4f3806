import numpy as np
import pytest

from app.config import EnvConfig
from app.env import GridState, Obstacle, Position, TrafficLight, Vehicle, random_init

BLUE = (0, 0, 255)
ORANGE = (255, 165, 0)
GRAY = (128, 128, 128)
CYAN = (0, 255, 255)
MAGENTA = (255, 0, 255)
YELLOW = (255, 255, 0)


@pytest.fixture(autouse=True)
def _no_env_seed(monkeypatch):
    for name in ("CWM_SEED", "CWM_DATA_DIR", "CWM_OUTPUT_DIR", "CWM_CHECKPOINT"):
        monkeypatch.delenv(name, raising=False)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def env_config():
    return EnvConfig(grid_size=8, n_vehicles=2, n_obstacles=1, n_lights=2)


@pytest.fixture
def three_light_config():
    return EnvConfig(grid_size=8, n_vehicles=2, n_obstacles=1, n_lights=3)


def make_state(vehicle=((2, 5), "up"), light_pos=(2, 1), light_state="green", obstacle=(6, 6)):
    """Hand-built 8x8 state: one blue car bound to one cyan light, one gray obstacle"""
    light = TrafficLight(0, Position(*light_pos), light_state, CYAN)
    vehicles = ()
    if vehicle is not None:
        (x, y), orientation = vehicle
        vehicles = (Vehicle(0, Position(x, y), orientation, BLUE, 0),)
    obstacles = ()
    if obstacle is not None:
        obstacles = (Obstacle(0, Position(*obstacle), GRAY),)
    return GridState(8, (light,), vehicles, obstacles)


@pytest.fixture
def simple_state():
    return make_state()


@pytest.fixture
def default_state(env_config):
    return random_init(env_config, np.random.default_rng(7))


def make_world_model(state, modality="TB", seed=0):
    """Untrained learned world model whose encoder and flow are the identity (M == K)"""
    from app.config import TrainConfig
    from app.crl import CwmParams
    from app.decoder import AssignmentResult, CausalMapper, variable_specs
    from app.env import EntityCatalog
    from app.observation import ObservationMap
    from app.runtime import CausalWorldModel
    from app.text import Pcfg, Vocabulary

    catalog = EntityCatalog.from_state(state)
    K = catalog.K
    config = TrainConfig(
        modality=modality, latent_dim=K, hidden_dim=16, flow_layers=2, flow_hidden=16,
        action_dim=8, token_dim=8, gate_hidden=16, seed=seed,
    )
    assignment = AssignmentResult(np.ones((K, K)), np.ones((K, K), dtype=bool), 0.1)
    mapper = CausalMapper(assignment, variable_specs(catalog), 8, np.random.default_rng(seed))
    obs_map = ObservationMap(np.eye(K), np.zeros(K), np.eye(K), "linear")
    vocabulary = Vocabulary.from_grammar(Pcfg())
    return CausalWorldModel(CwmParams(config, vocabulary.size), mapper, obs_map, catalog, vocabulary, template=state)
