from itertools import permutations

import numpy as np
import pandas as pd
import pytest
from scipy.stats import norm

from app.config import EnvConfig, TrainConfig
from app.crl import (
    ActionEmbedder,
    CwmParams,
    TransitionModel,
    TransitionSet,
    assign_from_r2,
    compare_modalities,
    cwm_loss,
    embed_action,
    evaluate_loss,
    interaction_gates,
    load_cwm,
    r2_permutation_score,
    save_cwm,
    subsample_transitions,
    summarize_comparison,
    train_cwm,
    transition_loglik,
)
from app.data import GenerationContext, generate_split
from app.errors import DegenerateData, DimensionError, EmptyDataset
from app.nn import flow_forward, grad_check_params
from app.nn.losses import HALF_LOG_2PI
from app.observation import make_mixing
from app.text import Pcfg, Vocabulary, tokenize_pad

ONE_LIGHT = EnvConfig(grid_size=5, n_vehicles=1, n_obstacles=0, n_lights=1)


def small_config(**overrides):
    values = dict(
        latent_dim=4, hidden_dim=16, flow_layers=2, flow_hidden=16, action_dim=8, token_dim=8,
        gate_hidden=16, batch_size=64, epochs=1, warmup_steps=10, gate_penalty=0.0, seed=0,
    )
    values.update(overrides)
    return TrainConfig(**values)


def _perturb(module, rng, scale=0.2):
    for p in module.parameters():
        p.data = p.data + rng.normal(0.0, scale, size=p.data.shape)


@pytest.fixture(scope="module")
def vocabulary():
    return Vocabulary.from_grammar(Pcfg())


@pytest.fixture(scope="module")
def transitions(vocabulary):
    obs_map = make_mixing(3, 8, np.random.default_rng(0), M=4)
    ctx = GenerationContext(ONE_LIGHT, obs_map, Pcfg(), vocabulary)
    train = TransitionSet.from_trajectories(generate_split(ctx, range(0, 10), 40), obs_map)
    test = TransitionSet.from_trajectories(generate_split(ctx, range(500, 503), 40), obs_map)
    return train, test


# ----- embedder -----

def test_all_pad_tokens_embed_to_head_of_zero(vocabulary, rng):
    embedder = ActionEmbedder("TB", vocabulary.size, 8, 16, 8, rng)
    vector = embed_action(embedder, np.zeros(32, dtype=np.int64))
    assert np.allclose(vector, embedder.text_head(np.zeros((1, 8))).data[0])


def test_identical_sentences_embed_identically(vocabulary, rng):
    embedder = ActionEmbedder("TB", vocabulary.size, 8, 16, 8, rng)
    a = tokenize_pad("You toggled the cyan traffic light.", vocabulary)
    b = tokenize_pad("You toggled the cyan traffic light.", vocabulary)
    c = tokenize_pad("You drove the blue car.", vocabulary)
    assert np.array_equal(embed_action(embedder, a), embed_action(embedder, b))
    assert not np.allclose(embed_action(embedder, a), embed_action(embedder, c))


def test_coordinate_modality_uses_linear_head(vocabulary, rng):
    embedder = ActionEmbedder("CB", vocabulary.size, 8, 16, 8, rng)
    coords = np.array([0.25, 0.75])
    expected = coords @ embedder.coord_head.weight.data + embedder.coord_head.bias.data
    assert np.allclose(embed_action(embedder, coords=coords), expected)
    assert embedder.text_parameters() == []


def test_hybrid_modality_sums_heads(vocabulary, rng):
    embedder = ActionEmbedder("HB", vocabulary.size, 8, 16, 8, rng)
    tokens = tokenize_pad("You did nothing.", vocabulary)
    coords = np.array([-1.0, -1.0])
    text = embedder.text_head(embedder.pooled(tokens.as_array())).data[0]
    coord = embedder.coord_head(coords[None]).data[0]
    assert np.allclose(embed_action(embedder, tokens, coords), text + coord)


def test_embedder_input_errors(vocabulary, rng):
    embedder = ActionEmbedder("TB", vocabulary.size, 8, 16, 8, rng)
    with pytest.raises(DimensionError):
        embedder(None, np.zeros((1, 2)))
    with pytest.raises(DimensionError):
        embedder(np.array([[vocabulary.size]]))
    with pytest.raises(ValueError):
        ActionEmbedder("XB", vocabulary.size, 8, 16, 8, rng)


# ----- gates and transition -----

def test_saturated_gates_are_off(rng):
    transition = TransitionModel(4, 8, 16, 16, rng)
    last = transition.gate_net.layers[-1]
    last.weight.data[:] = 0.0
    last.bias.data[:] = -20.0
    b = interaction_gates(transition, rng.normal(size=(5, 8)), rng.normal(size=(5, 4)))
    assert np.array_equal(b, np.zeros((5, 4)))


def test_gates_are_binary_and_deterministic_in_eval(rng):
    transition = TransitionModel(4, 8, 16, 16, rng)
    action, z = rng.normal(size=(20, 8)), rng.normal(size=(20, 4))
    a = interaction_gates(transition, action, z)
    assert set(np.unique(a)) <= {0.0, 1.0}
    assert np.array_equal(a, interaction_gates(transition, action, z))
    sampled = interaction_gates(transition, action, z, training=True, rng=np.random.default_rng(1))
    assert set(np.unique(sampled)) <= {0.0, 1.0}


def test_fresh_transition_loglik_is_standard_normal_at_mean(rng):
    transition = TransitionModel(4, 8, 16, 16, rng)
    z = rng.normal(size=(3, 4))
    loglik = transition_loglik(transition, z, z, np.ones((3, 4)))
    assert np.allclose(loglik, -4 * HALF_LOG_2PI)


def test_transition_loglik_matches_per_dim_density(rng):
    transition = TransitionModel(4, 8, 16, 16, rng)
    _perturb(transition, rng)
    z_prev, z_next = rng.normal(size=(6, 4)), rng.normal(size=(6, 4))
    gates = (rng.random((6, 4)) < 0.5).astype(float)
    mean, log_std = transition.conditional(z_prev, gates)
    expected = norm.logpdf(z_next, loc=mean.data, scale=np.exp(log_std.data)).sum(axis=-1)
    assert np.allclose(transition_loglik(transition, z_next, z_prev, gates), expected)
    assert np.all(np.abs(log_std.data) <= 5.0)


# ----- loss -----

def test_identity_model_loss_is_analytic(transitions, vocabulary):
    train, _ = transitions
    params = CwmParams(small_config(), vocabulary.size)
    batch = train.subset(np.arange(8))
    batch.E_next = batch.E_prev.copy()
    loss, stats = cwm_loss(params, batch)
    assert loss.item() == pytest.approx(4 * HALF_LOG_2PI)
    assert stats["logdet"] == pytest.approx(0.0)


def test_single_sample_loss_matches_hand_composition(transitions, vocabulary, rng):
    train, _ = transitions
    params = CwmParams(small_config(), vocabulary.size)
    _perturb(params, rng)
    batch = train.subset([5])
    loss, _ = cwm_loss(params, batch)

    z, logdet = flow_forward(params.flow, np.concatenate([batch.E_prev, batch.E_next]))
    action = params.embedder(batch.tokens, batch.coords).data
    gates = interaction_gates(params.transition, action, z[:1])
    loglik = transition_loglik(params.transition, z[1:], z[:1], gates)
    assert loss.item() == pytest.approx(-(loglik[0] + logdet[1]))


def test_forced_off_gates_ignore_actions(transitions, vocabulary, rng):
    train, _ = transitions
    params = CwmParams(small_config(gate_penalty=1e-3), vocabulary.size)
    _perturb(params, rng)
    batch = train.subset(np.arange(32))
    shuffled = train.subset(np.arange(32))
    order = rng.permutation(32)
    shuffled.tokens = batch.tokens[order]
    shuffled.coords = batch.coords[order]
    a, _ = cwm_loss(params, batch, force_gates=np.zeros(4))
    b, _ = cwm_loss(params, shuffled, force_gates=np.zeros(4))
    assert a.item() == pytest.approx(b.item(), abs=1e-12)


def test_loss_gradients_pass_finite_differences(transitions, vocabulary, rng):
    train, _ = transitions
    params = CwmParams(small_config(), vocabulary.size)
    _perturb(params, rng, scale=0.1)
    batch = train.subset(np.arange(6))
    gates = (rng.random((6, 4)) < 0.5).astype(float)
    checked = params.flow.parameters() + [
        p for name, p in params.transition.named_parameters() if not name.startswith("gate_net")
    ]
    worst = grad_check_params(lambda: cwm_loss(params, batch, force_gates=gates)[0], checked, 40, rng)
    assert worst < 1e-3


def test_loss_rejects_bad_batches(transitions, vocabulary):
    train, _ = transitions
    params = CwmParams(small_config(), vocabulary.size)
    with pytest.raises(EmptyDataset):
        cwm_loss(params, train.subset([]))
    bad = train.subset([0, 1])
    bad.E_prev = bad.E_prev[:, :3]
    with pytest.raises(DimensionError):
        cwm_loss(params, bad)


# ----- training -----

def test_training_reduces_loss(transitions, vocabulary):
    train, test = transitions
    config = small_config(epochs=30)
    initial = evaluate_loss(CwmParams(config, vocabulary.size), test)
    params = train_cwm(train, config, vocabulary.size, validation=test)
    history = params.metadata["history"]
    assert len(history) == 30
    assert params.metadata["steps"] >= 200
    assert history[-1]["validation_loss"] < initial
    assert history[-1]["train_loss"] < history[0]["train_loss"]


def test_zero_epochs_returns_initialisation(transitions, vocabulary):
    train, _ = transitions
    config = small_config(epochs=0)
    params = train_cwm(train, config, vocabulary.size)
    fresh = CwmParams(config, vocabulary.size)
    for name, value in fresh.state_dict().items():
        assert np.array_equal(params.state_dict()[name], value)


def test_training_is_deterministic(transitions, vocabulary):
    train, _ = transitions
    a = train_cwm(train, small_config(epochs=2), vocabulary.size)
    b = train_cwm(train, small_config(epochs=2), vocabulary.size)
    for name, value in a.state_dict().items():
        assert np.array_equal(b.state_dict()[name], value)


def test_training_needs_transitions(transitions, vocabulary):
    train, _ = transitions
    with pytest.raises(EmptyDataset):
        train_cwm(train.subset([]), small_config(), vocabulary.size)


@pytest.mark.parametrize("modality", ["CB", "TB", "HB"])
def test_every_modality_trains(transitions, vocabulary, modality):
    train, _ = transitions
    params = train_cwm(train, small_config(modality=modality), vocabulary.size)
    assert params.modality == modality
    assert np.all(np.isfinite(params.encode(train.E_prev)))


def test_checkpoint_round_trip(tmp_path, transitions, vocabulary):
    train, _ = transitions
    params = train_cwm(train, small_config(modality="HB"), vocabulary.size, dataset_hash="abc")
    save_cwm(tmp_path / "model", params)
    restored, _, metadata = load_cwm(tmp_path / "model")
    assert metadata["dataset_hash"] == "abc"
    assert restored.modality == "HB"
    batch = train.subset(np.arange(10))
    assert cwm_loss(restored, batch)[0].item() == pytest.approx(cwm_loss(params, batch)[0].item())


def test_subsample_transitions(transitions):
    train, _ = transitions
    subset = subsample_transitions(train, 0.1, np.random.default_rng(0))
    assert len(subset) == 40
    assert subsample_transitions(train, 1.0, np.random.default_rng(0)) is train
    with pytest.raises(ValueError):
        subsample_transitions(train, 0.0, np.random.default_rng(0))


# ----- permutation R^2 -----

def test_permuted_copy_scores_one():
    causal = np.random.default_rng(0).uniform(size=(300, 3))
    perm = (2, 0, 1)
    latents = np.zeros((300, 3))
    for j, i in enumerate(perm):
        latents[:, i] = causal[:, j]
    score, found = r2_permutation_score(latents, causal)
    assert score == pytest.approx(1.0)
    assert found == perm


def test_assignment_example():
    score, perm = assign_from_r2([[0.1, 0.9], [0.8, 0.2]])
    assert perm == (1, 0)
    assert score == pytest.approx(0.85)


def test_assignment_matches_exhaustive_search():
    rng = np.random.default_rng(1)
    for K in range(1, 7):
        for extra in (0, 2):
            matrix = rng.uniform(size=(K + extra, K))
            best = max(
                np.mean([matrix[p[j], j] for j in range(K)])
                for p in permutations(range(K + extra), K)
            )
            score, _ = assign_from_r2(matrix)
            assert score == pytest.approx(best)


def test_score_is_invariant_to_latent_relabeling():
    rng = np.random.default_rng(2)
    causal = rng.uniform(size=(200, 2))
    latents = np.column_stack([causal[:, 0] ** 2, rng.normal(size=200), causal[:, 1] + 0.1 * rng.normal(size=200)])
    score, perm = r2_permutation_score(latents, causal)
    relabel = [2, 0, 1]
    score_b, perm_b = r2_permutation_score(latents[:, relabel], causal)
    assert score_b == pytest.approx(score)
    assert [relabel[i] for i in perm_b] == list(perm)


def test_r2_errors():
    latents = np.random.default_rng(3).normal(size=(10, 2))
    with pytest.raises(DegenerateData):
        r2_permutation_score(latents, np.column_stack([latents[:, 0], np.ones(10)]))
    with pytest.raises(DimensionError):
        r2_permutation_score(latents[:, :1], latents)


# ----- modality comparison -----

def test_compare_modalities_table(transitions, vocabulary):
    train, test = transitions
    results = compare_modalities(train, test, small_config(), vocabulary.size, fractions=(0.5, 1.0), seeds=(0, 1))
    assert isinstance(results, pd.DataFrame)
    assert len(results) == 12
    assert results["r2"].between(0.0, 1.0).all()
    summary = summarize_comparison(results)
    assert len(summary) == 6
    assert (summary["count"] == 2).all()
