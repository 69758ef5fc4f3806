import numpy as np
import pytest
from scipy.stats import norm

from app.errors import DataError, DimensionError
from app.nn import (
    Adam,
    CouplingFlow,
    InvertibleLinear,
    Linear,
    Mlp,
    ParamGroup,
    Tensor,
    concat,
    einsum,
    flow_forward,
    flow_inverse,
    gaussian_nll,
    grad_check,
    grad_check_params,
    load_checkpoint,
    mlp_apply,
    optimizer_step,
    parameter,
    save_checkpoint,
    st_gate,
    take,
)


def _perturb(module, rng, scale=0.3):
    for p in module.parameters():
        p.data = p.data + rng.normal(0.0, scale, size=p.data.shape)


# ----- tape -----

@pytest.mark.parametrize("fn", [
    lambda x: (x * x).sum(),
    lambda x: (x.exp() / (x.tanh() + 2.0)).sum(),
    lambda x: x.sigmoid().log().mean(),
    lambda x: (x.silu() ** 3).sum(),
    lambda x: x.log_softmax(axis=-1)[:, 1].sum(),
    lambda x: (x.reshape(-1)[2:5] * 3.0).sum(),
    lambda x: (x @ x.T).sum(),
    lambda x: concat([x, x * 2.0], axis=-1).tanh().sum(),
    lambda x: einsum("bi,bj->ij", x, x.exp()).sum(),
    lambda x: (take(x, np.array([0, 0, 1])) * 2.0).sum(),
    lambda x: (1.0 - x).mean(axis=0).sum() + (2.0 / (x + 3.0)).sum(),
])
def test_taped_ops_match_finite_differences(fn):
    point = np.random.default_rng(0).normal(size=(2, 3))
    assert grad_check(fn, point) < 1e-4


def test_grad_check_quadratic_and_constant():
    A = np.random.default_rng(1).normal(size=(4, 4))
    A = A @ A.T
    assert grad_check(lambda x: (x @ A * x).sum(), np.ones(4)) < 1e-7

    x = Tensor(np.ones(3), requires_grad=True)
    (x * 0.0).sum().backward()
    assert np.allclose(x.grad, 0.0)
    assert grad_check(lambda t: (t * 0.0).sum() + 5.0, np.ones(3)) < 1e-7


def test_gradient_accumulates_over_shared_nodes():
    x = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    y = x * 3.0
    (y + y).sum().backward()
    assert np.allclose(x.grad, [6.0, 6.0])


# ----- layers -----

def test_mlp_zero_weights_output_final_bias(rng):
    net = Mlp([3, 5, 2], rng)
    for layer in net.layers:
        layer.weight.data[:] = 0.0
    net.layers[-1].bias.data[:] = [0.5, -1.0]
    out = mlp_apply(net, np.random.default_rng(2).normal(size=(4, 3)))
    assert np.allclose(out.data, [[0.5, -1.0]] * 4)


def test_identity_linear_is_identity(rng):
    layer = Linear(3, 3, rng)
    layer.weight.data = np.eye(3)
    x = np.array([0.3, -2.0, 1.5])
    assert np.allclose(layer(x).data, x)
    with pytest.raises(DimensionError):
        layer(np.ones(4))


def test_mlp_loss_gradients_pass_grad_check(rng):
    net = Mlp([4, 8, 8, 2], rng)
    x = np.random.default_rng(3).normal(size=(6, 4))
    target = np.random.default_rng(4).normal(size=(6, 2))

    def loss():
        return ((net(x) - target) ** 2).mean()

    assert grad_check_params(loss, net.parameters(), 40, np.random.default_rng(5)) < 1e-4
    assert grad_check(lambda t: ((net(t) - target) ** 2).mean(), x) < 1e-4


def test_state_dict_round_trip(rng):
    net = Mlp([2, 4, 1], rng)
    other = Mlp([2, 4, 1], np.random.default_rng(99))
    other.load_state_dict(net.state_dict())
    x = np.ones((1, 2))
    assert np.array_equal(net(x).data, other(x).data)
    with pytest.raises(DimensionError):
        Mlp([2, 3, 1], rng).load_state_dict(net.state_dict())


# ----- flows -----

def test_identity_initialised_flow(rng):
    flow = CouplingFlow(6, 4, 16, rng)
    E = np.random.default_rng(6).normal(size=(5, 6))
    z, logdet = flow_forward(flow, E)
    assert np.allclose(z, E)
    assert np.allclose(logdet, 0.0)
    assert np.allclose(flow_inverse(flow, E), E)


def test_flow_round_trip_on_random_inputs(rng):
    flow = CouplingFlow(6, 4, 16, rng)
    _perturb(flow, np.random.default_rng(7))
    E = np.random.default_rng(8).normal(size=(1000, 6))
    z, _ = flow_forward(flow, E)
    assert np.abs(flow_inverse(flow, z) - E).max() < 1e-6
    zs = np.random.default_rng(9).normal(size=(50, 6))
    assert np.abs(flow_forward(flow, flow_inverse(flow, zs))[0] - zs).max() < 1e-6
    again, _ = flow_forward(flow, E)
    assert np.array_equal(z, again)


def test_logdet_matches_dense_jacobian(rng):
    flow = CouplingFlow(4, 4, 8, rng)
    _perturb(flow, np.random.default_rng(10))
    e = np.random.default_rng(11).normal(size=4)
    _, logdet = flow_forward(flow, e)
    eps = 1e-6
    jac = np.zeros((4, 4))
    for j in range(4):
        step = np.zeros(4)
        step[j] = eps
        jac[:, j] = (flow_forward(flow, e + step)[0] - flow_forward(flow, e - step)[0]) / (2 * eps)
    sign, numeric = np.linalg.slogdet(jac)
    assert sign > 0
    assert abs(float(logdet) - numeric) / max(abs(numeric), 1e-3) < 1e-3


def test_logdet_is_sum_of_layer_logdets(rng):
    flow = CouplingFlow(4, 3, 8, rng)
    _perturb(flow, np.random.default_rng(12))
    x = Tensor(np.random.default_rng(13).normal(size=(3, 4)))
    _, total = flow(x)
    parts = np.zeros(3)
    h = x
    for layer in flow.layers:
        h, ld = layer(h)
        parts = parts + ld.data
    assert np.allclose(total.data, parts)


def test_invertible_linear_logdet_and_inverse():
    layer = InvertibleLinear(3)
    rng = np.random.default_rng(14)
    _perturb(layer, rng)
    W = layer.weight().data
    _, logdet = layer(np.zeros(3))
    assert np.isclose(float(logdet.data), np.log(abs(np.linalg.det(W))))
    y = rng.normal(size=(4, 3))
    assert np.allclose(layer(layer.inverse(y))[0].data, y)


def test_flow_gradients_pass_grad_check(rng):
    flow = CouplingFlow(4, 2, 8, rng)
    _perturb(flow, np.random.default_rng(15), scale=0.2)
    E = np.random.default_rng(16).normal(size=(3, 4))

    def loss():
        z, logdet = flow(E)
        return (z ** 2).sum() * 0.5 - logdet.sum()

    assert grad_check_params(loss, flow.parameters(), 40, np.random.default_rng(17)) < 1e-4


def test_flow_dimension_error(rng):
    with pytest.raises(DimensionError):
        flow_forward(CouplingFlow(4, 2, 8, rng), np.ones((2, 5)))


# ----- gates -----

def test_gate_saturation_and_codomain():
    assert st_gate(np.array([20.0])).data[0] == 1.0
    assert st_gate(np.array([-20.0])).data[0] == 0.0
    logits = np.random.default_rng(18).normal(size=50)
    assert set(np.unique(st_gate(logits).data)) <= {0.0, 1.0}
    assert set(np.unique(st_gate(logits, True, np.random.default_rng(0)).data)) <= {0.0, 1.0}


def test_stochastic_gate_mean_at_zero_logit():
    draws = st_gate(np.zeros(10_000), training=True, rng=np.random.default_rng(19)).data
    assert abs(draws.mean() - 0.5) < 0.02


def test_gate_uses_sigmoid_derivative():
    x = Tensor(np.array([-1.0, 0.0, 2.0]), requires_grad=True)
    st_gate(x).sum().backward()
    s = 1.0 / (1.0 + np.exp(-x.data))
    assert np.allclose(x.grad, s * (1.0 - s))


def test_training_gate_requires_rng():
    with pytest.raises(ValueError):
        st_gate(np.zeros(2), training=True)


# ----- losses -----

def test_gaussian_nll_analytic_and_symmetric():
    assert np.isclose(gaussian_nll(np.zeros(3), np.zeros(3), np.zeros(3)), 3 * 0.5 * np.log(2 * np.pi))
    mean, log_std = np.array([0.5, -1.0]), np.array([0.2, -0.3])
    d = np.array([0.7, 1.1])
    assert np.isclose(gaussian_nll(mean + d, mean, log_std), gaussian_nll(mean - d, mean, log_std))


def test_gaussian_nll_matches_density_formula():
    rng = np.random.default_rng(20)
    x, mean, log_std = rng.normal(size=(3, 5, 4))
    expected = -norm.logpdf(x, loc=mean, scale=np.exp(log_std)).sum(axis=-1)
    assert np.allclose(gaussian_nll(x, mean, log_std), expected)
    taped = gaussian_nll(Tensor(x), Tensor(mean), Tensor(log_std))
    assert np.allclose(taped.data, expected)
    assert grad_check(lambda t: gaussian_nll(t, mean, log_std).sum(), x) < 1e-4
    assert grad_check(lambda t: gaussian_nll(x, mean, t).sum(), log_std) < 1e-4


# ----- optimizer -----

def test_adam_zero_gradient_leaves_params():
    p = parameter(np.array([1.0, -2.0]))
    opt = Adam([p], lr=0.1)
    optimizer_step(opt, [p], [np.zeros(2)])
    assert np.array_equal(p.data, [1.0, -2.0])


def test_adam_first_step_moves_by_lr():
    p = parameter(np.zeros(3))
    opt = Adam([p], lr=1e-3)
    optimizer_step(opt, [p], [np.array([0.5, -4.0, 2.0])])
    assert np.allclose(np.abs(p.data), 1e-3, rtol=1e-4)
    assert np.allclose(np.sign(p.data), [-1.0, 1.0, -1.0])


def test_adam_warmup_and_groups():
    a, b = parameter(np.zeros(1)), parameter(np.zeros(1))
    opt = Adam([ParamGroup([a], 3e-3), ParamGroup([b], 1e-3)], warmup_steps=100)
    assert opt.warmup_factor(1) == pytest.approx(0.01)
    assert opt.warmup_factor(250) == 1.0
    a.grad, b.grad = np.ones(1), np.ones(1)
    opt.step()
    assert a.data[0] == pytest.approx(-3e-5, rel=1e-4)
    assert b.data[0] == pytest.approx(-1e-5, rel=1e-4)


def test_adam_trains_a_regression(rng):
    net = Mlp([1, 16, 1], rng)
    x = np.linspace(-1, 1, 32)[:, None]
    y = x ** 2
    opt = Adam(net.parameters(), lr=1e-2)
    first = None
    for _ in range(300):
        opt.zero_grad()
        loss = ((net(x) - y) ** 2).mean()
        loss.backward()
        opt.step()
        first = loss.item() if first is None else first
    assert loss.item() < 0.2 * first


# ----- checkpoints -----

def test_checkpoint_round_trip(tmp_path, rng):
    flow = CouplingFlow(4, 2, 8, rng)
    _perturb(flow, rng)
    path = save_checkpoint(tmp_path / "model", flow.state_dict(), {"seed": 3, "modality": "TB"})
    assert path.suffix == ".json"
    tensors, meta = load_checkpoint(tmp_path / "model")
    assert meta == {"seed": 3, "modality": "TB"}
    restored = CouplingFlow(4, 2, 8, np.random.default_rng(0))
    restored.load_state_dict(tensors)
    E = np.random.default_rng(21).normal(size=(2, 4))
    assert np.array_equal(flow_forward(flow, E)[0], flow_forward(restored, E)[0])


def test_checkpoint_errors(tmp_path):
    with pytest.raises(DataError):
        load_checkpoint(tmp_path / "missing")
    save_checkpoint(tmp_path / "m", {"w": np.ones(4)})
    (tmp_path / "m.bin").write_bytes(b"\x00" * 8)
    with pytest.raises(DataError):
        load_checkpoint(tmp_path / "m")
