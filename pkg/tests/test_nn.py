import numpy as np
import pytest

from m3t import (
    LSTM,
    Adam,
    CheckpointMissing,
    Dense,
    LayerNorm,
    MeanPool,
    MhsaEncoder,
    MhsaEncoderConfig,
    MultiHeadSelfAttention,
    NonFinite,
    Sequential,
    ShapeMismatch,
    TemporalConv,
    load_checkpoint,
    lstm_cell_update,
    mhsa_encode,
    mlp,
    mse_loss,
    numerical_grad,
    save_checkpoint,
)

SEEDS = range(5)


def _rel_error(analytic, numeric):
    scale = max(np.max(np.abs(numeric)), np.max(np.abs(analytic)), 1e-8)
    return np.max(np.abs(analytic - numeric)) / scale


def _check_grads(module, x, tol, rng):
    """Compare backward with finite differences of sum(out * r)."""
    out = module.forward(x)
    r = rng.normal(size=out.shape)

    def loss():
        return float(np.sum(module.forward(x) * r))

    module.zero_grad()
    module.forward(x)
    dx = module.backward(r)
    assert _rel_error(dx, numerical_grad(loss, x)) <= tol
    for name, param, grad in module.named_parameters():
        analytic = grad.copy()
        assert _rel_error(analytic, numerical_grad(loss, param)) <= tol, name


def test_dense_identity():
    layer = Dense(2, 2)
    layer.params["weight"][...] = np.eye(2)
    layer.params["bias"][...] = 0.0
    np.testing.assert_array_equal(layer(np.array([[1.0, 2.0]])), [[1.0, 2.0]])
    layer.params["bias"][...] = 3.0
    np.testing.assert_array_equal(layer(np.array([[1.0, 2.0]])), [[4.0, 5.0]])


def test_dense_width_mismatch():
    with pytest.raises(ShapeMismatch):
        Dense(3, 2)(np.zeros((1, 4)))
    with pytest.raises(ValueError):
        Dense(3, 2, activation="gelu")


def test_dense_non_finite():
    layer = Dense(2, 2)
    with pytest.raises(NonFinite):
        layer(np.array([[np.inf, 0.0]]))


@pytest.mark.parametrize("seed", SEEDS)
@pytest.mark.parametrize("activation", [None, "tanh"])
def test_dense_grads(activation, seed):
    rng = np.random.default_rng(seed)
    layer = Dense(5, 4, activation, rng)
    _check_grads(layer, rng.normal(size=(3, 5)), 1e-6, rng)


@pytest.mark.parametrize("seed", SEEDS)
def test_mlp_grads(seed):
    rng = np.random.default_rng(seed)
    net = mlp((6, 8, 3), rng, activation="tanh")
    assert isinstance(net, Sequential)
    assert len(net.layers) == 2
    _check_grads(net, rng.normal(size=(4, 6)), 1e-6, rng)


def test_lstm_zero_weights():
    layer = LSTM(3, 4)
    for _, param, _ in layer.named_parameters():
        param[...] = 0.0
    h = layer(np.ones((2, 5, 3)))
    np.testing.assert_array_equal(h, 0.0)


def test_lstm_cell_example():
    one = np.ones(1)
    c, h = lstm_cell_update(one, one, 0.5 * one, one, one)
    assert c[0] == 1.5
    assert h[0] == pytest.approx(np.tanh(1.5))


@pytest.mark.parametrize("seed", SEEDS)
def test_lstm_grads(seed):
    rng = np.random.default_rng(seed)
    layer = LSTM(3, 4, rng)
    _check_grads(layer, rng.normal(size=(2, 5, 3)), 1e-5, rng)


def test_lstm_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        LSTM(3, 4)(np.zeros((2, 5)))


@pytest.mark.parametrize("seed", SEEDS)
def test_layer_norm_grads(seed):
    rng = np.random.default_rng(seed)
    norm = LayerNorm(6)
    norm.params["gain"][...] = rng.normal(size=6)
    norm.params["bias"][...] = rng.normal(size=6)
    _check_grads(norm, rng.normal(size=(2, 3, 6)), 1e-6, rng)


def test_layer_norm_output(rng):
    y = LayerNorm(8)(rng.normal(size=(5, 8)) * 3.0 + 2.0)
    np.testing.assert_allclose(y.mean(axis=-1), 0.0, atol=1e-12)
    np.testing.assert_allclose(y.std(axis=-1), 1.0, atol=1e-5)


@pytest.mark.parametrize("seed", SEEDS)
def test_temporal_conv_grads(seed):
    rng = np.random.default_rng(seed)
    conv = TemporalConv(4, 5, kernel=3, rng=rng)
    x = rng.normal(size=(2, 7, 4))
    assert conv(x).shape == (2, 5, 5)
    _check_grads(conv, x, 1e-6, rng)
    with pytest.raises(ShapeMismatch):
        conv(np.zeros((1, 2, 4)))


@pytest.mark.parametrize("seed", SEEDS)
def test_mean_pool_grads(seed):
    rng = np.random.default_rng(seed)
    _check_grads(MeanPool(), rng.normal(size=(2, 5, 3)), 1e-8, rng)


@pytest.mark.parametrize("seed", SEEDS)
def test_attention_grads(seed):
    rng = np.random.default_rng(seed)
    attn = MultiHeadSelfAttention(8, 2, rng)
    _check_grads(attn, rng.normal(size=(2, 5, 8)), 1e-4, rng)


@pytest.mark.parametrize("seed", SEEDS)
def test_encoder_grads(seed):
    rng = np.random.default_rng(seed)
    config = MhsaEncoderConfig(layers=3, heads=4, width=8, ff_width=12)
    encoder = MhsaEncoder(5, config, rng)
    _check_grads(encoder, rng.normal(size=(2, 6, 5)), 1e-4, rng)


@pytest.mark.parametrize("seed", SEEDS)
def test_encoder_grads_zero_padded(seed):
    rng = np.random.default_rng(seed)
    encoder = MhsaEncoder(20, MhsaEncoderConfig(layers=3, heads=4, width=8, ff_width=12), rng)
    # start of day: only the last 3 of 20 rows hold snapshots
    x = np.zeros((1, 20, 20))
    x[:, -3:] = rng.normal(size=(1, 3, 20))
    out = encoder(x)
    assert np.all(np.isfinite(out))
    _check_grads(encoder, x, 1e-4, rng)


def test_attention_rows_sum_to_one(rng):
    encoder = MhsaEncoder(20, MhsaEncoderConfig(layers=3, heads=4, width=32), rng)
    out = mhsa_encode(rng.normal(size=(20, 20)), encoder)
    assert out.shape == (20, 32)
    assert len(encoder.attention) == 3
    for a in encoder.attention:
        assert a.shape == (1, 4, 20, 20)
        np.testing.assert_allclose(a.sum(axis=-1), 1.0, atol=1e-12)
        assert np.all(a >= 0.0)


def test_encoder_permutation_equivariant(rng):
    config = MhsaEncoderConfig(layers=2, heads=2, width=8, ff_width=16, positional=False)
    encoder = MhsaEncoder(4, config, rng)
    x = rng.normal(size=(1, 6, 4))
    perm = rng.permutation(6)
    np.testing.assert_allclose(encoder(x[:, perm]), encoder(x)[:, perm], atol=1e-12)


def test_encoder_positional_breaks_equivariance(rng):
    encoder = MhsaEncoder(4, MhsaEncoderConfig(layers=1, heads=2, width=8, ff_width=8), rng)
    x = rng.normal(size=(1, 6, 4))
    perm = np.roll(np.arange(6), 1)
    assert not np.allclose(encoder(x[:, perm]), encoder(x)[:, perm])


def test_encoder_config_divisibility():
    with pytest.raises(ShapeMismatch):
        MhsaEncoderConfig(heads=3, width=32)
    with pytest.raises(ShapeMismatch):
        MultiHeadSelfAttention(10, 4)


def test_deterministic_init():
    a = MhsaEncoder(5, rng=np.random.default_rng(3))
    b = MhsaEncoder(5, rng=np.random.default_rng(3))
    for (na, pa, _), (nb, pb, _) in zip(a.named_parameters(), b.named_parameters()):
        assert na == nb
        np.testing.assert_array_equal(pa, pb)


def test_mse_loss():
    loss, grad = mse_loss(np.array([1.0, 3.0]), np.array([1.0, 1.0]))
    assert loss == 2.0
    np.testing.assert_array_equal(grad, [0.0, 2.0])
    with pytest.raises(ShapeMismatch):
        mse_loss(np.zeros(2), np.zeros(3))
    with pytest.raises(NonFinite):
        mse_loss(np.array([np.nan]), np.zeros(1))


def test_adam_zero_grads(rng):
    net = mlp((3, 4, 2), rng)
    before = net.state_dict()
    Adam(net).step()
    for name, value in net.state_dict().items():
        np.testing.assert_array_equal(value, before[name])


def test_adam_first_step():
    layer = Dense(1, 1)
    layer.params["weight"][...] = 0.0
    layer.grads["weight"][...] = 1.0
    opt = Adam(layer, lr=0.1)
    opt.step()
    assert layer.params["weight"][0, 0] == pytest.approx(-0.1 / (1.0 + 1e-8))


def test_adam_minimizes_square():
    layer = Dense(1, 1)
    w = layer.params["weight"]
    w[...] = 1.0
    opt = Adam(layer, lr=1e-3)
    values = []
    for _ in range(100):
        layer.zero_grad()
        layer.grads["weight"][...] = 2.0 * w
        opt.step()
        values.append(float(w[0, 0] ** 2))
    assert all(b < a for a, b in zip(values, values[1:]))


def test_adam_non_finite():
    layer = Dense(1, 1)
    layer.grads["weight"][...] = np.nan
    with pytest.raises(NonFinite):
        Adam(layer).step()


def test_checkpoint_round_trip(tmp_path, rng):
    net = mlp((3, 5, 2), rng)
    path = str(tmp_path / "ckpt" / "net.npz")
    save_checkpoint(path, {"net": net}, epsilon=np.array([0.25]))
    other = mlp((3, 5, 2), np.random.default_rng(99))
    extra = load_checkpoint(path, {"net": other})
    assert extra["epsilon"][0] == 0.25
    x = rng.normal(size=(4, 3))
    np.testing.assert_array_equal(net(x), other(x))


def test_checkpoint_errors(tmp_path, rng):
    with pytest.raises(CheckpointMissing):
        load_checkpoint(str(tmp_path / "none.npz"), {})
    path = str(tmp_path / "net.npz")
    save_checkpoint(path, {"net": mlp((3, 5, 2), rng)})
    with pytest.raises(ShapeMismatch):
        load_checkpoint(path, {"net": mlp((3, 6, 2), rng)})


def test_copy_from(rng):
    a = mlp((3, 4, 2), rng)
    b = mlp((3, 4, 2), rng)
    b.copy_from(a)
    x = rng.normal(size=(2, 3))
    np.testing.assert_array_equal(a(x), b(x))
    assert a.num_parameters() == 3 * 4 + 4 + 4 * 2 + 2
