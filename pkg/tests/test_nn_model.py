import numpy as np
import pytest

import hsdenoise as hd
from hsdenoise.errors import ShapeError, StateError
from hsdenoise.nn import ConvSpec, ModelConfig, model_forward_batch

from test_nn_layers import fd_gradient, rel_err


def toy_config(n_i=12, n_l=4):
    return ModelConfig(n_i=n_i, n_l=n_l,
                       conv_layers=(ConvSpec(1, 4), ConvSpec(4, 6), ConvSpec(6, 8)))


# ---------------------------------------------------------------------------
# configuration


def test_default_config_geometry_92():
    cfg = hd.default_config(92)
    assert cfg.n_stages == 4 and cfg.n_l == 16
    assert cfg.enc_lengths == (46, 23, 11, 5)
    assert cfg.dec_targets == (12, 23, 46, 92)
    assert cfg.channels == (8, 16, 32, 64)
    assert cfg.deconv_channels == ((64, 32), (32, 16), (16, 8), (8, 1))


def test_default_config_geometry_909():
    cfg = hd.default_config(909)
    assert cfg.n_l == 32
    assert cfg.enc_lengths == (454, 227, 113, 56)
    assert cfg.dec_targets == (114, 228, 455, 909)


def test_config_rejects_overdeep_pooling():
    with pytest.raises(ShapeError):
        hd.default_config(12)  # four halvings of 12 hit length < 2


def test_config_rejects_broken_channel_chain():
    with pytest.raises(ShapeError):
        ModelConfig(n_i=32, n_l=4, conv_layers=(ConvSpec(1, 4), ConvSpec(8, 4)))


def test_config_rejects_even_kernel():
    with pytest.raises(ShapeError):
        ModelConfig(n_i=32, n_l=4, conv_layers=(ConvSpec(1, 4, kernel_size=4,
                                                         padding=1),))


# ---------------------------------------------------------------------------
# forward


@pytest.mark.parametrize("n_i", [92, 909])
def test_output_length_matches_input_length(n_i):
    cfg = hd.default_config(n_i)
    params = hd.init_params(cfg, seed=0)
    x = np.random.default_rng(1).normal(size=n_i)
    recon, latent, _ = hd.model_forward(params, cfg, x)
    assert recon.shape == (n_i,)
    assert latent.shape == (cfg.n_l,)


def test_forward_is_deterministic():
    cfg = toy_config()
    params = hd.init_params(cfg, seed=5)
    x = np.random.default_rng(2).normal(size=12)
    a = hd.model_forward(params, cfg, x)[0]
    b = hd.model_forward(params, cfg, x)[0]
    assert np.array_equal(a, b)


def test_outputs_live_inside_tanh_range():
    cfg = toy_config()
    params = hd.init_params(cfg, seed=3)
    X = np.random.default_rng(4).normal(size=(50, 12)) * 5
    recon, latent, _ = model_forward_batch(params, cfg, X)
    assert np.abs(recon).max() < 1.0
    assert np.abs(latent).max() < 1.0


def test_forward_rejects_wrong_length():
    cfg = toy_config()
    params = hd.init_params(cfg, seed=0)
    with pytest.raises(ShapeError):
        hd.model_forward(params, cfg, np.zeros(13))


def test_init_is_seeded():
    cfg = toy_config()
    a, b = hd.init_params(cfg, 9), hd.init_params(cfg, 9)
    for x, y in zip(a.flat(), b.flat()):
        assert np.array_equal(x, y)
    c = hd.init_params(cfg, 10)
    assert any(not np.array_equal(x, y) for x, y in zip(a.flat(), c.flat()))


# ---------------------------------------------------------------------------
# encode


def test_encode_agrees_with_model_forward():
    cfg = toy_config()
    params = hd.init_params(cfg, seed=6)
    x = np.random.default_rng(7).normal(size=12)
    _, latent, _ = hd.model_forward(params, cfg, x)
    assert np.array_equal(hd.encode(params, cfg, x), latent)
    assert hd.encode(params, cfg, x).shape == (cfg.n_l,)


def test_identical_spectra_get_identical_latents():
    cfg = toy_config()
    params = hd.init_params(cfg, seed=8)
    x = np.random.default_rng(9).normal(size=12)
    batch = np.stack([x, x])
    latents = hd.encode_batch(params, cfg, batch)
    assert np.array_equal(latents[0], latents[1])


# ---------------------------------------------------------------------------
# backward


def test_backward_requires_cache():
    cfg = toy_config()
    params = hd.init_params(cfg, seed=0)
    with pytest.raises(StateError):
        hd.model_backward(params, cfg, None, np.zeros(12))


def test_zero_grad_output_gives_zero_gradients():
    cfg = toy_config()
    params = hd.init_params(cfg, seed=1)
    x = np.random.default_rng(3).normal(size=(4, 12))
    _, _, acts = model_forward_batch(params, cfg, x, cache=True)
    grads = hd.model_backward(params, cfg, acts, np.zeros((4, 12)))
    for g in grads.flat():
        assert not g.any()


def test_gradient_shapes_match_parameter_shapes():
    cfg = toy_config()
    params = hd.init_params(cfg, seed=2)
    x = np.random.default_rng(5).normal(size=(3, 12))
    _, _, acts = model_forward_batch(params, cfg, x, cache=True)
    grads = hd.model_backward(params, cfg, acts, np.ones((3, 12)))
    for p, g in zip(params.flat(), grads.flat()):
        assert p.shape == g.shape


def test_full_model_gradient_matches_finite_differences():
    cfg = toy_config()
    rng = np.random.default_rng(11)
    params = hd.init_params(cfg, seed=12)
    X = rng.normal(size=(2, 12))
    T = rng.normal(size=(2, 12)) * 0.3

    def loss():
        pred, _, _ = model_forward_batch(params, cfg, X)
        return float(np.mean((pred - T) ** 2))

    pred, _, acts = model_forward_batch(params, cfg, X, cache=True)
    _, grad_out = hd.mse_loss(pred, T)
    grads = hd.model_backward(params, cfg, acts, grad_out)
    for p, g in zip(params.flat(), grads.flat()):
        assert rel_err(g, fd_gradient(loss, p)) < 1e-4
