import json
import struct

import numpy as np
import pytest

import hsdenoise as hd
from hsdenoise.errors import (
    DegenerateInputError,
    FormatError,
    NumericError,
    PreconditionError,
    ShapeError,
)
from hsdenoise.nn import ConvSpec, ModelConfig

from test_nn_layers import fd_gradient, rel_err


def tiny_config():
    return ModelConfig(n_i=12, n_l=3, conv_layers=(ConvSpec(1, 3), ConvSpec(3, 4)))


def constant_cube(value=0.6, h=16, w=16, b=12):
    return hd.HyperCube(np.full((h, w, b), value, dtype=np.float32))


# ---------------------------------------------------------------------------
# loss


def test_mse_zero_for_equal_inputs():
    loss, grad = hd.mse_loss(np.arange(5.0), np.arange(5.0))
    assert loss == 0.0 and not grad.any()


def test_mse_worked_example():
    pred = np.array([1.0, 2.0, 3.0, 4.0])
    loss, grad = hd.mse_loss(pred, pred - 1.0)
    assert loss == pytest.approx(1.0)
    assert np.allclose(grad, 0.5)


def test_mse_rejects_length_mismatch():
    with pytest.raises(ShapeError):
        hd.mse_loss(np.zeros(3), np.zeros(4))


def test_mse_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    pred = rng.normal(size=8)
    target = rng.normal(size=8)

    def loss():
        return hd.mse_loss(pred, target)[0]

    _, grad = hd.mse_loss(pred, target)
    assert rel_err(grad, fd_gradient(loss, pred, h=1e-6)) < 1e-8


# ---------------------------------------------------------------------------
# Adam


def test_adam_zero_gradient_is_a_no_op():
    cfg = tiny_config()
    params = hd.init_params(cfg, 1)
    before = [a.copy() for a in params.flat()]
    grads = hd.init_params(cfg, 2)
    for g in grads.flat():
        g[...] = 0.0
    state = hd.AdamState.for_params(params)
    hd.adam_step(params, grads, state, hd.TrainConfig())
    for a, b in zip(params.flat(), before):
        assert np.array_equal(a, b)


def test_adam_matches_closed_form_on_scalars():
    # one parameter, constant gradient: the update has a closed form
    cfg = hd.TrainConfig()
    theta = np.array([0.5])
    params = hd.ModelParams([], (theta, np.zeros(0)), (np.zeros(0), np.zeros(0)), [])
    grads = hd.ModelParams([], (np.array([1.0]), np.zeros(0)),
                           (np.zeros(0), np.zeros(0)), [])
    state = hd.AdamState.for_params(params)

    expect = 0.5
    m = v = 0.0
    for t in range(1, 6):
        hd.adam_step(params, grads, state, cfg)
        m = cfg.beta1 * m + (1 - cfg.beta1) * 1.0
        v = cfg.beta2 * v + (1 - cfg.beta2) * 1.0
        m_hat = m / (1 - cfg.beta1 ** t)
        v_hat = v / (1 - cfg.beta2 ** t)
        expect -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.epsilon)
        assert abs(float(theta[0]) - expect) < 1e-12


def test_adam_first_step_magnitude():
    cfg = hd.TrainConfig()
    theta = np.array([0.0])
    params = hd.ModelParams([], (theta, np.zeros(0)), (np.zeros(0), np.zeros(0)), [])
    grads = hd.ModelParams([], (np.array([1.0]), np.zeros(0)),
                           (np.zeros(0), np.zeros(0)), [])
    hd.adam_step(params, grads, hd.AdamState.for_params(params), cfg)
    assert float(theta[0]) == pytest.approx(-0.001 / (1 + 1e-8), abs=1e-15)


def test_adam_rejects_nonfinite_gradients():
    cfg = tiny_config()
    params = hd.init_params(cfg, 1)
    grads = hd.init_params(cfg, 2)
    grads.flat()[0][0] = np.nan
    with pytest.raises(NumericError):
        hd.adam_step(params, grads, hd.AdamState.for_params(params),
                     hd.TrainConfig())


def test_adam_trajectories_are_reproducible():
    def run():
        cfg = tiny_config()
        params = hd.init_params(cfg, 3)
        state = hd.AdamState.for_params(params)
        rng = np.random.default_rng(4)
        tcfg = hd.TrainConfig()
        for _ in range(5):
            grads = hd.init_params(cfg, int(rng.integers(100)))
            hd.adam_step(params, grads, state, tcfg)
        return params

    a, b = run(), run()
    for x, y in zip(a.flat(), b.flat()):
        assert np.array_equal(x, y)


# ---------------------------------------------------------------------------
# training loop


def test_training_learns_a_constant_cube():
    cube = constant_cube()
    cfg = tiny_config()
    tc = hd.TrainConfig(seed=5, learning_rate=5e-3, batch_size=32,
                        max_epochs=300, patience=300)
    result = hd.train(cube, None, cfg, tc)
    assert result.report.final_val_loss < 1e-6


def test_training_is_deterministic():
    cube = constant_cube(0.4, 8, 8, 12)
    cube.data += np.random.default_rng(0).normal(
        0, 0.05, size=cube.data.shape
    ).astype(np.float32)
    cube = hd.HyperCube(cube.data)
    cfg = tiny_config()
    tc = hd.TrainConfig(seed=42, max_epochs=3, batch_size=16)
    a = hd.train(cube, None, cfg, tc)
    b = hd.train(cube, None, cfg, tc)
    for x, y in zip(a.params.flat(), b.params.flat()):
        assert np.array_equal(x, y)
    assert a.report.val_losses == b.report.val_losses


def test_shred_with_input_as_target_equals_uhred():
    cube = constant_cube(0.5, 8, 8, 12)
    cube.data += np.random.default_rng(1).normal(
        0, 0.1, size=cube.data.shape
    ).astype(np.float32)
    cube = hd.HyperCube(cube.data)
    cfg = tiny_config()
    uh = hd.train(cube, None, cfg, hd.TrainConfig(seed=9, max_epochs=3,
                                                  batch_size=16))
    sh = hd.train(cube, cube, cfg, hd.TrainConfig(mode="shred", seed=9,
                                                  max_epochs=3, batch_size=16))
    assert uh.report.train_losses == sh.report.train_losses
    assert uh.report.val_losses == sh.report.val_losses
    for x, y in zip(uh.params.flat(), sh.params.flat()):
        assert np.array_equal(x, y)


def test_train_mode_preconditions():
    cube = constant_cube(0.5, 4, 4, 12)
    cfg = tiny_config()
    with pytest.raises(PreconditionError):
        hd.train(cube, cube, cfg, hd.TrainConfig(mode="uhred", max_epochs=1))
    with pytest.raises(PreconditionError):
        hd.train(cube, None, cfg, hd.TrainConfig(mode="shred", max_epochs=1))


def test_train_rejects_mismatched_target():
    cfg = tiny_config()
    with pytest.raises(ShapeError):
        hd.train(constant_cube(0.5, 4, 4, 12), constant_cube(0.5, 4, 5, 12),
                 cfg, hd.TrainConfig(mode="shred", max_epochs=1))


def test_train_rejects_band_mismatch():
    with pytest.raises(ShapeError):
        hd.train(constant_cube(0.5, 4, 4, 10), None, tiny_config(),
                 hd.TrainConfig(max_epochs=1))


def test_train_rejects_all_zero_cube():
    with pytest.raises(DegenerateInputError):
        hd.train(hd.HyperCube(np.zeros((4, 4, 12), dtype=np.float32)), None,
                 tiny_config(), hd.TrainConfig(max_epochs=1))


def test_best_epoch_tracks_minimum_val_loss():
    cube = constant_cube(0.5, 8, 8, 12)
    cube.data += np.random.default_rng(2).normal(
        0, 0.2, size=cube.data.shape
    ).astype(np.float32)
    cube = hd.HyperCube(cube.data)
    result = hd.train(cube, None, tiny_config(),
                      hd.TrainConfig(seed=3, max_epochs=6, batch_size=16))
    report = result.report
    assert report.best_epoch == int(np.argmin(report.val_losses))
    assert all(np.isfinite(v) and v >= 0 for v in report.val_losses)
    assert all(np.isfinite(v) and v >= 0 for v in report.train_losses)


# ---------------------------------------------------------------------------
# denoise_cube


@pytest.fixture(scope="module")
def trained_tiny():
    rng = np.random.default_rng(7)
    data = 0.5 + 0.3 * np.sin(np.arange(12) / 3)[None, None, :] + rng.normal(
        0, 0.05, size=(12, 12, 12)
    )
    cube = hd.HyperCube(data.astype(np.float32))
    cfg = tiny_config()
    result = hd.train(cube, None, cfg, hd.TrainConfig(seed=6, max_epochs=4,
                                                      batch_size=32))
    return cube, cfg, result


def test_denoise_preserves_dimensions(trained_tiny):
    cube, cfg, result = trained_tiny
    out = hd.denoise_cube(result.params, cfg, cube, scale=result.meta.scale)
    assert out.data.shape == cube.data.shape
    assert out.norm_factor == cube.norm_factor


def test_denoise_independent_of_threads_and_pixel_order(trained_tiny):
    cube, cfg, result = trained_tiny
    one = hd.denoise_cube(result.params, cfg, cube, scale=result.meta.scale,
                          chunk_size=32, threads=1)
    three = hd.denoise_cube(result.params, cfg, cube, scale=result.meta.scale,
                            chunk_size=32, threads=3)
    assert np.array_equal(one.data, three.data)
    # permuting pixels permutes reconstructions and nothing else
    perm = np.random.default_rng(8).permutation(cube.n_pixels)
    shuffled = hd.HyperCube(cube.spectra()[perm].reshape(cube.data.shape))
    out_shuffled = hd.denoise_cube(result.params, cfg, shuffled,
                                   scale=result.meta.scale, chunk_size=32)
    unshuffled = np.empty_like(out_shuffled.spectra())
    unshuffled[perm] = out_shuffled.spectra()
    assert np.array_equal(unshuffled, one.spectra())


def test_denoise_rejects_band_mismatch(trained_tiny):
    _, cfg, result = trained_tiny
    with pytest.raises(ShapeError):
        hd.denoise_cube(result.params, cfg, constant_cube(0.5, 4, 4, 10))


# ---------------------------------------------------------------------------
# HSM1 serialization


def test_model_round_trip_is_exact(tmp_path, trained_tiny):
    _, cfg, result = trained_tiny
    path = tmp_path / "model.hsm"
    hd.save_model(result.params, cfg, result.meta, path)
    params2, cfg2, meta2 = hd.load_model(path)
    for a, b in zip(result.params.flat(), params2.flat()):
        assert np.array_equal(a.astype(np.float32), b.astype(np.float32))
    assert cfg2.n_i == cfg.n_i and cfg2.n_l == cfg.n_l
    assert cfg2.conv_layers == cfg.conv_layers
    assert meta2.mode == result.meta.mode
    assert meta2.norm_factor == result.meta.norm_factor
    # saving the loaded model reproduces the file bit for bit
    path2 = tmp_path / "model2.hsm"
    hd.save_model(params2, cfg2, meta2, path2)
    assert path.read_bytes() == path2.read_bytes()


def test_truncated_model_rejected(tmp_path, trained_tiny):
    _, cfg, result = trained_tiny
    path = tmp_path / "model.hsm"
    hd.save_model(result.params, cfg, result.meta, path)
    raw = path.read_bytes()
    path.write_bytes(raw[:-3])
    with pytest.raises(FormatError):
        hd.load_model(path)


def test_header_payload_disagreement_rejected(tmp_path, trained_tiny):
    # rewrite the header with a different n_i; the declared geometry no longer
    # matches the weight payload and the load must fail
    _, cfg, result = trained_tiny
    path = tmp_path / "model.hsm"
    hd.save_model(result.params, cfg, result.meta, path)
    raw = path.read_bytes()
    (hlen,) = struct.unpack_from("<I", raw, 4)
    header = json.loads(raw[8 : 8 + hlen])
    header["n_i"] = 16
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    path.write_bytes(raw[:4] + struct.pack("<I", len(blob)) + blob
                     + raw[8 + hlen :])
    with pytest.raises(FormatError):
        hd.load_model(path)


def test_bad_magic_model_rejected(tmp_path):
    path = tmp_path / "bad.hsm"
    path.write_bytes(b"NOPE" + b"\x00" * 16)
    with pytest.raises(FormatError):
        hd.load_model(path)
