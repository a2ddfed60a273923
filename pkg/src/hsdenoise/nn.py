"""1-D convolutional autoencoder with hand-written forward and backward passes.

The encoder applies ``conv -> tanh -> maxpool(2)`` stages, flattens, and maps
through a fully connected layer + tanh into the latent vector. The decoder
mirrors it: fully connected + tanh, reshape, then transposed-convolution
stages (kernel 4, stride 2, padding 1, output cropped on the right to a
per-stage target length), each followed by tanh. The final stage maps to one
channel of exactly the input length.

Conventions:

* "Convolution" is cross-correlation (the usual deep-learning convention);
  serialized weights are unambiguous under this reading.
* All weights are stored ``[out_ch, in_ch, kernel]`` (dense: ``[out, in]``).
  The transposed convolution consumes the same array with its first two axes
  swapped, which makes ``convtranspose1d_forward`` the exact adjoint of a
  stride-2 convolution sharing the same weight tensor.
* Computation is float64 end to end; serialization narrows to float32.
* Max-pool ties resolve to the lower index; an odd trailing element is
  dropped by the pool and receives zero gradient.

Batched variants (leading N axis) are the workhorses; the per-sample
functions are thin wrappers with the documented signatures.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ShapeError, StateError

__all__ = [
    "ConvSpec",
    "ModelConfig",
    "ModelParams",
    "Activations",
    "default_config",
    "init_params",
    "conv1d_forward",
    "conv1d_backward",
    "maxpool_forward",
    "maxpool_backward",
    "convtranspose1d_forward",
    "convtranspose1d_backward",
    "dense_forward",
    "dense_backward",
    "tanh_forward",
    "tanh_backward",
    "model_forward",
    "model_forward_batch",
    "model_backward",
    "encode",
    "encode_batch",
]

DECONV_KERNEL = 4
DECONV_STRIDE = 2
DECONV_PAD = 1


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class ConvSpec:
    """One encoder convolution: stride 1, odd kernel, same-length padding."""

    in_channels: int
    out_channels: int
    kernel_size: int = 3
    stride: int = 1
    padding: int = 1


@dataclass
class ModelConfig:
    """Architecture hyperparameters plus the derived per-stage lengths.

    ``enc_lengths[s]`` is the signal length after encoder stage s's pool.
    ``dec_targets`` are the decoder stage output lengths, computed backward
    from ``n_i`` via ceil-halving so that every stage satisfies the
    transposed convolution's crop rule and the final output length is exactly
    ``n_i``. ``dec_start_len`` is the length the decoder dense layer reshapes
    to. (The innermost decoder length can exceed the encoder's final pooled
    length by one when an odd length was floor-halved on the way down.)
    """

    n_i: int
    n_l: int
    conv_layers: tuple[ConvSpec, ...]
    pool_size: int = 2
    activation: str = "tanh"
    enc_lengths: tuple[int, ...] = field(init=False)
    dec_targets: tuple[int, ...] = field(init=False)
    dec_start_len: int = field(init=False)

    def __post_init__(self):
        if self.n_i < 1 or self.n_l < 1:
            raise ShapeError(f"n_i and n_l must be >= 1, got {self.n_i}, {self.n_l}")
        if self.pool_size != 2:
            raise ShapeError("only pool size 2 is supported")
        if self.activation != "tanh":
            raise ShapeError(f"unsupported activation {self.activation!r}")
        if not self.conv_layers:
            raise ShapeError("at least one convolution stage is required")
        self.conv_layers = tuple(self.conv_layers)
        prev = 1
        for spec in self.conv_layers:
            if spec.in_channels != prev:
                raise ShapeError(
                    f"conv in_channels {spec.in_channels} does not chain from {prev}"
                )
            if spec.stride != 1:
                raise ShapeError("encoder convolutions must have stride 1")
            if spec.kernel_size % 2 != 1 or spec.padding != (spec.kernel_size - 1) // 2:
                raise ShapeError(
                    "encoder convolutions need odd kernels with same-length padding"
                )
            prev = spec.out_channels
        lengths = []
        length = self.n_i
        for spec in self.conv_layers:
            if length < 2:
                raise ShapeError(
                    f"length {length} cannot be pooled; n_i={self.n_i} supports "
                    f"fewer stages"
                )
            length //= 2
            lengths.append(length)
        self.enc_lengths = tuple(lengths)
        targets = [self.n_i]
        for _ in range(len(self.conv_layers) - 1):
            targets.append(-(-targets[-1] // 2))
        self.dec_targets = tuple(reversed(targets))
        self.dec_start_len = -(-self.dec_targets[0] // 2)

    @property
    def n_stages(self) -> int:
        return len(self.conv_layers)

    @property
    def channels(self) -> tuple[int, ...]:
        return tuple(spec.out_channels for spec in self.conv_layers)

    @property
    def flatten_dim(self) -> int:
        return self.channels[-1] * self.enc_lengths[-1]

    @property
    def dec_flatten_dim(self) -> int:
        return self.channels[-1] * self.dec_start_len

    @property
    def deconv_channels(self) -> tuple[tuple[int, int], ...]:
        """(in, out) channel pairs of the decoder stages, mirroring the encoder."""
        chain = (1,) + self.channels
        return tuple(
            (chain[i + 1], chain[i]) for i in range(len(chain) - 2, -1, -1)
        )


def default_config(n_i: int, n_l: int | None = None,
                   channels: tuple[int, ...] = (8, 16, 32, 64),
                   kernel_size: int = 3) -> ModelConfig:
    """Standard four-stage architecture; n_l defaults to 16 (32 for long spectra)."""
    if n_l is None:
        n_l = 32 if n_i >= 256 else 16
    specs = []
    prev = 1
    for out in channels:
        specs.append(ConvSpec(prev, out, kernel_size, 1, (kernel_size - 1) // 2))
        prev = out
    return ModelConfig(n_i=n_i, n_l=n_l, conv_layers=tuple(specs))


# ---------------------------------------------------------------------------
# parameters


@dataclass
class ModelParams:
    """All learnable arrays, in serialization order (encoder first).

    conv / deconv entries are (weight [out_ch, in_ch, k], bias [out_ch]);
    dense entries are (weight [out, in], bias [out]).
    """

    conv: list[tuple[np.ndarray, np.ndarray]]
    enc_dense: tuple[np.ndarray, np.ndarray]
    dec_dense: tuple[np.ndarray, np.ndarray]
    deconv: list[tuple[np.ndarray, np.ndarray]]

    def flat(self) -> list[np.ndarray]:
        arrays = []
        for w, b in self.conv:
            arrays += [w, b]
        arrays += [*self.enc_dense, *self.dec_dense]
        for w, b in self.deconv:
            arrays += [w, b]
        return arrays

    def copy(self) -> "ModelParams":
        return ModelParams(
            [(w.copy(), b.copy()) for w, b in self.conv],
            tuple(a.copy() for a in self.enc_dense),
            tuple(a.copy() for a in self.dec_dense),
            [(w.copy(), b.copy()) for w, b in self.deconv],
        )

    @property
    def n_parameters(self) -> int:
        return sum(a.size for a in self.flat())


def _param_shapes(config: ModelConfig) -> list[tuple[int, ...]]:
    shapes = []
    for spec in config.conv_layers:
        shapes += [(spec.out_channels, spec.in_channels, spec.kernel_size),
                   (spec.out_channels,)]
    shapes += [(config.n_l, config.flatten_dim), (config.n_l,)]
    shapes += [(config.dec_flatten_dim, config.n_l), (config.dec_flatten_dim,)]
    for cin, cout in config.deconv_channels:
        shapes += [(cout, cin, DECONV_KERNEL), (cout,)]
    return shapes


def params_from_flat(config: ModelConfig, arrays: list[np.ndarray]) -> ModelParams:
    expected = _param_shapes(config)
    if len(arrays) != len(expected):
        raise ShapeError(f"expected {len(expected)} arrays, got {len(arrays)}")
    for arr, shape in zip(arrays, expected):
        if arr.shape != shape:
            raise ShapeError(f"parameter shape {arr.shape} != expected {shape}")
    n = config.n_stages
    conv = [(arrays[2 * i], arrays[2 * i + 1]) for i in range(n)]
    enc_dense = (arrays[2 * n], arrays[2 * n + 1])
    dec_dense = (arrays[2 * n + 2], arrays[2 * n + 3])
    deconv = [(arrays[2 * n + 4 + 2 * i], arrays[2 * n + 5 + 2 * i]) for i in range(n)]
    return ModelParams(conv, enc_dense, dec_dense, deconv)


def init_params(config: ModelConfig, seed: int) -> ModelParams:
    """Seeded Glorot-uniform weights (+/- sqrt(6/(fan_in+fan_out))), zero biases."""
    rng = np.random.default_rng(seed)

    def glorot(shape):
        if len(shape) == 3:
            out_ch, in_ch, k = shape
            fan_in, fan_out = in_ch * k, out_ch * k
        else:
            fan_in, fan_out = shape[1], shape[0]
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-bound, bound, size=shape)

    arrays = []
    for shape in _param_shapes(config):
        arrays.append(glorot(shape) if len(shape) > 1 else np.zeros(shape))
    return params_from_flat(config, arrays)


# ---------------------------------------------------------------------------
# layer primitives (batched)


def _as_f64(x):
    return np.asarray(x, dtype=np.float64)


def _windows(x_pad: np.ndarray, k: int) -> np.ndarray:
    # [N, C, Lp] -> [N, C, Lp - k + 1, k]
    return sliding_window_view(x_pad, k, axis=2)


def conv1d_forward_batch(x, w, b, pad: int) -> np.ndarray:
    """Same-length cross-correlation: x [N, Cin, L] -> [N, Cout, L]."""
    x, w, b = _as_f64(x), _as_f64(w), _as_f64(b)
    out_ch, in_ch, k = w.shape
    if x.ndim != 3 or x.shape[1] != in_ch:
        raise ShapeError(f"input {x.shape} does not match weight {w.shape}")
    if b.shape != (out_ch,):
        raise ShapeError(f"bias {b.shape} does not match {out_ch} output channels")
    if k % 2 != 1 or pad != (k - 1) // 2:
        raise ShapeError(f"need odd kernel with pad=(k-1)/2, got k={k}, pad={pad}")
    x_pad = np.pad(x, ((0, 0), (0, 0), (pad, pad)))
    y = np.tensordot(_windows(x_pad, k), w, axes=([1, 3], [1, 2]))  # [N, L, O]
    return np.ascontiguousarray(y.transpose(0, 2, 1)) + b[None, :, None]


def conv1d_backward_batch(grad_y, x, w, pad: int):
    """Gradients of conv1d_forward_batch w.r.t. (x, w, b)."""
    grad_y, x, w = _as_f64(grad_y), _as_f64(x), _as_f64(w)
    k = w.shape[2]
    x_pad = np.pad(x, ((0, 0), (0, 0), (pad, pad)))
    win = _windows(x_pad, k)                                   # [N, Cin, L, k]
    grad_w = np.tensordot(grad_y, win, axes=([0, 2], [0, 2]))  # [O, Cin, k]
    grad_b = grad_y.sum(axis=(0, 2))
    # input gradient: correlate grad_y with the flipped, channel-swapped kernel
    w_rev = np.ascontiguousarray(w[:, :, ::-1].transpose(1, 0, 2))
    gy_pad = np.pad(grad_y, ((0, 0), (0, 0), (pad, pad)))
    grad_x = np.tensordot(_windows(gy_pad, k), w_rev, axes=([1, 3], [1, 2]))
    return np.ascontiguousarray(grad_x.transpose(0, 2, 1)), grad_w, grad_b


def maxpool_forward_batch(x):
    """Non-overlapping window-2 max pool; returns (pooled, window-local argmax)."""
    x = _as_f64(x)
    length = x.shape[2]
    if length < 2:
        raise ShapeError(f"cannot pool a length-{length} signal")
    half = length // 2
    pairs = x[:, :, : 2 * half].reshape(x.shape[0], x.shape[1], half, 2)
    idx = pairs.argmax(axis=3)  # ties resolve to the lower index
    pooled = np.take_along_axis(pairs, idx[..., None], axis=3)[..., 0]
    return pooled, idx


def maxpool_backward_batch(grad_y, idx, length: int):
    """Route pooled gradients back to argmax positions; dropped tail gets zero."""
    grad_y, idx = _as_f64(grad_y), np.asarray(idx)
    n, c, half = grad_y.shape
    grad_x = np.zeros((n, c, length))
    positions = 2 * np.arange(half) + idx  # absolute argmax indices
    np.put_along_axis(grad_x, positions, grad_y, axis=2)
    return grad_x


def convtranspose1d_forward_batch(x, w, b, target_len: int,
                                  stride: int = DECONV_STRIDE,
                                  pad: int = DECONV_PAD) -> np.ndarray:
    """Transpose of a strided convolution, output cropped on the right.

    ``w`` is [in_ch, out_ch, k] so that reusing a convolution's weight tensor
    directly yields the adjoint map. Reachable target lengths are
    (L-1)*stride - 2*pad + k and that value minus one.
    """
    x, w, b = _as_f64(x), _as_f64(w), _as_f64(b)
    in_ch, out_ch, k = w.shape
    if x.ndim != 3 or x.shape[1] != in_ch:
        raise ShapeError(f"input {x.shape} does not match weight {w.shape}")
    length = x.shape[2]
    nominal = (length - 1) * stride - 2 * pad + k
    if target_len not in (nominal, nominal - 1):
        raise ShapeError(
            f"target length {target_len} unreachable from input length {length} "
            f"(allowed: {nominal} or {nominal - 1})"
        )
    full = np.zeros((x.shape[0], out_ch, (length - 1) * stride + k))
    for j in range(k):
        contrib = np.tensordot(x, w[:, :, j], axes=([1], [0]))  # [N, L, O]
        full[:, :, j : j + stride * length : stride] += contrib.transpose(0, 2, 1)
    return full[:, :, pad : pad + target_len] + b[None, :, None]


def convtranspose1d_backward_batch(grad_y, x, w,
                                   stride: int = DECONV_STRIDE,
                                   pad: int = DECONV_PAD):
    """Gradients of convtranspose1d_forward_batch w.r.t. (x, w, b)."""
    grad_y, x, w = _as_f64(grad_y), _as_f64(x), _as_f64(w)
    in_ch, out_ch, k = w.shape
    n, _, length = x.shape
    target_len = grad_y.shape[2]
    grad_full = np.zeros((n, out_ch, (length - 1) * stride + k))
    grad_full[:, :, pad : pad + target_len] = grad_y
    grad_b = grad_y.sum(axis=(0, 2))
    grad_w = np.empty_like(w)
    grad_x = np.zeros_like(x)
    for j in range(k):
        sl = grad_full[:, :, j : j + stride * length : stride]  # [N, O, L]
        grad_w[:, :, j] = np.tensordot(x, sl, axes=([0, 2], [0, 2]))
        grad_x += np.tensordot(sl, w[:, :, j], axes=([1], [1])).transpose(0, 2, 1)
    return grad_x, grad_w, grad_b


def dense_forward_batch(x, w, b) -> np.ndarray:
    x, w, b = _as_f64(x), _as_f64(w), _as_f64(b)
    if x.ndim != 2 or x.shape[1] != w.shape[1] or b.shape != (w.shape[0],):
        raise ShapeError(f"dense shapes inconsistent: x {x.shape}, w {w.shape}")
    return x @ w.T + b


def dense_backward_batch(grad_y, x, w):
    grad_y, x, w = _as_f64(grad_y), _as_f64(x), _as_f64(w)
    return grad_y @ w, grad_y.T @ x, grad_y.sum(axis=0)


def tanh_forward(x) -> np.ndarray:
    return np.tanh(_as_f64(x))


def tanh_backward(grad_y, y) -> np.ndarray:
    grad_y, y = _as_f64(grad_y), _as_f64(y)
    return grad_y * (1.0 - y * y)


# ---------------------------------------------------------------------------
# per-sample wrappers


def conv1d_forward(x, w, b, pad: int) -> np.ndarray:
    """x [in_ch, L] -> [out_ch, L]; same-length zero-padded cross-correlation."""
    return conv1d_forward_batch(_as_f64(x)[None], w, b, pad)[0]


def conv1d_backward(grad_y, x, w, pad: int):
    if x is None:
        raise StateError("conv1d_backward needs the cached forward input")
    gx, gw, gb = conv1d_backward_batch(_as_f64(grad_y)[None], _as_f64(x)[None], w, pad)
    return gx[0], gw, gb


def maxpool_forward(x):
    pooled, idx = maxpool_forward_batch(_as_f64(x)[None])
    return pooled[0], idx[0]


def maxpool_backward(grad_y, idx, length: int):
    return maxpool_backward_batch(_as_f64(grad_y)[None], np.asarray(idx)[None],
                                  length)[0]


def convtranspose1d_forward(x, w, b, target_len: int,
                            stride: int = DECONV_STRIDE, pad: int = DECONV_PAD):
    """x [in_ch, L] -> [out_ch, target_len]; w is [in_ch, out_ch, k]."""
    return convtranspose1d_forward_batch(_as_f64(x)[None], w, b, target_len,
                                         stride, pad)[0]


def convtranspose1d_backward(grad_y, x, w,
                             stride: int = DECONV_STRIDE, pad: int = DECONV_PAD):
    if x is None:
        raise StateError("convtranspose1d_backward needs the cached forward input")
    gx, gw, gb = convtranspose1d_backward_batch(
        _as_f64(grad_y)[None], _as_f64(x)[None], w, stride, pad
    )
    return gx[0], gw, gb


def dense_forward(x, w, b) -> np.ndarray:
    return dense_forward_batch(_as_f64(x)[None], w, b)[0]


def dense_backward(grad_y, x, w):
    if x is None:
        raise StateError("dense_backward needs the cached forward input")
    gx, gw, gb = dense_backward_batch(_as_f64(grad_y)[None], _as_f64(x)[None], w)
    return gx[0], gw, gb


# ---------------------------------------------------------------------------
# full model


@dataclass
class Activations:
    """Per-layer tensors cached by a forward pass for the backward pass."""

    enc_inputs: list[np.ndarray]
    enc_acts: list[np.ndarray]
    pool_idx: list[np.ndarray]
    pool_in_len: list[int]
    flat_in: np.ndarray
    latent: np.ndarray
    dec_act: np.ndarray
    dec_inputs: list[np.ndarray]
    dec_acts: list[np.ndarray]
    output: np.ndarray


def _check_input(config: ModelConfig, x_batch: np.ndarray):
    if x_batch.ndim != 2 or x_batch.shape[1] != config.n_i:
        raise ShapeError(
            f"expected spectra of length {config.n_i}, got array {x_batch.shape}"
        )


def _encoder(params: ModelParams, config: ModelConfig, x_batch, record: bool):
    h = _as_f64(x_batch)[:, None, :]
    enc_inputs, enc_acts, pool_idx, pool_in_len = [], [], [], []
    for spec, (w, b) in zip(config.conv_layers, params.conv):
        act = tanh_forward(conv1d_forward_batch(h, w, b, spec.padding))
        pooled, idx = maxpool_forward_batch(act)
        if record:
            enc_inputs.append(h)
            enc_acts.append(act)
            pool_idx.append(idx)
            pool_in_len.append(act.shape[2])
        h = pooled
    flat = h.reshape(h.shape[0], -1)
    latent = tanh_forward(dense_forward_batch(flat, *params.enc_dense))
    return flat, latent, enc_inputs, enc_acts, pool_idx, pool_in_len


def model_forward_batch(params: ModelParams, config: ModelConfig, x_batch,
                        cache: bool = False):
    """Full autoencoder pass over an [N, n_i] batch.

    Returns (reconstruction [N, n_i], latent [N, n_l], Activations or None).
    """
    x_batch = _as_f64(x_batch)
    _check_input(config, x_batch)
    flat, latent, enc_inputs, enc_acts, pool_idx, pool_in_len = _encoder(
        params, config, x_batch, cache
    )
    dec_act = tanh_forward(dense_forward_batch(latent, *params.dec_dense))
    h = dec_act.reshape(dec_act.shape[0], config.channels[-1], config.dec_start_len)
    dec_inputs, dec_acts = [], []
    for target, (w, b) in zip(config.dec_targets, params.deconv):
        out = tanh_forward(
            convtranspose1d_forward_batch(h, w.swapaxes(0, 1), b, target)
        )
        if cache:
            dec_inputs.append(h)
            dec_acts.append(out)
        h = out
    recon = h[:, 0, :]
    acts = None
    if cache:
        acts = Activations(enc_inputs, enc_acts, pool_idx, pool_in_len,
                           flat, latent, dec_act, dec_inputs, dec_acts, recon)
    return recon, latent, acts


def model_forward(params: ModelParams, config: ModelConfig, x, cache: bool = False):
    """Single-spectrum forward pass; see :func:`model_forward_batch`."""
    recon, latent, acts = model_forward_batch(params, config, _as_f64(x)[None], cache)
    return recon[0], latent[0], acts


def model_backward(params: ModelParams, config: ModelConfig,
                   acts: Activations | None, grad_output) -> ModelParams:
    """Exact gradients of the reconstruction w.r.t. every parameter.

    ``grad_output`` is [N, n_i] (or [n_i]); gradients are summed over the
    batch, matching a loss written as a sum over samples.
    """
    if acts is None:
        raise StateError("model_backward needs Activations from a cached forward")
    grad_output = _as_f64(grad_output)
    if grad_output.ndim == 1:
        grad_output = grad_output[None]
    g = grad_output[:, None, :]
    deconv_grads = []
    for s in range(config.n_stages - 1, -1, -1):
        w, _ = params.deconv[s]
        g = tanh_backward(g, acts.dec_acts[s])
        g, gw, gb = convtranspose1d_backward_batch(g, acts.dec_inputs[s],
                                                   w.swapaxes(0, 1))
        deconv_grads.append((gw.swapaxes(0, 1), gb))
    deconv_grads.reverse()
    g = g.reshape(g.shape[0], -1)
    g = tanh_backward(g, acts.dec_act)
    g, gw_dec, gb_dec = dense_backward_batch(g, acts.latent, params.dec_dense[0])
    g = tanh_backward(g, acts.latent)
    g, gw_enc, gb_enc = dense_backward_batch(g, acts.flat_in, params.enc_dense[0])
    g = g.reshape(g.shape[0], config.channels[-1], config.enc_lengths[-1])
    conv_grads = []
    for s in range(config.n_stages - 1, -1, -1):
        spec = config.conv_layers[s]
        g = maxpool_backward_batch(g, acts.pool_idx[s], acts.pool_in_len[s])
        g = tanh_backward(g, acts.enc_acts[s])
        g, gw, gb = conv1d_backward_batch(g, acts.enc_inputs[s],
                                          params.conv[s][0], spec.padding)
        conv_grads.append((gw, gb))
    conv_grads.reverse()
    return ModelParams(conv_grads, (gw_enc, gb_enc), (gw_dec, gb_dec), deconv_grads)


def encode_batch(params: ModelParams, config: ModelConfig, x_batch) -> np.ndarray:
    """Encoder half only: [N, n_i] -> post-tanh latent [N, n_l]."""
    x_batch = _as_f64(x_batch)
    _check_input(config, x_batch)
    return _encoder(params, config, x_batch, record=False)[1]


def encode(params: ModelParams, config: ModelConfig, x) -> np.ndarray:
    return encode_batch(params, config, _as_f64(x)[None])[0]
