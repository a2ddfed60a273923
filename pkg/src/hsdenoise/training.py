"""Training loops, Adam optimizer, and bit-exact model serialization.

Two regimes share one code path: the one-shot self-supervised mode ("uhred",
the noisy cube is both input and reconstruction target) and the supervised
mode ("shred", a separately supplied clean cube is the target). Pixels are
treated as independent spectra; spatial positions never enter training.

Because the final decoder activation is tanh, targets must live inside
(-1, 1): the input (and target) cube is multiplied by
``input_scale / max(input)`` before training, and reconstruction undoes the
same factor. The factor's ingredients are recorded in :class:`ModelMeta` and
serialized with the model.

HSM1 model file layout (little-endian):

    bytes 0-3  magic "HSM1"
    u32        header byte length
    UTF-8 JSON header: format_version, n_i, n_l, activation, layer list with
               shapes, input_scale, norm_factor, seed, mode
    f32 blob   all parameters in declared layer order (conv weights
               out-channel-major then bias, dense row-major then bias;
               encoder layers first, then decoder)
"""

from __future__ import annotations

import json
import struct
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .cube import HyperCube, split_train_val
from .errors import (
    DegenerateInputError,
    FormatError,
    NumericError,
    PreconditionError,
    ShapeError,
)
from .nn import (
    DECONV_KERNEL,
    DECONV_PAD,
    DECONV_STRIDE,
    ConvSpec,
    ModelConfig,
    ModelParams,
    _param_shapes,
    init_params,
    model_backward,
    model_forward_batch,
    params_from_flat,
)

__all__ = [
    "TrainConfig",
    "AdamState",
    "TrainReport",
    "ModelMeta",
    "TrainResult",
    "mse_loss",
    "adam_step",
    "train",
    "denoise_cube",
    "save_model",
    "load_model",
]

MODEL_MAGIC = b"HSM1"
FORMAT_VERSION = 1
MODES = ("uhred", "shred")


@dataclass
class TrainConfig:
    """Optimizer settings and training regime."""

    mode: str = "uhred"
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    batch_size: int = 256
    max_epochs: int = 50
    patience: int = 5
    split_fraction: float = 0.8
    seed: int = 0
    input_scale: float = 0.9

    def __post_init__(self):
        if self.mode not in MODES:
            raise PreconditionError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not self.learning_rate > 0:
            raise PreconditionError("learning_rate must be > 0")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise PreconditionError("beta1 and beta2 must lie in [0, 1)")
        if self.epsilon <= 0 or self.batch_size < 1 or self.max_epochs < 1:
            raise PreconditionError("epsilon, batch_size, max_epochs out of range")
        if self.patience < 1:
            raise PreconditionError("patience must be >= 1")
        if not 0.0 < self.split_fraction < 1.0:
            raise PreconditionError("split_fraction must be in (0, 1)")
        if not 0.0 < self.input_scale < 1.0:
            raise PreconditionError("input_scale must be in (0, 1)")


@dataclass
class AdamState:
    """First/second moment accumulators (float64) plus the step counter."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0

    @classmethod
    def for_params(cls, params: ModelParams) -> "AdamState":
        flat = params.flat()
        return cls([np.zeros_like(a) for a in flat], [np.zeros_like(a) for a in flat])


@dataclass
class TrainReport:
    """Per-epoch losses and bookkeeping from one training run."""

    train_losses: list[float] = field(default_factory=list)
    val_losses: list[float] = field(default_factory=list)
    best_epoch: int = -1
    wall_time_s: float = 0.0

    @property
    def epochs_run(self) -> int:
        return len(self.train_losses)

    @property
    def final_val_loss(self) -> float:
        return self.val_losses[self.best_epoch]

    def to_dict(self) -> dict:
        return {
            "train_losses": self.train_losses,
            "val_losses": self.val_losses,
            "best_epoch": self.best_epoch,
            "epochs_run": self.epochs_run,
            "final_val_loss": self.final_val_loss,
            "wall_time_s": self.wall_time_s,
        }


@dataclass
class ModelMeta:
    """Scaling and provenance recorded alongside the weights."""

    input_scale: float
    norm_factor: float
    seed: int
    mode: str
    format_version: int = FORMAT_VERSION

    @property
    def scale(self) -> float:
        """Multiplier applied to spectra before they enter the network."""
        return self.input_scale / self.norm_factor


@dataclass
class TrainResult:
    params: ModelParams
    report: TrainReport
    meta: ModelMeta


# ---------------------------------------------------------------------------
# loss and optimizer


def mse_loss(pred, target):
    """Mean squared error and its gradient w.r.t. ``pred``.

    Accepts single spectra or [N, n] batches; the mean runs over every
    element, so the batch version is the mean of per-sample losses.
    """
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeError(f"shape mismatch {pred.shape} vs {target.shape}")
    diff = pred - target
    loss = float(np.mean(diff * diff))
    return loss, (2.0 / diff.size) * diff


def adam_step(params: ModelParams, grads: ModelParams, state: AdamState,
              cfg: TrainConfig):
    """Bias-corrected Adam update, in place on ``params`` and ``state``.

    theta -= lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
    """
    flat_p, flat_g = params.flat(), grads.flat()
    for g in flat_g:
        if not np.isfinite(g).all():
            raise NumericError("non-finite gradient; aborting update")
    state.t += 1
    b1c = 1.0 - cfg.beta1 ** state.t
    b2c = 1.0 - cfg.beta2 ** state.t
    for p, g, m, v in zip(flat_p, flat_g, state.m, state.v):
        m *= cfg.beta1
        m += (1.0 - cfg.beta1) * g
        v *= cfg.beta2
        v += (1.0 - cfg.beta2) * (g * g)
        p -= cfg.learning_rate * (m / b1c) / (np.sqrt(v / b2c) + cfg.epsilon)
    return params, state


# ---------------------------------------------------------------------------
# training


def _mean_loss(params, config, x, t, chunk=2048):
    """Mean per-sample MSE over a dataset, evaluated in fixed-size chunks."""
    total = 0.0
    for lo in range(0, x.shape[0], chunk):
        pred, _, _ = model_forward_batch(params, config, x[lo : lo + chunk])
        d = pred - t[lo : lo + chunk]
        total += float(np.sum(d * d)) / x.shape[1]
    return total / x.shape[0]


def train(cube: HyperCube, target_cube: HyperCube | None,
          model_cfg: ModelConfig, train_cfg: TrainConfig) -> TrainResult:
    """Fit the autoencoder on a cube's spectra; returns the best-epoch weights.

    In "uhred" mode ``target_cube`` must be None (the input doubles as the
    target); "shred" requires a target cube of identical dimensions. The
    run is deterministic for a given seed: the split, the weight init, and
    each epoch's batch order all derive from ``train_cfg.seed``.
    """
    if train_cfg.mode == "uhred":
        if target_cube is not None:
            raise PreconditionError("uhred mode trains against its own input; "
                                    "no target cube may be supplied")
        target_cube = cube
    else:
        if target_cube is None:
            raise PreconditionError("shred mode requires a target cube")
        if target_cube.data.shape != cube.data.shape:
            raise ShapeError(
                f"target cube {target_cube.data.shape} does not match "
                f"input {cube.data.shape}"
            )
    if cube.bands != model_cfg.n_i:
        raise ShapeError(f"cube has {cube.bands} bands but model expects {model_cfg.n_i}")

    data_max = float(cube.data.max())
    if data_max <= 0:
        raise DegenerateInputError("cannot train on a cube with no positive values")
    scale = train_cfg.input_scale / data_max
    x_all = cube.spectra().astype(np.float64) * scale
    t_all = target_cube.spectra().astype(np.float64) * scale

    seed_init, seed_split, seed_shuffle = np.random.SeedSequence(
        train_cfg.seed
    ).generate_state(3, dtype=np.uint64)
    split = split_train_val(cube.n_pixels, train_cfg.split_fraction, int(seed_split))
    x_tr, t_tr = x_all[split.train], t_all[split.train]
    x_va, t_va = x_all[split.val], t_all[split.val]

    params = init_params(model_cfg, int(seed_init))
    state = AdamState.for_params(params)
    shuffle_rng = np.random.default_rng(int(seed_shuffle))

    report = TrainReport()
    best_params = params.copy()
    best_val = np.inf
    started = time.perf_counter()
    n_train = x_tr.shape[0]
    for epoch in range(train_cfg.max_epochs):
        order = shuffle_rng.permutation(n_train)
        epoch_loss = 0.0
        for lo in range(0, n_train, train_cfg.batch_size):
            batch = order[lo : lo + train_cfg.batch_size]
            xb, tb = x_tr[batch], t_tr[batch]
            pred, _, acts = model_forward_batch(params, model_cfg, xb, cache=True)
            loss, grad = mse_loss(pred, tb)
            if not np.isfinite(loss):
                raise NumericError(f"non-finite training loss at epoch {epoch}")
            epoch_loss += loss * batch.size
            grads = model_backward(params, model_cfg, acts, grad)
            adam_step(params, grads, state, train_cfg)
        report.train_losses.append(epoch_loss / n_train)
        val_loss = _mean_loss(params, model_cfg, x_va, t_va)
        if not np.isfinite(val_loss):
            raise NumericError(f"non-finite validation loss at epoch {epoch}")
        report.val_losses.append(val_loss)
        if val_loss < best_val:
            best_val = val_loss
            best_params = params.copy()
            report.best_epoch = epoch
        elif epoch - report.best_epoch >= train_cfg.patience:
            break
    report.wall_time_s = time.perf_counter() - started
    meta = ModelMeta(train_cfg.input_scale, data_max, train_cfg.seed, train_cfg.mode)
    return TrainResult(best_params, report, meta)


def denoise_cube(params: ModelParams, config: ModelConfig, cube: HyperCube,
                 scale: float = 1.0, chunk_size: int = 1024,
                 threads: int = 1) -> HyperCube:
    """Replace every pixel spectrum by its autoencoder reconstruction.

    ``scale`` is the training-time input multiplier (``ModelMeta.scale``);
    it is applied before the network and inverted afterwards. Pixels are
    processed in fixed-size chunks so the result is bit-identical regardless
    of ``threads``.
    """
    if cube.bands != config.n_i:
        raise ShapeError(f"cube has {cube.bands} bands but model expects {config.n_i}")
    x = cube.spectra().astype(np.float64) * scale
    starts = list(range(0, x.shape[0], chunk_size))

    def run(lo):
        recon, _, _ = model_forward_batch(params, config, x[lo : lo + chunk_size])
        return recon / scale

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            pieces = list(pool.map(run, starts))
    else:
        pieces = [run(lo) for lo in starts]
    out = np.concatenate(pieces, axis=0).astype(np.float32)
    return HyperCube(
        out.reshape(cube.height, cube.width, cube.bands),
        None if cube.axis is None else cube.axis.copy(),
        cube.norm_factor,
    )


# ---------------------------------------------------------------------------
# serialization


def _layer_entries(config: ModelConfig) -> list[dict]:
    entries = []
    for spec in config.conv_layers:
        entries.append({
            "type": "conv",
            "in_channels": spec.in_channels,
            "out_channels": spec.out_channels,
            "kernel_size": spec.kernel_size,
            "stride": spec.stride,
            "padding": spec.padding,
        })
    entries.append({"type": "dense", "in_features": config.flatten_dim,
                    "out_features": config.n_l})
    entries.append({"type": "dense", "in_features": config.n_l,
                    "out_features": config.dec_flatten_dim})
    for (cin, cout), target in zip(config.deconv_channels, config.dec_targets):
        entries.append({
            "type": "conv_transpose",
            "in_channels": cin,
            "out_channels": cout,
            "kernel_size": DECONV_KERNEL,
            "stride": DECONV_STRIDE,
            "padding": DECONV_PAD,
            "target_len": target,
        })
    return entries


def save_model(params: ModelParams, config: ModelConfig, meta: ModelMeta,
               path) -> None:
    """Write an HSM1 file; byte-identical for identical inputs."""
    header = {
        "format_version": meta.format_version,
        "n_i": config.n_i,
        "n_l": config.n_l,
        "activation": config.activation,
        "layers": _layer_entries(config),
        "input_scale": meta.input_scale,
        "norm_factor": meta.norm_factor,
        "seed": meta.seed,
        "mode": meta.mode,
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for arr in params.flat():
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_model(path) -> tuple[ModelParams, ModelConfig, ModelMeta]:
    """Read an HSM1 file, validating the header against the weight payload."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 8 or raw[:4] != MODEL_MAGIC:
        raise FormatError(f"{path}: not an HSM1 model file")
    (header_len,) = struct.unpack_from("<I", raw, 4)
    if len(raw) < 8 + header_len:
        raise FormatError(f"{path}: truncated header")
    try:
        header = json.loads(raw[8 : 8 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: malformed JSON header: {exc}") from exc
    try:
        conv_specs = tuple(
            ConvSpec(e["in_channels"], e["out_channels"], e["kernel_size"],
                     e["stride"], e["padding"])
            for e in header["layers"] if e["type"] == "conv"
        )
        config = ModelConfig(n_i=header["n_i"], n_l=header["n_l"],
                             conv_layers=conv_specs,
                             activation=header["activation"])
        meta = ModelMeta(header["input_scale"], header["norm_factor"],
                         header["seed"], header["mode"], header["format_version"])
    except (KeyError, TypeError, ShapeError) as exc:
        raise FormatError(f"{path}: invalid header contents: {exc}") from exc
    if meta.mode not in MODES:
        raise FormatError(f"{path}: unknown mode {meta.mode!r}")
    if header["layers"] != _layer_entries(config):
        raise FormatError(f"{path}: layer list inconsistent with declared geometry")
    shapes = _param_shapes(config)
    n_values = sum(int(np.prod(s)) for s in shapes)
    payload = raw[8 + header_len :]
    if len(payload) != 4 * n_values:
        raise FormatError(
            f"{path}: expected {4 * n_values} weight bytes, found {len(payload)}"
        )
    values = np.frombuffer(payload, dtype="<f4").astype(np.float64)
    arrays, offset = [], 0
    for shape in shapes:
        size = int(np.prod(shape))
        arrays.append(values[offset : offset + size].reshape(shape).copy())
        offset += size
    return params_from_flat(config, arrays), config, meta
