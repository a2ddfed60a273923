"""Self-supervised denoising and segmentation of hyperspectral data cubes.

The package covers the full pipeline: synthetic phantom generation, one-shot
autoencoder training (self-supervised or supervised), per-pixel spectral
denoising, latent-space k-means segmentation with automatic cluster-count
selection, and the SNR/PSNR/MSE evaluation machinery. A ``hsdenoise``
command-line tool exposes every step; see README.md.
"""

from .cube import (
    HyperCube,
    PixelMask,
    SplitIndices,
    find_saturated,
    load_cube,
    normalize_max,
    repair_saturated,
    save_cube,
    split_train_val,
)
from .clustering import (
    SegmentationResult,
    elbow_select_k,
    kmeans,
    kmeans_restarts,
    segment_cube,
    select_elbow_k,
    write_segmentation,
)
from .errors import (
    ConfigError,
    DegenerateInputError,
    FormatError,
    GenerationError,
    HsdenoiseError,
    NumericError,
    PreconditionError,
    RepairError,
    ShapeError,
    StateError,
)
from .metrics import (
    MetricsReport,
    evaluate_denoising,
    line_profile,
    local_snr_map,
    moving_average,
    moving_average_cube,
    mse,
    mse_cube,
    psnr,
    psnr_cube,
    region_snr,
)
from .nn import (
    Activations,
    ConvSpec,
    ModelConfig,
    ModelParams,
    default_config,
    encode,
    encode_batch,
    init_params,
    model_backward,
    model_forward,
    model_forward_batch,
)
from .phantom import (
    Phase,
    PhantomSpec,
    add_noise,
    default_four_phase_spec,
    default_two_phase_spec,
    lorentzian,
    render_phantom,
)
from .training import (
    AdamState,
    ModelMeta,
    TrainConfig,
    TrainReport,
    TrainResult,
    adam_step,
    denoise_cube,
    load_model,
    mse_loss,
    save_model,
    train,
)

__version__ = "0.1.0"
