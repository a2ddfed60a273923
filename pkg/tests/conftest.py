import numpy as np
import pytest

import hsdenoise as hd


@pytest.fixture(scope="session")
def small_phantom():
    """Noise-free 24x24x16 two-phase phantom with its labels and a noisy copy."""
    spec = hd.PhantomSpec(
        height=24, width=24, bands=16,
        phases=[
            hd.Phase("bath", peaks=[], background=0.02),
            hd.Phase("droplet", peaks=[(8.0, 2.0, 1.0)], background=0.05),
        ],
        axis_start=0.0, axis_step=1.0,
        droplet_count=4, droplet_radius_range=(2, 4),
        noise_sigma0=0.15, noise_gain=0.02, seed=101,
    )
    gt, labels = hd.render_phantom(spec)
    noisy = hd.add_noise(gt, spec.noise_sigma0, spec.noise_gain, seed=102)
    return spec, gt, labels, noisy


@pytest.fixture(scope="session")
def tiny_model(small_phantom):
    """A briefly trained self-supervised model on the small phantom."""
    _, _, _, noisy = small_phantom
    config = hd.default_config(16, n_l=4, channels=(4, 8))
    result = hd.train(noisy, None, config,
                      hd.TrainConfig(seed=7, max_epochs=5, batch_size=64))
    return config, result


def random_cube(rng, h=4, w=4, b=8, axis=False):
    data = rng.uniform(0.0, 2.0, size=(h, w, b)).astype(np.float32)
    ax = np.linspace(100.0, 200.0, b, dtype=np.float32) if axis else None
    return hd.HyperCube(data, ax)
