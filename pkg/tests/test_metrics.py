import numpy as np
import pytest

import hsdenoise as hd
from hsdenoise.errors import DegenerateInputError, PreconditionError, ShapeError


# ---------------------------------------------------------------------------
# local SNR


def brute_force_snr_map(image, radius):
    """Literal double-loop disk-neighborhood SNR in dB."""
    h, w = image.shape
    out = np.empty((h, w))
    for y in range(h):
        for x in range(w):
            vals = []
            for dy in range(-radius, radius + 1):
                for dx in range(-radius, radius + 1):
                    if dy * dy + dx * dx > radius * radius:
                        continue
                    yy, xx = y + dy, x + dx
                    if 0 <= yy < h and 0 <= xx < w:
                        vals.append(image[yy, xx])
            vals = np.array(vals)
            mu = vals.mean()
            sd = vals.std(ddof=1) if len(vals) > 1 else 0.0
            if sd == 0.0:
                out[y, x] = 99.0 if mu > 0 else -99.0
            elif mu <= 0:
                out[y, x] = -99.0
            else:
                out[y, x] = np.clip(20.0 * np.log10(mu / sd), -99.0, 99.0)
    return out


def test_constant_positive_image_caps_high():
    image = np.full((8, 8), 3.0)
    assert (hd.local_snr_map(image, radius=2) == 99.0).all()


def test_snr_of_engineered_neighborhood_is_exactly_20db():
    # center disk holds {9, 9, 10, 11, 11}: mean 10, sample std 1
    image = np.zeros((3, 3))
    image[1, 1] = 10.0
    image[0, 1], image[1, 0] = 9.0, 9.0
    image[2, 1], image[1, 2] = 11.0, 11.0
    assert hd.local_snr_map(image, radius=1)[1, 1] == 20.0


def test_snr_map_matches_brute_force():
    rng = np.random.default_rng(0)
    image = 1.0 + rng.uniform(-0.5, 0.5, size=(16, 16))
    image[3, 4] = -0.2  # exercise the nonpositive-mean path nearby
    for radius in (1, 3, 5):
        got = hd.local_snr_map(image, radius)
        want = brute_force_snr_map(image, radius)
        assert np.allclose(got, want, rtol=1e-10, atol=1e-10)


def test_snr_map_rejects_bad_inputs():
    with pytest.raises(PreconditionError):
        hd.local_snr_map(np.ones((4, 4)), radius=0)
    with pytest.raises(PreconditionError):
        hd.local_snr_map(np.array([[np.inf, 1.0], [0.0, 0.0]]))


# ---------------------------------------------------------------------------
# region SNR


def test_region_snr_single_pixel():
    image = np.zeros((3, 3))
    image[1, 1] = 10.0
    image[0, 1], image[1, 0] = 9.0, 9.0
    image[2, 1], image[1, 2] = 11.0, 11.0
    mask = np.zeros((3, 3), dtype=bool)
    mask[1, 1] = True
    mean_db, std_db = hd.region_snr(image, mask, radius=1)
    assert mean_db == 20.0 and std_db == 0.0


def test_region_snr_two_pixels_population_std():
    # disjoint engineered disks at 20 dB and 10 dB -> 15 +/- 5 dB
    image = np.zeros((3, 7))
    image[1, 1] = 10.0
    image[0, 1], image[1, 0] = 9.0, 9.0
    image[2, 1], image[1, 2] = 11.0, 11.0
    s = np.sqrt(10.0)
    image[1, 5] = 10.0
    image[0, 5], image[1, 4] = 10.0 - s, 10.0 - s
    image[2, 5], image[1, 6] = 10.0 + s, 10.0 + s
    mask = np.zeros((3, 7), dtype=bool)
    mask[1, 1] = mask[1, 5] = True
    mean_db, std_db = hd.region_snr(image, mask, radius=1)
    assert mean_db == pytest.approx(15.0, abs=1e-9)
    assert std_db == pytest.approx(5.0, abs=1e-9)


def test_region_snr_rejects_empty_mask():
    with pytest.raises(PreconditionError):
        hd.region_snr(np.ones((4, 4)), np.zeros((4, 4), dtype=bool))


def test_region_snr_excludes_caps_unless_all_capped():
    image = np.ones((9, 9))          # fully capped at +99
    rng = np.random.default_rng(1)
    image[5:, :] = 1 + 0.1 * rng.uniform(size=(4, 9))
    mask = np.ones((9, 9), dtype=bool)
    mean_db, _ = hd.region_snr(image, mask, radius=1)
    assert mean_db < 99.0            # capped corner rows were excluded
    all_capped = np.ones((4, 4))
    mean_db, std_db = hd.region_snr(all_capped, np.ones((4, 4), dtype=bool))
    assert (mean_db, std_db) == (99.0, 0.0)


def test_phantom_peak_phase_outshines_background(small_phantom):
    spec, gt, labels, noisy = small_phantom
    peak_band = int(np.argmax(gt.data[labels > 0][0]))
    image = noisy.data[:, :, peak_band].astype(np.float64)
    droplet_mean, _ = hd.region_snr(image, labels > 0)
    bath_mean, _ = hd.region_snr(image, labels == 0)
    assert droplet_mean > bath_mean


# ---------------------------------------------------------------------------
# PSNR / MSE


def test_psnr_identical_vectors_cap():
    v = np.linspace(0, 1, 10)
    assert hd.psnr(v, v) == 99.0


def test_psnr_worked_example():
    reference = np.zeros(50)
    reference[10] = 1.0
    test = reference + 0.1
    assert hd.psnr(test, reference) == pytest.approx(20.0)


def test_psnr_rejects_bad_inputs():
    with pytest.raises(ShapeError):
        hd.psnr(np.zeros(3), np.zeros(4))
    with pytest.raises(DegenerateInputError):
        hd.psnr(np.ones(4), np.zeros(4))


def test_mse_trivial_cases():
    assert hd.mse(np.arange(4.0), np.arange(4.0)) == 0.0
    assert hd.mse(np.full(7, 0.1), np.zeros(7)) == pytest.approx(0.01)
    with pytest.raises(ShapeError):
        hd.mse(np.zeros(3), np.zeros(4))


def test_psnr_mse_identity():
    rng = np.random.default_rng(2)
    for _ in range(20):
        reference = rng.uniform(0.1, 2.0, size=30)
        test = reference + rng.normal(0, 0.1, size=30)
        lhs = hd.psnr(test, reference)
        rhs = 20.0 * np.log10(reference.max()) - 10.0 * np.log10(
            hd.mse(test, reference))
        assert abs(lhs - rhs) < 1e-10


def test_cube_psnr_uses_global_peak(small_phantom):
    _, gt, _, noisy = small_phantom
    mean_db, std_db, per_pixel = hd.psnr_cube(noisy, gt)
    assert per_pixel.shape == (gt.height, gt.width)
    assert mean_db == pytest.approx(float(per_pixel.mean()))
    # manual check on one pixel
    peak = float(gt.data.max())
    rmse = np.sqrt(np.mean((noisy.data[0, 0].astype(np.float64)
                            - gt.data[0, 0].astype(np.float64)) ** 2))
    assert per_pixel[0, 0] == pytest.approx(20 * np.log10(peak / rmse))


def test_cube_psnr_identical_cubes_cap(small_phantom):
    _, gt, _, _ = small_phantom
    mean_db, std_db, per_pixel = hd.psnr_cube(gt, gt)
    assert mean_db == 99.0 and std_db == 0.0 and (per_pixel == 99.0).all()


def test_cube_mse(small_phantom):
    _, gt, _, noisy = small_phantom
    mean, std, per_pixel = hd.mse_cube(noisy, gt)
    assert mean >= 0 and per_pixel.shape == (gt.height, gt.width)
    want = np.mean((noisy.data[2, 3].astype(np.float64)
                    - gt.data[2, 3].astype(np.float64)) ** 2)
    assert per_pixel[2, 3] == pytest.approx(want)


def test_cube_metrics_reject_shape_mismatch(small_phantom):
    _, gt, _, _ = small_phantom
    other = hd.HyperCube(np.ones((2, 2, 2), dtype=np.float32))
    with pytest.raises(ShapeError):
        hd.psnr_cube(other, gt)
    with pytest.raises(ShapeError):
        hd.mse_cube(other, gt)


# ---------------------------------------------------------------------------
# moving average


def brute_force_boxcar(spectrum, kernel):
    """Edge-shrunk centered boxcar; even kernels lean right."""
    lo = -((kernel - 1) // 2)
    hi = kernel // 2
    out = np.empty_like(spectrum, dtype=np.float64)
    for t in range(len(spectrum)):
        window = [spectrum[t + d] for d in range(lo, hi + 1)
                  if 0 <= t + d < len(spectrum)]
        out[t] = np.mean(window)
    return out


def test_boxcar_constant_is_unchanged():
    spectrum = np.full(30, 0.7)
    assert np.allclose(hd.moving_average(spectrum, 10), 0.7)


def test_boxcar_impulse_plateau():
    # windows lean right for even kernels, so the plateau leans left
    spectrum = np.zeros(40)
    spectrum[20] = 1.0
    smoothed = hd.moving_average(spectrum, 10)
    assert np.allclose(smoothed[15:25], 0.1)
    assert np.allclose(smoothed[:15], 0.0) and np.allclose(smoothed[25:], 0.0)


def test_boxcar_matches_brute_force():
    rng = np.random.default_rng(3)
    spectrum = rng.normal(size=45)
    for kernel in (1, 2, 3, 7, 10):
        assert np.allclose(hd.moving_average(spectrum, kernel),
                           brute_force_boxcar(spectrum, kernel))


def test_boxcar_flattens_a_narrow_lorentzian():
    # two-band half-width peak: a 10-wide boxcar must lose > 30% of the crest
    axis = np.arange(92, dtype=np.float64)
    peak = hd.lorentzian(axis, 46.0, 2.0, 1.0)
    smoothed = hd.moving_average(peak, 10)
    expected = brute_force_boxcar(peak, 10)
    assert np.allclose(smoothed, expected)
    assert smoothed[46] < 0.7 * peak[46]


def test_boxcar_preserves_mean_on_periodic_signal():
    rng = np.random.default_rng(4)
    x = rng.normal(size=24)
    tiled = np.concatenate([x, x, x])
    middle = hd.moving_average(tiled, 10)[24:48]
    assert middle.mean() == pytest.approx(x.mean(), abs=1e-12)


def test_boxcar_cube_variant(small_phantom):
    _, gt, _, noisy = small_phantom
    smoothed = hd.moving_average_cube(noisy, 5)
    assert smoothed.data.shape == noisy.data.shape
    want = brute_force_boxcar(noisy.data[3, 3].astype(np.float64), 5)
    assert np.allclose(smoothed.data[3, 3], want, atol=1e-6)


def test_boxcar_rejects_bad_kernel():
    with pytest.raises(PreconditionError):
        hd.moving_average(np.zeros(5), 0)


# ---------------------------------------------------------------------------
# bundled report


def test_evaluate_denoising_report(small_phantom):
    _, gt, labels, noisy = small_phantom
    peak_band = int(np.argmax(gt.data[labels > 0][0]))
    y, x = map(int, np.argwhere(labels > 0)[0])
    report = hd.evaluate_denoising(
        noisy, gt, band=peak_band,
        masks={"droplet": labels > 0, "bath": labels == 0},
        residual_pixel=(y, x),
    )
    want_psnr, want_std, _ = hd.psnr_cube(noisy, gt)
    assert report.psnr_db == want_psnr and report.psnr_std_db == want_std
    assert report.mse >= 0
    assert report.snr_map.shape == (gt.height, gt.width)
    assert np.isfinite(report.snr_map).all()
    assert set(report.region_stats) == {"droplet", "bath"}
    assert report.region_stats["droplet"][0] > report.region_stats["bath"][0]
    assert np.allclose(
        report.residual_spectrum,
        noisy.data[y, x].astype(np.float64) - gt.data[y, x].astype(np.float64),
    )


def test_evaluate_denoising_minimal(small_phantom):
    _, gt, _, noisy = small_phantom
    report = hd.evaluate_denoising(noisy, gt)
    assert report.snr_map is None and report.region_stats is None
    assert report.residual_spectrum is None
    with pytest.raises(PreconditionError):
        hd.evaluate_denoising(noisy, gt, band=999)


# ---------------------------------------------------------------------------
# line profile


def test_full_row_profile(small_phantom):
    _, gt, _, _ = small_phantom
    image = gt.data[:, :, 0]
    cols, values = hd.line_profile(image, 5, 0, gt.width - 1)
    assert len(values) == gt.width
    assert np.allclose(values, image[5, :])


def test_single_pixel_profile():
    image = np.arange(12.0).reshape(3, 4)
    cols, values = hd.line_profile(image, 1, 2, 2)
    assert cols.tolist() == [2] and values.tolist() == [6.0]


def test_profile_out_of_range():
    image = np.zeros((3, 4))
    with pytest.raises(PreconditionError):
        hd.line_profile(image, 3, 0, 1)
    with pytest.raises(PreconditionError):
        hd.line_profile(image, 0, 2, 1)
    with pytest.raises(PreconditionError):
        hd.line_profile(image, 0, 0, 4)


def test_profile_across_droplet_shows_plateau(small_phantom):
    spec, gt, labels, _ = small_phantom
    peak_band = int(np.argmax(gt.data[labels > 0][0]))
    rows, cols = np.nonzero(labels > 0)
    row = int(np.bincount(rows).argmax())  # row crossing the widest droplet
    _, values = hd.line_profile(gt.data[:, :, peak_band], row, 0, gt.width - 1)
    inside = values[labels[row] > 0]
    outside = values[labels[row] == 0]
    assert inside.max() > 2.0 * outside.mean()
