"""Train the autoencoder on a single noisy cube and denoise it.

The one-shot self-supervised regime ("uhred") needs nothing but the noisy
acquisition itself: the network reconstructs its own input through a 16-d
bottleneck, and since per-pixel noise is incompressible, what survives is
the shared spectral structure. We also train the supervised variant
("shred") against the clean cube for comparison, and a moving-average
baseline to show what plain smoothing costs.

Expect a few minutes of single-core training.

    python3 demos/02_train_and_denoise.py
"""

import pathlib

import numpy as np

import hsdenoise as hd

out = pathlib.Path(__file__).with_name("out")
out.mkdir(exist_ok=True)

spec = hd.default_two_phase_spec()
gt, labels = hd.render_phantom(spec)
noisy = hd.add_noise(gt, spec.noise_sigma0, spec.noise_gain, spec.seed + 1)
input_db, _, _ = hd.psnr_cube(noisy, gt)
print(f"input: {input_db:.1f} dB mean spectral PSNR")

config = hd.default_config(gt.bands)  # 4 conv stages, latent size 16

# --- self-supervised: input is also the target
result = hd.train(noisy, None, config, hd.TrainConfig(seed=11))
report = result.report
print(f"uhred: {report.epochs_run} epochs in {report.wall_time_s:.0f}s, "
      f"best validation loss {report.final_val_loss:.2e} "
      f"at epoch {report.best_epoch}")
denoised = hd.denoise_cube(result.params, config, noisy, scale=result.meta.scale)
uhred_db, _, _ = hd.psnr_cube(denoised, gt)
print(f"uhred output: {uhred_db:.1f} dB ({uhred_db - input_db:+.1f} dB)")

# --- supervised variant: same architecture, clean targets
shred = hd.train(noisy, gt, config, hd.TrainConfig(mode="shred", seed=12))
shred_out = hd.denoise_cube(shred.params, config, noisy, scale=shred.meta.scale)
shred_db, _, _ = hd.psnr_cube(shred_out, gt)
print(f"shred output: {shred_db:.1f} dB ({shred_db - input_db:+.1f} dB)")

# --- what naive smoothing does instead
smoothed = hd.moving_average_cube(noisy, kernel=10)
smooth_db, _, _ = hd.psnr_cube(smoothed, gt)
print(f"kernel-10 moving average: {smooth_db:.1f} dB "
      f"({smooth_db - input_db:+.1f} dB), at the price of spectral resolution")

# Persist the model (HSM1) and cubes; `hsdenoise denoise` can reuse them.
hd.save_model(result.params, config, result.meta, out / "uhred.hsm")
hd.save_cube(denoised, out / "denoised.hsc")

# Spectra of one droplet pixel across methods, for plotting.
y, x = np.argwhere(labels > 0)[0]
rows = np.column_stack([gt.axis, gt.data[y, x], noisy.data[y, x],
                        denoised.data[y, x], shred_out.data[y, x],
                        smoothed.data[y, x]])
np.savetxt(out / "methods_spectrum.csv", rows, delimiter=",",
           header="axis,clean,noisy,uhred,shred,moving_average", comments="")
print(f"wrote {out}/uhred.hsm, denoised.hsc, methods_spectrum.csv")
