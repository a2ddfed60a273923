"""Command-line interface: the full pipeline as subcommands.

    hsdenoise synth    --out noisy.hsc [--gt gt.hsc --phase-map p.pgm ...]
    hsdenoise train    --input noisy.hsc --out model.hsm [--mode uhred|shred]
    hsdenoise denoise  --model model.hsm --input noisy.hsc --out clean.hsc
    hsdenoise segment  --model model.hsm --input noisy.hsc --labels out.pgm
    hsdenoise metrics  {snr,psnr,mse,profile,baseline} ...

Options may come from a JSON config file (--config); explicit flags win.
Exit codes: 0 success, 2 argument/config errors, 3 data or format errors,
4 computation errors. Every command is reproducible byte-for-byte given the
same inputs, flags, and seeds.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from . import __version__
from .clustering import segment_cube, write_segmentation
from .cube import load_cube, save_cube
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
    line_profile,
    local_snr_map,
    moving_average_cube,
    mse_cube,
    psnr_cube,
    region_snr,
)
from .nn import default_config
from .pgm import read_pgm, write_label_pgm
from .phantom import Phase, PhantomSpec, add_noise, default_two_phase_spec, render_phantom
from .training import TrainConfig, denoise_cube, load_model, save_model, train

EXIT_ARGS = 2
EXIT_DATA = 3
EXIT_COMPUTE = 4

_DATA_ERRORS = (FormatError, ShapeError, OSError)
_COMPUTE_ERRORS = (DegenerateInputError, NumericError, PreconditionError,
                   RepairError, GenerationError, StateError)


# ---------------------------------------------------------------------------
# config file handling

_SCHEMA = {
    "model": {"n_l": int, "channels": list, "kernel_size": int},
    "train": {"mode": str, "learning_rate": float, "beta1": float, "beta2": float,
              "epsilon": float, "batch_size": int, "max_epochs": int,
              "patience": int, "split_fraction": float, "seed": int,
              "input_scale": float},
    "phantom": {"height": int, "width": int, "bands": int, "axis_start": float,
                "axis_step": float, "droplet_count": int,
                "droplet_radius_range": list, "noise_sigma0": float,
                "noise_gain": float, "seed": int, "phases": list},
    "clustering": {"k_max": int, "restarts": int, "max_iter": int, "tol": float,
                   "seed": int},
    "metrics": {"snr_radius": int, "kernel": int},
}


def load_run_config(path) -> dict:
    """Parse and validate a JSON run-config document; unknown keys rejected."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    for section, content in doc.items():
        if section not in _SCHEMA:
            raise ConfigError(f"{path}: unknown config section {section!r}")
        if not isinstance(content, dict):
            raise ConfigError(f"{path}: section {section!r} must be an object")
        for key, value in content.items():
            expected = _SCHEMA[section].get(key)
            if expected is None:
                raise ConfigError(f"{path}: unknown key {section}.{key}")
            if expected is float and isinstance(value, int):
                value = float(value)
            if not isinstance(value, expected) or isinstance(value, bool):
                raise ConfigError(
                    f"{path}: {section}.{key} must be {expected.__name__}"
                )
    return doc


def _section(config: dict | None, name: str) -> dict:
    return dict((config or {}).get(name, {}))


def _phases_from_config(entries) -> list[Phase]:
    phases = []
    try:
        for e in entries:
            peaks = [(float(c), float(g), float(a)) for c, g, a in e.get("peaks", [])]
            phases.append(Phase(e["name"], peaks, float(e.get("background", 0.0))))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad phantom.phases entry: {exc}") from exc
    return phases


# ---------------------------------------------------------------------------
# subcommands


def _cmd_synth(args) -> int:
    cfg = _section(args.config, "phantom")

    def pick(flag, key, default):
        return flag if flag is not None else cfg.get(key, default)

    height = pick(args.height, "height", 64)
    width = pick(args.width, "width", 64)
    bands = pick(args.bands, "bands", 92)
    if min(height, width, bands) < 1:
        print("error: --height/--width/--bands must be >= 1", file=sys.stderr)
        return EXIT_ARGS
    spec_defaults = default_two_phase_spec(height=height, width=width, bands=bands)
    phases = (_phases_from_config(cfg["phases"]) if "phases" in cfg
              else spec_defaults.phases)
    radius_range = tuple(cfg.get("droplet_radius_range",
                                 spec_defaults.droplet_radius_range))
    spec = PhantomSpec(
        height=height,
        width=width,
        bands=bands,
        phases=phases,
        axis_start=cfg.get("axis_start", spec_defaults.axis_start),
        axis_step=cfg.get("axis_step", spec_defaults.axis_step),
        droplet_count=cfg.get("droplet_count", spec_defaults.droplet_count),
        droplet_radius_range=radius_range,
        noise_sigma0=pick(args.noise_sigma0, "noise_sigma0",
                          spec_defaults.noise_sigma0),
        noise_gain=pick(args.noise_gain, "noise_gain", spec_defaults.noise_gain),
        seed=pick(args.seed, "seed", spec_defaults.seed),
    )
    gt, labels = render_phantom(spec)
    noisy = add_noise(gt, spec.noise_sigma0, spec.noise_gain, spec.seed + 1)
    save_cube(noisy, args.out)
    if args.gt:
        save_cube(gt, args.gt)
    if args.phase_map:
        write_label_pgm(labels, len(spec.phases), args.phase_map)
    print(json.dumps({"out": str(args.out), "gt": args.gt and str(args.gt),
                      "phase_map": args.phase_map and str(args.phase_map),
                      "seed": spec.seed}))
    return 0


def _train_config(args, config) -> TrainConfig:
    cfg = _section(config, "train")
    overrides = {
        "mode": args.mode,
        "learning_rate": args.lr,
        "batch_size": args.batch_size,
        "max_epochs": args.epochs,
        "patience": args.patience,
        "seed": args.seed,
    }
    for key, value in overrides.items():
        if value is not None:
            cfg[key] = value
    try:
        return TrainConfig(**cfg)
    except TypeError as exc:
        raise ConfigError(f"bad train config: {exc}") from exc


def _cmd_train(args) -> int:
    tc = _train_config(args, args.config)
    if tc.mode == "shred" and not args.target:
        print("error: --mode shred requires --target", file=sys.stderr)
        return EXIT_ARGS
    if tc.mode == "uhred" and args.target:
        print("error: --mode uhred does not take --target", file=sys.stderr)
        return EXIT_ARGS
    cube = load_cube(args.input)
    target = load_cube(args.target) if args.target else None
    mcfg = _section(args.config, "model")
    model_cfg = default_config(
        cube.bands,
        n_l=args.latent if args.latent is not None else mcfg.get("n_l"),
        channels=tuple(mcfg.get("channels", (8, 16, 32, 64))),
        kernel_size=mcfg.get("kernel_size", 3),
    )
    result = train(cube, target, model_cfg, tc)
    save_model(result.params, model_cfg, result.meta, args.out)
    if args.report:
        with open(args.report, "w") as fh:
            json.dump(result.report.to_dict(), fh, indent=2)
            fh.write("\n")
    print(json.dumps({"final_val_loss": result.report.final_val_loss,
                      "best_epoch": result.report.best_epoch,
                      "epochs_run": result.report.epochs_run,
                      "model": str(args.out)}))
    return 0


def _cmd_denoise(args) -> int:
    params, config, meta = load_model(args.model)
    cube = load_cube(args.input)
    out = denoise_cube(params, config, cube, scale=meta.scale,
                       threads=args.threads)
    save_cube(out, args.out)
    print(json.dumps({"out": str(args.out), "pixels": out.n_pixels}))
    return 0


def _cmd_segment(args) -> int:
    if args.k != "auto":
        try:
            k = int(args.k)
        except ValueError:
            print(f"error: --k must be 'auto' or an integer, got {args.k!r}",
                  file=sys.stderr)
            return EXIT_ARGS
        if k < 1:
            print("error: --k must be >= 1", file=sys.stderr)
            return EXIT_ARGS
    else:
        k = "auto"
    ccfg = _section(args.config, "clustering")
    params, config, meta = load_model(args.model)
    cube = load_cube(args.input)
    result = segment_cube(
        params, config, cube, k=k,
        seed=args.seed if args.seed is not None else ccfg.get("seed", 0),
        scale=meta.scale,
        k_max=ccfg.get("k_max", 8),
        n_restarts=ccfg.get("restarts", 3),
    )
    write_segmentation(result, cube, pgm_path=args.labels,
                       json_path=args.json, csv_path=args.spectra)
    summary = {"k": result.k, "inertia": result.inertia}
    if result.inertia_curve is not None:
        summary["inertia_curve"] = [float(w) for w in result.inertia_curve]
    print(json.dumps(summary))
    return 0


def _load_mask(args, shape):
    mask_img = read_pgm(args.mask)
    if mask_img.shape != shape:
        raise ShapeError(f"mask {mask_img.shape} does not match image {shape}")
    if args.mask_value is not None:
        return mask_img == args.mask_value
    return mask_img != 0


def _cmd_metrics(args) -> int:
    mcfg = _section(args.config, "metrics")
    if args.metric == "snr":
        cube = load_cube(args.input)
        if not 0 <= args.band < cube.bands:
            print(f"error: --band must be in [0, {cube.bands})", file=sys.stderr)
            return EXIT_ARGS
        image = cube.data[:, :, args.band].astype(np.float64)
        radius = args.radius if args.radius is not None else mcfg.get("snr_radius", 5)
        if args.mask:
            mask = _load_mask(args, image.shape)
            mean_db, std_db = region_snr(image, mask, radius)
            n = int(mask.sum())
        else:
            snr = local_snr_map(image, radius)
            mean_db, std_db, n = float(snr.mean()), float(snr.std()), snr.size
            if args.out_map:
                np.savetxt(args.out_map, snr, delimiter=",", fmt="%.6f")
        print(json.dumps({"mean_db": mean_db, "std_db": std_db, "n_pixels": n}))
    elif args.metric in ("psnr", "mse"):
        test = load_cube(args.test)
        reference = load_cube(args.reference)
        fn = psnr_cube if args.metric == "psnr" else mse_cube
        mean, std, per_pixel = fn(test, reference)
        if args.out_map:
            np.savetxt(args.out_map, per_pixel, delimiter=",", fmt="%.6f")
        key = "mean_db" if args.metric == "psnr" else "mean"
        print(json.dumps({key: mean, key.replace("mean", "std"): std,
                          "n_pixels": per_pixel.size}))
    elif args.metric == "profile":
        cube = load_cube(args.input)
        if not 0 <= args.band < cube.bands:
            print(f"error: --band must be in [0, {cube.bands})", file=sys.stderr)
            return EXIT_ARGS
        col_end = args.col_end if args.col_end is not None else cube.width - 1
        cols, values = line_profile(cube.data[:, :, args.band], args.row,
                                    args.col_start, col_end)
        rows = [(int(c), float(v)) for c, v in zip(cols, values)]
        if args.out:
            with open(args.out, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["index", "value"])
                writer.writerows(rows)
        else:
            print("index,value")
            for c, v in rows:
                print(f"{c},{v}")
    elif args.metric == "baseline":
        cube = load_cube(args.input)
        kernel = args.kernel if args.kernel is not None else mcfg.get("kernel", 10)
        if kernel < 1:
            print("error: --kernel must be >= 1", file=sys.stderr)
            return EXIT_ARGS
        save_cube(moving_average_cube(cube, kernel), args.out)
        print(json.dumps({"out": str(args.out), "kernel": kernel}))
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hsdenoise",
        description="Denoise and segment hyperspectral cubes with a 1-D "
                    "convolutional autoencoder.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="generate a synthetic phantom cube")
    synth.add_argument("--out", required=True, help="noisy cube output (HSC1)")
    synth.add_argument("--gt", help="ground-truth cube output (HSC1)")
    synth.add_argument("--phase-map", help="phase label map output (PGM)")
    synth.add_argument("--seed", type=int, help="generation seed")
    synth.add_argument("--width", type=int, help="image width in pixels")
    synth.add_argument("--height", type=int, help="image height in pixels")
    synth.add_argument("--bands", type=int, help="spectral bands per pixel")
    synth.add_argument("--noise-sigma0", type=float, help="additive noise floor")
    synth.add_argument("--noise-gain", type=float,
                       help="signal-proportional noise variance")
    synth.add_argument("--config", help="JSON run config")
    synth.set_defaults(fn=_cmd_synth)

    tr = sub.add_parser("train", help="train a denoising model on a cube")
    tr.add_argument("--input", required=True, help="input cube (HSC1)")
    tr.add_argument("--target", help="target cube for shred mode (HSC1)")
    tr.add_argument("--mode", choices=["uhred", "shred"],
                    help="uhred: self-supervised (default); shred: supervised")
    tr.add_argument("--out", required=True, help="model output (HSM1)")
    tr.add_argument("--report", help="training report output (JSON)")
    tr.add_argument("--seed", type=int, help="training seed")
    tr.add_argument("--epochs", type=int, help="maximum epochs")
    tr.add_argument("--batch-size", type=int, help="mini-batch size")
    tr.add_argument("--patience", type=int, help="early-stopping patience")
    tr.add_argument("--lr", type=float, help="Adam learning rate")
    tr.add_argument("--latent", type=int, help="latent dimension")
    tr.add_argument("--config", help="JSON run config")
    tr.set_defaults(fn=_cmd_train)

    dn = sub.add_parser("denoise", help="reconstruct a cube through a model")
    dn.add_argument("--model", required=True, help="trained model (HSM1)")
    dn.add_argument("--input", required=True, help="input cube (HSC1)")
    dn.add_argument("--out", required=True, help="denoised cube output (HSC1)")
    dn.add_argument("--threads", type=int, default=1,
                    help="parallel inference threads (output is identical "
                         "for any value)")
    dn.set_defaults(fn=_cmd_denoise)

    sg = sub.add_parser("segment", help="cluster pixels in the latent space")
    sg.add_argument("--model", required=True, help="trained model (HSM1)")
    sg.add_argument("--input", required=True, help="input cube (HSC1)")
    sg.add_argument("--k", default="auto",
                    help="cluster count, or 'auto' for elbow selection")
    sg.add_argument("--seed", type=int, help="clustering seed")
    sg.add_argument("--labels", help="label map output (PGM)")
    sg.add_argument("--json", help="sidecar output: k, inertia curve, centroids")
    sg.add_argument("--spectra", help="cluster mean spectra output (CSV)")
    sg.add_argument("--config", help="JSON run config")
    sg.set_defaults(fn=_cmd_segment)

    mt = sub.add_parser("metrics", help="quality metrics and baselines")
    mtsub = mt.add_subparsers(dest="metric", required=True)

    snr = mtsub.add_parser("snr", help="local SNR of one spectral slice")
    snr.add_argument("--input", required=True, help="cube (HSC1)")
    snr.add_argument("--band", type=int, default=0, help="band index to slice")
    snr.add_argument("--radius", type=int, help="neighborhood radius (default 5)")
    snr.add_argument("--mask", help="region mask (PGM); stats over mask only")
    snr.add_argument("--mask-value", type=int,
                     help="gray value selecting mask pixels (default: nonzero)")
    snr.add_argument("--out-map", help="write the full SNR map as CSV")
    snr.add_argument("--config", help="JSON run config")
    snr.set_defaults(fn=_cmd_metrics)

    for name, help_text in (("psnr", "per-pixel spectral PSNR vs a reference"),
                            ("mse", "per-pixel spectral MSE vs a reference")):
        p = mtsub.add_parser(name, help=help_text)
        p.add_argument("--test", required=True, help="cube under test (HSC1)")
        p.add_argument("--reference", required=True, help="reference cube (HSC1)")
        p.add_argument("--out-map", help="write the per-pixel map as CSV")
        p.add_argument("--config", help="JSON run config")
        p.set_defaults(fn=_cmd_metrics)

    pf = mtsub.add_parser("profile", help="line profile along an image row")
    pf.add_argument("--input", required=True, help="cube (HSC1)")
    pf.add_argument("--band", type=int, default=0, help="band index to slice")
    pf.add_argument("--row", type=int, required=True)
    pf.add_argument("--col-start", type=int, default=0)
    pf.add_argument("--col-end", type=int, help="inclusive (default: last column)")
    pf.add_argument("--out", help="CSV output (default: stdout)")
    pf.add_argument("--config", help="JSON run config")
    pf.set_defaults(fn=_cmd_metrics)

    bl = mtsub.add_parser("baseline",
                          help="moving-average smoothing of every spectrum")
    bl.add_argument("--input", required=True, help="cube (HSC1)")
    bl.add_argument("--out", required=True, help="smoothed cube output (HSC1)")
    bl.add_argument("--kernel", type=int, help="boxcar width (default 10)")
    bl.add_argument("--config", help="JSON run config")
    bl.set_defaults(fn=_cmd_metrics)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "config", None):
            args.config = load_run_config(args.config)
        else:
            args.config = None
        return args.fn(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARGS
    except _DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except _COMPUTE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    except HsdenoiseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
