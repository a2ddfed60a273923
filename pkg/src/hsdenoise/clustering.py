"""k-means in the autoencoder latent space and elbow-method model selection.

Clustering runs on post-tanh latent vectors exactly as the encoder produces
them (no re-standardization; all coordinates already share the (-1, 1)
range). The cluster count can be chosen automatically: the within-cluster
sum of squares W(k) is computed for k = 1..k_max (best of a few seeded
restarts each) and the elbow is the k in [2, k_max-1] maximizing the
discrete second difference W(k-1) - 2 W(k) + W(k+1), smallest k on ties.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .cube import HyperCube
from .errors import DegenerateInputError, NumericError, PreconditionError, ShapeError
from .nn import ModelConfig, ModelParams, encode_batch, model_forward_batch
from .pgm import write_label_pgm

__all__ = [
    "SegmentationResult",
    "kmeans",
    "kmeans_restarts",
    "select_elbow_k",
    "elbow_select_k",
    "segment_cube",
    "write_segmentation",
]

DEFAULT_RESTARTS = 3


@dataclass
class SegmentationResult:
    """Cluster assignment of pixels plus optional per-cluster mean spectra."""

    k: int
    labels: np.ndarray            # (n_pixels,) int
    centroids: np.ndarray         # (k, n_l)
    inertia: float
    n_iter: int = 0
    inertia_history: list[float] = field(default_factory=list)
    cluster_mean_spectra: np.ndarray | None = None  # (k, n_i), data units
    label_image: np.ndarray | None = None           # (H, W)
    inertia_curve: np.ndarray | None = None         # W(1..k_max) when k was auto


def _assign(x: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest centroid per point (ties -> lowest index) and squared distances."""
    d2 = ((x[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    labels = d2.argmin(axis=1)
    return labels, d2[np.arange(x.shape[0]), labels]


def _kmeanspp_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding: D^2-weighted draws after a uniform first pick."""
    n = x.shape[0]
    centroids = np.empty((k, x.shape[1]))
    centroids[0] = x[rng.integers(n)]
    d2 = ((x - centroids[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total > 0:
            pick = np.searchsorted(np.cumsum(d2), rng.uniform(0, total), side="right")
            pick = min(pick, n - 1)
        else:
            pick = int(rng.integers(n))  # duplicate points; any choice works
        centroids[i] = x[pick]
        d2 = np.minimum(d2, ((x - centroids[i]) ** 2).sum(axis=1))
    return centroids


def _fix_empty_clusters(x, labels, centroids):
    """Give each empty cluster the point farthest from that cluster's centroid."""
    counts = np.bincount(labels, minlength=centroids.shape[0])
    claimed: set[int] = set()
    for j in np.flatnonzero(counts == 0):
        d2 = ((x - centroids[j]) ** 2).sum(axis=1)
        order = np.argsort(-d2, kind="stable")
        for p in order:
            p = int(p)
            if p in claimed or counts[labels[p]] <= 1:
                continue
            counts[labels[p]] -= 1
            labels[p] = j
            counts[j] = 1
            centroids[j] = x[p]
            claimed.add(p)
            break
    return labels, centroids


def kmeans(x: np.ndarray, k: int, seed: int, max_iter: int = 300,
           tol: float = 1e-6) -> SegmentationResult:
    """Lloyd's algorithm with k-means++ initialization; deterministic per seed.

    Stops when the largest centroid displacement falls below
    ``tol * (bounding-box diagonal)`` or after ``max_iter`` iterations. The
    recorded inertia history is non-increasing (Lloyd's guarantee; asserted).
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeError("latent matrix must be 2-D (n_pixels, n_l)")
    if not np.isfinite(x).all():
        raise NumericError("latent matrix contains non-finite values")
    n = x.shape[0]
    if not 1 <= k <= n:
        raise PreconditionError(f"k must be in [1, {n}], got {k}")
    rng = np.random.default_rng(seed)
    centroids = _kmeanspp_init(x, k, rng)
    diameter = float(np.sqrt(((x.max(axis=0) - x.min(axis=0)) ** 2).sum()))
    history: list[float] = []
    labels = np.zeros(n, dtype=np.int64)
    for iteration in range(1, max_iter + 1):
        labels, d2 = _assign(x, centroids)
        labels, centroids = _fix_empty_clusters(x, labels, centroids)
        new_centroids = np.empty_like(centroids)
        for j in range(k):
            new_centroids[j] = x[labels == j].mean(axis=0)
        shift = float(np.sqrt(((new_centroids - centroids) ** 2).sum(axis=1)).max())
        centroids = new_centroids
        _, d2 = _assign_fixed(x, centroids, labels)
        inertia = float(d2.sum())
        if history:
            assert inertia <= history[-1] * (1 + 1e-9) + 1e-12, "inertia increased"
        history.append(inertia)
        if shift <= tol * diameter:
            break
    return SegmentationResult(k=k, labels=labels, centroids=centroids,
                              inertia=history[-1], n_iter=iteration,
                              inertia_history=history)


def _assign_fixed(x, centroids, labels):
    """Squared distances of points to their already-assigned centroids."""
    diff = x - centroids[labels]
    return labels, (diff * diff).sum(axis=1)


def kmeans_restarts(x: np.ndarray, k: int, seed: int,
                    n_restarts: int = DEFAULT_RESTARTS,
                    max_iter: int = 300, tol: float = 1e-6) -> SegmentationResult:
    """Best (lowest inertia) of several seeded k-means runs."""
    seeds = np.random.SeedSequence([seed, k]).generate_state(n_restarts,
                                                             dtype=np.uint64)
    best = None
    for s in seeds:
        result = kmeans(x, k, int(s), max_iter=max_iter, tol=tol)
        if best is None or result.inertia < best.inertia:
            best = result
    return best


def select_elbow_k(inertia_curve) -> int:
    """Elbow of a W(1..k_max) curve: max discrete second difference.

    Candidates are k in [2, k_max-1]; ties go to the smallest k.
    """
    w = np.asarray(inertia_curve, dtype=np.float64)
    if w.ndim != 1 or w.size < 3:
        raise PreconditionError("need an inertia curve of length >= 3")
    second = w[:-2] - 2.0 * w[1:-1] + w[2:]  # indexed by k = 2..k_max-1
    return int(np.argmax(second)) + 2


def elbow_select_k(x: np.ndarray, k_max: int = 8, seed: int = 0,
                   n_restarts: int = DEFAULT_RESTARTS):
    """Run k-means for k = 1..k_max and pick the elbow.

    Returns (k_star, inertia_curve). k_max must be >= 3 and cannot exceed the
    number of points.
    """
    if k_max < 3:
        raise PreconditionError(f"k_max must be >= 3, got {k_max}")
    k_star, curve, _ = _elbow_full(x, k_max, seed, n_restarts)
    return k_star, curve


def _elbow_full(x, k_max, seed, n_restarts):
    results = [kmeans_restarts(x, k, seed, n_restarts) for k in range(1, k_max + 1)]
    curve = np.array([r.inertia for r in results])
    k_star = select_elbow_k(curve)
    return k_star, curve, results


def segment_cube(params: ModelParams, config: ModelConfig, cube: HyperCube,
                 k="auto", seed: int = 0, scale: float = 1.0,
                 k_max: int = 8, n_restarts: int = DEFAULT_RESTARTS,
                 chunk_size: int = 2048) -> SegmentationResult:
    """Encode every pixel, cluster the latents, and summarize the clusters.

    ``scale`` is the trained model's input multiplier (``ModelMeta.scale``).
    With ``k="auto"`` the elbow method chooses the cluster count. Cluster
    mean spectra are averages of the *denoised* reconstructions (in original
    data units) over each cluster's pixels.
    """
    if cube.bands != config.n_i:
        raise ShapeError(f"cube has {cube.bands} bands but model expects {config.n_i}")
    x = cube.spectra().astype(np.float64) * scale
    latents = np.concatenate(
        [encode_batch(params, config, x[lo : lo + chunk_size])
         for lo in range(0, x.shape[0], chunk_size)]
    )
    if float(np.ptp(latents, axis=0).max(initial=0.0)) < 1e-12:
        raise DegenerateInputError(
            "latent vectors have zero variance; nothing to segment"
        )
    if k == "auto":
        k_star, curve, results = _elbow_full(latents, k_max, seed, n_restarts)
        result = results[k_star - 1]
        result.inertia_curve = curve
    else:
        result = kmeans_restarts(latents, int(k), seed, n_restarts)
    recon = np.concatenate(
        [model_forward_batch(params, config, x[lo : lo + chunk_size])[0]
         for lo in range(0, x.shape[0], chunk_size)]
    ) / scale
    spectra = np.empty((result.k, config.n_i))
    for j in range(result.k):
        spectra[j] = recon[result.labels == j].mean(axis=0)
    result.cluster_mean_spectra = spectra
    result.label_image = result.labels.reshape(cube.height, cube.width)
    return result


def write_segmentation(result: SegmentationResult, cube: HyperCube,
                       pgm_path=None, json_path=None, csv_path=None) -> None:
    """Export a segmentation: PGM label map, JSON sidecar, spectra CSV."""
    if pgm_path is not None:
        if result.label_image is None:
            raise PreconditionError("segmentation has no label image")
        write_label_pgm(result.label_image, result.k, pgm_path)
    if json_path is not None:
        sidecar = {
            "k": result.k,
            "inertia": result.inertia,
            "inertia_curve": (None if result.inertia_curve is None
                              else list(map(float, result.inertia_curve))),
            "centroids": result.centroids.tolist(),
        }
        with open(json_path, "w") as fh:
            json.dump(sidecar, fh, indent=2)
            fh.write("\n")
    if csv_path is not None:
        if result.cluster_mean_spectra is None:
            raise PreconditionError("segmentation has no cluster spectra")
        axis = cube.axis if cube.axis is not None else np.arange(cube.bands)
        with open(csv_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["band", "axis_value"]
                            + [f"cluster_{j}" for j in range(result.k)])
            for b in range(cube.bands):
                writer.writerow([b, float(axis[b])]
                                + [float(result.cluster_mean_spectra[j, b])
                                   for j in range(result.k)])
