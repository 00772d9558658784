"""
Coarse-to-fine optical flow and trajectory extraction
=====================================================

Variational flow in the Horn-Schunck tradition, run coarse-to-fine over a
Gaussian pyramid with incremental warping, used to pull long-range per-pixel
trajectories out of oscillating-scene video: each trajectory is the direct
flow from one start frame to every future frame (never chained), stacked
into a motion texture.

Also hosts the sample filter that rejects bad flow and camera motion:
mean displacement magnitude above 8 px, or every pixel's time-averaged
magnitude above 1 px.
"""

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import convolve, gaussian_filter

from .errors import DataError, DimensionMismatchError
from .images import build_pyramid, resize_flow, to_gray, warp_image
from .spectral import MotionTexture

# classical weighted-average kernel for the smoothness term
_HS_KERNEL = np.array(
    [[1 / 12, 1 / 6, 1 / 12], [1 / 6, 0.0, 1 / 6], [1 / 12, 1 / 6, 1 / 12]]
)

# alpha is quoted on the classical 8-bit intensity scale; images here live
# in [0, 1], which rescales gradients by 1/255, so the solver rescales
# alpha to match.
_INTENSITY_SCALE = 255.0


@dataclass(frozen=True)
class FlowParams:
    alpha: float = 15.0
    iterations: int = 100
    warps: int = 3
    pyramid_factor: float = 2.0
    min_level: int = 16
    presmooth: float = 0.8


def _hs_increment(a, b_warped, alpha_eff, iterations):
    gy_a, gx_a = np.gradient(a)
    gy_b, gx_b = np.gradient(b_warped)
    ix = 0.5 * (gx_a + gx_b)
    iy = 0.5 * (gy_a + gy_b)
    it = b_warped - a
    denom = alpha_eff**2 + ix**2 + iy**2
    du = np.zeros_like(a)
    dv = np.zeros_like(a)
    for _ in range(iterations):
        du_avg = convolve(du, _HS_KERNEL, mode="nearest")
        dv_avg = convolve(dv, _HS_KERNEL, mode="nearest")
        common = (ix * du_avg + iy * dv_avg + it) / denom
        du = du_avg - ix * common
        dv = dv_avg - iy * common
    return du, dv


def estimate_flow(a: np.ndarray, b: np.ndarray, params: FlowParams = FlowParams()) -> np.ndarray:
    """Flow field from image a to image b, (H, W, 2) in pixels.

    Coarse-to-fine: at every pyramid level, warp b toward a by the upsampled
    flow so far, then run Horn-Schunck iterations on the linearized residual
    and accumulate. Deterministic for fixed inputs and params.
    """
    a = to_gray(np.asarray(a, dtype=np.float64))
    b = to_gray(np.asarray(b, dtype=np.float64))
    if a.shape != b.shape:
        raise DimensionMismatchError(f"image shapes differ: {a.shape} vs {b.shape}")
    alpha_eff = params.alpha / _INTENSITY_SCALE
    pyr_a = build_pyramid(a, params.pyramid_factor, params.min_level)
    pyr_b = build_pyramid(b, params.pyramid_factor, params.min_level)
    flow = None
    for level in reversed(range(len(pyr_a))):
        al = pyr_a.levels[level]
        bl = pyr_b.levels[level]
        if params.presmooth > 0:
            al = gaussian_filter(al, params.presmooth, mode="nearest")
            bl = gaussian_filter(bl, params.presmooth, mode="nearest")
        h, w = al.shape
        if flow is None:
            flow = np.zeros((h, w, 2))
        elif flow.shape[:2] != (h, w):
            flow = resize_flow(flow, h, w)
        for _ in range(params.warps):
            b_w = warp_image(bl, flow)
            du, dv = _hs_increment(al, b_w, alpha_eff, params.iterations)
            flow = flow + np.stack([du, dv], axis=-1)
    return flow


def extract_trajectories(
    video: list[np.ndarray], start: int, horizon: int,
    params: FlowParams = FlowParams(),
) -> MotionTexture:
    """Direct flow from the start frame to each of the next `horizon` frames."""
    if start + horizon >= len(video):
        raise DataError(
            f"start {start} + horizon {horizon} needs {start + horizon + 1} frames, "
            f"video has {len(video)}"
        )
    ref = to_gray(np.asarray(video[start], dtype=np.float64))
    fields = [
        estimate_flow(ref, video[start + t], params) for t in range(1, horizon + 1)
    ]
    return MotionTexture(data=np.stack(fields, axis=0))


@dataclass(frozen=True)
class FilterDecision:
    keep: bool
    reason: str
    mean_magnitude: float


def filter_sample(
    tex: MotionTexture, mean_threshold: float = 8.0, per_pixel_threshold: float = 1.0
) -> FilterDecision:
    """Keep/reject a trajectory sample.

    Rejects when the mean of ||F_t(p)|| over all (t, p) is strictly above
    mean_threshold (bad flow), or when every pixel's time-averaged magnitude
    exceeds per_pixel_threshold (global camera motion).
    """
    mags = np.linalg.norm(tex.data, axis=-1)
    mean_mag = float(mags.mean())
    if mean_mag > mean_threshold:
        return FilterDecision(False, "mean_magnitude", mean_mag)
    per_pixel = mags.mean(axis=0)
    if per_pixel.min() > per_pixel_threshold:
        return FilterDecision(False, "global_motion", mean_mag)
    return FilterDecision(True, "kept", mean_mag)
