"""
Motion-weighted splatting renderer
==================================

Forward-warps a single source image along per-frame displacement fields.
Colliding contributions are blended softmax-style with per-pixel weights
derived from the motion itself (mean trajectory magnitude), so large-motion
foreground wins over static background at disocclusions. Holes left by
forward warping are filled from coarser pyramid levels, then by
nearest-covered-neighbor diffusion.

Magnification scales the displacement fields; slow motion emits extra
frames by linearly interpolating consecutive fields.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DataError, DimensionMismatchError
from .images import build_pyramid, resize, resize_flow
from .spectral import MotionTexture

_EXP_CLAMP = 20.0
_COVERAGE_EPS = 1e-8


@dataclass(frozen=True)
class RenderConfig:
    pyramid_levels: int = 3
    beta: float = 1.0
    hole_fill: str = "diffusion"
    magnify: float = 1.0
    slowmo: int = 1

    def __post_init__(self):
        if self.pyramid_levels < 1:
            raise DataError("pyramid_levels must be >= 1")
        if self.beta <= 0:
            raise DataError("softmax temperature beta must be positive")
        if self.hole_fill not in ("diffusion", "mean"):
            raise DataError(f"unknown hole_fill strategy {self.hole_fill!r}")
        if self.magnify < 0:
            raise DataError("magnification must be >= 0")
        if self.slowmo < 1:
            raise DataError("slow-motion factor must be >= 1")


def compute_weights(tex: MotionTexture) -> np.ndarray:
    """Per-pixel splat weight W(p): mean over time of ||F_t(p)||."""
    return np.linalg.norm(tex.data, axis=-1).mean(axis=0)


def softmax_splat(
    src: np.ndarray, flow: np.ndarray, weights: np.ndarray, beta: float = 1.0
) -> tuple[np.ndarray, np.ndarray]:
    """Forward-warp src by flow with softmax-weighted blending.

    Each source pixel is distributed bilinearly over the four destination
    neighbors; every contribution carries exp(beta * W(p)) times its
    bilinear coefficient. Returns (warped image, coverage mask).
    """
    h, w = src.shape[:2]
    if flow.shape[:2] != (h, w) or weights.shape != (h, w):
        raise DimensionMismatchError("src, flow and weights dimensions differ")
    xg, yg = np.meshgrid(np.arange(w, dtype=float), np.arange(h, dtype=float))
    dest_x = xg + flow[..., 0]
    dest_y = yg + flow[..., 1]
    x0 = np.floor(dest_x).astype(int)
    y0 = np.floor(dest_y).astype(int)
    fx = dest_x - x0
    fy = dest_y - y0
    splat_w = np.exp(np.minimum(beta * weights, _EXP_CLAMP))

    corners = [
        (x0, y0, (1 - fx) * (1 - fy)),
        (x0 + 1, y0, fx * (1 - fy)),
        (x0, y0 + 1, (1 - fx) * fy),
        (x0 + 1, y0 + 1, fx * fy),
    ]
    colors = src if src.ndim == 3 else src[..., None]
    out = np.zeros_like(colors, dtype=np.float64)
    wsum = np.zeros((h, w))
    # pass 1: total contribution weight per destination
    for cx, cy, coef in corners:
        valid = (cx >= 0) & (cx < w) & (cy >= 0) & (cy < h)
        np.add.at(wsum, (cy[valid], cx[valid]), (splat_w * coef)[valid])
    # pass 2: accumulate colors with pre-normalized weights, so a single
    # contributor lands bit-exactly (w / w == 1.0)
    for cx, cy, coef in corners:
        valid = (cx >= 0) & (cx < w) & (cy >= 0) & (cy < h)
        contrib = splat_w * coef
        denom = np.ones((h, w))
        denom[valid] = wsum[cy[valid], cx[valid]]
        norm = np.where(denom > 0, contrib / np.where(denom > 0, denom, 1.0), 0.0)
        np.add.at(out, (cy[valid], cx[valid]), (colors * norm[..., None])[valid])
    coverage = wsum > _COVERAGE_EPS
    if src.ndim == 2:
        out = out[..., 0]
    return out, coverage


def _diffusion_fill(img: np.ndarray, coverage: np.ndarray, max_iters: int = 64) -> np.ndarray:
    """Fill uncovered pixels from the mean of covered 4-neighbors, iteratively."""
    filled = img.copy()
    cov = coverage.copy()
    kernel = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=float)
    from scipy.ndimage import convolve

    for _ in range(max_iters):
        if cov.all():
            break
        counts = convolve(cov.astype(float), kernel, mode="constant")
        sums = np.stack(
            [
                convolve(filled[..., c] * cov, kernel, mode="constant")
                for c in range(filled.shape[2])
            ],
            axis=-1,
        )
        frontier = (~cov) & (counts > 0)
        filled[frontier] = sums[frontier] / counts[frontier][:, None]
        cov = cov | frontier
    if not cov.all():
        filled[~cov] = filled[cov].mean(axis=0)
    return filled


def synthesize_frame(
    src: np.ndarray,
    flow: np.ndarray,
    weights: np.ndarray,
    cfg: RenderConfig = RenderConfig(),
) -> np.ndarray:
    """Render one frame: splat an image pyramid level by level, composite
    coarse results into fine-level holes, diffuse over what remains.
    Every output pixel is defined."""
    h, w = src.shape[:2]
    if flow.shape[:2] != (h, w):
        raise DimensionMismatchError("flow dimensions do not match image")
    pyramid = build_pyramid(src, factor=2.0, min_size=8).levels[: cfg.pyramid_levels]
    comp = None
    cov = None
    for level in reversed(range(len(pyramid))):
        img_l = pyramid[level]
        lh, lw = img_l.shape[:2]
        flow_l = flow if (lh, lw) == (h, w) else resize_flow(flow, lh, lw)
        weights_l = weights if (lh, lw) == (h, w) else resize(weights, lh, lw)
        warped, covered = softmax_splat(img_l, flow_l, weights_l, cfg.beta)
        if comp is None:
            comp, cov = warped, covered
        else:
            comp_up = resize(comp, lh, lw)
            cov_up = resize(cov.astype(float), lh, lw) > 0.5
            comp = np.where(covered[..., None], warped, comp_up)
            cov = covered | cov_up
    if cfg.hole_fill == "diffusion":
        out = _diffusion_fill(comp, cov)
    else:
        out = comp.copy()
        if not cov.all():
            out[~cov] = src.reshape(-1, src.shape[-1]).mean(axis=0)
    return np.clip(out, 0.0, 1.0)


def motion_fields(tex: MotionTexture, magnify: float = 1.0, slowmo: int = 1) -> list[np.ndarray]:
    """Displacement fields to render: magnified, and (for slow motion)
    linearly interpolated between consecutive maps, with F_0 = 0."""
    fields = []
    data = magnify * tex.data
    zero = np.zeros_like(data[0])
    for s in range(1, slowmo * tex.frames + 1):
        tau = s / slowmo
        lo = int(np.floor(tau))
        frac = tau - lo
        f_lo = zero if lo == 0 else data[lo - 1]
        if frac == 0:
            fields.append(f_lo.copy())
        else:
            fields.append((1 - frac) * f_lo + frac * data[lo])
    return fields


def animate(
    src: np.ndarray, tex: MotionTexture, cfg: RenderConfig = RenderConfig()
) -> list[np.ndarray]:
    """Animate a still image along a motion texture; returns slowmo * T frames."""
    if tex.data.shape[1:3] != src.shape[:2]:
        raise DimensionMismatchError("texture dimensions do not match image")
    fields = motion_fields(tex, cfg.magnify, cfg.slowmo)
    weights = np.linalg.norm(cfg.magnify * tex.data, axis=-1).mean(axis=0)
    return [synthesize_frame(src, f, weights, cfg) for f in fields]
