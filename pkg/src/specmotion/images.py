"""Image plumbing: grayscale conversion, bilinear sampling, resizing,
warping, Gaussian pyramids, and PNG I/O.

Images are numpy arrays in [0, 1]: (H, W) grayscale or (H, W, 3) RGB.
All out-of-bounds sampling clamps to the edge.
"""

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image
from scipy.ndimage import gaussian_filter

from .errors import DataError

# ITU-R BT.601 luma weights
_LUMA = np.array([0.299, 0.587, 0.114])


def to_gray(img: np.ndarray) -> np.ndarray:
    if img.ndim == 2:
        return img
    if img.ndim == 3 and img.shape[2] == 3:
        return img @ _LUMA
    raise DataError(f"expected (H, W) or (H, W, 3) image, got {img.shape}")


def validate_image(img: np.ndarray) -> None:
    if img.ndim not in (2, 3) or img.size == 0:
        raise DataError(f"bad image shape {img.shape}")
    if not np.all(np.isfinite(img)):
        raise DataError("image contains non-finite values")
    if img.min() < 0 or img.max() > 1:
        raise DataError("image values must lie in [0, 1]")


def bilinear_sample(img: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Sample img at float coordinates, clamping to the edge."""
    h, w = img.shape[:2]
    xs = np.clip(xs, 0.0, w - 1.0)
    ys = np.clip(ys, 0.0, h - 1.0)
    x0 = np.floor(xs).astype(int)
    y0 = np.floor(ys).astype(int)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xs - x0
    fy = ys - y0
    if img.ndim == 3:
        fx = fx[..., None]
        fy = fy[..., None]
    top = img[y0, x0] * (1 - fx) + img[y0, x1] * fx
    bot = img[y1, x0] * (1 - fx) + img[y1, x1] * fx
    return top * (1 - fy) + bot * fy


def resize(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize with pixel-center alignment."""
    h, w = img.shape[:2]
    if (h, w) == (out_h, out_w):
        return img.copy()
    sy = h / out_h
    sx = w / out_w
    ys = (np.arange(out_h) + 0.5) * sy - 0.5
    xs = (np.arange(out_w) + 0.5) * sx - 0.5
    xg, yg = np.meshgrid(xs, ys)
    return bilinear_sample(img, xg, yg)


def resize_flow(flow: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Resize a flow field and rescale its vectors to the new pixel grid."""
    h, w = flow.shape[:2]
    out = resize(flow, out_h, out_w)
    out[..., 0] *= out_w / w
    out[..., 1] *= out_h / h
    return out


def warp_image(img: np.ndarray, flow: np.ndarray) -> np.ndarray:
    """Backward warp: output(p) = img(p + flow(p))."""
    h, w = img.shape[:2]
    if flow.shape[:2] != (h, w):
        raise DataError("flow dimensions do not match image")
    xg, yg = np.meshgrid(np.arange(w, dtype=float), np.arange(h, dtype=float))
    return bilinear_sample(img, xg + flow[..., 0], yg + flow[..., 1])


@dataclass(frozen=True)
class ImagePyramid:
    """Level 0 is full resolution; each next level is smoothed and downscaled."""

    levels: list

    def __post_init__(self):
        if not self.levels:
            raise DataError("pyramid needs at least one level")

    def __len__(self) -> int:
        return len(self.levels)


def build_pyramid(img: np.ndarray, factor: float = 2.0, min_size: int = 8) -> ImagePyramid:
    """Gaussian-smoothed, downsampled levels until a dimension would drop
    below min_size; an image already smaller than min_size gets one level."""
    if not 1.0 < factor <= 4.0:
        raise DataError(f"factor must be in (1, 4], got {factor}")
    if min_size < 8:
        raise DataError(f"min_size must be >= 8, got {min_size}")
    levels = [np.asarray(img, dtype=np.float64)]
    sigma = 0.5 * factor
    while True:
        prev = levels[-1]
        h, w = prev.shape[:2]
        nh, nw = math.ceil(h / factor), math.ceil(w / factor)
        if nh < min_size or nw < min_size:
            break
        smooth_sigma = (sigma, sigma) if prev.ndim == 2 else (sigma, sigma, 0)
        smoothed = gaussian_filter(prev, smooth_sigma, mode="nearest")
        levels.append(resize(smoothed, nh, nw))
    return ImagePyramid(levels=levels)


def load_image(path: str | Path) -> np.ndarray:
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
    return arr


def save_image(img: np.ndarray, path: str | Path) -> None:
    arr = np.clip(np.asarray(img), 0.0, 1.0)
    if arr.ndim == 2:
        arr = np.repeat(arr[:, :, None], 3, axis=2)
    Image.fromarray((arr * 255.0 + 0.5).astype(np.uint8)).save(path)


def encode_png(img: np.ndarray) -> bytes:
    import io

    arr = np.clip(np.asarray(img), 0.0, 1.0)
    if arr.ndim == 2:
        arr = np.repeat(arr[:, :, None], 3, axis=2)
    buf = io.BytesIO()
    Image.fromarray((arr * 255.0 + 0.5).astype(np.uint8)).save(buf, format="PNG")
    return buf.getvalue()


def load_frame_dir(path: str | Path) -> list[np.ndarray]:
    """Read a video stored as numbered PNG frames (frame_%05d.png)."""
    frames = sorted(Path(path).glob("frame_*.png"))
    if not frames:
        raise DataError(f"no frame_*.png files under {path}")
    return [load_image(p) for p in frames]


def save_frame_dir(frames: list, path: str | Path) -> None:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(frames):
        save_image(frame, out / f"frame_{i:05d}.png")
