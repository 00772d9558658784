import numpy as np
import pytest
from scipy.ndimage import gaussian_filter

from specmotion.images import bilinear_sample, save_frame_dir


def textured_base(h, w, seed, pad=12, sigma=1.5):
    """Smooth random texture with a padded border for shifted sampling."""
    rng = np.random.default_rng(seed)
    big = gaussian_filter(rng.uniform(size=(h + 2 * pad, w + 2 * pad, 3)), (sigma, sigma, 0))
    big -= big.min()
    big /= big.max()
    return big, pad


def warped_video(h, w, offsets, seed):
    """Frames sampling a fixed texture at per-frame (dx, dy) offsets.

    Content at frame t appears displaced by +offsets[t] relative to frame 0,
    so the flow from frame 0 to frame t is offsets[t] - offsets[0].
    """
    big, pad = textured_base(h, w, seed)
    xg, yg = np.meshgrid(np.arange(w, dtype=float), np.arange(h, dtype=float))
    frames = []
    for dx, dy in offsets:
        frames.append(bilinear_sample(big, xg + pad - dx, yg + pad - dy))
    return frames


@pytest.fixture
def make_video_dir(tmp_path):
    """Factory writing a synthetic video as a frame_%05d.png directory."""

    def _make(name, h, w, offsets, seed):
        frames = warped_video(h, w, offsets, seed)
        path = tmp_path / name
        save_frame_dir(frames, path)
        return path

    return _make
