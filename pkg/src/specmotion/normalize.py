"""
Frequency adaptive normalization
================================

Spectral-volume coefficients decay roughly exponentially with frequency, so
a single global scale crushes high bands toward zero. Instead, each band is
scaled by a corpus percentile of its own coefficient magnitudes and then
passed through a signed square root:

    c' = sign(c) * sqrt(|c| / s_band)

applied elementwise to the real and imaginary parts of both axes. The naive
divide-by-image-dimensions baseline is kept for comparison.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .spectral import SpectralVolume, _frozen

SCALE_FLOOR = 1e-8


@dataclass(frozen=True)
class NormalizationStats:
    """Per-band scale factors from corpus percentiles.

    One positive scalar per band, shared by the x/y axes and the real and
    imaginary parts.
    """

    scales: np.ndarray
    frequencies: np.ndarray
    percentile: float
    sample_count: int

    def __post_init__(self):
        s = np.asarray(self.scales, dtype=np.float64)
        f = np.asarray(self.frequencies, dtype=np.float64)
        if s.ndim != 1 or s.shape != f.shape:
            raise DataError("scales and frequencies must be 1-D and equal length")
        if np.any(s <= 0):
            raise DataError("scales must be positive")
        if not 0 < self.percentile < 1:
            raise DataError(f"percentile must be in (0, 1), got {self.percentile}")
        object.__setattr__(self, "scales", _frozen(s))
        object.__setattr__(self, "frequencies", _frozen(f))

    @property
    def num_bands(self) -> int:
        return self.scales.shape[0]


def compute_stats(
    corpus: list[SpectralVolume], percentile: float = 0.95
) -> NormalizationStats:
    """Per-band percentile of |coefficient| over a corpus.

    Pools the absolute values of all four real scalars (Re/Im of both axes)
    over every pixel of every sample, takes the given percentile per band by
    linear interpolation between order statistics, and clamps the result to
    a small positive floor so degenerate corpora stay invertible.
    """
    if not corpus:
        raise DataError("corpus is empty")
    if not 0 < percentile < 1:
        raise DataError(f"percentile must be in (0, 1), got {percentile}")
    K = corpus[0].num_bands
    if any(v.num_bands != K for v in corpus):
        raise DataError("corpus has mixed band counts")
    pooled = [
        np.abs(v.data.view(np.float64)).reshape(K, -1) for v in corpus
    ]
    values = np.concatenate(pooled, axis=1)
    scales = np.percentile(values, percentile * 100.0, axis=1)
    scales = np.maximum(scales, SCALE_FLOOR)
    return NormalizationStats(
        scales=scales,
        frequencies=corpus[0].frequencies,
        percentile=percentile,
        sample_count=len(corpus),
    )


def _check_bands(vol: SpectralVolume, stats: NormalizationStats) -> None:
    if vol.num_bands != stats.num_bands:
        raise DataError(
            f"volume has {vol.num_bands} bands, stats cover {stats.num_bands}"
        )


def normalize(vol: SpectralVolume, stats: NormalizationStats) -> SpectralVolume:
    """Map each real scalar c at band j to sign(c) * sqrt(|c| / s_j)."""
    _check_bands(vol, stats)
    s = stats.scales[:, None, None, None]
    re = vol.data.real
    im = vol.data.imag
    out = np.sign(re) * np.sqrt(np.abs(re) / s) + 1j * (
        np.sign(im) * np.sqrt(np.abs(im) / s)
    )
    return SpectralVolume(data=out, num_frames=vol.num_frames, fps=vol.fps)


def denormalize(vol: SpectralVolume, stats: NormalizationStats) -> SpectralVolume:
    """Exact inverse of :func:`normalize`: c' maps to sign(c') * c'^2 * s_j."""
    _check_bands(vol, stats)
    s = stats.scales[:, None, None, None]
    re = vol.data.real
    im = vol.data.imag
    out = np.sign(re) * re**2 * s + 1j * (np.sign(im) * im**2 * s)
    return SpectralVolume(data=out, num_frames=vol.num_frames, fps=vol.fps)


def naive_scale(vol: SpectralVolume, width: int, height: int) -> SpectralVolume:
    """Baseline normalization: x components / width, y components / height."""
    if width <= 0 or height <= 0:
        raise DataError(f"image dimensions must be positive, got {width}x{height}")
    out = vol.data.copy()
    out[..., 0] /= width
    out[..., 1] /= height
    return SpectralVolume(data=out, num_frames=vol.num_frames, fps=vol.fps)


def write_normalization_stats(stats: NormalizationStats, path) -> None:
    """Stats file: header with percentile and sample count, then one
    'band_index frequency_hz scale' line per band."""
    lines = [f"# percentile={stats.percentile:.6g} samples={stats.sample_count}"]
    for k, (f_hz, s) in enumerate(zip(stats.frequencies, stats.scales)):
        lines.append(f"{k} {f_hz:.9g} {s:.9g}")
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")


def read_normalization_stats(path) -> NormalizationStats:
    with open(path, "r", encoding="utf-8") as f:
        text = f.read().strip().splitlines()
    header = text[0]
    if not header.startswith("# percentile="):
        raise DataError(f"{path}: not a normalization stats file")
    percentile = float(header.split("percentile=")[1].split()[0])
    samples = int(header.split("samples=")[1].split()[0])
    rows = [line.split() for line in text[1:] if line.strip()]
    freqs = np.array([float(r[1]) for r in rows])
    scales = np.array([float(r[2]) for r in rows])
    return NormalizationStats(
        scales=scales, frequencies=freqs, percentile=percentile, sample_count=samples
    )
