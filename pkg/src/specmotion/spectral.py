"""
Motion textures and spectral volumes
====================================

Time-domain motion textures (per-pixel displacement trajectories) and their
frequency-domain counterpart, spectral volumes (per-pixel complex Fourier
coefficients), with the FFT bridge between them.

Conventions, fixed once for the whole package:
    - A trajectory is the sequence (F_1, ..., F_T); the displacement at t=0
      is identically zero and is never stored or transformed.
    - Forward DFT is unnormalized, the inverse carries the 1/T factor
      (numpy's default convention).
    - The DC bin is dropped on the forward pass and zero-filled on the
      inverse: the representation models oscillation about the input frame,
      so a nonzero temporal mean would be a global drift.
    - Band k of a volume holds FFT bin k+1; its physical frequency is
      (k+1) * fps / T in Hz.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

DEFAULT_FPS = 30.0


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class MotionTexture:
    """Per-pixel displacement trajectories, shape (T, H, W, 2) as (dx, dy) pixels.

    data[t - 1] is the displacement map for time t, relative to frame 0.
    """

    data: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.data, dtype=np.float64)
        if a.ndim != 4 or a.shape[0] < 1 or a.shape[3] != 2:
            raise DataError(f"motion texture must have shape (T, H, W, 2), got {a.shape}")
        if not np.all(np.isfinite(a)):
            raise DataError("motion texture contains non-finite values")
        object.__setattr__(self, "data", _frozen(a))

    @property
    def frames(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    def field_at(self, t: int) -> np.ndarray:
        """Displacement map F_t for t in 1..T."""
        if not 1 <= t <= self.frames:
            raise DataError(f"t={t} outside 1..{self.frames}")
        return self.data[t - 1]


@dataclass(frozen=True)
class SpectralVolume:
    """Per-pixel complex Fourier coefficients, shape (K, H, W, 2) as (S_x, S_y).

    Band k corresponds to FFT bin k+1 of a length-``num_frames`` trajectory
    sampled at ``fps``; bands are stored lowest frequency first.
    """

    data: np.ndarray
    num_frames: int
    fps: float = DEFAULT_FPS

    def __post_init__(self):
        a = np.asarray(self.data, dtype=np.complex128)
        if a.ndim != 4 or a.shape[0] < 1 or a.shape[3] != 2:
            raise DataError(f"spectral volume must have shape (K, H, W, 2), got {a.shape}")
        if not np.all(np.isfinite(a)):
            raise DataError("spectral volume contains non-finite values")
        if self.num_frames < 2:
            raise DataError(f"num_frames must be >= 2, got {self.num_frames}")
        if a.shape[0] > self.num_frames // 2:
            raise DataError(
                f"{a.shape[0]} bands cannot come from a {self.num_frames}-frame trajectory"
            )
        if self.fps <= 0:
            raise DataError(f"fps must be positive, got {self.fps}")
        object.__setattr__(self, "data", _frozen(a))

    @property
    def num_bands(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def frequencies(self) -> np.ndarray:
        """Physical band frequencies in Hz, strictly increasing from bin 1."""
        k = np.arange(1, self.num_bands + 1, dtype=np.float64)
        return k * self.fps / self.num_frames


@dataclass(frozen=True)
class SpectrumStats:
    """Mean Fourier amplitude per frequency over a corpus, x and y separately."""

    frequencies: np.ndarray
    mean_amp_x: np.ndarray
    mean_amp_y: np.ndarray
    sample_count: int = field(default=1)

    def __post_init__(self):
        f = np.asarray(self.frequencies, dtype=np.float64)
        ax = np.asarray(self.mean_amp_x, dtype=np.float64)
        ay = np.asarray(self.mean_amp_y, dtype=np.float64)
        if not (f.shape == ax.shape == ay.shape) or f.ndim != 1:
            raise DataError("spectrum stats arrays must be 1-D and equal length")
        if np.any(ax < 0) or np.any(ay < 0):
            raise DataError("amplitudes must be non-negative")
        object.__setattr__(self, "frequencies", _frozen(f))
        object.__setattr__(self, "mean_amp_x", _frozen(ax))
        object.__setattr__(self, "mean_amp_y", _frozen(ay))


def fft_forward(tex: MotionTexture, fps: float = DEFAULT_FPS) -> SpectralVolume:
    """Per-pixel temporal DFT of a motion texture.

    Returns the full non-redundant positive-frequency half, excluding DC:
    K = T // 2 bands (band k = FFT bin k+1). Forward transform is
    unnormalized.
    """
    T = tex.frames
    if T < 2:
        raise DataError(f"need at least 2 frames, got {T}")
    # rfft over the time axis gives bins 0..T//2; drop bin 0 (DC).
    spec = np.fft.rfft(tex.data, axis=0)[1 : T // 2 + 1]
    return SpectralVolume(data=spec, num_frames=T, fps=fps)


def truncate(vol: SpectralVolume, num_bands: int) -> SpectralVolume:
    """Keep the ``num_bands`` lowest-frequency bands."""
    if num_bands < 1:
        raise DataError(f"num_bands must be >= 1, got {num_bands}")
    if num_bands > vol.num_bands:
        raise DataError(f"cannot keep {num_bands} of {vol.num_bands} bands")
    if num_bands == vol.num_bands:
        return vol
    return SpectralVolume(data=vol.data[:num_bands], num_frames=vol.num_frames, fps=vol.fps)


def ifft_inverse(vol: SpectralVolume, num_frames: int | None = None) -> MotionTexture:
    """Inverse per-pixel temporal DFT back to a motion texture.

    High-frequency bands beyond those stored and the DC term are
    zero-filled; Hermitian symmetry makes the output real. The inverse
    carries the 1/T normalization.
    """
    T = vol.num_frames if num_frames is None else num_frames
    K = vol.num_bands
    if T < 2 * K:
        raise DataError(f"T={T} < 2*K={2 * K}: bands would alias")
    spec = np.zeros((T // 2 + 1,) + vol.data.shape[1:], dtype=np.complex128)
    spec[1 : K + 1] = vol.data
    out = np.fft.irfft(spec, n=T, axis=0)
    return MotionTexture(data=out)


def average_power_spectrum(
    corpus: list[MotionTexture], fps: float = DEFAULT_FPS
) -> SpectrumStats:
    """Mean Fourier amplitude per frequency across a corpus of motion textures.

    Amplitudes are |coefficient| averaged over all pixels and samples, for
    the x and y components separately, one entry per retained FFT bin.
    """
    if not corpus:
        raise DataError("corpus is empty")
    T = corpus[0].frames
    if any(t.frames != T for t in corpus):
        raise DataError("corpus has mixed trajectory lengths")
    sum_x = None
    sum_y = None
    count = 0
    freqs = None
    for tex in corpus:
        vol = fft_forward(tex, fps=fps)
        amp = np.abs(vol.data)
        sx = amp[..., 0].reshape(vol.num_bands, -1)
        sy = amp[..., 1].reshape(vol.num_bands, -1)
        if sum_x is None:
            sum_x = sx.sum(axis=1)
            sum_y = sy.sum(axis=1)
            freqs = vol.frequencies
        else:
            sum_x += sx.sum(axis=1)
            sum_y += sy.sum(axis=1)
        count += sx.shape[1]
    return SpectrumStats(
        frequencies=freqs,
        mean_amp_x=sum_x / count,
        mean_amp_y=sum_y / count,
        sample_count=len(corpus),
    )
