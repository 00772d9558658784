"""Binary file formats for motion textures and spectral volumes.

MOTEX001: 8-byte ASCII magic, little-endian u32 H, W, T, then T*H*W*2
little-endian f32 in [t][y][x][dx, dy] order.

SPECVOL1: 8-byte ASCII magic, little-endian u32 H, W, K, T, fps_milli
(frame rate x1000), then K*H*W*4 little-endian f32 in
[k][y][x][Re Sx, Im Sx, Re Sy, Im Sy] order.
"""

import struct
from pathlib import Path

import numpy as np

from .errors import DataError
from .spectral import MotionTexture, SpectralVolume, SpectrumStats

MOTEX_MAGIC = b"MOTEX001"
SPECVOL_MAGIC = b"SPECVOL1"


def write_motion_texture(tex: MotionTexture, path: str | Path) -> None:
    with open(path, "wb") as f:
        f.write(MOTEX_MAGIC)
        f.write(struct.pack("<III", tex.height, tex.width, tex.frames))
        f.write(tex.data.astype("<f4").tobytes())


def read_motion_texture(path: str | Path) -> MotionTexture:
    with open(path, "rb") as f:
        magic = f.read(8)
        if magic != MOTEX_MAGIC:
            raise DataError(f"{path}: bad magic {magic!r}, expected {MOTEX_MAGIC!r}")
        h, w, t = struct.unpack("<III", f.read(12))
        raw = np.frombuffer(f.read(t * h * w * 2 * 4), dtype="<f4")
    if raw.size != t * h * w * 2:
        raise DataError(f"{path}: truncated payload")
    return MotionTexture(data=raw.reshape(t, h, w, 2).astype(np.float64))


def write_spectral_volume(vol: SpectralVolume, path: str | Path) -> None:
    fps_milli = int(round(vol.fps * 1000))
    interleaved = np.empty(vol.data.shape[:3] + (4,), dtype="<f4")
    interleaved[..., 0] = vol.data[..., 0].real
    interleaved[..., 1] = vol.data[..., 0].imag
    interleaved[..., 2] = vol.data[..., 1].real
    interleaved[..., 3] = vol.data[..., 1].imag
    with open(path, "wb") as f:
        f.write(SPECVOL_MAGIC)
        f.write(struct.pack("<IIIII", vol.height, vol.width, vol.num_bands,
                            vol.num_frames, fps_milli))
        f.write(interleaved.tobytes())


def read_spectral_volume(path: str | Path) -> SpectralVolume:
    with open(path, "rb") as f:
        magic = f.read(8)
        if magic != SPECVOL_MAGIC:
            raise DataError(f"{path}: bad magic {magic!r}, expected {SPECVOL_MAGIC!r}")
        h, w, k, t, fps_milli = struct.unpack("<IIIII", f.read(20))
        raw = np.frombuffer(f.read(k * h * w * 4 * 4), dtype="<f4")
    if raw.size != k * h * w * 4:
        raise DataError(f"{path}: truncated payload")
    quad = raw.reshape(k, h, w, 4).astype(np.float64)
    data = np.empty((k, h, w, 2), dtype=np.complex128)
    data[..., 0] = quad[..., 0] + 1j * quad[..., 1]
    data[..., 1] = quad[..., 2] + 1j * quad[..., 3]
    return SpectralVolume(data=data, num_frames=t, fps=fps_milli / 1000.0)


def write_spectrum_stats(stats: SpectrumStats, path: str | Path) -> None:
    """Plain-text spectrum stats: header, then 'band freq_hz amp_x amp_y' lines."""
    lines = [f"# spectrum_stats samples={stats.sample_count} bands={len(stats.frequencies)}"]
    for k, (f_hz, ax, ay) in enumerate(
        zip(stats.frequencies, stats.mean_amp_x, stats.mean_amp_y)
    ):
        lines.append(f"{k} {f_hz:.9g} {ax:.9g} {ay:.9g}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_spectrum_stats(path: str | Path) -> SpectrumStats:
    text = Path(path).read_text(encoding="utf-8").strip().splitlines()
    header = text[0]
    if not header.startswith("# spectrum_stats"):
        raise DataError(f"{path}: not a spectrum stats file")
    samples = int(header.split("samples=")[1].split()[0])
    rows = [line.split() for line in text[1:] if line.strip()]
    freqs = np.array([float(r[1]) for r in rows])
    ax = np.array([float(r[2]) for r in rows])
    ay = np.array([float(r[3]) for r in rows])
    return SpectrumStats(frequencies=freqs, mean_amp_x=ax, mean_amp_y=ay,
                         sample_count=samples)
