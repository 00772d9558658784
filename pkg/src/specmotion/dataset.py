"""
Corpus construction
===================

Turns directories of video frames into a training corpus: every 10th frame
of each video becomes a start image, the following 149 frames give the
trajectories, bad samples are filtered out, and kept samples are written as
MOTEX001 + SPECVOL1 (K=16) pairs under out_dir/{motex,specvol}. Every
attempted sample lands in manifest.txt exactly once with its verdict.

Videos are split 90/10 into train/test by a hash of the video id; corpus
statistics (normalization scales, average power spectrum) are computed over
kept training samples only.
"""

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

from .errors import DataError
from .flow import FlowParams, extract_trajectories, filter_sample
from .images import load_frame_dir
from .io import (
    read_motion_texture,
    read_spectral_volume,
    write_motion_texture,
    write_spectral_volume,
    write_spectrum_stats,
)
from .normalize import compute_stats, write_normalization_stats
from .spectral import average_power_spectrum, fft_forward, truncate


@dataclass(frozen=True)
class CorpusParams:
    stride: int = 10
    horizon: int = 149
    bands: int = 16
    fps: float = 30.0
    flow: FlowParams = field(default_factory=FlowParams)


@dataclass(frozen=True)
class SampleRecord:
    sample_id: str
    video_id: str
    start: int
    verdict: str
    mean_magnitude: float
    motex_path: str
    specvol_path: str

    @property
    def kept(self) -> bool:
        return self.verdict == "kept"


def video_split(video_id: str) -> str:
    """Deterministic 90/10 train/test split keyed on the video id."""
    digest = hashlib.sha1(video_id.encode("utf-8")).digest()
    return "test" if digest[0] % 10 == 0 else "train"


def write_manifest(records: list[SampleRecord], path: str | Path) -> None:
    lines = ["# sample_id video_id start verdict mean_magnitude motex specvol"]
    for r in records:
        lines.append(
            f"{r.sample_id} {r.video_id} {r.start} {r.verdict} "
            f"{r.mean_magnitude:.6g} {r.motex_path} {r.specvol_path}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_manifest(path: str | Path) -> list[SampleRecord]:
    records = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        sid, vid, start, verdict, mag, motex, specvol = line.split()
        records.append(
            SampleRecord(sid, vid, int(start), verdict, float(mag), motex, specvol)
        )
    return records


def build_corpus(
    video_dirs: list[str | Path],
    out_dir: str | Path,
    params: CorpusParams = CorpusParams(),
    log=None,
) -> list[SampleRecord]:
    """Extract, filter and convert every admissible sample, write artifacts,
    and return the manifest records (also written to manifest.txt)."""
    out = Path(out_dir)
    motex_dir = out / "motex"
    specvol_dir = out / "specvol"
    (out / "stats").mkdir(parents=True, exist_ok=True)
    motex_dir.mkdir(parents=True, exist_ok=True)
    specvol_dir.mkdir(parents=True, exist_ok=True)

    records = []
    for video_dir in video_dirs:
        video_dir = Path(video_dir)
        video_id = video_dir.name
        try:
            frames2 = load_frame_dir(video_dir)
        except (DataError, OSError) as exc:
            if log:
                log(f"{video_id}: unreadable ({exc})")
            continue
        n = len(frames2)
        if n < params.horizon + 1:
            if log:
                log(f"{video_id}: only {n} frames, need {params.horizon + 1}")
            continue
        for start in range(0, n - params.horizon, params.stride):
            sample_id = f"{video_id}_{start:05d}"
            try:
                tex = extract_trajectories(frames2, start, params.horizon, params.flow)
            except (DataError, OSError) as exc:
                records.append(
                    SampleRecord(sample_id, video_id, start, f"error:{exc}", 0.0, "-", "-")
                )
                continue
            decision = filter_sample(tex)
            if decision.keep:
                motex_path = motex_dir / f"{sample_id}.motex"
                specvol_path = specvol_dir / f"{sample_id}.specvol"
                write_motion_texture(tex, motex_path)
                vol = fft_forward(tex, fps=params.fps)
                vol = truncate(vol, min(params.bands, vol.num_bands))
                write_spectral_volume(vol, specvol_path)
                record = SampleRecord(
                    sample_id, video_id, start, "kept", decision.mean_magnitude,
                    str(motex_path), str(specvol_path),
                )
            else:
                record = SampleRecord(
                    sample_id, video_id, start, f"rejected:{decision.reason}",
                    decision.mean_magnitude, "-", "-",
                )
            if log:
                log(f"{sample_id}: {record.verdict} mean={record.mean_magnitude:.3f}")
            records.append(record)
    write_manifest(records, out / "manifest.txt")
    return records


def corpus_stats(
    records: list[SampleRecord],
    out_dir: str | Path,
    percentile: float = 0.95,
    fps: float = 30.0,
):
    """Normalization scales and average power spectrum over kept train samples.

    Writes stats/normalization.txt and stats/spectrum.txt under out_dir and
    returns (NormalizationStats, SpectrumStats).
    """
    kept = [r for r in records if r.kept and video_split(r.video_id) == "train"]
    if not kept:
        raise DataError("no kept training samples in the manifest")
    volumes = [read_spectral_volume(r.specvol_path) for r in kept]
    textures = [read_motion_texture(r.motex_path) for r in kept]
    norm_stats = compute_stats(volumes, percentile=percentile)
    spec_stats = average_power_spectrum(textures, fps=fps)
    stats_dir = Path(out_dir) / "stats"
    stats_dir.mkdir(parents=True, exist_ok=True)
    write_normalization_stats(norm_stats, stats_dir / "normalization.txt")
    write_spectrum_stats(spec_stats, stats_dir / "spectrum.txt")
    return norm_stats, spec_stats
