"""Operator entry points: extract motion, convert to spectra, compute corpus
statistics, animate stills, sample seamless loops, run headless interactive
simulations, and serve the live session API.

Progress goes to stderr; machine-readable results go to stdout."""

import os
import sys
from pathlib import Path

import click
import numpy as np

from .dataset import CorpusParams, build_corpus, corpus_stats, read_manifest
from .errors import DataError
from .flow import FlowParams, extract_trajectories, filter_sample
from .images import load_frame_dir, load_image, save_frame_dir
from .io import (
    read_motion_texture,
    read_spectral_volume,
    write_motion_texture,
    write_spectral_volume,
)
from .modal import OscillatorParams, SessionLoop, parse_event
from .normalize import denormalize, normalize, read_normalization_stats
from .render import RenderConfig, animate, synthesize_frame
from .sampling import (
    GaussianOracleDenoiser,
    GuidanceConfig,
    NoiseSchedule,
    decode_loop_loss,
    sample_looping,
    volume_to_latent,
)
from .spectral import fft_forward, ifft_inverse, truncate


def _progress(msg: str) -> None:
    click.echo(msg, err=True)


def _fail(exc: Exception) -> None:
    raise click.ClickException(str(exc))


@click.group()
def main():
    """Frequency-domain scene motion toolkit."""


flow_options = [
    click.option("--alpha", default=15.0, show_default=True, help="Smoothness weight."),
    click.option("--iterations", default=100, show_default=True, help="Solver iterations per warp."),
    click.option("--warps", default=3, show_default=True, help="Warp refinements per level."),
    click.option("--min-level", default=16, show_default=True, help="Coarsest pyramid size."),
]


def add_options(options):
    def wrap(fn):
        for opt in reversed(options):
            fn = opt(fn)
        return fn

    return wrap


@main.command()
@click.argument("video_dirs", nargs=-1, required=True,
                type=click.Path(exists=True, file_okay=False))
@click.argument("out", type=click.Path())
@click.option("--single", is_flag=True,
              help="Extract one sample from one video into a single MOTEX001 file.")
@click.option("--start", default=0, show_default=True, help="Start frame (single mode).")
@click.option("--frames", default=149, show_default=True, help="Trajectory horizon T.")
@click.option("--stride", default=10, show_default=True, help="Start-frame stride (corpus mode).")
@click.option("--bands", default=16, show_default=True, help="Spectral bands kept (corpus mode).")
@click.option("--fps", default=30.0, show_default=True, help="Source frame rate.")
@add_options(flow_options)
def extract(video_dirs, out, single, start, frames, stride, bands, fps,
            alpha, iterations, warps, min_level):
    """Extract motion trajectories from videos (directories of frame_*.png).

    Corpus mode (default): sample starts every --stride frames, filter, and
    write MOTEX001 + SPECVOL1 pairs plus a manifest under OUT. Single mode:
    write one MOTEX001 file to OUT."""
    params = FlowParams(alpha=alpha, iterations=iterations, warps=warps,
                        min_level=min_level)
    try:
        if single:
            if len(video_dirs) != 1:
                raise DataError("single mode takes exactly one video directory")
            video = load_frame_dir(video_dirs[0])
            tex = extract_trajectories(video, start, frames, params)
            decision = filter_sample(tex)
            write_motion_texture(tex, out)
            click.echo(f"{out} {decision.reason} {decision.mean_magnitude:.6g}")
        else:
            corpus = CorpusParams(stride=stride, horizon=frames, bands=bands,
                                  fps=fps, flow=params)
            records = build_corpus(list(video_dirs), out, corpus, log=_progress)
            kept = sum(r.kept for r in records)
            for r in records:
                click.echo(f"{r.sample_id} {r.verdict} {r.mean_magnitude:.6g}")
            _progress(f"kept {kept}/{len(records)} samples -> {out}")
    except (DataError, OSError) as exc:
        _fail(exc)


@main.command()
@click.argument("motex", type=click.Path(exists=True, dir_okay=False))
@click.argument("specvol", type=click.Path())
@click.option("--bands", default=16, show_default=True, help="Low-frequency bands kept.")
@click.option("--fps", default=30.0, show_default=True, help="Source frame rate.")
def spectral(motex, specvol, bands, fps):
    """Convert a MOTEX001 motion texture into a SPECVOL1 spectral volume."""
    try:
        tex = read_motion_texture(motex)
        vol = fft_forward(tex, fps=fps)
        vol = truncate(vol, min(bands, vol.num_bands))
        write_spectral_volume(vol, specvol)
    except (DataError, OSError) as exc:
        _fail(exc)
    click.echo(f"{specvol} bands={vol.num_bands} frames={vol.num_frames}")


@main.command()
@click.argument("corpus_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--percentile", default=0.95, show_default=True,
              help="Per-band magnitude percentile for normalization scales.")
@click.option("--fps", default=30.0, show_default=True)
def stats(corpus_dir, percentile, fps):
    """Compute normalization and spectrum statistics for a built corpus."""
    try:
        records = read_manifest(Path(corpus_dir) / "manifest.txt")
        norm_stats, _ = corpus_stats(records, corpus_dir, percentile=percentile, fps=fps)
    except (DataError, OSError) as exc:
        _fail(exc)
    click.echo(f"{corpus_dir}/stats/normalization.txt bands={norm_stats.num_bands}")
    click.echo(f"{corpus_dir}/stats/spectrum.txt")


@main.command("animate")
@click.argument("image", type=click.Path(exists=True, dir_okay=False))
@click.argument("specvol", type=click.Path(exists=True, dir_okay=False))
@click.argument("out_dir", type=click.Path())
@click.option("--stats", "stats_file", type=click.Path(exists=True, dir_okay=False),
              help="Normalization stats; when given, the volume is treated as normalized.")
@click.option("--magnify", default=1.0, show_default=True, help="Motion amplitude factor.")
@click.option("--slowmo", default=1, show_default=True, help="Slow-motion factor (frames x N).")
@click.option("--levels", default=3, show_default=True, help="Splatting pyramid levels.")
@click.option("--beta", default=1.0, show_default=True, help="Softmax splatting temperature.")
def animate_cmd(image, specvol, out_dir, stats_file, magnify, slowmo, levels, beta):
    """Animate a still image along a spectral volume into PNG frames."""
    try:
        img = load_image(image)
        vol = read_spectral_volume(specvol)
        if stats_file:
            vol = denormalize(vol, read_normalization_stats(stats_file))
        tex = ifft_inverse(vol)
        cfg = RenderConfig(pyramid_levels=levels, beta=beta, magnify=magnify,
                           slowmo=slowmo)
        frames = animate(img, tex, cfg)
        save_frame_dir(frames, out_dir)
    except (DataError, OSError) as exc:
        _fail(exc)
    click.echo(f"{out_dir} frames={len(frames)}")


@main.command()
@click.argument("image", type=click.Path(exists=True, dir_okay=False))
@click.argument("specvol", type=click.Path(exists=True, dir_okay=False))
@click.argument("out_dir", type=click.Path())
@click.option("--stats", "stats_file", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Normalization stats for the spectral domain.")
@click.option("--w", default=1.75, show_default=True, help="Classifier-free guidance weight.")
@click.option("--u", default=200.0, show_default=True, help="Motion self-guidance weight.")
@click.option("--steps", default=500, show_default=True, help="DDIM steps.")
@click.option("--recurrence", default=2, show_default=True, help="Self-recurrence iterations per step.")
@click.option("--seed", default=0, show_default=True)
@click.option("--data-std", default=0.5, show_default=True,
              help="Oracle denoiser standard deviation around the input volume.")
@click.option("--grad-block", default=None, type=int,
              help="Loop-gradient coordinate block size (default: full gradient). "
                   "Small blocks on large volumes degrade loop quality; prefer "
                   "small volumes with the full gradient.")
@click.option("--frames", "frames_out", is_flag=True, help="Also render the looping frames.")
def loop(image, specvol, out_dir, stats_file, w, u, steps, recurrence, seed,
         data_std, grad_block, frames_out):
    """Project a spectral volume onto a seamless loop with guided sampling.

    The input volume centers an analytic oracle denoiser; guided DDIM
    (weight u) pulls the sample toward loop consistency. Reports the decoded
    loop loss for the guided run and a paired unguided (u=0) run."""
    try:
        img = load_image(image)
        vol = read_spectral_volume(specvol)
        norm_stats = read_normalization_stats(stats_file)
        normalized = normalize(vol, norm_stats)
        mean = volume_to_latent(normalized)[None]
        schedule = NoiseSchedule.cosine(1000)
        oracle = GaussianOracleDenoiser(mean=mean, schedule=schedule, data_std=data_std)
        shape = mean.shape
        losses = {}
        volumes = {}
        for label, weight in (("unguided", 0.0), ("guided", u)):
            cfg = GuidanceConfig(w=w, u=weight, steps=steps, recurrence=recurrence,
                                 schedule=schedule, grad_block=grad_block)
            _progress(f"sampling {label} (u={weight}) ...")
            sampled = sample_looping(oracle, "image", cfg, shape, norm_stats,
                                     vol.num_frames, fps=vol.fps, seed=seed)
            losses[label] = decode_loop_loss(volume_to_latent(sampled), norm_stats,
                                             vol.num_frames)
            volumes[label] = denormalize(sampled, norm_stats)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_spectral_volume(volumes["guided"], out / "looping.specvol")
        # sidecar: which normalization stats this sample was drawn under
        (out / "looping.stats_ref").write_text(
            f"stats {Path(stats_file).resolve()}\npercentile {norm_stats.percentile}\n"
        )
        if frames_out:
            tex = ifft_inverse(volumes["guided"])
            save_frame_dir(animate(img, tex), out / "frames")
    except (DataError, OSError) as exc:
        _fail(exc)
    reduction = 100.0 * (1.0 - losses["guided"] / max(losses["unguided"], 1e-30))
    click.echo(f"loop_loss guided={losses['guided']:.6g} "
               f"unguided={losses['unguided']:.6g} reduction={reduction:.1f}%")


@main.command()
@click.argument("image", type=click.Path(exists=True, dir_okay=False))
@click.argument("specvol", type=click.Path(exists=True, dir_okay=False))
@click.argument("events", type=click.Path(exists=True, dir_okay=False))
@click.argument("out_dir", type=click.Path())
@click.option("--duration", default=4.0, show_default=True, help="Seconds simulated.")
@click.option("--fps", default=25.0, show_default=True, help="Output frame rate.")
@click.option("--zeta", default=0.05, show_default=True, help="Modal damping ratio.")
@click.option("--mass", default=1.0, show_default=True, help="Modal mass.")
@click.option("--force-scale", default=1.0, show_default=True)
@click.option("--stats", "stats_file", type=click.Path(exists=True, dir_okay=False),
              help="Normalization stats; when given, the volume is denormalized first.")
def simulate(image, specvol, events, out_dir, duration, fps, zeta, mass,
             force_scale, stats_file):
    """Headless interactive run from an event script ("t_ms kind x y fx fy"
    per line); writes PNG frames and a telemetry log."""
    try:
        img = load_image(image)
        vol = read_spectral_volume(specvol)
        if stats_file:
            vol = denormalize(vol, read_normalization_stats(stats_file))
        if (vol.height, vol.width) != img.shape[:2]:
            raise DataError("volume and image dimensions differ")
        schedule = []
        for line in Path(events).read_text().splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            t_ms, ev = parse_event(line)
            schedule.append((t_ms / 1000.0, ev))
        params = OscillatorParams.from_volume(vol, zeta=zeta, mass=mass)
        loop_ = SessionLoop(vol, params, output_fps=fps, force_scale=force_scale)
        pending = sorted(schedule, key=lambda item: item[0])
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        telemetry = []
        frames = []
        n_frames = int(round(duration * fps))
        from .render import compute_weights

        weights = compute_weights(ifft_inverse(vol))
        for frame_idx in range(n_frames):
            tick_start = frame_idx * loop_.tick_interval
            while pending and pending[0][0] <= tick_start + 1e-12:
                loop_.apply(pending.pop(0)[1])
            field = loop_.tick()
            frames.append(synthesize_frame(img, field, weights,
                                           RenderConfig(pyramid_levels=2)))
            max_disp = float(np.linalg.norm(field, axis=-1).max())
            energies = " ".join(f"{e:.6g}" for e in loop_.energies())
            telemetry.append(f"{loop_.tick_index} {max_disp:.6g} {energies}")
        save_frame_dir(frames, out / "frames")
        (out / "telemetry.txt").write_text("\n".join(telemetry) + "\n")
    except (DataError, OSError) as exc:
        _fail(exc)
    click.echo(f"{out_dir} frames={len(frames)} telemetry={out / 'telemetry.txt'}")


@main.command()
@click.option("--bind", default=None, help="HOST:PORT (default 127.0.0.1:$PORT or 8000).")
def serve(bind):
    """Start the interactive-dynamics session server."""
    import uvicorn

    from .service import create_app

    if bind:
        host, _, port = bind.rpartition(":")
        host = host or "127.0.0.1"
        port = int(port)
    else:
        host = "127.0.0.1"
        port = int(os.environ.get("PORT", "8000"))
    _progress(f"serving on {host}:{port}")
    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    main()
