import numpy as np
import pytest
from click.testing import CliRunner

from specmotion.cli import main
from specmotion.images import load_frame_dir, load_image, save_image
from specmotion.io import (
    read_motion_texture,
    read_spectral_volume,
    write_motion_texture,
    write_spectral_volume,
)
from specmotion.normalize import compute_stats, write_normalization_stats
from specmotion.spectral import MotionTexture, SpectralVolume


@pytest.fixture
def runner():
    return CliRunner()


def make_image(tmp_path, h=12, w=12, seed=0, name="img.png"):
    rng = np.random.default_rng(seed)
    path = tmp_path / name
    save_image(rng.uniform(size=(h, w, 3)), path)
    return path


class TestSpectralAndAnimate:
    def test_zero_motion_roundtrip_gives_input_image(self, runner, tmp_path):
        tex = MotionTexture(data=np.zeros((8, 12, 12, 2)))
        motex = tmp_path / "zero.motex"
        write_motion_texture(tex, motex)
        specvol = tmp_path / "zero.specvol"
        result = runner.invoke(main, ["spectral", str(motex), str(specvol), "--bands", "4"])
        assert result.exit_code == 0, result.output
        assert "bands=4" in result.output

        image = make_image(tmp_path)
        out_dir = tmp_path / "frames"
        result = runner.invoke(main, ["animate", str(image), str(specvol), str(out_dir)])
        assert result.exit_code == 0, result.output
        frames = load_frame_dir(out_dir)
        assert len(frames) == 8
        original = load_image(image)
        for frame in frames:
            np.testing.assert_array_equal(frame, original)

    def test_slowmo_doubles_frames(self, runner, tmp_path):
        rng = np.random.default_rng(1)
        data = 0.4 * rng.normal(size=(4, 12, 12, 2))
        motex = tmp_path / "m.motex"
        write_motion_texture(MotionTexture(data=data), motex)
        specvol = tmp_path / "m.specvol"
        assert runner.invoke(main, ["spectral", str(motex), str(specvol), "--bands", "2"]).exit_code == 0
        image = make_image(tmp_path, seed=2)
        out_dir = tmp_path / "slow"
        result = runner.invoke(
            main, ["animate", str(image), str(specvol), str(out_dir), "--slowmo", "2"]
        )
        assert result.exit_code == 0, result.output
        assert len(list(out_dir.glob("frame_*.png"))) == 8  # 2 x T=4

    def test_bad_input_exits_nonzero(self, runner, tmp_path):
        bad = tmp_path / "bad.motex"
        bad.write_bytes(b"NOTMOTEX" + b"\x00" * 16)
        result = runner.invoke(main, ["spectral", str(bad), str(tmp_path / "o.specvol")])
        assert result.exit_code != 0
        assert "bad magic" in result.output


class TestExtract:
    def test_single_mode_recovers_translation(self, runner, tmp_path, make_video_dir):
        offsets = [(0.4 * t, 0.0) for t in range(7)]
        video = make_video_dir("trans", 40, 40, offsets, seed=3)
        out = tmp_path / "trans.motex"
        result = runner.invoke(
            main,
            ["extract", "--single", str(video), str(out), "--frames", "6",
             "--iterations", "60", "--warps", "2"],
        )
        assert result.exit_code == 0, result.output
        tex = read_motion_texture(out)
        assert tex.frames == 6
        for t in range(1, 7):
            interior = tex.field_at(t)[8:-8, 8:-8]
            err = np.mean(np.hypot(interior[..., 0] - 0.4 * t, interior[..., 1]))
            assert err < 0.25

    def test_corpus_mode_writes_manifest(self, runner, tmp_path, make_video_dir):
        video = make_video_dir("corpusvid", 16, 16, [(0.0, 0.0)] * 40, seed=4)
        out = tmp_path / "corpus"
        result = runner.invoke(
            main,
            ["extract", str(video), str(out), "--frames", "30", "--stride", "10",
             "--bands", "8", "--iterations", "4", "--warps", "1"],
        )
        assert result.exit_code == 0, result.output
        assert (out / "manifest.txt").exists()
        assert len(list((out / "specvol").glob("*.specvol"))) > 0
        result = runner.invoke(main, ["stats", str(out)])
        assert result.exit_code == 0, result.output
        assert (out / "stats" / "normalization.txt").exists()
        assert (out / "stats" / "spectrum.txt").exists()


class TestLoop:
    def test_guided_beats_unguided(self, runner, tmp_path):
        rng = np.random.default_rng(5)
        h = w = 4
        data = 3.0 * (rng.normal(size=(2, h, w, 2)) + 1j * rng.normal(size=(2, h, w, 2)))
        vol = SpectralVolume(data=data, num_frames=16, fps=30.0)
        specvol = tmp_path / "v.specvol"
        write_spectral_volume(vol, specvol)
        stats = compute_stats([vol])
        stats_file = tmp_path / "stats.txt"
        write_normalization_stats(stats, stats_file)
        image = make_image(tmp_path, h, w, seed=6)
        out_dir = tmp_path / "loop"
        result = runner.invoke(
            main,
            ["loop", str(image), str(specvol), str(out_dir), "--stats", str(stats_file),
             "--steps", "250", "--recurrence", "2", "--seed", "3"],
        )
        assert result.exit_code == 0, result.output
        line = [l for l in result.output.splitlines() if l.startswith("loop_loss")][0]
        fields = dict(kv.split("=") for kv in line.split()[1:])
        assert float(fields["guided"]) < float(fields["unguided"])
        assert (out_dir / "looping.specvol").exists()
        sampled = read_spectral_volume(out_dir / "looping.specvol")
        assert sampled.num_bands == 2
        sidecar = (out_dir / "looping.stats_ref").read_text()
        assert "stats" in sidecar and "percentile 0.95" in sidecar


class TestSimulate:
    def test_event_script_produces_frames_and_decaying_telemetry(
        self, runner, tmp_path
    ):
        rng = np.random.default_rng(7)
        h = w = 12
        data = 4.0 * (rng.normal(size=(1, h, w, 2)) + 1j * rng.normal(size=(1, h, w, 2)))
        vol = SpectralVolume(data=data, num_frames=15, fps=30.0)  # 2 Hz band
        specvol = tmp_path / "v.specvol"
        write_spectral_volume(vol, specvol)
        image = make_image(tmp_path, h, w, seed=8)
        events = tmp_path / "events.txt"
        events.write_text("# poke once\n0 impulse 6 6 0 -1\n")
        out_dir = tmp_path / "sim"
        result = runner.invoke(
            main,
            ["simulate", str(image), str(specvol), str(events), str(out_dir),
             "--duration", "4", "--fps", "25", "--force-scale", "0.02"],
        )
        assert result.exit_code == 0, result.output
        assert len(list((out_dir / "frames").glob("frame_*.png"))) == 100
        telemetry = (out_dir / "telemetry.txt").read_text().splitlines()
        assert len(telemetry) == 100
        disps = np.array([float(line.split()[1]) for line in telemetry])
        assert disps.max() > 0
        win = 13  # one 2 Hz period at 25 fps
        envelope = [disps[i : i + win].max() for i in range(0, 90, win)]
        assert all(a > b for a, b in zip(envelope, envelope[1:]))

    def test_determinism(self, runner, tmp_path):
        rng = np.random.default_rng(9)
        data = 2.0 * (rng.normal(size=(1, 8, 8, 2)) + 1j * rng.normal(size=(1, 8, 8, 2)))
        vol = SpectralVolume(data=data, num_frames=15, fps=30.0)
        specvol = tmp_path / "v.specvol"
        write_spectral_volume(vol, specvol)
        image = make_image(tmp_path, 8, 8, seed=10)
        events = tmp_path / "events.txt"
        events.write_text("100 impulse 4 4 1 0\n")
        outs = []
        for name in ("a", "b"):
            out_dir = tmp_path / name
            result = runner.invoke(
                main,
                ["simulate", str(image), str(specvol), str(events), str(out_dir),
                 "--duration", "1", "--force-scale", "0.05"],
            )
            assert result.exit_code == 0, result.output
            outs.append((out_dir / "telemetry.txt").read_text())
        assert outs[0] == outs[1]


def test_help_on_every_subcommand(runner):
    for cmd in ("extract", "spectral", "stats", "animate", "loop", "simulate", "serve"):
        result = runner.invoke(main, [cmd, "--help"])
        assert result.exit_code == 0
        assert "Usage" in result.output
