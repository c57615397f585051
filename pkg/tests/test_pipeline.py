from __future__ import annotations

import hashlib

import numpy as np
import pytest

from helpers import load_png, tiny_config
from promptvid.errors import CheckpointMismatchError, PipelineError
from promptvid.frames import FrameState
from promptvid.guidance import ScorerHandle, make_surrogate_scorer
from promptvid.pipeline import (
    Checkpoint,
    FrameRecord,
    VideoManifest,
    denoiser_from_config,
    generate,
    load_checkpoint,
    load_manifest,
    measure_throughput,
    resume,
    scorer_from_config,
)


def run_tiny(out_dir, progress=None, **kwargs):
    config = tiny_config(out_dir, **kwargs)
    scorer = scorer_from_config(config)
    denoiser = denoiser_from_config(config)
    return config, generate(config, scorer, denoiser, progress=progress)


def frame_hashes(manifest):
    return [(r.raw_sha256, r.post_sha256) for r in manifest.records]


class Interrupt(Exception):
    """Raised from a progress sink to simulate an interrupted process."""


def interrupt_after(k):
    def sink(event):
        if event.frame_index == k:
            raise Interrupt(f"stop after frame {k}")

    return sink


class TestGenerate:
    def test_counting_contract(self, tmp_path):
        out = tmp_path / "run"
        _, manifest = run_tiny(out)
        assert manifest.frame_count == 6
        assert len(list((out / "raw").glob("frame_*.png"))) == 6
        assert len(list((out / "post").glob("frame_*.png"))) == 6
        assert (out / "manifest.json").exists()
        assert [r.index for r in manifest.records] == list(range(6))

    def test_same_seed_same_hashes(self, tmp_path):
        _, first = run_tiny(tmp_path / "a")
        _, second = run_tiny(tmp_path / "b")
        assert frame_hashes(first) == frame_hashes(second)

    def test_different_seed_different_hashes(self, tmp_path):
        _, first = run_tiny(tmp_path / "a")
        _, second = run_tiny(tmp_path / "b", seed=1)
        assert frame_hashes(first) != frame_hashes(second)

    def test_frame_zero_uses_only_first_prompt(self, tmp_path):
        _, manifest = run_tiny(tmp_path / "run")
        assert manifest.records[0].prompts == [{"index": 0, "weight": 1.0}]

    def test_recorded_hashes_match_files_and_no_orphans(self, tmp_path):
        out = tmp_path / "run"
        _, manifest = run_tiny(out)
        for sub, attr in (("raw", "raw_sha256"), ("post", "post_sha256")):
            files = sorted((out / sub).glob("*"))
            assert len(files) == manifest.frame_count
            for record, path in zip(manifest.records, files):
                assert path.name == f"frame_{record.index:05d}.png"
                assert getattr(record, attr) == hashlib.sha256(path.read_bytes()).hexdigest()

    def test_progress_events_arrive_in_frame_order(self, tmp_path):
        seen = []
        run_tiny(tmp_path / "run", progress=lambda e: seen.append(e.frame_index))
        assert seen == list(range(6))

    def test_manifest_round_trips_through_json(self, tmp_path):
        out = tmp_path / "run"
        _, manifest = run_tiny(out)
        loaded = load_manifest(out / "manifest.json")
        assert loaded.config == manifest.config
        assert frame_hashes(loaded) == frame_hashes(manifest)
        assert loaded.total_wall_seconds == pytest.approx(manifest.total_wall_seconds)

    def test_losses_recorded_per_frame(self, tmp_path):
        _, manifest = run_tiny(tmp_path / "run")
        for record in manifest.records:
            assert record.loss_initial is not None
            assert record.loss_final is not None
            assert np.isfinite(record.loss_initial) and np.isfinite(record.loss_final)


class TestAbortAndResume:
    def test_interrupt_leaves_partial_outputs_and_checkpoint(self, tmp_path):
        out = tmp_path / "run"
        with pytest.raises(Interrupt):
            run_tiny(out, progress=interrupt_after(2))
        assert len(list((out / "raw").glob("*.png"))) == 3
        assert not (out / "manifest.json").exists()
        checkpoint = load_checkpoint(out / "checkpoint.bin")
        assert checkpoint.next_index == 3
        assert len(checkpoint.records) == 3

    def test_resume_reproduces_uninterrupted_run(self, tmp_path):
        _, full = run_tiny(tmp_path / "full")

        out = tmp_path / "resumed"
        with pytest.raises(Interrupt):
            run_tiny(out, progress=interrupt_after(2))
        config = tiny_config(out)
        checkpoint = load_checkpoint(out / "checkpoint.bin")
        manifest = resume(checkpoint, config, scorer_from_config(config), denoiser_from_config(config))

        assert frame_hashes(manifest) == frame_hashes(full)
        for t in range(6):
            a = (tmp_path / "full" / "raw" / f"frame_{t:05d}.png").read_bytes()
            b = (out / "raw" / f"frame_{t:05d}.png").read_bytes()
            assert a == b
        assert (out / "manifest.json").exists()

    def test_resume_refuses_mismatched_config(self, tmp_path):
        out = tmp_path / "run"
        with pytest.raises(Interrupt):
            run_tiny(out, progress=interrupt_after(1))
        checkpoint = load_checkpoint(out / "checkpoint.bin")
        altered = tiny_config(out, temperature=90.0)
        with pytest.raises(CheckpointMismatchError):
            resume(checkpoint, altered, scorer_from_config(altered), denoiser_from_config(altered))

    def test_resume_at_total_finalizes_manifest(self, tmp_path):
        out = tmp_path / "run"
        config, manifest = run_tiny(out)
        checkpoint = load_checkpoint(out / "checkpoint.bin")
        assert checkpoint.next_index == 6
        again = resume(checkpoint, config, scorer_from_config(config), denoiser_from_config(config))
        assert again.frame_count == 6
        assert frame_hashes(again) == frame_hashes(manifest)

    def test_module_error_aborts_with_frame_index(self, tmp_path):
        class FailingScorer(ScorerHandle):
            kind = "failing"
            embedding_dim = 8

            def __init__(self):
                self._inner = make_surrogate_scorer(0, 8)
                self.frames_scored = 0

            def embed_text(self, prompt):
                return self._inner.embed_text(prompt)

            def score_views(self, views, weighted_targets):
                if self.frames_scored >= 3:
                    return float("nan"), np.zeros_like(views)
                return self._inner.score_views(views, weighted_targets)

        out = tmp_path / "run"
        config = tiny_config(out, optimizer={
            "iterations_first_frame": 1, "iterations_per_frame": 1,
            "views": 2, "scorer_input_size": 32,
        })
        scorer = FailingScorer()

        # the progress sink tracks completed frames so the scorer fails at frame 3
        def sink(event):
            scorer.frames_scored = event.frame_index + 1

        with pytest.raises(PipelineError) as excinfo:
            generate(config, scorer, denoiser_from_config(config), progress=sink)
        assert excinfo.value.frame_index == 3
        assert load_checkpoint(out / "checkpoint.bin").next_index == 3
        assert len(list((out / "raw").glob("*.png"))) == 3


class TestMeasureThroughput:
    @staticmethod
    def synthetic_manifest(n_frames=6, optimize_wall=3.0):
        per_frame = optimize_wall / n_frames
        records = [
            FrameRecord(
                index=i,
                prompts=[{"index": 0, "weight": 1.0}],
                loss_initial=1.0,
                loss_final=0.5,
                seconds_optimize=per_frame,
                seconds_scorer=per_frame * 0.9,
                seconds_denoise=0.01,
                seconds_persist=0.02,
                raw_sha256="r",
                post_sha256="p",
            )
            for i in range(n_frames)
        ]
        return VideoManifest(
            config={"prompts": [{"text": "a dog", "frames": n_frames}]},
            config_hash="h",
            records=records,
            total_wall_seconds=optimize_wall + 0.2,
            optimize_wall_seconds=optimize_wall,
            scorer_wall_seconds=optimize_wall * 0.9,
            denoise_wall_seconds=0.06,
            persist_wall_seconds=0.12,
            measured_fps_optimize=n_frames / optimize_wall,
            measured_fps_total=n_frames / (optimize_wall + 0.2),
            encoder_command="ffmpeg ...",
        )

    def test_six_frames_in_three_seconds_is_two_fps(self):
        report = measure_throughput(self.synthetic_manifest())
        assert report.fps_optimize == pytest.approx(2.0)

    def test_per_frame_times_sum_below_wall(self, tmp_path):
        _, manifest = run_tiny(tmp_path / "run")
        report = measure_throughput(manifest)
        assert sum(report.per_frame_seconds) <= manifest.total_wall_seconds
        assert 0.0 <= report.scorer_fraction <= 1.0
        assert 0.0 <= report.overhead_fraction <= 1.0

    def test_incomplete_manifest_rejected(self):
        manifest = self.synthetic_manifest()
        manifest.records.pop()
        with pytest.raises(ValueError, match="incomplete"):
            measure_throughput(manifest)

    def test_manifest_reports_measured_fps(self, tmp_path):
        _, manifest = run_tiny(tmp_path / "run")
        assert manifest.measured_fps_optimize > 0
        assert manifest.measured_fps_total > 0
        assert manifest.measured_fps_optimize == pytest.approx(
            manifest.frame_count / manifest.optimize_wall_seconds
        )


class TestFrameChaining:
    def test_warm_start_reads_previous_raw_frame(self, tmp_path):
        # temperature 0: no warm noise, so optimization starts from the raw
        # previous frame; consecutive raw frames must stay close
        out = tmp_path / "run"
        _, manifest = run_tiny(out, temperature=0.0)
        frames = [load_png(out / "raw" / f"frame_{t:05d}.png") for t in range(6)]
        drifts = [np.abs(b - a).mean() for a, b in zip(frames, frames[1:])]
        assert max(drifts) < 0.2

    def test_checkpoint_stores_exact_float_pixels(self, tmp_path):
        out = tmp_path / "run"
        config, _ = run_tiny(out)
        checkpoint = load_checkpoint(out / "checkpoint.bin")
        assert checkpoint.prev_pixels.dtype == np.float64
        quantized = np.rint(checkpoint.prev_pixels * 255).astype(np.uint8)
        on_disk = np.asarray(load_png(out / "raw" / "frame_00005.png") * 255).astype(np.uint8)
        np.testing.assert_array_equal(quantized, on_disk)
