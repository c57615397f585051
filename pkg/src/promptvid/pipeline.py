"""End-to-end generation: schedule, optimize, post-process, persist, resume.

Frames are generated strictly sequentially (frame t+1 warm-starts from frame
t's finalized raw pixels). All randomness flows through per-frame streams
keyed by (master seed, frame index, purpose), so a run is bit-reproducible
and an interrupted run resumed from its checkpoint matches an uninterrupted
one exactly. Raw and post-processed frames are persisted as numbered PNG
files; the manifest records config, per-frame losses, timings and content
hashes.
"""

from __future__ import annotations

import hashlib
import io
import json
import os
import pickle
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np
from PIL import Image

from .config import GenerationConfig, config_hash, config_to_mapping
from .errors import CheckpointMismatchError, PipelineError, PromptvidError
from .frames import FrameState
from .guidance import ScorerHandle, embed_text, make_external_scorer, make_surrogate_scorer
from .optimize import init_first_frame, optimize_frame, temperature_to_params, warm_start
from .postprocess import DenoiserHandle, make_external_denoiser, make_identity_denoiser
from .schedule import build_layout, weights_at

CHECKPOINT_FILENAME = "checkpoint.bin"
MANIFEST_FILENAME = "manifest.json"
RAW_DIR = "raw"
POST_DIR = "post"
FRAME_PATTERN = "frame_%05d.png"

_CHECKPOINT_VERSION = 1

# RNG stream purposes; streams are keyed (seed, frame index, purpose) so no
# stage can perturb another's randomness.
_RNG_INIT = 0
_RNG_WARM = 1
_RNG_VIEWS = 2

ProgressSink = Callable[["ProgressEvent"], None]


def frame_rng(seed: int, frame_index: int, purpose: int) -> np.random.Generator:
    """Independent generator for one (frame, purpose) pair under a master seed."""
    return np.random.default_rng([seed, frame_index, purpose])


@dataclass(frozen=True)
class ProgressEvent:
    frame_index: int
    total_frames: int
    loss: float | None
    seconds: float


@dataclass
class FrameRecord:
    """Manifest entry for one generated frame."""

    index: int
    prompts: list[dict[str, float]]
    loss_initial: float | None
    loss_final: float | None
    seconds_optimize: float
    seconds_scorer: float
    seconds_denoise: float
    seconds_persist: float
    raw_sha256: str
    post_sha256: str


@dataclass
class VideoManifest:
    """Machine-readable record of a run: config echo, per-frame records, timings."""

    config: dict[str, Any]
    config_hash: str
    records: list[FrameRecord]
    total_wall_seconds: float
    optimize_wall_seconds: float
    scorer_wall_seconds: float
    denoise_wall_seconds: float
    persist_wall_seconds: float
    measured_fps_optimize: float
    measured_fps_total: float
    encoder_command: str

    @property
    def frame_count(self) -> int:
        return len(self.records)

    def to_dict(self) -> dict[str, Any]:
        payload = asdict(self)
        payload["frame_count"] = self.frame_count
        return payload

    @classmethod
    def from_dict(cls, payload: dict[str, Any]) -> "VideoManifest":
        data = dict(payload)
        data.pop("frame_count", None)
        data["records"] = [FrameRecord(**r) for r in data["records"]]
        return cls(**data)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


def load_manifest(path) -> VideoManifest:
    return VideoManifest.from_dict(json.loads(Path(path).read_text()))


@dataclass
class Checkpoint:
    """Everything needed to continue a run after the last finished frame."""

    config_hash: str
    next_index: int
    prev_pixels: np.ndarray
    records: list[FrameRecord]
    totals: dict[str, float]
    version: int = _CHECKPOINT_VERSION

    def save(self, path) -> None:
        path = Path(path)
        tmp = path.with_suffix(path.suffix + ".tmp")
        with open(tmp, "wb") as fh:
            pickle.dump(self, fh, protocol=4)
        os.replace(tmp, path)


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        checkpoint = pickle.load(fh)
    if not isinstance(checkpoint, Checkpoint) or checkpoint.version != _CHECKPOINT_VERSION:
        raise CheckpointMismatchError(f"unreadable checkpoint at {path}")
    return checkpoint


def scorer_from_config(config: GenerationConfig) -> ScorerHandle:
    if config.scorer.kind == "surrogate":
        return make_surrogate_scorer(config.seed, config.scorer.embedding_dim)
    return make_external_scorer({"path": config.scorer.path, "device": config.scorer.device})


def denoiser_from_config(config: GenerationConfig) -> DenoiserHandle:
    if config.denoiser.kind == "identity":
        return make_identity_denoiser()
    return make_external_denoiser(config.denoiser.path, config.denoiser.device)


def _save_png(pixels: np.ndarray, path: Path) -> str:
    """Write the frame as 8-bit lossless PNG; returns the file's content hash."""
    data = np.rint(pixels * 255.0).astype(np.uint8)
    # Encode in memory so the hash comes straight from the written bytes.
    # Light compression: frames are noise-like and barely compress anyway.
    buffer = io.BytesIO()
    Image.fromarray(data).save(buffer, format="PNG", compress_level=1)
    payload = buffer.getvalue()
    path.write_bytes(payload)
    return hashlib.sha256(payload).hexdigest()


def _warm_png_encoder() -> None:
    """One-time Pillow/zlib initialization, kept out of the throughput clock."""
    buffer = io.BytesIO()
    Image.fromarray(np.zeros((8, 8, 3), dtype=np.uint8)).save(buffer, format="PNG", compress_level=1)


def _zero_totals() -> dict[str, float]:
    return {"wall": 0.0, "optimize": 0.0, "scorer": 0.0, "denoise": 0.0, "persist": 0.0}


def generate(
    config: GenerationConfig,
    scorer: ScorerHandle,
    denoiser: DenoiserHandle,
    progress: ProgressSink | None = None,
) -> VideoManifest:
    """Generate every frame of the configured run from scratch.

    On any per-frame failure a PipelineError carrying the frame index is
    raised; frames completed so far and a resumable checkpoint stay on disk.
    """
    return _run(config, scorer, denoiser, progress, start=0, prev=None,
                records=[], totals=_zero_totals())


def resume(
    checkpoint: Checkpoint,
    config: GenerationConfig,
    scorer: ScorerHandle,
    denoiser: DenoiserHandle,
    progress: ProgressSink | None = None,
) -> VideoManifest:
    """Continue an interrupted run; outputs match an uninterrupted run bit-exactly."""
    expected = config_hash(config)
    if checkpoint.config_hash != expected:
        raise CheckpointMismatchError(
            "checkpoint was produced by a different configuration "
            f"(checkpoint {checkpoint.config_hash[:12]}…, config {expected[:12]}…)"
        )
    prev = None
    if checkpoint.next_index > 0:
        prev = FrameState(checkpoint.prev_pixels, checkpoint.next_index - 1)
    return _run(
        config,
        scorer,
        denoiser,
        progress,
        start=checkpoint.next_index,
        prev=prev,
        records=list(checkpoint.records),
        totals=dict(checkpoint.totals),
    )


def _run(
    config: GenerationConfig,
    scorer: ScorerHandle,
    denoiser: DenoiserHandle,
    progress: ProgressSink | None,
    start: int,
    prev: FrameState | None,
    records: list[FrameRecord],
    totals: dict[str, float],
) -> VideoManifest:
    out_dir = Path(config.output_dir)
    raw_dir = out_dir / RAW_DIR
    post_dir = out_dir / POST_DIR
    raw_dir.mkdir(parents=True, exist_ok=True)
    post_dir.mkdir(parents=True, exist_ok=True)

    track = config.track
    layout = build_layout(track)
    cfg_hash = config_hash(config)
    temp = temperature_to_params(
        config.temperature,
        noise_slope=config.warm_noise_slope,
        stability_max=config.stability_weight_max,
    )
    embeddings = [embed_text(scorer, entry.text) for entry in track.entries]
    _warm_png_encoder()

    wall_prior = totals["wall"]
    run_start = time.perf_counter()

    for t in range(start, layout.total_frames):
        try:
            weights = weights_at(track, layout, t)
            active = weights.active()
            weighted = [(embeddings[i], w) for i, w in active]

            # seconds_optimize covers producing the raw frame: initialization
            # plus the optimization loop.
            opt_start = time.perf_counter()
            if t == 0:
                init = init_first_frame(config.height, config.width, frame_rng(config.seed, 0, _RNG_INIT))
            else:
                init = warm_start(prev, temp.warm_start_noise_std, frame_rng(config.seed, t, _RNG_WARM))
            result = optimize_frame(
                init, prev, scorer, weighted, temp, config.optimizer,
                frame_rng(config.seed, t, _RNG_VIEWS),
            )
            seconds_optimize = time.perf_counter() - opt_start
            raw = result.frame

            den_start = time.perf_counter()
            post = denoiser.denoise(raw)
            seconds_denoise = time.perf_counter() - den_start

            persist_start = time.perf_counter()
            raw_hash = _save_png(raw.pixels, raw_dir / (FRAME_PATTERN % t))
            post_hash = _save_png(post.pixels, post_dir / (FRAME_PATTERN % t))
            seconds_persist = time.perf_counter() - persist_start

            record = FrameRecord(
                index=t,
                prompts=[{"index": i, "weight": w} for i, w in active],
                loss_initial=result.loss_initial,
                loss_final=result.loss_final,
                seconds_optimize=seconds_optimize,
                seconds_scorer=result.scorer_seconds,
                seconds_denoise=seconds_denoise,
                seconds_persist=seconds_persist,
                raw_sha256=raw_hash,
                post_sha256=post_hash,
            )
            records.append(record)
            totals["optimize"] += seconds_optimize
            totals["scorer"] += result.scorer_seconds
            totals["denoise"] += seconds_denoise
            totals["persist"] += seconds_persist

            # Checkpoint write time deliberately lands in the overhead bucket.
            totals["wall"] = wall_prior + (time.perf_counter() - run_start)
            Checkpoint(
                config_hash=cfg_hash,
                next_index=t + 1,
                prev_pixels=raw.pixels,
                records=list(records),
                totals=dict(totals),
            ).save(out_dir / CHECKPOINT_FILENAME)

            prev = raw
            if progress is not None:
                progress(ProgressEvent(t, layout.total_frames, record.loss_final,
                                       seconds_optimize + seconds_denoise + seconds_persist))
        except PipelineError:
            raise
        except (PromptvidError, ValueError, IndexError, OSError) as exc:
            raise PipelineError(t, str(exc)) from exc

    totals["wall"] = wall_prior + (time.perf_counter() - run_start)
    manifest = VideoManifest(
        config=config_to_mapping(config),
        config_hash=cfg_hash,
        records=records,
        total_wall_seconds=totals["wall"],
        optimize_wall_seconds=totals["optimize"],
        scorer_wall_seconds=totals["scorer"],
        denoise_wall_seconds=totals["denoise"],
        persist_wall_seconds=totals["persist"],
        measured_fps_optimize=len(records) / totals["optimize"] if totals["optimize"] > 0 else 0.0,
        measured_fps_total=len(records) / totals["wall"] if totals["wall"] > 0 else 0.0,
        encoder_command=config.encoder_command_template.format(fps=config.fps),
    )
    manifest.save(out_dir / MANIFEST_FILENAME)
    return manifest


@dataclass(frozen=True)
class ThroughputReport:
    """Wall-clock accounting of a completed run."""

    frame_count: int
    fps_optimize: float
    fps_total: float
    per_frame_seconds: list[float]
    scorer_fraction: float
    overhead_fraction: float
    breakdown: dict[str, float] = field(default_factory=dict)


def measure_throughput(manifest: VideoManifest) -> ThroughputReport:
    """Frames-per-second report for a complete manifest.

    fps is reported both against optimization time alone and against the
    full wall clock (post-processing included). Pipeline overhead is the
    wall time spent outside frame optimization (which contains all scorer
    calls) and denoising: persistence, checkpointing, orchestration.
    """
    expected = sum(p["frames"] for p in manifest.config["prompts"])
    if manifest.frame_count != expected:
        raise ValueError(
            f"manifest incomplete: {manifest.frame_count} of {expected} frames recorded"
        )
    wall = manifest.total_wall_seconds
    overhead = wall - manifest.optimize_wall_seconds - manifest.denoise_wall_seconds
    per_frame = [
        r.seconds_optimize + r.seconds_denoise + r.seconds_persist for r in manifest.records
    ]
    return ThroughputReport(
        frame_count=manifest.frame_count,
        fps_optimize=(
            manifest.frame_count / manifest.optimize_wall_seconds
            if manifest.optimize_wall_seconds > 0
            else 0.0
        ),
        fps_total=manifest.frame_count / wall if wall > 0 else 0.0,
        per_frame_seconds=per_frame,
        scorer_fraction=manifest.scorer_wall_seconds / wall if wall > 0 else 0.0,
        overhead_fraction=overhead / wall if wall > 0 else 0.0,
        breakdown={
            "optimize": manifest.optimize_wall_seconds,
            "scorer": manifest.scorer_wall_seconds,
            "denoise": manifest.denoise_wall_seconds,
            "persist": manifest.persist_wall_seconds,
            "wall": wall,
        },
    )
