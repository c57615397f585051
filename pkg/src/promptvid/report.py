"""Render a run manifest into a delimited table and diagnostic figures.

Produces report.csv (one row per frame) alongside two PNG figures: the
per-frame loss descent and the per-frame wall-time breakdown.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .pipeline import ThroughputReport, VideoManifest, measure_throughput

CSV_FIELDS = [
    "index",
    "prompts",
    "loss_initial",
    "loss_final",
    "seconds_optimize",
    "seconds_scorer",
    "seconds_denoise",
    "seconds_persist",
    "raw_sha256",
    "post_sha256",
]


@dataclass(frozen=True)
class ReportPaths:
    csv: Path
    loss_figure: Path
    timing_figure: Path


def _prompt_label(record_prompts: list[dict[str, float]], prompt_texts: list[str]) -> str:
    parts = [f"{prompt_texts[int(p['index'])]}:{p['weight']:.3f}" for p in record_prompts]
    return " + ".join(parts)


def write_csv(manifest: VideoManifest, path: Path) -> None:
    prompt_texts = [p["text"] for p in manifest.config["prompts"]]
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        writer.writeheader()
        for r in manifest.records:
            writer.writerow(
                {
                    "index": r.index,
                    "prompts": _prompt_label(r.prompts, prompt_texts),
                    "loss_initial": "" if r.loss_initial is None else f"{r.loss_initial:.6f}",
                    "loss_final": "" if r.loss_final is None else f"{r.loss_final:.6f}",
                    "seconds_optimize": f"{r.seconds_optimize:.4f}",
                    "seconds_scorer": f"{r.seconds_scorer:.4f}",
                    "seconds_denoise": f"{r.seconds_denoise:.4f}",
                    "seconds_persist": f"{r.seconds_persist:.4f}",
                    "raw_sha256": r.raw_sha256,
                    "post_sha256": r.post_sha256,
                }
            )


def plot_losses(manifest: VideoManifest, path: Path) -> None:
    scored = [r for r in manifest.records if r.loss_final is not None]
    idx = [r.index for r in scored]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(idx, [r.loss_initial for r in scored], "o--", label="initial", color="tab:gray")
    ax.plot(idx, [r.loss_final for r in scored], "o-", label="final", color="tab:blue")
    ax.set_xlabel("frame index")
    ax.set_ylabel("total loss")
    ax.set_title("Per-frame loss descent")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_timings(manifest: VideoManifest, path: Path) -> None:
    idx = [r.index for r in manifest.records]
    optimize = [r.seconds_optimize for r in manifest.records]
    scorer = [r.seconds_scorer for r in manifest.records]
    denoise = [r.seconds_denoise for r in manifest.records]
    persist = [r.seconds_persist for r in manifest.records]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.bar(idx, optimize, label="optimize", color="tab:blue")
    ax.bar(idx, denoise, bottom=optimize, label="denoise", color="tab:orange")
    bottom = [o + d for o, d in zip(optimize, denoise)]
    ax.bar(idx, persist, bottom=bottom, label="persist", color="tab:green")
    ax.plot(idx, scorer, "k.--", label="scorer calls (within optimize)")
    ax.set_xlabel("frame index")
    ax.set_ylabel("seconds")
    ax.set_title("Per-frame wall time")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_report(manifest: VideoManifest, out_dir) -> ReportPaths:
    """Write report.csv plus the loss and timing figures into out_dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = ReportPaths(out / "report.csv", out / "losses.png", out / "timings.png")
    write_csv(manifest, paths.csv)
    plot_losses(manifest, paths.loss_figure)
    plot_timings(manifest, paths.timing_figure)
    return paths


def format_summary(report: ThroughputReport) -> str:
    """Human-readable throughput summary printed by the CLI."""
    lines = [
        f"frames generated: {report.frame_count}",
        f"fps (optimization only): {report.fps_optimize:.3f}",
        f"fps (wall clock, post-processing included): {report.fps_total:.3f}",
        f"time inside scorer calls: {report.scorer_fraction * 100.0:.1f}% of wall",
        f"pipeline overhead: {report.overhead_fraction * 100.0:.1f}% of wall",
    ]
    return "\n".join(lines)


def summarize(manifest: VideoManifest) -> str:
    return format_summary(measure_throughput(manifest))
