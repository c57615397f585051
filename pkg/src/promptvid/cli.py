"""Command-line front door for generation, resume, validation and reporting."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import report as report_mod
from .config import GenerationConfig, parse_config
from .errors import ConfigError, PromptvidError
from .pipeline import (
    CHECKPOINT_FILENAME,
    MANIFEST_FILENAME,
    ProgressEvent,
    denoiser_from_config,
    generate,
    load_checkpoint,
    load_manifest,
    measure_throughput,
    resume,
    scorer_from_config,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2


def _add_override_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="path to the YAML/JSON run config")
    parser.add_argument("--out", help="output directory (overrides config output_dir)")
    parser.add_argument("--seed", type=int, help="master seed override")
    parser.add_argument("--temperature", type=float, help="temperature override, 0..100")
    parser.add_argument("--width", type=int, help="frame width override")
    parser.add_argument("--height", type=int, help="frame height override")
    parser.add_argument("--fps", type=float, help="playback frame rate recorded for encoding")
    parser.add_argument("--scorer", choices=["surrogate", "external"], help="scorer kind override")
    parser.add_argument("--denoiser", choices=["identity", "external"], help="denoiser kind override")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="promptvid",
        description="Sequential text-to-video generation by direct pixel-space optimization.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="run a full generation")
    _add_override_flags(gen)
    gen.add_argument("--resume", action="store_true", help="continue from the checkpoint in the output directory")
    gen.add_argument("--validate-only", action="store_true", help="validate the config and exit without writing")

    res = sub.add_parser("resume", help="continue an interrupted generation")
    _add_override_flags(res)

    val = sub.add_parser("validate", help="validate a config without running")
    _add_override_flags(val)

    rep = sub.add_parser("report", help="render the throughput report for a finished run")
    rep.add_argument("--manifest", help=f"path to {MANIFEST_FILENAME}")
    rep.add_argument("--out", help=f"run output directory containing {MANIFEST_FILENAME}")
    rep.add_argument("--report-dir", help="where to write report.csv and figures (default: <out>/report)")
    return parser


def _overrides_from_args(args: argparse.Namespace) -> dict:
    overrides = {
        "seed": args.seed,
        "temperature": args.temperature,
        "width": args.width,
        "height": args.height,
        "fps": args.fps,
        "output_dir": args.out,
        "scorer": args.scorer,
        "denoiser": args.denoiser,
    }
    return {k: v for k, v in overrides.items() if v is not None}


def _load_config(args: argparse.Namespace) -> GenerationConfig:
    return parse_config(args.config, _overrides_from_args(args))


def _print_progress(event: ProgressEvent) -> None:
    loss = "n/a" if event.loss is None else f"{event.loss:.4f}"
    print(
        f"frame {event.frame_index + 1:>4}/{event.total_frames}  "
        f"loss {loss}  {event.seconds:.2f}s",
        flush=True,
    )


def _finish(manifest) -> int:
    print(report_mod.format_summary(measure_throughput(manifest)))
    print(f"manifest: {Path(manifest.config['output_dir']) / MANIFEST_FILENAME}")
    return EXIT_OK


def _cmd_validate(args: argparse.Namespace) -> int:
    config = _load_config(args)
    print(
        f"config OK: {config.total_frames} frames at {config.width}x{config.height}, "
        f"temperature {config.temperature:g}, scorer {config.scorer.kind}, "
        f"denoiser {config.denoiser.kind}"
    )
    return EXIT_OK


def _cmd_generate(args: argparse.Namespace) -> int:
    if getattr(args, "validate_only", False):
        return _cmd_validate(args)
    config = _load_config(args)
    scorer = scorer_from_config(config)
    denoiser = denoiser_from_config(config)
    if getattr(args, "resume", False) or args.command == "resume":
        checkpoint_path = Path(config.output_dir) / CHECKPOINT_FILENAME
        if not checkpoint_path.exists():
            print(f"no checkpoint at {checkpoint_path}", file=sys.stderr)
            return EXIT_FAILURE
        checkpoint = load_checkpoint(checkpoint_path)
        manifest = resume(checkpoint, config, scorer, denoiser, progress=_print_progress)
    else:
        manifest = generate(config, scorer, denoiser, progress=_print_progress)
    return _finish(manifest)


def _cmd_report(args: argparse.Namespace) -> int:
    if not args.manifest and not args.out:
        print("report needs --manifest or --out", file=sys.stderr)
        return EXIT_CONFIG
    manifest_path = Path(args.manifest) if args.manifest else Path(args.out) / MANIFEST_FILENAME
    if not manifest_path.exists():
        print(f"manifest not found: {manifest_path}", file=sys.stderr)
        return EXIT_FAILURE
    manifest = load_manifest(manifest_path)
    report_dir = Path(args.report_dir) if args.report_dir else manifest_path.parent / "report"
    paths = report_mod.write_report(manifest, report_dir)
    print(report_mod.format_summary(measure_throughput(manifest)))
    print(f"report table: {paths.csv}")
    print(f"figures: {paths.loss_figure}, {paths.timing_figure}")
    return EXIT_OK


def run(args: argparse.Namespace) -> int:
    """Execute a parsed invocation; returns the process exit status."""
    try:
        if args.command in ("generate", "resume"):
            return _cmd_generate(args)
        if args.command == "validate":
            return _cmd_validate(args)
        if args.command == "report":
            return _cmd_report(args)
        raise ValueError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print("configuration invalid:", file=sys.stderr)
        for problem in exc.errors:
            print(f"  - {problem}", file=sys.stderr)
        return EXIT_CONFIG
    except PromptvidError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    return run(args)


if __name__ == "__main__":
    sys.exit(main())
