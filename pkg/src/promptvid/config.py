"""Run configuration: schema, defaults, file loading and override merging.

A minimal config is just a prompt list; every other knob has a default.
Validation collects every violation before failing so a user sees all
problems at once.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

from .errors import ConfigError
from .guidance import AugmentationPolicy
from .optimize import DEFAULT_NOISE_SLOPE, DEFAULT_STABILITY_MAX, OptimizerParams
from .schedule import PromptEntry, PromptTrack

logger = logging.getLogger(__name__)

# Output height beyond which generation is allowed but warned about: content
# quality degrades well before memory does.
SOFT_MAX_HEIGHT = 720

DEFAULT_ENCODER_COMMAND = (
    "ffmpeg -framerate {fps} -i post/frame_%05d.png -pix_fmt yuv420p -y video.mp4"
)

_TOP_LEVEL_KEYS = {
    "prompts",
    "temperature",
    "width",
    "height",
    "fps",
    "seed",
    "output_dir",
    "optimizer",
    "scorer",
    "denoiser",
    "warm_noise_slope",
    "stability_weight_max",
    "encoder_command_template",
}
_OPTIMIZER_KEYS = {
    "iterations_first_frame",
    "iterations_per_frame",
    "step_size",
    "views",
    "crop_scale",
    "scorer_input_size",
}
_SCORER_KEYS = {"kind", "path", "device", "embedding_dim"}
_DENOISER_KEYS = {"kind", "path", "device"}

OVERRIDE_KEYS = {
    "seed",
    "temperature",
    "width",
    "height",
    "fps",
    "output_dir",
    "scorer",
    "denoiser",
}


@dataclass(frozen=True)
class ScorerSpec:
    kind: str = "surrogate"
    path: str | None = None
    device: str | None = None
    embedding_dim: int = 128


@dataclass(frozen=True)
class DenoiserSpec:
    kind: str = "identity"
    path: str | None = None
    device: str | None = None


@dataclass(frozen=True)
class GenerationConfig:
    """Full description of one generation run."""

    track: PromptTrack
    width: int = 256
    height: int = 256
    fps: float = 12.0
    temperature: float = 50.0
    seed: int = 0
    optimizer: OptimizerParams = field(default_factory=OptimizerParams)
    scorer: ScorerSpec = field(default_factory=ScorerSpec)
    denoiser: DenoiserSpec = field(default_factory=DenoiserSpec)
    output_dir: str = "out"
    warm_noise_slope: float = DEFAULT_NOISE_SLOPE
    stability_weight_max: float = DEFAULT_STABILITY_MAX
    encoder_command_template: str = DEFAULT_ENCODER_COMMAND

    @property
    def total_frames(self) -> int:
        return self.track.total_frames


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _is_number(value: Any) -> bool:
    return (isinstance(value, (int, float)) and not isinstance(value, bool))


def config_from_mapping(data: Mapping[str, Any]) -> GenerationConfig:
    """Validate a raw mapping and build the typed config.

    Raises ConfigError carrying every violation found, not just the first.
    """
    errors: list[str] = []
    if not isinstance(data, Mapping):
        raise ConfigError(["config must be a mapping"])

    for key in data:
        if key not in _TOP_LEVEL_KEYS:
            errors.append(f"unknown config key: {key!r}")

    # prompts
    entries: list[PromptEntry] = []
    prompts = data.get("prompts")
    if not isinstance(prompts, list) or not prompts:
        errors.append("prompts: must be a nonempty list of {text, frames} entries")
    else:
        for i, item in enumerate(prompts):
            if not isinstance(item, Mapping) or set(item) - {"text", "frames"}:
                errors.append(f"prompts[{i}]: must be a mapping with keys text and frames")
                continue
            text, frames = item.get("text"), item.get("frames")
            ok = True
            if not isinstance(text, str) or not text:
                errors.append(f"prompts[{i}].text: must be a nonempty string")
                ok = False
            if not _is_int(frames) or frames < 1:
                errors.append(f"prompts[{i}].frames: must be a positive integer, got {frames!r}")
                ok = False
            if ok:
                entries.append(PromptEntry(text, frames))

    def number(key: str, default, low=None, high=None, positive=False):
        value = data.get(key, default)
        if not _is_number(value):
            errors.append(f"{key}: must be a number, got {value!r}")
            return default
        value = float(value)
        if positive and value <= 0:
            errors.append(f"{key}: must be positive, got {value}")
            return default
        if low is not None and high is not None and not low <= value <= high:
            errors.append(f"{key}: must lie in [{low}, {high}], got {value}")
            return default
        if low is not None and high is None and value < low:
            errors.append(f"{key}: must be >= {low}, got {value}")
            return default
        return value

    def integer(key: str, default, minimum):
        value = data.get(key, default)
        if not _is_int(value) or value < minimum:
            errors.append(f"{key}: must be an integer >= {minimum}, got {value!r}")
            return default
        return value

    width = integer("width", 256, 1)
    height = integer("height", 256, 1)
    fps = number("fps", 12.0, positive=True)
    temperature = number("temperature", 50.0, low=0.0, high=100.0)
    seed = integer("seed", 0, 0)
    warm_noise_slope = number("warm_noise_slope", DEFAULT_NOISE_SLOPE, low=0.0)
    stability_weight_max = number("stability_weight_max", DEFAULT_STABILITY_MAX, low=0.0)

    output_dir = data.get("output_dir", "out")
    if not isinstance(output_dir, str) or not output_dir:
        errors.append(f"output_dir: must be a nonempty string, got {output_dir!r}")
        output_dir = "out"
    encoder_command = data.get("encoder_command_template", DEFAULT_ENCODER_COMMAND)
    if not isinstance(encoder_command, str):
        errors.append("encoder_command_template: must be a string")
        encoder_command = DEFAULT_ENCODER_COMMAND

    # optimizer block
    opt = data.get("optimizer", {})
    opt_kwargs: dict[str, Any] = {}
    aug_kwargs: dict[str, Any] = {}
    if not isinstance(opt, Mapping):
        errors.append("optimizer: must be a mapping")
    else:
        for key in opt:
            if key not in _OPTIMIZER_KEYS:
                errors.append(f"optimizer.{key}: unknown key")
        for key in ("iterations_first_frame", "iterations_per_frame"):
            if key in opt:
                if not _is_int(opt[key]) or opt[key] < 0:
                    errors.append(f"optimizer.{key}: must be a nonnegative integer, got {opt[key]!r}")
                else:
                    opt_kwargs[key] = opt[key]
        if "step_size" in opt:
            if not _is_number(opt["step_size"]) or opt["step_size"] <= 0:
                errors.append(f"optimizer.step_size: must be positive, got {opt['step_size']!r}")
            else:
                opt_kwargs["step_size"] = float(opt["step_size"])
        if "views" in opt:
            if not _is_int(opt["views"]) or opt["views"] < 1:
                errors.append(f"optimizer.views: must be a positive integer, got {opt['views']!r}")
            else:
                aug_kwargs["views_per_step"] = opt["views"]
        if "crop_scale" in opt:
            cs = opt["crop_scale"]
            if (
                not isinstance(cs, (list, tuple))
                or len(cs) != 2
                or not all(_is_number(v) for v in cs)
                or not 0.0 < float(cs[0]) <= float(cs[1]) <= 1.0
            ):
                errors.append(f"optimizer.crop_scale: must be [low, high] with 0 < low <= high <= 1, got {cs!r}")
            else:
                aug_kwargs["crop_scale_range"] = (float(cs[0]), float(cs[1]))
        if "scorer_input_size" in opt:
            if not _is_int(opt["scorer_input_size"]) or opt["scorer_input_size"] < 32:
                errors.append(
                    f"optimizer.scorer_input_size: must be an integer >= 32, got {opt['scorer_input_size']!r}"
                )
            else:
                aug_kwargs["scorer_input_size"] = opt["scorer_input_size"]

    # scorer / denoiser blocks
    scorer_raw = data.get("scorer", {})
    scorer_kwargs: dict[str, Any] = {}
    if not isinstance(scorer_raw, Mapping):
        errors.append("scorer: must be a mapping")
    else:
        for key in scorer_raw:
            if key not in _SCORER_KEYS:
                errors.append(f"scorer.{key}: unknown key")
        kind = scorer_raw.get("kind", "surrogate")
        if kind not in ("surrogate", "external"):
            errors.append(f"scorer.kind: must be 'surrogate' or 'external', got {kind!r}")
        else:
            scorer_kwargs["kind"] = kind
            if kind == "external" and not scorer_raw.get("path"):
                errors.append("scorer.path: required when scorer.kind is 'external'")
        if "path" in scorer_raw and scorer_raw["path"] is not None:
            scorer_kwargs["path"] = str(scorer_raw["path"])
        if "device" in scorer_raw and scorer_raw["device"] is not None:
            scorer_kwargs["device"] = str(scorer_raw["device"])
        if "embedding_dim" in scorer_raw:
            if not _is_int(scorer_raw["embedding_dim"]) or scorer_raw["embedding_dim"] < 8:
                errors.append(
                    f"scorer.embedding_dim: must be an integer >= 8, got {scorer_raw['embedding_dim']!r}"
                )
            else:
                scorer_kwargs["embedding_dim"] = scorer_raw["embedding_dim"]

    denoiser_raw = data.get("denoiser", {})
    denoiser_kwargs: dict[str, Any] = {}
    if not isinstance(denoiser_raw, Mapping):
        errors.append("denoiser: must be a mapping")
    else:
        for key in denoiser_raw:
            if key not in _DENOISER_KEYS:
                errors.append(f"denoiser.{key}: unknown key")
        kind = denoiser_raw.get("kind", "identity")
        if kind not in ("identity", "external"):
            errors.append(f"denoiser.kind: must be 'identity' or 'external', got {kind!r}")
        else:
            denoiser_kwargs["kind"] = kind
            if kind == "external" and not denoiser_raw.get("path"):
                errors.append("denoiser.path: required when denoiser.kind is 'external'")
        if "path" in denoiser_raw and denoiser_raw["path"] is not None:
            denoiser_kwargs["path"] = str(denoiser_raw["path"])
        if "device" in denoiser_raw and denoiser_raw["device"] is not None:
            denoiser_kwargs["device"] = str(denoiser_raw["device"])

    if errors:
        raise ConfigError(errors)

    if height > SOFT_MAX_HEIGHT:
        logger.warning(
            "height %d exceeds %d vertical pixels; generation proceeds but quality "
            "typically degrades at such resolutions",
            height,
            SOFT_MAX_HEIGHT,
        )

    return GenerationConfig(
        track=PromptTrack(tuple(entries)),
        width=width,
        height=height,
        fps=fps,
        temperature=temperature,
        seed=seed,
        optimizer=OptimizerParams(augmentation=AugmentationPolicy(**aug_kwargs), **opt_kwargs),
        scorer=ScorerSpec(**scorer_kwargs),
        denoiser=DenoiserSpec(**denoiser_kwargs),
        output_dir=output_dir,
        warm_noise_slope=warm_noise_slope,
        stability_weight_max=stability_weight_max,
        encoder_command_template=encoder_command,
    )


def config_to_mapping(config: GenerationConfig) -> dict[str, Any]:
    """Plain-types echo of the effective config (manifest embedding, hashing)."""
    return {
        "prompts": [{"text": e.text, "frames": e.frames} for e in config.track.entries],
        "temperature": config.temperature,
        "width": config.width,
        "height": config.height,
        "fps": config.fps,
        "seed": config.seed,
        "optimizer": {
            "iterations_first_frame": config.optimizer.iterations_first_frame,
            "iterations_per_frame": config.optimizer.iterations_per_frame,
            "step_size": config.optimizer.step_size,
            "views": config.optimizer.augmentation.views_per_step,
            "crop_scale": list(config.optimizer.augmentation.crop_scale_range),
            "scorer_input_size": config.optimizer.augmentation.scorer_input_size,
        },
        "scorer": {
            "kind": config.scorer.kind,
            "path": config.scorer.path,
            "device": config.scorer.device,
            "embedding_dim": config.scorer.embedding_dim,
        },
        "denoiser": {
            "kind": config.denoiser.kind,
            "path": config.denoiser.path,
            "device": config.denoiser.device,
        },
        "output_dir": config.output_dir,
        "warm_noise_slope": config.warm_noise_slope,
        "stability_weight_max": config.stability_weight_max,
        "encoder_command_template": config.encoder_command_template,
    }


def config_hash(config: GenerationConfig) -> str:
    """Content hash of everything that affects generated pixels.

    The output directory is excluded so a moved run can still be resumed.
    """
    payload = config_to_mapping(config)
    payload.pop("output_dir")
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def apply_overrides(data: dict[str, Any], overrides: Mapping[str, Any]) -> dict[str, Any]:
    """Merge CLI-style overrides into a raw config mapping; overrides win."""
    merged = dict(data)
    unknown = set(overrides) - OVERRIDE_KEYS
    if unknown:
        raise ConfigError([f"unknown override: {k!r}" for k in sorted(unknown)])
    for key, value in overrides.items():
        if value is None:
            continue
        if key == "scorer":
            block = dict(merged.get("scorer") or {})
            block["kind"] = value
            merged["scorer"] = block
        elif key == "denoiser":
            block = dict(merged.get("denoiser") or {})
            block["kind"] = value
            merged["denoiser"] = block
        else:
            merged[key] = value
    return merged


def parse_config(path, overrides: Mapping[str, Any] | None = None) -> GenerationConfig:
    """Load a YAML/JSON config file, merge overrides, validate, apply defaults."""
    file_path = Path(path)
    if not file_path.exists():
        raise ConfigError([f"config file not found: {file_path}"])
    try:
        data = yaml.safe_load(file_path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError([f"config file does not parse: {exc}"]) from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(["config file must contain a mapping at the top level"])
    if overrides:
        data = apply_overrides(data, overrides)
    return config_from_mapping(data)
