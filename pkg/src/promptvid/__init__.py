"""promptvid: sequential text-to-video generation by direct pixel-space optimization.

Frames are optimized one at a time against a weighted text-alignment loss
plus a frame-to-frame stability loss, warm-starting each frame from its
predecessor. A temperature knob trades motion for stability, and a
pluggable denoiser smooths the raw optimized pixels as a post-process.
"""

from .config import (
    DenoiserSpec,
    GenerationConfig,
    ScorerSpec,
    config_from_mapping,
    config_hash,
    config_to_mapping,
    parse_config,
)
from .errors import (
    CheckpointMismatchError,
    ConfigError,
    DenoiserError,
    NumericError,
    PipelineError,
    PromptvidError,
    ScorerError,
)
from .frames import FrameState
from .guidance import (
    AugmentationPolicy,
    GuidanceScore,
    ScorerHandle,
    SurrogateScorer,
    TextEmbedding,
    augment_views,
    embed_text,
    make_external_scorer,
    make_surrogate_scorer,
    text_loss,
)
from .optimize import (
    FrameResult,
    OptimizerParams,
    TemperatureParams,
    init_first_frame,
    optimize_frame,
    stability_loss,
    temperature_to_params,
    warm_start,
)
from .pipeline import (
    Checkpoint,
    FrameRecord,
    ProgressEvent,
    ThroughputReport,
    VideoManifest,
    denoiser_from_config,
    generate,
    load_checkpoint,
    load_manifest,
    measure_throughput,
    resume,
    scorer_from_config,
)
from .postprocess import (
    DenoiserHandle,
    IdentityDenoiser,
    denoise_at_resolution,
    make_external_denoiser,
    make_identity_denoiser,
)
from .schedule import (
    PromptEntry,
    PromptTrack,
    PromptWeights,
    SegmentLayout,
    build_layout,
    weights_at,
)

__version__ = "0.1.0"

__all__ = [
    "AugmentationPolicy",
    "Checkpoint",
    "CheckpointMismatchError",
    "ConfigError",
    "DenoiserError",
    "DenoiserHandle",
    "DenoiserSpec",
    "FrameRecord",
    "FrameResult",
    "FrameState",
    "GenerationConfig",
    "GuidanceScore",
    "IdentityDenoiser",
    "NumericError",
    "OptimizerParams",
    "PipelineError",
    "ProgressEvent",
    "PromptEntry",
    "PromptTrack",
    "PromptWeights",
    "PromptvidError",
    "ScorerError",
    "ScorerHandle",
    "ScorerSpec",
    "SegmentLayout",
    "SurrogateScorer",
    "TemperatureParams",
    "TextEmbedding",
    "ThroughputReport",
    "VideoManifest",
    "augment_views",
    "build_layout",
    "config_from_mapping",
    "config_hash",
    "config_to_mapping",
    "denoise_at_resolution",
    "denoiser_from_config",
    "embed_text",
    "generate",
    "init_first_frame",
    "load_checkpoint",
    "load_manifest",
    "make_external_denoiser",
    "make_external_scorer",
    "make_identity_denoiser",
    "make_surrogate_scorer",
    "measure_throughput",
    "optimize_frame",
    "parse_config",
    "resume",
    "scorer_from_config",
    "stability_loss",
    "temperature_to_params",
    "text_loss",
    "warm_start",
    "weights_at",
]
