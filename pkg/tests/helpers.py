"""Shared test utilities: finite-difference oracle, config builders, image IO."""

from __future__ import annotations

import numpy as np
from PIL import Image

from promptvid.config import GenerationConfig, config_from_mapping


def central_difference(f, x: np.ndarray, step: float = 1e-4) -> np.ndarray:
    """Independent gradient oracle: central finite differences over every entry."""
    grad = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        orig = x[idx]
        x[idx] = orig + step
        f_plus = f(x)
        x[idx] = orig - step
        f_minus = f(x)
        x[idx] = orig
        grad[idx] = (f_plus - f_minus) / (2.0 * step)
    return grad


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-10) -> float:
    """Largest relative disagreement, ignoring entries where both are ~zero."""
    denom = np.maximum(np.abs(analytic), np.abs(numeric))
    mask = denom > floor
    if not mask.any():
        return 0.0
    return float((np.abs(analytic - numeric)[mask] / denom[mask]).max())


def interior_frame(rng: np.random.Generator, height: int, width: int) -> np.ndarray:
    """Random pixels kept away from [0, 1] boundaries so FD probes stay valid."""
    return 0.1 + 0.8 * rng.random((height, width, 3))


def tiny_config(out_dir, **kwargs) -> GenerationConfig:
    """Small fast run: 2 prompts x 3 frames at 64x64 with few iterations."""
    data = {
        "prompts": [{"text": "a dog", "frames": 3}, {"text": "a cat", "frames": 3}],
        "width": 64,
        "height": 64,
        "seed": 0,
        "temperature": 50.0,
        "output_dir": str(out_dir),
        "optimizer": {
            "iterations_first_frame": 6,
            "iterations_per_frame": 4,
            "views": 8,
            "scorer_input_size": 64,
        },
    }
    data.update(kwargs)
    return config_from_mapping(data)


def desk_config(out_dir, *, seed: int = 0, temperature: float = 50.0, frames: int = 6) -> GenerationConfig:
    """The desk-scale reference run: 2 prompts, 64x64, default optimizer."""
    return config_from_mapping(
        {
            "prompts": [{"text": "a dog", "frames": frames}, {"text": "a cat", "frames": frames}],
            "width": 64,
            "height": 64,
            "seed": seed,
            "temperature": temperature,
            "output_dir": str(out_dir),
        }
    )


def load_png(path) -> np.ndarray:
    """Frame file back to float64 pixels in [0, 1]."""
    return np.asarray(Image.open(path), dtype=np.float64) / 255.0
