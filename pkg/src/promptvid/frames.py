"""Frame pixel state shared across guidance, optimization and post-processing."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class FrameState:
    """One frame: an (H, W, 3) float grid in [0, 1] plus its global index."""

    pixels: np.ndarray
    index: int

    def __post_init__(self) -> None:
        pixels = np.asarray(self.pixels, dtype=np.float64)
        object.__setattr__(self, "pixels", pixels)
        if pixels.ndim != 3 or pixels.shape[2] != 3:
            raise ValueError(f"frame must be (H, W, 3), got shape {pixels.shape}")
        if pixels.shape[0] < 1 or pixels.shape[1] < 1:
            raise ValueError(f"frame must be nonempty, got shape {pixels.shape}")
        if not np.isfinite(pixels).all():
            raise ValueError("frame contains non-finite values")
        if pixels.min() < 0.0 or pixels.max() > 1.0:
            raise ValueError("frame values must lie in [0, 1]")
        if self.index < 0:
            raise ValueError(f"frame index must be nonnegative, got {self.index}")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]
