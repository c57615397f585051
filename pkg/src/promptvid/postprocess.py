"""Denoising post-process behind a pluggable adapter.

The optimization stage produces semantically aligned but noisy pixels; a
separately trained image-to-image translator smooths them as a strictly
post-processing step. The raw frame is never modified: warm-starting of the
next frame always reads the raw pixels.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from .errors import DenoiserError
from .frames import FrameState
from .resample import resize_bilinear

MIN_DENOISE_HEIGHT = 32


class DenoiserHandle:
    """Contract for frame denoisers: (H, W, 3) grids in [0, 1] in, same shape out."""

    kind: str = "abstract"
    expected_input_note: str = ""

    def denoise(self, frame: FrameState) -> FrameState:
        raise NotImplementedError


class IdentityDenoiser(DenoiserHandle):
    """Fallback used when no trained translator artifact is supplied."""

    kind = "identity"
    expected_input_note = "any (H, W, 3) grid in [0, 1]; returned unchanged"

    def denoise(self, frame: FrameState) -> FrameState:
        return FrameState(frame.pixels.copy(), frame.index)


class TorchScriptDenoiser(DenoiserHandle):
    """Externally trained image-to-image translator loaded as a TorchScript module.

    The module maps a (1, 3, H, W) batch in [-1, 1] to the same shape; the
    adapter owns the range conversion and clamps the output back to [0, 1].
    """

    kind = "external"
    expected_input_note = (
        "TorchScript image-to-image module, (1, 3, H, W) in [-1, 1] -> same shape"
    )

    def __init__(self, weights_path, device: str | None = None):
        if not weights_path:
            raise DenoiserError("external denoiser needs a weights path")
        path = Path(weights_path)
        if not path.exists():
            raise DenoiserError(f"denoiser weights not found: {path}")
        try:
            import torch
        except ImportError as exc:
            raise DenoiserError(f"external denoiser needs torch installed: {exc}") from exc
        self._torch = torch
        self.device = device or os.environ.get("PROMPTVID_DEVICE") or "cpu"
        try:
            self._module = torch.jit.load(str(path), map_location=self.device)
        except Exception as exc:
            raise DenoiserError(f"could not load denoiser weights from {path}: {exc}") from exc
        self._module.eval()

    def denoise(self, frame: FrameState) -> FrameState:
        torch = self._torch
        x = torch.from_numpy(np.ascontiguousarray(frame.pixels, dtype=np.float32))
        x = x.permute(2, 0, 1)[None].to(self.device) * 2.0 - 1.0
        with torch.no_grad():
            y = self._module(x)
        out = ((y.clamp(-1.0, 1.0) + 1.0) / 2.0)[0].permute(1, 2, 0).cpu().double().numpy()
        return FrameState(np.clip(out, 0.0, 1.0), frame.index)


def make_identity_denoiser() -> IdentityDenoiser:
    return IdentityDenoiser()


def make_external_denoiser(weights_path, device: str | None = None) -> TorchScriptDenoiser:
    return TorchScriptDenoiser(weights_path, device=device)


def denoise_at_resolution(
    handle: DenoiserHandle, frame: FrameState, target_height: int
) -> FrameState:
    """Resize a frame to target_height (aspect preserved, bilinear), then denoise.

    Lets one raw frame be post-processed at several working resolutions; the
    result stays at the target resolution.
    """
    if target_height < MIN_DENOISE_HEIGHT:
        raise ValueError(
            f"target height must be >= {MIN_DENOISE_HEIGHT}, got {target_height}"
        )
    h, w = frame.height, frame.width
    if target_height == h:
        resized = frame
    else:
        target_width = max(1, round(w * target_height / h))
        resized = FrameState(
            np.clip(resize_bilinear(frame.pixels, target_height, target_width), 0.0, 1.0),
            frame.index,
        )
    return handle.denoise(resized)
