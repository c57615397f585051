"""Adapter around an externally trained text-image encoder (CLIP-style).

Only imported when an external scorer is requested; torch and transformers
stay optional dependencies. The adapter owns input normalization and must
expose gradients of the scoring loss with respect to the view pixels.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from .errors import ScorerError
from .guidance import ScorerHandle, TextEmbedding

DEVICE_ENV_VAR = "PROMPTVID_DEVICE"

# Standard CLIP training statistics; the surrogate needs none of this.
_IMAGE_MEAN = (0.48145466, 0.4578275, 0.40821073)
_IMAGE_STD = (0.26862954, 0.26130258, 0.27577711)


class PretrainedEncoderScorer(ScorerHandle):
    """Scores views through a locally stored pretrained dual encoder.

    Expects a directory loadable by transformers' CLIP classes (config,
    weights, tokenizer files). Views arrive as (K, S, S, 3) grids in [0, 1]
    with S matching the encoder's expected input resolution.
    """

    kind = "external"

    def __init__(self, model_path, device: str | None = None):
        if not model_path:
            raise ScorerError("external scorer needs a model artifact path")
        path = Path(model_path)
        if not path.exists():
            raise ScorerError(f"model artifact not found: {path}")
        try:
            import torch
            from transformers import CLIPModel, CLIPTokenizer
        except ImportError as exc:
            raise ScorerError(
                f"external scorer needs torch and transformers installed: {exc}"
            ) from exc
        self._torch = torch
        self.device = device or os.environ.get(DEVICE_ENV_VAR) or "cpu"
        try:
            self._model = CLIPModel.from_pretrained(str(path), local_files_only=True)
            self._tokenizer = CLIPTokenizer.from_pretrained(str(path), local_files_only=True)
        except Exception as exc:
            raise ScorerError(f"could not load encoder from {path}: {exc}") from exc
        try:
            self._model.to(self.device)
        except Exception as exc:
            raise ScorerError(f"unsupported device {self.device!r}: {exc}") from exc
        self._model.eval()
        self.embedding_dim = int(self._model.config.projection_dim)
        self._mean = torch.tensor(_IMAGE_MEAN, device=self.device).view(1, 3, 1, 1)
        self._std = torch.tensor(_IMAGE_STD, device=self.device).view(1, 3, 1, 1)

    def embed_text(self, prompt: str) -> TextEmbedding:
        if not prompt:
            raise ValueError("prompt must be a nonempty string")
        torch = self._torch
        tokens = self._tokenizer([prompt], padding=True, return_tensors="pt").to(self.device)
        with torch.no_grad():
            features = self._model.get_text_features(**tokens)[0]
        vector = features.double().cpu().numpy()
        return TextEmbedding(vector / np.linalg.norm(vector), prompt)

    def _image_features(self, batch):
        pixel_values = (batch - self._mean) / self._std
        features = self._model.get_image_features(pixel_values=pixel_values)
        return features / features.norm(dim=-1, keepdim=True)

    def embed_views(self, views: np.ndarray) -> np.ndarray:
        torch = self._torch
        batch = torch.from_numpy(np.ascontiguousarray(views, dtype=np.float32))
        batch = batch.permute(0, 3, 1, 2).to(self.device)
        with torch.no_grad():
            features = self._image_features(batch)
        return features.double().cpu().numpy()

    def score_views(
        self, views: np.ndarray, weighted_targets: list[tuple[TextEmbedding, float]]
    ) -> tuple[float, np.ndarray]:
        torch = self._torch
        batch = torch.from_numpy(np.ascontiguousarray(views, dtype=np.float32))
        batch = batch.permute(0, 3, 1, 2).to(self.device).requires_grad_(True)
        embeddings = self._image_features(batch)
        k = embeddings.shape[0]
        loss = embeddings.new_zeros(())
        for emb, w in weighted_targets:
            target = torch.from_numpy(emb.vector).to(dtype=embeddings.dtype, device=self.device)
            loss = loss + w * (1.0 - embeddings @ target).mean()
        loss.backward()
        grad = batch.grad.detach().permute(0, 2, 3, 1).double().cpu().numpy()
        return float(loss.item()), grad


__all__ = ["PretrainedEncoderScorer", "DEVICE_ENV_VAR"]
