"""Text-alignment guidance: augmented-view scoring of frames against prompts.

The alignment loss of a frame is

    sum_i w_i * mean_k (1 - cos(E(view_k), E(prompt_i)))

over random resized-crop views of the frame, where E is a text/image
embedding scorer. Gradients are exact derivatives through the crop/resize
operators and the scorer, which keeps the output frame resolution free
while the scorer sees a fixed input size.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import NumericError
from .frames import FrameState
from .resample import apply_separable, average_pool_matrix, bilinear_matrix

# Rec. 601 luma coefficients used by the surrogate scorer's pooling stage.
LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])

MIN_AUGMENTABLE_SIDE = 8


@dataclass(frozen=True)
class TextEmbedding:
    """Unit-norm embedding of a prompt, tagged with its source text."""

    vector: np.ndarray
    source_text: str

    def __post_init__(self) -> None:
        vector = np.asarray(self.vector, dtype=np.float64)
        object.__setattr__(self, "vector", vector)
        norm = float(np.linalg.norm(vector))
        if abs(norm - 1.0) > 1e-6:
            raise ValueError(f"text embedding must be unit norm, got {norm}")


@dataclass(frozen=True)
class AugmentationPolicy:
    """Random resized-crop recipe used for every scorer evaluation."""

    views_per_step: int = 16
    crop_scale_range: tuple[float, float] = (0.7, 0.95)
    scorer_input_size: int = 224

    def __post_init__(self) -> None:
        if self.views_per_step < 1:
            raise ValueError(f"views_per_step must be positive, got {self.views_per_step}")
        lo, hi = self.crop_scale_range
        if not (0.0 < lo <= hi <= 1.0):
            raise ValueError(f"crop_scale_range must satisfy 0 < low <= high <= 1, got {self.crop_scale_range}")
        if self.scorer_input_size < 32:
            raise ValueError(f"scorer_input_size must be >= 32, got {self.scorer_input_size}")


@dataclass(frozen=True)
class GuidanceScore:
    """Scalar loss plus its gradient with respect to the frame's pixels."""

    value: float
    gradient: np.ndarray

    def __post_init__(self) -> None:
        if not np.isfinite(self.value):
            raise ValueError(f"guidance score must be finite, got {self.value}")


@dataclass(frozen=True)
class ViewGeometry:
    """Square crop box of one augmented view."""

    top: int
    left: int
    side: int


class ScorerHandle:
    """Contract for embedding scorers.

    A scorer embeds text prompts and scores batches of fixed-size views,
    returning the weighted cosine-distance loss and its gradient with
    respect to the view pixels. Both operations must be deterministic for
    identical inputs. Handles tolerate sequential reuse; concurrent use of
    one handle is not required.
    """

    kind: str = "abstract"
    embedding_dim: int = 0

    def embed_text(self, prompt: str) -> TextEmbedding:
        raise NotImplementedError

    def embed_views(self, views: np.ndarray) -> np.ndarray:
        """Unit-norm embeddings of a (K, S, S, 3) view batch, one row per view."""
        raise NotImplementedError

    def score_views(
        self, views: np.ndarray, weighted_targets: list[tuple[TextEmbedding, float]]
    ) -> tuple[float, np.ndarray]:
        """Weighted cosine-distance loss of a view batch and its gradient w.r.t. the views."""
        raise NotImplementedError


def _cosine_loss_terms(
    z: np.ndarray, weighted_targets: list[tuple[TextEmbedding, float]]
) -> tuple[float, np.ndarray]:
    """Loss sum_i w_i * mean_k (1 - cos(z_k, t_i)) and its gradient w.r.t. z.

    z holds one pre-normalization embedding per view (row-wise).
    """
    norms = np.linalg.norm(z, axis=1, keepdims=True)
    e = z / norms
    k = z.shape[0]
    value = 0.0
    de = np.zeros_like(e)
    for emb, w in weighted_targets:
        c = e @ emb.vector
        value += w * float(np.mean(1.0 - c))
        de -= (w / k) * (emb.vector[None, :] - c[:, None] * e)
    return value, de / norms


class SurrogateScorer(ScorerHandle):
    """Deterministic differentiable stand-in for a pretrained text-image encoder.

    Image side: average-pool the view to an 8x8 luminance grid, flatten to 64
    values, apply a fixed seeded affine map to the embedding dimension, then
    L2-normalize. The map carries a constant column because a strictly linear
    map would give every uniform gray view the same normalized embedding.
    Text side: a seeded pseudorandom unit vector keyed by the prompt bytes.
    """

    kind = "surrogate"
    POOL_GRID = 8

    _PROJECTION_KEY = 0x1A6E
    _TEXT_KEY = 0x7E87

    def __init__(self, seed: int, embedding_dim: int = 128):
        if embedding_dim < 8:
            raise ValueError(f"embedding_dim must be >= 8, got {embedding_dim}")
        self.seed = int(seed)
        self.embedding_dim = int(embedding_dim)
        n_features = self.POOL_GRID * self.POOL_GRID + 1
        rng = np.random.default_rng([self.seed, self._PROJECTION_KEY])
        self.projection = rng.standard_normal((self.embedding_dim, n_features)) / np.sqrt(n_features)

    def embed_text(self, prompt: str) -> TextEmbedding:
        if not prompt:
            raise ValueError("prompt must be a nonempty string")
        digest = hashlib.sha256(prompt.encode("utf-8")).digest()
        words = [int.from_bytes(digest[i : i + 4], "big") for i in range(0, 16, 4)]
        rng = np.random.default_rng([self.seed, self._TEXT_KEY, *words])
        vector = rng.standard_normal(self.embedding_dim)
        return TextEmbedding(vector / np.linalg.norm(vector), prompt)

    def _project(self, pooled_flat: np.ndarray) -> np.ndarray:
        """Affine map from flattened pooled luminance (K, 64) to embeddings (K, D)."""
        z = pooled_flat @ self.projection[:, :-1].T
        z += self.projection[:, -1]
        return z

    def _pool_views(self, views: np.ndarray) -> np.ndarray:
        pool = average_pool_matrix(self.POOL_GRID, views.shape[1])
        lum = views @ LUMA_WEIGHTS
        pooled = np.einsum("as,kst,bt->kab", pool, lum, pool, optimize=True)
        return pooled.reshape(views.shape[0], -1)

    def embed_views(self, views: np.ndarray) -> np.ndarray:
        z = self._project(self._pool_views(views))
        return z / np.linalg.norm(z, axis=1, keepdims=True)

    def score_views(
        self, views: np.ndarray, weighted_targets: list[tuple[TextEmbedding, float]]
    ) -> tuple[float, np.ndarray]:
        k, s = views.shape[0], views.shape[1]
        pool = average_pool_matrix(self.POOL_GRID, s)
        lum = views @ LUMA_WEIGHTS
        pooled = np.einsum("as,kst,bt->kab", pool, lum, pool, optimize=True)
        z = self._project(pooled.reshape(k, -1))
        value, dz = _cosine_loss_terms(z, weighted_targets)
        dpooled = (dz @ self.projection[:, :-1]).reshape(k, self.POOL_GRID, self.POOL_GRID)
        dlum = np.einsum("as,kab,bt->kst", pool, dpooled, pool, optimize=True)
        dviews = dlum[..., None] * LUMA_WEIGHTS
        return value, dviews


def make_surrogate_scorer(seed: int, embedding_dim: int = 128) -> SurrogateScorer:
    """Build the deterministic surrogate scorer used for desk-scale runs and tests."""
    return SurrogateScorer(seed, embedding_dim)


def make_external_scorer(adapter_config) -> ScorerHandle:
    """Build a scorer backed by an externally trained text-image encoder.

    adapter_config is a mapping with a required model artifact ``path`` and
    an optional ``device`` hint. Construction fails with ScorerError when the
    artifact or the runtime it needs is unavailable.
    """
    from .encoders import PretrainedEncoderScorer

    if adapter_config is None:
        raise ValueError("adapter_config is required for an external scorer")
    path = adapter_config.get("path") if hasattr(adapter_config, "get") else getattr(adapter_config, "path", None)
    device = adapter_config.get("device") if hasattr(adapter_config, "get") else getattr(adapter_config, "device", None)
    return PretrainedEncoderScorer(path, device=device)


def embed_text(scorer: ScorerHandle, prompt: str) -> TextEmbedding:
    """Embed a prompt through the scorer; deterministic per (scorer, prompt)."""
    if not isinstance(prompt, str) or not prompt:
        raise ValueError("prompt must be a nonempty string")
    return scorer.embed_text(prompt)


def sample_view_geometries(
    height: int, width: int, policy: AugmentationPolicy, rng: np.random.Generator
) -> list[ViewGeometry]:
    """Draw the crop boxes for one scoring step; fully determined by the rng stream."""
    if min(height, width) < MIN_AUGMENTABLE_SIDE:
        raise ValueError(
            f"frame {height}x{width} is too small to augment (needs at least "
            f"{MIN_AUGMENTABLE_SIDE}x{MIN_AUGMENTABLE_SIDE})"
        )
    short = min(height, width)
    lo, hi = policy.crop_scale_range
    geoms = []
    for _ in range(policy.views_per_step):
        side = int(round(rng.uniform(lo, hi) * short))
        side = max(1, min(side, short))
        top = int(rng.integers(0, height - side + 1))
        left = int(rng.integers(0, width - side + 1))
        geoms.append(ViewGeometry(top, left, side))
    return geoms


def augment_views(
    frame: FrameState, policy: AugmentationPolicy, rng: np.random.Generator
) -> np.ndarray:
    """Materialize the random resized-crop views as a (K, S, S, 3) batch in [0, 1]."""
    geoms = sample_view_geometries(frame.height, frame.width, policy, rng)
    size = policy.scorer_input_size
    views = np.empty((len(geoms), size, size, 3))
    for i, g in enumerate(geoms):
        crop = frame.pixels[g.top : g.top + g.side, g.left : g.left + g.side]
        resize = bilinear_matrix(size, g.side)
        views[i] = apply_separable(crop, resize, resize)
    return views


@lru_cache(maxsize=512)
def _fused_pool_resize(pool_grid: int, scorer_input_size: int, side: int) -> np.ndarray:
    """Composed (pool o resize) operator: pool_grid x side, exact and cached."""
    mat = average_pool_matrix(pool_grid, scorer_input_size) @ bilinear_matrix(scorer_input_size, side)
    mat.flags.writeable = False
    return mat


def _surrogate_fused_loss(
    scorer: SurrogateScorer,
    pixels: np.ndarray,
    weighted_targets: list[tuple[TextEmbedding, float]],
    policy: AugmentationPolicy,
    geoms: list[ViewGeometry],
) -> tuple[float, np.ndarray]:
    """Surrogate loss without materializing views.

    Pooling, resizing and the luminance projection are all linear, so
    pool(resize(crop)) collapses to one small composed operator per crop
    size. Identical math to scoring materialized views, far less work.
    """
    grid = scorer.POOL_GRID
    lum = pixels @ LUMA_WEIGHTS
    pooled = np.empty((len(geoms), grid * grid))
    ops = []
    for i, g in enumerate(geoms):
        op = _fused_pool_resize(grid, policy.scorer_input_size, g.side)
        crop = lum[g.top : g.top + g.side, g.left : g.left + g.side]
        pooled[i] = (op @ crop @ op.T).ravel()
        ops.append(op)
    z = scorer._project(pooled)
    value, dz = _cosine_loss_terms(z, weighted_targets)
    dpooled = (dz @ scorer.projection[:, :-1]).reshape(len(geoms), grid, grid)
    dlum = np.zeros_like(lum)
    for g, op, dp in zip(geoms, ops, dpooled):
        dlum[g.top : g.top + g.side, g.left : g.left + g.side] += op.T @ dp @ op
    return value, dlum[:, :, None] * LUMA_WEIGHTS


def _materialized_loss(
    scorer: ScorerHandle,
    pixels: np.ndarray,
    weighted_targets: list[tuple[TextEmbedding, float]],
    policy: AugmentationPolicy,
    geoms: list[ViewGeometry],
) -> tuple[float, np.ndarray]:
    """Generic loss path: materialize views, score, backpropagate the resizes."""
    size = policy.scorer_input_size
    views = np.empty((len(geoms), size, size, 3))
    resizes = []
    for i, g in enumerate(geoms):
        crop = pixels[g.top : g.top + g.side, g.left : g.left + g.side]
        resize = bilinear_matrix(size, g.side)
        views[i] = apply_separable(crop, resize, resize)
        resizes.append(resize)
    value, dviews = scorer.score_views(views, weighted_targets)
    grad = np.zeros_like(pixels)
    for g, resize, dview in zip(geoms, resizes, dviews):
        grad[g.top : g.top + g.side, g.left : g.left + g.side] += apply_separable(
            dview, resize.T, resize.T
        )
    return value, grad


def text_loss(
    scorer: ScorerHandle,
    frame: FrameState,
    weighted_prompts: list[tuple[TextEmbedding, float]],
    policy: AugmentationPolicy,
    rng: np.random.Generator,
) -> GuidanceScore:
    """Weighted cosine-distance alignment loss of a frame and its pixel gradient.

    View geometry is drawn from the rng stream; identical streams yield
    bit-identical scores. Only prompts with nonzero weight should be passed.
    """
    if not weighted_prompts:
        raise ValueError("weighted_prompts must contain at least one entry")
    for emb, w in weighted_prompts:
        if w <= 0.0:
            raise ValueError(f"prompt weights must be positive, got {w} for {emb.source_text!r}")
    geoms = sample_view_geometries(frame.height, frame.width, policy, rng)
    if isinstance(scorer, SurrogateScorer):
        value, grad = _surrogate_fused_loss(scorer, frame.pixels, weighted_prompts, policy, geoms)
    else:
        value, grad = _materialized_loss(scorer, frame.pixels, weighted_prompts, policy, geoms)
    if not np.isfinite(value) or not np.isfinite(grad).all():
        raise NumericError(f"non-finite text loss for frame {frame.index}")
    return GuidanceScore(float(value), grad)
